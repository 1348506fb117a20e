//! Support code for the `arrpot` binary: deterministic random families,
//! report structures, exit-code mapping, and text rendering.

use arrpot::rat::{parse_rat, rat_to_string};
use arrpot::{AlgebraContext, ArrangementFamily, CheckResult, Error, Rat, RatMatrix};
use num::BigInt;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Exit codes: 0 success, 1 identity failure, 2 malformed input,
/// 3 base point on the discriminant, 4 balanced weights.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Malformed(_) | Error::LogPresent => 2,
        Error::Discriminant(_) | Error::Pole(_) => 3,
        Error::Balanced(_) => 4,
    }
}

/// Parses a comma-separated base point with exactly `n` coordinates.
pub fn parse_point(text: &str, n: usize) -> Result<Vec<Rat>, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != n {
        return Err(Error::Malformed(format!(
            "base point must have {n} coordinates, got {}",
            parts.len()
        )));
    }
    parts.into_iter().map(parse_rat).collect()
}

pub fn rat_strings(v: &[Rat]) -> Vec<String> {
    v.iter().map(rat_to_string).collect()
}

pub fn matrix_strings(m: &RatMatrix) -> Vec<Vec<String>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| rat_to_string(m.at(i, j))).collect())
        .collect()
}

/// Dimensions of the t-th random trial: k cycles through 1, 2, 3 and n
/// stays small enough to keep k = 3 affordable (one n = 6 family per run,
/// otherwise n alternates between 4 and 5).
pub fn trial_dims(t: usize) -> (usize, usize) {
    let k = t % 3 + 1;
    let n = match k {
        3 => {
            if t == 2 {
                6
            } else {
                4 + t % 2
            }
        }
        _ => k + 1 + t % 4,
    };
    (k, n)
}

/// Draws an essential family with integer coefficient matrix, nonzero
/// weights, and an integer base point off the discriminant. The same seed
/// always produces the same family.
pub fn random_family(
    seed: u64,
    k: usize,
    n: usize,
    signed_weights: bool,
) -> Result<(ArrangementFamily, Vec<Rat>), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let as_rat = |v: i64| Rat::from_integer(BigInt::from(v));
    for _ in 0..1000 {
        let mut cols: Vec<Vec<Rat>> = Vec::with_capacity(n);
        for _ in 0..n {
            loop {
                let col: Vec<i64> = (0..k).map(|_| rng.gen_range(-3..=3)).collect();
                if col.iter().any(|&c| c != 0) {
                    cols.push(col.into_iter().map(as_rat).collect());
                    break;
                }
            }
        }
        let b = RatMatrix::from_cols(cols);
        if b.rank() < k {
            continue;
        }
        let weights: Vec<Rat> = (0..n)
            .map(|_| {
                let num = rng.gen_range(1..=6);
                let den = rng.gen_range(1..=3);
                let sign = if signed_weights && rng.gen_range(0..2) == 1 { -1 } else { 1 };
                Rat::new(BigInt::from(sign * num), BigInt::from(den))
            })
            .collect();
        let arr = ArrangementFamily::new(k, n, b, weights, None)
            .map_err(|e| format!("sampled family rejected: {e}"))?;
        for _ in 0..1000 {
            let z: Vec<Rat> = (0..n).map(|_| as_rat(rng.gen_range(-9..=9))).collect();
            if arr.discriminant_witness(&z).is_none() {
                return Ok((arr, z));
            }
        }
        return Err(format!(
            "no integer base point off the discriminant found for seed {seed} (k = {k}, n = {n})"
        ));
    }
    Err(format!("no essential coefficient matrix found for seed {seed} (k = {k}, n = {n})"))
}

#[derive(Serialize)]
pub struct ValidateReport {
    pub command: String,
    pub k: usize,
    pub n: usize,
    pub labels: Vec<String>,
    pub weights: Vec<String>,
    pub unbalanced: bool,
    pub circuits: Vec<Vec<usize>>,
    pub sing_dimension: usize,
    pub elementary_tuples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub in_discriminant: Option<bool>,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Serialize)]
pub struct TupleReport {
    pub blocks: Vec<Vec<usize>>,
    pub r#type: Vec<usize>,
    pub weight_levels: Vec<String>,
    pub weight_total: String,
}

#[derive(Serialize)]
pub struct ElementaryReport {
    pub command: String,
    pub tuples: Vec<TupleReport>,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Serialize)]
pub struct PotentialReport {
    pub command: String,
    pub kind: String,
    pub latex: String,
    pub sexpr: String,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Serialize)]
pub struct GramReport {
    pub command: String,
    pub z: Vec<String>,
    pub mu: usize,
    pub basis: Vec<Vec<usize>>,
    pub gram: Vec<Vec<String>>,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Serialize)]
pub struct MultopReport {
    pub command: String,
    pub j: usize,
    pub z: Vec<String>,
    pub mu: usize,
    pub basis: Vec<Vec<usize>>,
    pub matrix: Vec<Vec<String>>,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

#[derive(Serialize)]
pub struct FamilyReport {
    pub source: String,
    pub k: usize,
    pub n: usize,
    pub weights: Vec<String>,
    pub z: Vec<String>,
    pub mu: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

#[derive(Serialize)]
pub struct SkipRecord {
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    pub n: usize,
    pub weights: Vec<String>,
    pub reason: String,
}

#[derive(Serialize, Default)]
pub struct Counters {
    pub families: usize,
    pub checks: usize,
    pub comparisons: usize,
    pub failures: usize,
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub command: String,
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    pub families: Vec<FamilyReport>,
    pub skipped: Vec<SkipRecord>,
    pub counters: Counters,
    pub passed: bool,
    #[serde(skip)]
    pub elapsed_ms: u128,
}

impl VerifyReport {
    pub fn tally(&mut self) {
        for f in &self.families {
            self.counters.families += 1;
            for c in &f.checks {
                self.counters.checks += 1;
                self.counters.comparisons += c.instances;
                self.counters.failures += c.failures.len();
            }
        }
        self.passed = self.counters.failures == 0;
    }
}

pub fn family_report(
    source: String,
    arr: &ArrangementFamily,
    z: &[Rat],
    mu: usize,
    checks: Vec<CheckResult>,
) -> FamilyReport {
    let passed = checks.iter().all(|c| c.passed());
    FamilyReport {
        source,
        k: arr.k(),
        n: arr.n(),
        weights: rat_strings(arr.weights()),
        z: rat_strings(z),
        mu,
        checks,
        passed,
    }
}

/// One finished random trial: a verified family or a recorded skip.
pub enum TrialOutcome {
    Family(Box<FamilyReport>),
    Skip(SkipRecord),
}

fn run_one_trial(
    trial: usize,
    seed: u64,
    k: usize,
    n: usize,
    signed_weights: bool,
) -> Result<TrialOutcome, Error> {
    let (arr, z) = random_family(seed, k, n, signed_weights).map_err(Error::Malformed)?;
    match AlgebraContext::new(&arr, &z) {
        Ok(ctx) => {
            let checks = ctx.verify_suite();
            let mu = ctx.mu();
            Ok(TrialOutcome::Family(Box::new(family_report(
                format!("trial {trial} (seed {seed})"),
                &arr,
                &z,
                mu,
                checks,
            ))))
        }
        Err(Error::Balanced(reason)) if signed_weights => Ok(TrialOutcome::Skip(SkipRecord {
            trial,
            seed,
            k,
            n,
            weights: rat_strings(arr.weights()),
            reason,
        })),
        Err(e) => Err(e),
    }
}

/// Runs the planned trials `(trial, seed, k, n)` across a pool of worker
/// threads and reassembles the outcomes in trial order, so reports never
/// depend on scheduling. When several trials fail, the error of the lowest
/// trial index wins.
pub fn run_trials(
    plan: &[(usize, u64, usize, usize)],
    signed_weights: bool,
) -> Result<Vec<TrialOutcome>, Error> {
    let workers = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1)
        .min(plan.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<TrialOutcome, Error>>>> =
        plan.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(trial, seed, k, n)) = plan.get(idx) else {
                    break;
                };
                let outcome = run_one_trial(trial, seed, k, n, signed_weights);
                *slots[idx].lock().expect("worker lock poisoned") = Some(outcome);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("worker lock poisoned")
                .expect("every planned trial ran")
        })
        .collect()
}
