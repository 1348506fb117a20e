//! Command line interface for the arrangement-family toolkit.

use arrpot::elementary::{enumerate_elementary, subarr_weight, subarr_weight_levels};
use arrpot::flag::sing_dimension;
use arrpot::potential::{potential_first, potential_second, EChoice};
use arrpot::rat::rat_to_string;
use arrpot::{AlgebraContext, ArrangementFamily, Error, Rat};
use arrpot_cli::{
    exit_code, family_report, matrix_strings, parse_point, rat_strings, run_trials,
    trial_dims, Counters, ElementaryReport, GramReport, MultopReport, PotentialReport,
    TrialOutcome, TupleReport, ValidateReport, VerifyReport,
};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "arrpot",
    version,
    about = "Exact potentials, pairings, and products for weighted hyperplane arrangement families"
)]
struct Cli {
    /// JSON file describing the family (keys: k, n, b, weights, labels?, z?).
    #[arg(long, global = true, value_name = "FILE")]
    input: Option<PathBuf>,
    /// Base point z_1,...,z_n as comma-separated rationals.
    #[arg(long, global = true, value_name = "Z1,Z2,...")]
    at: Option<String>,
    /// Output format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Latex,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    First,
    Second,
}

#[derive(Subcommand)]
enum Command {
    /// Check a family description and print its combinatorial invariants.
    Validate,
    /// List the elementary subarrangement tuples with their weights.
    Elementary,
    /// Print a potential of the family as a closed symbolic expression.
    Potential {
        #[arg(long, value_enum)]
        kind: Kind,
    },
    /// Print the Gram matrix of the residue pairing at a base point.
    Gram,
    /// Print the matrix of multiplication by p_j at a base point.
    Multop {
        /// Hyperplane index j in 1..=n.
        #[arg(short = 'j', long = "index")]
        j: usize,
    },
    /// Run the identity checks on the input family or on random families.
    Verify {
        /// Generate seeded random families instead of reading --input.
        #[arg(long)]
        random: bool,
        /// Number of random families.
        #[arg(long, default_value_t = 8)]
        trials: usize,
        /// Master seed for the random families.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Allow weights of both signs (balanced draws are skipped).
        #[arg(long)]
        signed_weights: bool,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let outcome = run(&cli);
    let elapsed = started.elapsed().as_millis();
    eprintln!("elapsed_ms={elapsed}");
    match outcome {
        Ok((stdout, code)) => {
            println!("{stdout}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}

fn load_family(cli: &Cli) -> Result<ArrangementFamily, Error> {
    let path = cli
        .input
        .as_ref()
        .ok_or_else(|| Error::Malformed("this command needs --input FILE".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Malformed(format!("cannot read {}: {e}", path.display())))?;
    ArrangementFamily::from_json(&text)
}

/// The base point: --at wins, otherwise the z stored in the input file.
fn base_point(cli: &Cli, arr: &ArrangementFamily) -> Result<Vec<Rat>, Error> {
    if let Some(text) = &cli.at {
        return parse_point(text, arr.n());
    }
    arr.base_point()
        .map(<[Rat]>::to_vec)
        .ok_or_else(|| Error::Malformed("this command needs a base point: pass --at or put \"z\" in the input file".into()))
}

fn render<T: Serialize>(format: Format, report: &T, text: String) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("reports serialize"),
        Format::Latex | Format::Text => text,
    }
}

fn run(cli: &Cli) -> Result<(String, u8), Error> {
    match &cli.command {
        Command::Validate => cmd_validate(cli),
        Command::Elementary => cmd_elementary(cli),
        Command::Potential { kind } => cmd_potential(cli, *kind),
        Command::Gram => cmd_gram(cli),
        Command::Multop { j } => cmd_multop(cli, *j),
        Command::Verify { random, trials, seed, signed_weights } => {
            cmd_verify(cli, *random, *trials, *seed, *signed_weights)
        }
    }
}

fn cmd_validate(cli: &Cli) -> Result<(String, u8), Error> {
    let arr = load_family(cli)?;
    let z = match &cli.at {
        Some(text) => Some(parse_point(text, arr.n())?),
        None => arr.base_point().map(<[Rat]>::to_vec),
    };
    let report = ValidateReport {
        command: "validate".into(),
        k: arr.k(),
        n: arr.n(),
        labels: (1..=arr.n()).map(|j| arr.label(j).to_string()).collect(),
        weights: rat_strings(arr.weights()),
        unbalanced: arr.is_unbalanced(),
        circuits: arr.circuits(),
        sing_dimension: sing_dimension(&arr),
        elementary_tuples: enumerate_elementary(&arr).len(),
        z: z.as_deref().map(rat_strings),
        in_discriminant: z.as_ref().map(|z| arr.discriminant_witness(z).is_some()),
        elapsed_ms: 0,
    };
    let mut lines = vec![
        format!("k = {}", report.k),
        format!("n = {}", report.n),
        format!("weights = [{}]", report.weights.join(", ")),
        format!("unbalanced = {}", report.unbalanced),
        format!("circuits = {:?}", report.circuits),
        format!("sing_dimension = {}", report.sing_dimension),
        format!("elementary_tuples = {}", report.elementary_tuples),
    ];
    if let Some(z) = &report.z {
        lines.push(format!("z = [{}]", z.join(", ")));
        lines.push(format!("in_discriminant = {}", report.in_discriminant.unwrap()));
    }
    Ok((render(cli.format, &report, lines.join("\n")), 0))
}

fn cmd_elementary(cli: &Cli) -> Result<(String, u8), Error> {
    let arr = load_family(cli)?;
    let mut tuples = Vec::new();
    for e in enumerate_elementary(&arr) {
        tuples.push(TupleReport {
            blocks: e.blocks().to_vec(),
            r#type: e.lambda(),
            weight_levels: rat_strings(&subarr_weight_levels(&arr, &e)),
            weight_total: rat_to_string(&subarr_weight(&arr, &e)?),
        });
    }
    let text = tuples
        .iter()
        .map(|t| {
            format!(
                "blocks={:?} type={:?} levels=[{}] total={}",
                t.blocks,
                t.r#type,
                t.weight_levels.join(", "),
                t.weight_total
            )
        })
        .collect::<Vec<_>>()
        .join("\n");
    let report =
        ElementaryReport { command: "elementary".into(), tuples, elapsed_ms: 0 };
    Ok((render(cli.format, &report, text), 0))
}

fn cmd_potential(cli: &Cli, kind: Kind) -> Result<(String, u8), Error> {
    let arr = load_family(cli)?;
    let (name, expr) = match kind {
        Kind::First => ("first", potential_first(&arr, EChoice::Canonical)?),
        Kind::Second => ("second", potential_second(&arr, EChoice::Canonical)?),
    };
    let report = PotentialReport {
        command: "potential".into(),
        kind: name.into(),
        latex: expr.latex(),
        sexpr: expr.sexpr(),
        elapsed_ms: 0,
    };
    let text = match cli.format {
        Format::Latex => report.latex.clone(),
        _ => report.sexpr.clone(),
    };
    Ok((render(cli.format, &report, text), 0))
}

fn cmd_gram(cli: &Cli) -> Result<(String, u8), Error> {
    let arr = load_family(cli)?;
    let z = base_point(cli, &arr)?;
    let ctx = AlgebraContext::new(&arr, &z)?;
    let report = GramReport {
        command: "gram".into(),
        z: rat_strings(&z),
        mu: ctx.mu(),
        basis: ctx.algebra_basis().to_vec(),
        gram: matrix_strings(ctx.gram()),
        elapsed_ms: 0,
    };
    let mut lines = vec![format!("basis = {:?}", report.basis)];
    lines.extend(report.gram.iter().map(|row| row.join("\t")));
    Ok((render(cli.format, &report, lines.join("\n")), 0))
}

fn cmd_multop(cli: &Cli, j: usize) -> Result<(String, u8), Error> {
    let arr = load_family(cli)?;
    if !(1..=arr.n()).contains(&j) {
        return Err(Error::Malformed(format!(
            "index j must lie in 1..={}, got {j}",
            arr.n()
        )));
    }
    let z = base_point(cli, &arr)?;
    let ctx = AlgebraContext::new(&arr, &z)?;
    let report = MultopReport {
        command: "multop".into(),
        j,
        z: rat_strings(&z),
        mu: ctx.mu(),
        basis: ctx.algebra_basis().to_vec(),
        matrix: matrix_strings(ctx.multiplication_operator(j)),
        elapsed_ms: 0,
    };
    let mut lines = vec![format!("basis = {:?}", report.basis)];
    lines.extend(report.matrix.iter().map(|row| row.join("\t")));
    Ok((render(cli.format, &report, lines.join("\n")), 0))
}

fn cmd_verify(
    cli: &Cli,
    random: bool,
    trials: usize,
    seed: u64,
    signed_weights: bool,
) -> Result<(String, u8), Error> {
    let with_input = !random || cli.input.is_some();
    let mode = match (with_input, random) {
        (true, true) => "input+random",
        (_, true) => "random",
        _ => "input",
    };
    let mut report = VerifyReport {
        command: "verify".into(),
        mode: mode.into(),
        seed: random.then_some(seed),
        trials: random.then_some(trials),
        families: Vec::new(),
        skipped: Vec::new(),
        counters: Counters::default(),
        passed: true,
        elapsed_ms: 0,
    };
    if with_input {
        let arr = load_family(cli)?;
        let z = base_point(cli, &arr)?;
        let ctx = AlgebraContext::new(&arr, &z)?;
        let checks = ctx.verify_suite();
        report.families.push(family_report("input".into(), &arr, &z, ctx.mu(), checks));
    }
    if random {
        // Sub-seeds are drawn in trial order before any work starts, so the
        // worker pool cannot perturb the random stream; outcomes come back
        // already sorted by trial index.
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let plan: Vec<(usize, u64, usize, usize)> = (0..trials)
            .map(|t| {
                let sub_seed: u64 = master.gen();
                let (k, n) = trial_dims(t);
                (t, sub_seed, k, n)
            })
            .collect();
        for outcome in run_trials(&plan, signed_weights)? {
            match outcome {
                TrialOutcome::Family(f) => report.families.push(*f),
                TrialOutcome::Skip(s) => report.skipped.push(s),
            }
        }
    }
    report.tally();
    let mut lines = Vec::new();
    for f in &report.families {
        for c in &f.checks {
            lines.push(format!(
                "[{}] {}: {} instances, {} failures",
                f.source,
                c.identity,
                c.instances,
                c.failures.len()
            ));
        }
    }
    for s in &report.skipped {
        lines.push(format!(
            "[trial {} (seed {})] skipped: {}",
            s.trial, s.seed, s.reason
        ));
    }
    lines.push(if report.passed { "PASS".into() } else { "FAIL".into() });
    let code = u8::from(!report.passed);
    Ok((render(cli.format, &report, lines.join("\n")), code))
}
