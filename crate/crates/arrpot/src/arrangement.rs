//! The arrangement family: coefficient data, independence and circuit
//! structure, discriminant membership, and the unbalancedness test.
//!
//! A family consists of n linear functions g_j = Σ_i b_j^i t_i on ℚ^k
//! (columns of the k×n matrix b), nonzero weights a_j, and hyperplanes
//! H_j(z) = {g_j + z_j = 0} moving with the translation parameters z. All
//! indices are 1-based at this interface, matching the usual notation;
//! internal storage is 0-based.

use crate::error::{Error, Result};
use crate::linalg::RatMatrix;
use crate::linform::LinFormZ;
use crate::rat::{parse_rat, rat_to_string, Rat};
use itertools::Itertools;
use num::{Signed, Zero};
use serde::Deserialize;
use std::collections::BTreeSet;

#[derive(Clone, Debug)]
pub struct ArrangementFamily {
    k: usize,
    n: usize,
    /// k rows × n columns; column j-1 holds the coefficients of g_j.
    b: RatMatrix,
    weights: Vec<Rat>,
    labels: Vec<String>,
    /// Optional base point carried by the input file.
    z: Option<Vec<Rat>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrangementInput {
    k: usize,
    n: usize,
    b: Vec<Vec<String>>,
    weights: Vec<String>,
    labels: Option<Vec<String>>,
    z: Option<Vec<String>>,
}

impl ArrangementFamily {
    /// Validates and builds a family. Requires n > k ≥ 1, a k×n coefficient
    /// matrix with no zero column whose columns span ℚ^k, and n nonzero
    /// weights.
    pub fn new(
        k: usize,
        n: usize,
        b: RatMatrix,
        weights: Vec<Rat>,
        labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if k < 1 || n <= k {
            return Err(Error::Malformed(format!("need n > k >= 1, got k={k}, n={n}")));
        }
        if b.rows() != k || b.cols() != n {
            return Err(Error::Malformed(format!(
                "coefficient matrix must be {k}x{n}, got {}x{}",
                b.rows(),
                b.cols()
            )));
        }
        for j in 0..n {
            if (0..k).all(|i| b.at(i, j).is_zero()) {
                return Err(Error::Malformed(format!("g_{} is the zero function", j + 1)));
            }
        }
        if b.rank() != k {
            return Err(Error::Malformed(
                "arrangement is not essential: columns do not span".into(),
            ));
        }
        if weights.len() != n {
            return Err(Error::Malformed(format!(
                "expected {n} weights, got {}",
                weights.len()
            )));
        }
        if let Some(j) = weights.iter().position(Zero::is_zero) {
            return Err(Error::Malformed(format!("weight a_{} is zero", j + 1)));
        }
        let labels = match labels {
            Some(l) => {
                if l.len() != n {
                    return Err(Error::Malformed(format!("expected {n} labels, got {}", l.len())));
                }
                l
            }
            None => (1..=n).map(|j| format!("H{j}")).collect(),
        };
        Ok(ArrangementFamily { k, n, b, weights, labels, z: None })
    }

    /// Parses the JSON input schema:
    /// `{ "k", "n", "b" (k rows × n cols of rat-strings), "weights",
    ///   "labels"?, "z"? }`.
    pub fn from_json(text: &str) -> Result<Self> {
        let input: ArrangementInput =
            serde_json::from_str(text).map_err(|e| Error::Malformed(format!("bad JSON: {e}")))?;
        if input.b.len() != input.k {
            return Err(Error::Malformed(format!(
                "\"b\" must have {} rows, got {}",
                input.k,
                input.b.len()
            )));
        }
        let mut rows = Vec::with_capacity(input.k);
        for row in &input.b {
            if row.len() != input.n {
                return Err(Error::Malformed(format!(
                    "every row of \"b\" must have {} entries, got {}",
                    input.n,
                    row.len()
                )));
            }
            rows.push(row.iter().map(|s| parse_rat(s)).collect::<Result<Vec<_>>>()?);
        }
        let weights = input.weights.iter().map(|s| parse_rat(s)).collect::<Result<Vec<_>>>()?;
        let mut arr = Self::new(
            input.k,
            input.n,
            RatMatrix::from_rows(rows),
            weights,
            input.labels,
        )?;
        if let Some(zs) = input.z {
            if zs.len() != input.n {
                return Err(Error::Malformed(format!(
                    "\"z\" must have {} entries, got {}",
                    input.n,
                    zs.len()
                )));
            }
            arr.z = Some(zs.iter().map(|s| parse_rat(s)).collect::<Result<Vec<_>>>()?);
        }
        Ok(arr)
    }

    /// JSON value in the input schema (used by reports).
    pub fn to_json(&self) -> serde_json::Value {
        let b: Vec<Vec<String>> = (0..self.k)
            .map(|i| (0..self.n).map(|j| rat_to_string(self.b.at(i, j))).collect())
            .collect();
        let mut obj = serde_json::json!({
            "k": self.k,
            "n": self.n,
            "b": b,
            "weights": self.weights.iter().map(rat_to_string).collect::<Vec<_>>(),
            "labels": self.labels,
        });
        if let Some(z) = &self.z {
            obj["z"] = serde_json::json!(z.iter().map(rat_to_string).collect::<Vec<_>>());
        }
        obj
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight a_j (1-based).
    pub fn weight(&self, j: usize) -> &Rat {
        assert!((1..=self.n).contains(&j), "index {j} out of range 1..={}", self.n);
        &self.weights[j - 1]
    }

    pub fn weights(&self) -> &[Rat] {
        &self.weights
    }

    pub fn label(&self, j: usize) -> &str {
        &self.labels[j - 1]
    }

    pub fn total_weight(&self) -> Rat {
        self.weights.iter().sum()
    }

    pub fn base_point(&self) -> Option<&[Rat]> {
        self.z.as_deref()
    }

    pub fn set_base_point(&mut self, z: Vec<Rat>) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::Malformed(format!(
                "base point must have {} coordinates, got {}",
                self.n,
                z.len()
            )));
        }
        self.z = Some(z);
        Ok(())
    }

    /// Column of g_j (1-based).
    pub fn column(&self, j: usize) -> Vec<Rat> {
        assert!((1..=self.n).contains(&j), "index {j} out of range 1..={}", self.n);
        self.b.column(j - 1)
    }

    /// Submatrix of the columns selected by 1-based indices, in the given
    /// order.
    pub fn columns_matrix(&self, idx: &[usize]) -> RatMatrix {
        RatMatrix::from_cols(idx.iter().map(|&j| self.column(j)).collect())
    }

    /// Matroid rank of a set of column indices (1-based, duplicates allowed
    /// and ignored).
    pub fn rank_of(&self, set: &[usize]) -> usize {
        let distinct: Vec<usize> = set.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if distinct.is_empty() {
            return 0;
        }
        self.columns_matrix(&distinct).rank()
    }

    /// True iff the selected columns are linearly independent. Rejects
    /// repeated or out-of-range indices.
    pub fn is_independent(&self, s: &[usize]) -> bool {
        let distinct: BTreeSet<usize> = s.iter().copied().collect();
        assert_eq!(distinct.len(), s.len(), "independence query with repeated indices");
        for &j in s {
            assert!((1..=self.n).contains(&j), "index {j} out of range 1..={}", self.n);
        }
        self.rank_of(s) == s.len()
    }

    /// Minor d_I: determinant of the columns selected by the ordered
    /// k-tuple I. Zero iff I is dependent; antisymmetric under swaps.
    pub fn minor(&self, i: &[usize]) -> Rat {
        assert_eq!(i.len(), self.k, "minor needs exactly k = {} indices", self.k);
        let distinct: BTreeSet<usize> = i.iter().copied().collect();
        if distinct.len() < i.len() {
            return Rat::zero();
        }
        self.columns_matrix(i).det()
    }

    /// All circuits (minimal dependent subsets), each sorted ascending, the
    /// list sorted lexicographically. Every circuit has size ≤ k+1.
    pub fn circuits(&self) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        for size in 2..=(self.k + 1) {
            for c in (1..=self.n).combinations(size) {
                if self.rank_of(&c) < c.len()
                    && c.iter().all(|&drop| {
                        let rest: Vec<usize> = c.iter().copied().filter(|&x| x != drop).collect();
                        self.rank_of(&rest) == rest.len()
                    })
                {
                    out.push(c);
                }
            }
        }
        out.sort();
        out
    }

    /// Circuit form f_C(z) = Σ_l (−1)^{l+1} z_{c_l} d_{C∖c_l} for an ordered
    /// (k+1)-tuple spanning rank k.
    pub fn circuit_form(&self, c: &[usize]) -> LinFormZ {
        assert_eq!(c.len(), self.k + 1, "circuit form needs k+1 = {} indices", self.k + 1);
        assert_eq!(self.rank_of(c), self.k, "circuit form needs a rank-k index set");
        let mut f = LinFormZ::new();
        for (l, &cl) in c.iter().enumerate() {
            let rest: Vec<usize> =
                c.iter().enumerate().filter(|&(m, _)| m != l).map(|(_, &x)| x).collect();
            let mut d = self.minor(&rest);
            if l % 2 == 1 {
                d = -d;
            }
            f.add_term(cl, d);
        }
        f
    }

    /// True iff some circuit's hyperplanes {g_c + z_c = 0} are concurrent,
    /// i.e. the fiber A(z) fails normal crossings.
    pub fn in_discriminant(&self, z: &[Rat]) -> bool {
        self.discriminant_witness(z).is_some()
    }

    /// First circuit (in `circuits` order) whose hyperplanes are concurrent
    /// at z, if any.
    pub fn discriminant_witness(&self, z: &[Rat]) -> Option<Vec<usize>> {
        assert_eq!(z.len(), self.n, "base point must have n = {} coordinates", self.n);
        self.circuits().into_iter().find(|c| {
            let system =
                RatMatrix::from_rows(c.iter().map(|&j| self.column(j)).collect());
            let rhs: Vec<Rat> = c.iter().map(|&j| -z[j - 1].clone()).collect();
            system.solve(&rhs).is_some()
        })
    }

    /// True iff all weights share one sign — a sufficient condition for
    /// unbalancedness, reported separately because it needs no edge scan.
    pub fn all_weights_one_sign(&self) -> bool {
        self.weights.iter().all(Signed::is_positive) || self.weights.iter().all(Signed::is_negative)
    }

    /// Unbalancedness of the weights for the generic fiber: every dense
    /// edge of the projective closure carries nonzero weight. Affine dense
    /// edges of a normal-crossing fiber are the hyperplanes themselves
    /// (weights a_j); the hyperplane at infinity is always dense with
    /// weight −a_J; the remaining dense edges sit inside H_∞ and are
    /// indexed by proper flats U of the g-matroid, with weight
    /// −Σ_{g_j ∉ U} a_j and density decided by connectivity of the
    /// localized matroid including H_∞.
    pub fn is_unbalanced(&self) -> bool {
        self.unbalanced_with(&self.weights.clone())
    }

    /// Same test against an arbitrary weight vector (lets callers probe
    /// weight choices, including zero entries, without rebuilding).
    pub fn unbalanced_with(&self, weights: &[Rat]) -> bool {
        assert_eq!(weights.len(), self.n, "need n = {} weights", self.n);
        if weights.iter().any(Zero::is_zero) {
            return false;
        }
        if weights.iter().all(Signed::is_positive) || weights.iter().all(Signed::is_negative) {
            return true;
        }
        let total: Rat = weights.iter().sum();
        if total.is_zero() {
            return false;
        }
        for flat in self.proper_flats() {
            if !self.flat_dense_at_infinity(&flat) {
                continue;
            }
            let edge_weight: Rat = (1..=self.n)
                .filter(|j| !flat.contains(j))
                .map(|j| weights[j - 1].clone())
                .sum();
            if edge_weight.is_zero() {
                return false;
            }
        }
        true
    }

    /// Proper flats of the g-matroid (rank 1..k−1), each given as its full
    /// member set {j : g_j ∈ span U}, sorted; the list deduplicated and
    /// sorted. Every flat is the closure of one of its independent subsets,
    /// so scanning independent subsets of size < k finds them all.
    fn proper_flats(&self) -> Vec<Vec<usize>> {
        let mut flats: BTreeSet<Vec<usize>> = BTreeSet::new();
        for size in 1..self.k {
            for s in (1..=self.n).combinations(size) {
                if self.rank_of(&s) != size {
                    continue;
                }
                let closure: Vec<usize> = (1..=self.n)
                    .filter(|&j| {
                        let mut with = s.clone();
                        with.push(j);
                        self.rank_of(&with) == size
                    })
                    .collect();
                flats.insert(closure);
            }
        }
        flats.into_iter().collect()
    }

    /// Density of the edge at infinity determined by a flat: connectivity
    /// of the matroid on {H_∞} ∪ {H_j : j ∈ flat} localized there. For the
    /// generic fiber the lifted rank is rank_g(T∖∞)+1 when ∞ ∈ T and
    /// min(|T|, rank_g(T)+1) otherwise.
    fn flat_dense_at_infinity(&self, flat: &[usize]) -> bool {
        // Ground set: index 0 is H_∞, then the flat members.
        let ground: Vec<Option<usize>> =
            std::iter::once(None).chain(flat.iter().map(|&j| Some(j))).collect();
        let rank_lift = |members: &[Option<usize>]| -> usize {
            let has_inf = members.iter().any(Option::is_none);
            let gs: Vec<usize> = members.iter().flatten().copied().collect();
            let rg = self.rank_of(&gs);
            if has_inf {
                rg + 1
            } else {
                gs.len().min(rg + 1)
            }
        };
        let total = rank_lift(&ground);
        let m = ground.len();
        // Disconnected iff some bipartition has rank(E1) + rank(E2) = rank(E).
        for mask in 1..(1u32 << (m - 1)) {
            let (mut e1, mut e2) = (Vec::new(), Vec::new());
            for (i, g) in ground.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    e1.push(*g);
                } else {
                    e2.push(*g);
                }
            }
            if rank_lift(&e1) + rank_lift(&e2) == total {
                return false;
            }
        }
        true
    }

    /// All independent k-subsets, sorted ascending within each subset and
    /// lexicographically as a list. This indexes the standard basis of the
    /// top flag space.
    pub fn independent_k_subsets(&self) -> Vec<Vec<usize>> {
        (1..=self.n)
            .combinations(self.k)
            .filter(|s| self.rank_of(s) == s.len())
            .collect()
    }

    /// Independent (k−1)-subsets in lexicographic order (for k = 1 this is
    /// the single empty subset).
    pub fn independent_km1_subsets(&self) -> Vec<Vec<usize>> {
        (1..=self.n)
            .combinations(self.k - 1)
            .filter(|s| self.rank_of(s) == s.len())
            .collect()
    }
}

/// The Figure-1 family (k=2, n=4): g_1 = t_2, g_2 = t_2, g_3 = t_1,
/// g_4 = t_1 + t_2, with the given weights. Used across tests and fixtures.
pub fn fig1(weights: [i64; 4]) -> ArrangementFamily {
    use crate::rat::int;
    ArrangementFamily::new(
        2,
        4,
        RatMatrix::from_rows(vec![
            vec![int(0), int(0), int(1), int(1)],
            vec![int(1), int(1), int(0), int(1)],
        ]),
        weights.into_iter().map(int).collect(),
        None,
    )
    .expect("figure-1 family is valid")
}

/// A collinear k=1 family with all g_j = t (n points moving on a line).
pub fn collinear_k1(weights: &[i64]) -> ArrangementFamily {
    use crate::rat::int;
    let n = weights.len();
    ArrangementFamily::new(
        1,
        n,
        RatMatrix::from_rows(vec![vec![int(1); n]]),
        weights.iter().map(|&w| int(w)).collect(),
        None,
    )
    .expect("collinear family is valid")
}
