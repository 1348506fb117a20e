//! Symbolic potentials of the first and second kind and the expression
//! engine they live in.
//!
//! A [`PotentialExpr`] is a finite sum of terms c · ∏ L_i^{e_i} · ln(L_0),
//! where every L is a linear form in z. Power factor bases are kept in
//! primitive normal form (coprime integer coefficients, positive leading
//! coefficient) with the extracted scalar absorbed into the coefficient, so
//! that equal expressions compare equal term by term. Logarithm arguments
//! are kept exactly as constructed and merge only on literal equality,
//! preserving the printed shape of the potential of the second kind.
//!
//! The potentials are assembled per elementary subarrangement: an adapted
//! coordinate basis splits each tuple into levels, auxiliary minors d_{I;h}
//! are determinants of the level rows, the forms f_{E,h} combine the block
//! variables with e-coefficients pulled from earlier levels, and each level
//! contributes a single term a-product · f^{2λ} / ((2λ)! (∏ d)²).

use crate::arrangement::ArrangementFamily;
use crate::elementary::{enumerate_elementary, subarr_weight, Elementary};
use crate::error::{Error, Result};
use crate::linalg::RatMatrix;
use crate::linform::LinFormZ;
use crate::rat::{int, rat_to_string, Rat};
use num::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

fn factorial(n: usize) -> Rat {
    (1..=n).fold(Rat::one(), |acc, i| acc * int(i as i64))
}

fn pow_rat(r: &Rat, e: i64) -> Rat {
    let base = if e < 0 { r.recip() } else { r.clone() };
    let mut out = Rat::one();
    for _ in 0..e.unsigned_abs() {
        out *= &base;
    }
    out
}

/// Which solution of the level relations to use for the e-coefficients.
/// The relation system is underdetermined; both choices are legitimate and
/// the derivative identities must not distinguish them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EChoice {
    /// Free variables set to zero with variables scanned in ascending order.
    Canonical,
    /// The same elimination applied to the variables in descending order.
    Alternate,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct TermKey {
    /// Primitive bases with nonzero exponents, sorted by base.
    factors: Vec<(LinFormZ, i64)>,
    /// Logarithm argument, stored exactly as constructed.
    log: Option<LinFormZ>,
}

/// A canonical sum of terms c · ∏ L^e · ln(L_0).
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct PotentialExpr {
    terms: BTreeMap<TermKey, Rat>,
}

impl PotentialExpr {
    pub fn zero() -> Self {
        PotentialExpr { terms: BTreeMap::new() }
    }

    pub fn constant(c: Rat) -> Self {
        Self::term(c, Vec::new(), None)
    }

    /// Builds a one-term expression, normalizing the power factor bases to
    /// primitive form and absorbing their scalars into the coefficient.
    pub fn term(coeff: Rat, factors: Vec<(LinFormZ, i64)>, log: Option<LinFormZ>) -> Self {
        if coeff.is_zero() {
            return Self::zero();
        }
        let mut c = coeff;
        let mut merged: BTreeMap<LinFormZ, i64> = BTreeMap::new();
        for (base, exp) in factors {
            if exp == 0 {
                continue;
            }
            assert!(!base.is_zero(), "zero linear form cannot be a factor base");
            let (prim, s) = base.normalize_primitive();
            c *= pow_rat(&s, exp);
            *merged.entry(prim).or_insert(0) += exp;
        }
        merged.retain(|_, e| *e != 0);
        if let Some(l) = &log {
            assert!(!l.is_zero(), "zero linear form cannot be a logarithm argument");
        }
        let key = TermKey { factors: merged.into_iter().collect(), log };
        let mut terms = BTreeMap::new();
        terms.insert(key, c);
        PotentialExpr { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// `Some(c)` when the expression is the constant c (including zero).
    pub fn as_constant(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => {
                let (key, c) = self.terms.iter().next().expect("one term");
                (key.factors.is_empty() && key.log.is_none()).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (key, c) in &other.terms {
            let entry = out.terms.entry(key.clone()).or_insert_with(Rat::zero);
            *entry += c;
            if entry.is_zero() {
                out.terms.remove(key);
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(&-Rat::one()))
    }

    pub fn scale(&self, s: &Rat) -> Self {
        if s.is_zero() {
            return Self::zero();
        }
        PotentialExpr { terms: self.terms.iter().map(|(k, c)| (k.clone(), c * s)).collect() }
    }

    /// Product of two expressions. At most one side may carry logarithms:
    /// the potentials never need products of two logarithmic terms.
    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let log = match (&ka.log, &kb.log) {
                    (Some(_), Some(_)) => {
                        panic!("product of two logarithmic terms is not representable")
                    }
                    (Some(l), None) | (None, Some(l)) => Some(l.clone()),
                    (None, None) => None,
                };
                let mut factors = ka.factors.clone();
                factors.extend(kb.factors.iter().cloned());
                out = out.add(&Self::term(ca * cb, factors, log));
            }
        }
        out
    }

    /// Partial derivative with respect to z_var.
    pub fn differentiate(&self, var: usize) -> Self {
        let mut out = Self::zero();
        for (key, coeff) in &self.terms {
            for (idx, (base, exp)) in key.factors.iter().enumerate() {
                let cv = base.coeff(var);
                if cv.is_zero() {
                    continue;
                }
                let mut factors = key.factors.clone();
                factors[idx].1 -= 1;
                out = out.add(&Self::term(coeff * cv * int(*exp), factors, key.log.clone()));
            }
            if let Some(l) = &key.log {
                let cv = l.coeff(var);
                if !cv.is_zero() {
                    let (prim, s) = l.normalize_primitive();
                    let mut factors = key.factors.clone();
                    factors.push((prim, -1));
                    out = out.add(&Self::term(coeff * cv / s, factors, None));
                }
            }
        }
        out
    }

    /// Iterated partials, applied left to right.
    pub fn derivative_multi(&self, vars: &[usize]) -> Self {
        vars.iter().fold(self.clone(), |expr, &v| expr.differentiate(v))
    }

    /// Exact value at a base point. Logarithms must have been removed by
    /// differentiation first; a zero base raised to a negative power is a
    /// pole of the expression.
    pub fn evaluate(&self, z: &[Rat]) -> Result<Rat> {
        if let Some(key) = self.terms.keys().find(|k| k.log.is_some()) {
            let _ = key;
            return Err(Error::LogPresent);
        }
        let mut total = Rat::zero();
        for (key, coeff) in &self.terms {
            let values: Vec<(Rat, i64)> =
                key.factors.iter().map(|(base, exp)| (base.evaluate(z), *exp)).collect();
            if let Some(pos) = values.iter().position(|(v, e)| v.is_zero() && *e < 0) {
                return Err(Error::Pole(key.factors[pos].0.to_string()));
            }
            if values.iter().any(|(v, _)| v.is_zero()) {
                continue;
            }
            let mut val = coeff.clone();
            for (v, e) in values {
                val *= pow_rat(&v, e);
            }
            total += val;
        }
        Ok(total)
    }

    /// LaTeX rendering: coefficients as \tfrac, logarithm first, then power
    /// factors.
    pub fn latex(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut out = String::new();
        for (i, (key, coeff)) in self.terms.iter().enumerate() {
            let neg = coeff.is_negative();
            if i == 0 {
                if neg {
                    out.push('-');
                }
            } else {
                out.push_str(if neg { " - " } else { " + " });
            }
            let mag = coeff.abs();
            let bare = key.factors.is_empty() && key.log.is_none();
            if !mag.is_one() || bare {
                if mag.denom().is_one() {
                    out.push_str(&mag.to_string());
                } else {
                    out.push_str(&format!("\\tfrac{{{}}}{{{}}}", mag.numer(), mag.denom()));
                }
            }
            if let Some(l) = &key.log {
                out.push_str(&format!("\\ln({})", l.latex()));
            }
            for (base, exp) in &key.factors {
                out.push_str(&format!("({})", base.latex()));
                if *exp != 1 {
                    out.push_str(&format!("^{{{exp}}}"));
                }
            }
        }
        out
    }

    /// S-expression rendering: `(+ (* c (^ (linform …) e) … (ln (linform …))) …)`.
    pub fn sexpr(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let rendered: Vec<String> = self
            .terms
            .iter()
            .map(|(key, coeff)| {
                let mut parts = vec![rat_to_string(coeff)];
                for (base, exp) in &key.factors {
                    parts.push(format!("(^ {} {})", base.sexpr(), exp));
                }
                if let Some(l) = &key.log {
                    parts.push(format!("(ln {})", l.sexpr()));
                }
                format!("(* {})", parts.join(" "))
            })
            .collect();
        format!("(+ {})", rendered.join(" "))
    }
}

impl fmt::Display for PotentialExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, (key, coeff)) in self.terms.iter().enumerate() {
            let neg = coeff.is_negative();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, "{}", if neg { " - " } else { " + " })?;
            }
            let mag = coeff.abs();
            let mut pieces = Vec::new();
            if !mag.is_one() || (key.factors.is_empty() && key.log.is_none()) {
                pieces.push(rat_to_string(&mag));
            }
            if let Some(l) = &key.log {
                pieces.push(format!("ln({l})"));
            }
            for (base, exp) in &key.factors {
                if *exp == 1 {
                    pieces.push(format!("({base})"));
                } else {
                    pieces.push(format!("({base})^{exp}"));
                }
            }
            write!(f, "{}", pieces.join("*"))?;
        }
        Ok(())
    }
}

/// Adapted coordinates for an elementary tuple: a basis of ℚ^k drawn from
/// the block directions level by level, with the last vector scaled so the
/// change of basis has determinant one. For a single block the original
/// coordinates are already adapted and are kept as they are.
pub struct AdaptedBasis {
    /// k×n matrix of adapted coefficients c_j.
    c: RatMatrix,
    /// Cumulative level ranks: λ^0 = 0, λ^1, …, λ^m = k.
    lambda_cum: Vec<usize>,
}

impl AdaptedBasis {
    pub fn c(&self) -> &RatMatrix {
        &self.c
    }

    /// Adapted coefficient c_j^i (1-based j, 0-based row i).
    pub fn coeff(&self, row: usize, j: usize) -> &Rat {
        self.c.at(row, j - 1)
    }

    /// Auxiliary minor d_{I;h}: determinant of the level-h rows
    /// (λ^{h−1}+1 … λ^h) of the adapted coefficients of the columns I, in
    /// the given order.
    pub fn aux_minor(&self, i: &[usize], h: usize) -> Rat {
        assert!(h >= 1 && h < self.lambda_cum.len(), "level {h} out of range");
        let rows = self.lambda_cum[h - 1]..self.lambda_cum[h];
        assert_eq!(i.len(), rows.len(), "auxiliary minor needs λ_h columns");
        let m = RatMatrix::from_rows(
            rows.map(|r| i.iter().map(|&j| self.coeff(r, j).clone()).collect()).collect(),
        );
        m.det()
    }
}

/// Builds the adapted basis of an elementary tuple.
pub fn adapted_basis(arr: &ArrangementFamily, e: &Elementary) -> AdaptedBasis {
    let k = arr.k();
    let mut lambda_cum = vec![0usize];
    for lam in e.lambda() {
        lambda_cum.push(lambda_cum.last().expect("nonempty") + lam);
    }
    if e.m() == 1 {
        return AdaptedBasis {
            c: RatMatrix::from_cols((1..=arr.n()).map(|j| arr.column(j)).collect()),
            lambda_cum,
        };
    }
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(k);
    for (block, &target) in e.blocks().iter().zip(&lambda_cum[1..]) {
        for &j in block {
            if rows.len() == target {
                break;
            }
            let mut cand = rows.clone();
            cand.push(arr.column(j));
            if RatMatrix::from_rows(cand.clone()).rank() == rows.len() + 1 {
                rows = cand;
            }
        }
        assert_eq!(rows.len(), target, "elementary prefix must span its level");
    }
    let mut m = RatMatrix::from_rows(rows);
    let det = m.det();
    assert!(!det.is_zero(), "adapted rows form a basis");
    for col in 0..k {
        let v = m.at(k - 1, col) / &det;
        m.set(k - 1, col, v);
    }
    let minv_t = m.inverse().expect("determinant is one").transpose();
    let c = RatMatrix::from_cols((1..=arr.n()).map(|j| minv_t.mul_vec(&arr.column(j))).collect());
    AdaptedBasis { c, lambda_cum }
}

/// The e-coefficients of level h ≥ 2: the level relation
/// w = Σ_i (−1)^{i+1} d_{J_h∖j_i;h} b_{j_i} lies in the span of the earlier
/// prefix, and the coefficients solve Σ_{j ∈ prefix} e_j b_j = −w. The
/// canonical choice eliminates with variables ascending; the alternate
/// choice descending. Levels below 2 have no relation and return an empty
/// map.
pub fn e_coefficients(
    arr: &ArrangementFamily,
    e: &Elementary,
    h: usize,
    choice: EChoice,
) -> BTreeMap<usize, Rat> {
    if h <= 1 {
        return BTreeMap::new();
    }
    let basis = adapted_basis(arr, e);
    let block = &e.blocks()[h - 1];
    let mut w = vec![Rat::zero(); arr.k()];
    for (i, &j) in block.iter().enumerate() {
        let rest: Vec<usize> =
            block.iter().enumerate().filter(|&(p, _)| p != i).map(|(_, &x)| x).collect();
        let mut d = basis.aux_minor(&rest, h);
        if i % 2 == 1 {
            d = -d;
        }
        for (wi, ci) in w.iter_mut().zip(arr.column(j)) {
            *wi += &d * ci;
        }
    }
    let mut vars = e.prefix(h - 1);
    if choice == EChoice::Alternate {
        vars.reverse();
    }
    let system = arr.columns_matrix(&vars);
    let rhs: Vec<Rat> = w.into_iter().map(|x| -x).collect();
    let sol = system
        .solve(&rhs)
        .expect("the level relation always lies in the span of the earlier prefix");
    vars.into_iter().zip(sol).collect()
}

/// The auxiliary form f_{E,h} = Σ_i (−1)^{i+1} d_{J_h∖j_i;h} z_{j_i}
/// + Σ_{j ∈ prefix} e_j z_j.
pub fn f_aux(arr: &ArrangementFamily, e: &Elementary, h: usize, choice: EChoice) -> LinFormZ {
    assert!((1..=e.m()).contains(&h), "level {h} out of range");
    let basis = adapted_basis(arr, e);
    let block = &e.blocks()[h - 1];
    let mut f = LinFormZ::new();
    for (i, &j) in block.iter().enumerate() {
        let rest: Vec<usize> =
            block.iter().enumerate().filter(|&(p, _)| p != i).map(|(_, &x)| x).collect();
        let mut d = basis.aux_minor(&rest, h);
        if i % 2 == 1 {
            d = -d;
        }
        f.add_term(j, d);
    }
    for (j, ej) in e_coefficients(arr, e, h, choice) {
        f.add_term(j, ej);
    }
    f
}

/// The level-h prepotential
/// P_{E,h} = (∏_{j∈J_h} a_j) · f_{E,h}^{2λ_h} / ((2λ_h)! (∏_i d_{J_h∖j_i;h})²).
pub fn prepotential_first(
    arr: &ArrangementFamily,
    e: &Elementary,
    h: usize,
    choice: EChoice,
) -> PotentialExpr {
    let basis = adapted_basis(arr, e);
    let block = &e.blocks()[h - 1];
    let lam = block.len() - 1;
    let a_prod: Rat = block.iter().map(|&j| arr.weight(j).clone()).product();
    let mut d_prod = Rat::one();
    for i in 0..block.len() {
        let rest: Vec<usize> =
            block.iter().enumerate().filter(|&(p, _)| p != i).map(|(_, &x)| x).collect();
        d_prod *= basis.aux_minor(&rest, h);
    }
    assert!(!d_prod.is_zero(), "every leave-one-out auxiliary minor of a block is nonzero");
    let coeff = a_prod / factorial(2 * lam) / (&d_prod * &d_prod);
    PotentialExpr::term(coeff, vec![(f_aux(arr, e, h, choice), (2 * lam) as i64)], None)
}

fn prepotential_product(arr: &ArrangementFamily, e: &Elementary, choice: EChoice) -> PotentialExpr {
    (1..=e.m()).fold(PotentialExpr::constant(Rat::one()), |acc, h| {
        acc.mul(&prepotential_first(arr, e, h, choice))
    })
}

/// The potential of the first kind: P = Σ_E P_E / a(J_λ, J) over all
/// elementary tuples, with P_E = ∏_h P_{E,h}.
pub fn potential_first(arr: &ArrangementFamily, choice: EChoice) -> Result<PotentialExpr> {
    let mut p = PotentialExpr::zero();
    for e in enumerate_elementary(arr) {
        let w = subarr_weight(arr, &e)?;
        p = p.add(&prepotential_product(arr, &e, choice).scale(&w.recip()));
    }
    Ok(p)
}

/// The potential of the second kind:
/// Q = Σ_E (a_J / a(J_λ, J)) · ln(f_{E,1}) · P_E.
pub fn potential_second(arr: &ArrangementFamily, choice: EChoice) -> Result<PotentialExpr> {
    let aj = arr.total_weight();
    let mut q = PotentialExpr::zero();
    for e in enumerate_elementary(arr) {
        let w = subarr_weight(arr, &e)?;
        let f1 = f_aux(arr, &e, 1, choice);
        let log_factor = PotentialExpr::term(Rat::one(), Vec::new(), Some(f1));
        let pe = prepotential_product(arr, &e, choice);
        q = q.add(&pe.mul(&log_factor).scale(&(aj.clone() / w)));
    }
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arrangement::{collinear_k1, fig1};
    use crate::elementary::distinguished_elements;
    use crate::rat::rat;

    fn lf(terms: &[(usize, i64)]) -> LinFormZ {
        LinFormZ::from_terms(terms.iter().map(|&(v, c)| (v, int(c))))
    }

    fn e3(arr: &ArrangementFamily) -> Elementary {
        Elementary::new(arr, vec![vec![1, 2], vec![3, 4]]).unwrap()
    }

    /// Parallel pair in non-adjacent positions: g_1 = t_2, g_2 = t_1,
    /// g_3 = t_1 + t_2, g_4 = 2 t_2.
    fn interleaved() -> ArrangementFamily {
        ArrangementFamily::new(
            2,
            4,
            RatMatrix::from_rows(vec![
                vec![int(0), int(1), int(1), int(0)],
                vec![int(1), int(0), int(1), int(2)],
            ]),
            vec![int(1), int(2), int(3), int(5)],
            None,
        )
        .unwrap()
    }

    #[test]
    fn adapted_coordinates_on_the_figure_family() {
        let arr = fig1([1, 1, 1, 1]);
        let basis = adapted_basis(&arr, &e3(&arr));
        let expect = [
            (1, vec![int(1), int(0)]),
            (2, vec![int(1), int(0)]),
            (3, vec![int(0), int(-1)]),
            (4, vec![int(1), int(-1)]),
        ];
        for (j, col) in expect {
            assert_eq!(basis.c().column(j - 1), col, "c_{j}");
        }
    }

    #[test]
    fn adapted_coordinates_vanish_above_their_level() {
        for arr in [fig1([1, 2, 3, 5]), interleaved(), collinear_k1(&[1, 2, 3])] {
            for e in enumerate_elementary(&arr) {
                let basis = adapted_basis(&arr, &e);
                let mut cum = 0;
                for block in e.blocks() {
                    cum += block.len() - 1;
                    for &j in block {
                        for row in cum..arr.k() {
                            assert!(
                                basis.coeff(row, j).is_zero(),
                                "c_{j}^{} must vanish for {:?}",
                                row + 1,
                                e.blocks()
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn auxiliary_minors_on_the_figure_family() {
        let arr = fig1([1, 1, 1, 1]);
        let basis = adapted_basis(&arr, &e3(&arr));
        assert_eq!(basis.aux_minor(&[1], 1), int(1));
        assert_eq!(basis.aux_minor(&[2], 1), int(1));
        assert_eq!(basis.aux_minor(&[3], 2), int(-1));
        assert_eq!(basis.aux_minor(&[4], 2), int(-1));

        let e1 = Elementary::new(&arr, vec![vec![1, 3, 4]]).unwrap();
        let b1 = adapted_basis(&arr, &e1);
        assert_eq!(b1.aux_minor(&[3, 4], 1), int(1));
        assert_eq!(b1.aux_minor(&[1, 4], 1), int(-1));
        assert_eq!(b1.aux_minor(&[1, 3], 1), int(-1));
    }

    #[test]
    fn block_minor_factorization() {
        // d_K = ∏_h d_{K_h;h} for every distinguished element K.
        for arr in [fig1([1, 2, 3, 5]), interleaved()] {
            for e in enumerate_elementary(&arr) {
                let basis = adapted_basis(&arr, &e);
                for dist in distinguished_elements(&e) {
                    let mut prod = Rat::one();
                    let mut offset = 0;
                    for (h, block) in e.blocks().iter().enumerate() {
                        let lam = block.len() - 1;
                        prod *= basis.aux_minor(&dist[offset..offset + lam], h + 1);
                        offset += lam;
                    }
                    assert_eq!(arr.minor(&dist), prod, "K = {dist:?} in {:?}", e.blocks());
                }
            }
        }
    }

    #[test]
    fn e_coefficients_on_the_figure_family() {
        let arr = fig1([1, 1, 1, 1]);
        let e = e3(&arr);
        assert!(e_coefficients(&arr, &e, 1, EChoice::Canonical).is_empty());
        let canonical = e_coefficients(&arr, &e, 2, EChoice::Canonical);
        assert_eq!(canonical, BTreeMap::from([(1, int(-1)), (2, int(0))]));
        let alternate = e_coefficients(&arr, &e, 2, EChoice::Alternate);
        assert_eq!(alternate, BTreeMap::from([(1, int(0)), (2, int(-1))]));
    }

    #[test]
    fn auxiliary_forms() {
        let arr = fig1([1, 1, 1, 1]);
        let e1 = Elementary::new(&arr, vec![vec![1, 3, 4]]).unwrap();
        assert_eq!(f_aux(&arr, &e1, 1, EChoice::Canonical), lf(&[(1, 1), (3, 1), (4, -1)]));
        let e = e3(&arr);
        assert_eq!(f_aux(&arr, &e, 1, EChoice::Canonical), lf(&[(1, 1), (2, -1)]));
        assert_eq!(
            f_aux(&arr, &e, 2, EChoice::Canonical),
            lf(&[(1, -1), (3, -1), (4, 1)])
        );
        assert_eq!(
            f_aux(&arr, &e, 2, EChoice::Alternate),
            lf(&[(2, -1), (3, -1), (4, 1)])
        );
    }

    #[test]
    fn term_construction_normalizes_bases() {
        let t = PotentialExpr::term(int(1), vec![(lf(&[(1, 2), (2, -2)]), 2)], None);
        let expect = PotentialExpr::term(int(4), vec![(lf(&[(1, 1), (2, -1)]), 2)], None);
        assert_eq!(t, expect);
        // Exponents of equal bases merge; zero exponents vanish.
        let m = PotentialExpr::term(
            int(3),
            vec![(lf(&[(1, 1)]), 2), (lf(&[(1, 2)]), -2)],
            None,
        );
        assert_eq!(m.as_constant(), Some(rat(3, 4)));
    }

    #[test]
    fn derivative_of_a_logarithmic_square() {
        // d/dz_1 [(z_1−z_2)² ln(z_1−z_2)] = 2 (z_1−z_2) ln(z_1−z_2) + (z_1−z_2).
        let u = lf(&[(1, 1), (2, -1)]);
        let expr = PotentialExpr::term(int(1), vec![(u.clone(), 2)], Some(u.clone()));
        let d = expr.differentiate(1);
        let expect = PotentialExpr::term(int(2), vec![(u.clone(), 1)], Some(u.clone()))
            .add(&PotentialExpr::term(int(1), vec![(u.clone(), 1)], None));
        assert_eq!(d, expect);
        // A variable that does not occur differentiates to zero.
        assert!(expr.differentiate(3).is_zero());
    }

    #[test]
    fn fifth_derivative_of_the_quartic_log_term() {
        // d⁵/dz_1⁵ [z_1⁴ ln(z_1) / 4!] = z_1^{−1}.
        let u = lf(&[(1, 1)]);
        let expr = PotentialExpr::term(rat(1, 24), vec![(u.clone(), 4)], Some(u.clone()));
        let d5 = expr.derivative_multi(&[1, 1, 1, 1, 1]);
        assert_eq!(d5, PotentialExpr::term(int(1), vec![(u, -1)], None));
    }

    #[test]
    fn mixed_partials_commute() {
        let expr = PotentialExpr::term(
            rat(3, 7),
            vec![(lf(&[(1, 1), (2, 2)]), 3), (lf(&[(2, 1), (3, -1)]), 2)],
            Some(lf(&[(1, 1), (3, 1)])),
        );
        let ab = expr.differentiate(1).differentiate(2);
        let ba = expr.differentiate(2).differentiate(1);
        assert_eq!(ab, ba);
    }

    #[test]
    fn evaluation_and_poles() {
        let u = lf(&[(1, 1), (3, 1), (4, -1)]);
        let inv = PotentialExpr::term(int(1), vec![(u.clone(), -1)], None);
        let z = [int(0), int(1), int(0), int(2)];
        assert_eq!(inv.evaluate(&z).unwrap(), rat(-1, 2));
        let zq = [int(0), int(1), int(1), int(1)];
        assert!(matches!(inv.evaluate(&zq), Err(Error::Pole(_))));
        let logged = PotentialExpr::term(int(1), vec![], Some(u.clone()));
        assert!(matches!(logged.evaluate(&z), Err(Error::LogPresent)));
        // A vanishing base with positive exponent is just a zero term.
        let sq = PotentialExpr::term(int(5), vec![(u, 2)], None).add(&PotentialExpr::constant(int(7)));
        assert_eq!(sq.evaluate(&zq).unwrap(), int(7));
    }

    #[test]
    fn renderings_are_stable() {
        let u = lf(&[(1, 1), (2, -1)]);
        let expr = PotentialExpr::term(rat(1, 2), vec![(u.clone(), 2)], Some(u.clone()))
            .add(&PotentialExpr::constant(int(-3)));
        assert_eq!(
            expr.sexpr(),
            "(+ (* -3) (* 1/2 (^ (linform (1 1) (2 -1)) 2) (ln (linform (1 1) (2 -1)))))"
        );
        assert_eq!(expr.latex(), "-3 + \\tfrac{1}{2}\\ln(z_1-z_2)(z_1-z_2)^{2}");
        assert_eq!(expr.to_string(), "-3 + 1/2*ln(z_1-z_2)*(z_1-z_2)^2");
    }

    #[test]
    fn first_potential_matches_the_displayed_formula() {
        for weights in [[1, 1, 1, 1], [1, 2, 3, 5], [2, 1, 4, 3]] {
            let arr = fig1(weights);
            let [a1, a2, a3, a4] = weights.map(int);
            let aj = arr.total_weight();
            let f134 = lf(&[(1, 1), (3, 1), (4, -1)]);
            let f234 = lf(&[(2, 1), (3, 1), (4, -1)]);
            let f12 = lf(&[(1, 1), (2, -1)]);
            let expect = PotentialExpr::term(
                &a1 * &a3 * &a4 / (&aj * int(24)),
                vec![(f134.clone(), 4)],
                None,
            )
            .add(&PotentialExpr::term(
                &a2 * &a3 * &a4 / (&aj * int(24)),
                vec![(f234, 4)],
                None,
            ))
            .add(&PotentialExpr::term(
                &a1 * &a2 * &a3 * &a4 / (&aj * (&a3 + &a4) * int(4)),
                vec![(f12, 2), (f134, 2)],
                None,
            ));
            let p = potential_first(&arr, EChoice::Canonical).unwrap();
            assert_eq!(p, expect, "weights {weights:?}");
        }
    }

    #[test]
    fn second_potential_matches_the_displayed_formula() {
        let arr = fig1([1, 2, 3, 5]);
        let [a1, a2, a3, a4] = [int(1), int(2), int(3), int(5)];
        let f134 = lf(&[(1, 1), (3, 1), (4, -1)]);
        let f234 = lf(&[(2, 1), (3, 1), (4, -1)]);
        let f12 = lf(&[(1, 1), (2, -1)]);
        let expect = PotentialExpr::term(
            &a1 * &a3 * &a4 / int(24),
            vec![(f134.clone(), 4)],
            Some(f134.clone()),
        )
        .add(&PotentialExpr::term(
            &a2 * &a3 * &a4 / int(24),
            vec![(f234.clone(), 4)],
            Some(f234),
        ))
        .add(&PotentialExpr::term(
            &a1 * &a2 * &a3 * &a4 / ((&a3 + &a4) * int(4)),
            vec![(f12.clone(), 2), (f134, 2)],
            Some(f12),
        ));
        let q = potential_second(&arr, EChoice::Canonical).unwrap();
        assert_eq!(q, expect);
    }

    #[test]
    fn line_potential_is_the_pairwise_square_sum() {
        let line = collinear_k1(&[1, 2, 3]);
        let aj = int(6);
        let mut expect = PotentialExpr::zero();
        for (i, j, w) in [(1usize, 2usize, 2i64), (1, 3, 3), (2, 3, 6)] {
            expect = expect.add(&PotentialExpr::term(
                int(w) / (&aj * int(2)),
                vec![(lf(&[(i, 1), (j, -1)]), 2)],
                None,
            ));
        }
        assert_eq!(potential_first(&line, EChoice::Canonical).unwrap(), expect);
    }

    #[test]
    fn balanced_weights_are_rejected() {
        let arr = fig1([1, 1, -1, 1]);
        assert!(matches!(
            potential_first(&arr, EChoice::Canonical),
            Err(Error::Balanced(_))
        ));
        let line = collinear_k1(&[1, -1]);
        assert!(matches!(
            potential_second(&line, EChoice::Canonical),
            Err(Error::Balanced(_))
        ));
    }

    #[test]
    fn block_derivative_pattern() {
        // 2λ_h derivatives of f^{2λ}/((2λ)! (∏ d)²) in the directions
        // z_{j_2}, …, z_{j_{λ+1}} and z_{J_h∖j_s} give
        // (−1)^{s+1} / (d_{J_h∖j_1;h} d_{J_h∖j_s;h}).
        for arr in [fig1([1, 2, 3, 5]), interleaved()] {
            for e in enumerate_elementary(&arr) {
                let basis = adapted_basis(&arr, &e);
                for (h, block) in e.blocks().iter().enumerate() {
                    let h = h + 1;
                    let lam = block.len() - 1;
                    let leave_out = |i: usize| -> Vec<usize> {
                        block.iter().enumerate().filter(|&(p, _)| p != i).map(|(_, &x)| x).collect()
                    };
                    let mut d_prod = Rat::one();
                    for i in 0..block.len() {
                        d_prod *= basis.aux_minor(&leave_out(i), h);
                    }
                    let f = f_aux(&arr, &e, h, EChoice::Canonical);
                    let expr = PotentialExpr::term(
                        (factorial(2 * lam) * &d_prod * &d_prod).recip(),
                        vec![(f, (2 * lam) as i64)],
                        None,
                    );
                    for s in 0..block.len() {
                        let mut dirs = block[1..].to_vec();
                        dirs.extend(leave_out(s));
                        let got = expr.derivative_multi(&dirs);
                        let d1 = basis.aux_minor(&leave_out(0), h);
                        let ds = basis.aux_minor(&leave_out(s), h);
                        let mut want = (d1 * ds).recip();
                        if s % 2 == 1 {
                            want = -want;
                        }
                        assert_eq!(got.as_constant(), Some(want), "block {block:?} level {h} s={s}");
                    }
                }
            }
        }
    }

    #[test]
    fn potential_satisfies_the_direction_relations() {
        // Σ_j d_{(j,S)} ∂P/∂z_j = 0 for every independent (k−1)-subset S,
        // and the same for Q.
        for arr in [fig1([1, 2, 3, 5]), interleaved()] {
            let p = potential_first(&arr, EChoice::Canonical).unwrap();
            let q = potential_second(&arr, EChoice::Canonical).unwrap();
            for s in arr.independent_km1_subsets() {
                let mut sum_p = PotentialExpr::zero();
                let mut sum_q = PotentialExpr::zero();
                for j in 1..=arr.n() {
                    if s.contains(&j) {
                        continue;
                    }
                    let mut tuple = vec![j];
                    tuple.extend_from_slice(&s);
                    let d = arr.minor(&tuple);
                    if d.is_zero() {
                        continue;
                    }
                    sum_p = sum_p.add(&p.differentiate(j).scale(&d));
                    sum_q = sum_q.add(&q.differentiate(j).scale(&d));
                }
                assert!(sum_p.is_zero(), "P relation fails at S = {s:?}");
                assert!(sum_q.is_zero(), "Q relation fails at S = {s:?}");
            }
        }
    }

    #[test]
    fn e_choice_changes_the_potential_but_not_its_top_derivatives() {
        let arr = fig1([1, 2, 3, 5]);
        let pc = potential_first(&arr, EChoice::Canonical).unwrap();
        let pa = potential_first(&arr, EChoice::Alternate).unwrap();
        assert_ne!(pc, pa, "the two e-solutions give different expressions");
        for (i, l) in [([1, 3], [2, 4]), ([3, 4], [3, 4]), ([1, 4], [2, 3])] {
            let dirs: Vec<usize> = i.iter().chain(l.iter()).copied().collect();
            let dc = pc.derivative_multi(&dirs);
            let da = pa.derivative_multi(&dirs);
            assert_eq!(dc, da, "2k-th derivative at I={i:?}, L={l:?}");
            assert!(dc.as_constant().is_some(), "top derivatives of P are constants");
        }
    }
}
