//! Sparse linear forms in the translation variables z_1, …, z_n.
//!
//! These have no constant part: a form is a finite map from 1-based variable
//! index to nonzero rational coefficient. They appear as circuit forms
//! f_C(z), as the auxiliary forms f_{E,h}, and as the factor bases of every
//! potential term.

use crate::rat::{rat_to_string, Rat};
use num::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinFormZ {
    /// 1-based variable index → nonzero coefficient.
    coeffs: BTreeMap<usize, Rat>,
}

impl LinFormZ {
    pub fn new() -> Self {
        LinFormZ { coeffs: BTreeMap::new() }
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (usize, Rat)>) -> Self {
        let mut f = Self::new();
        for (v, c) in terms {
            f.add_term(v, c);
        }
        f
    }

    /// Adds `c·z_v`, dropping the entry if the total coefficient cancels.
    pub fn add_term(&mut self, var: usize, c: Rat) {
        assert!(var >= 1, "variables are 1-based");
        let total = self.coeff(var) + c;
        if total.is_zero() {
            self.coeffs.remove(&var);
        } else {
            self.coeffs.insert(var, total);
        }
    }

    pub fn coeff(&self, var: usize) -> Rat {
        self.coeffs.get(&var).cloned().unwrap_or_else(Rat::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Rat)> {
        self.coeffs.iter().map(|(&v, c)| (v, c))
    }

    pub fn vars(&self) -> impl Iterator<Item = usize> + '_ {
        self.coeffs.keys().copied()
    }

    pub fn scale(&self, c: &Rat) -> Self {
        if c.is_zero() {
            return Self::new();
        }
        LinFormZ { coeffs: self.coeffs.iter().map(|(&v, w)| (v, w * c)).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (v, c) in other.iter() {
            out.add_term(v, c.clone());
        }
        out
    }

    /// Value at a base point (slice of length ≥ max variable, 0-indexed so
    /// z_v reads `z[v-1]`).
    pub fn evaluate(&self, z: &[Rat]) -> Rat {
        self.iter()
            .map(|(v, c)| {
                assert!(v <= z.len(), "base point has no coordinate z_{v}");
                c * &z[v - 1]
            })
            .sum()
    }

    /// Primitive normal form: the unique positive rational s with
    /// `self = s · primitive`, where `primitive` has coprime integer
    /// coefficients and its lowest-index coefficient is positive. Returns
    /// `(primitive, s)`. The zero form returns itself with s = 1.
    pub fn normalize_primitive(&self) -> (Self, Rat) {
        if self.is_zero() {
            return (self.clone(), Rat::one());
        }
        // s0 = gcd of numerators / lcm of denominators, times the sign of
        // the lowest-index coefficient.
        let mut num_gcd = num::BigInt::zero();
        let mut den_lcm = num::BigInt::one();
        for (_, c) in self.iter() {
            num_gcd = num::Integer::gcd(&num_gcd, c.numer());
            den_lcm = num::Integer::lcm(&den_lcm, c.denom());
        }
        let mut s = Rat::new(num_gcd, den_lcm);
        let first = self.coeffs.values().next().expect("nonzero form");
        if first.is_negative() {
            s = -s;
        }
        let inv = s.recip();
        (self.scale(&inv), s)
    }

    /// LaTeX rendering, e.g. `z_1+z_3-z_4` or `2z_1-\tfrac{1}{2}z_{10}`.
    pub fn latex(&self) -> String {
        let mut out = String::new();
        for (i, (v, c)) in self.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if neg {
                out.push('-');
            } else if i > 0 {
                out.push('+');
            }
            if !abs.is_one() {
                if abs.denom().is_one() {
                    out.push_str(&abs.to_string());
                } else {
                    out.push_str(&format!("\\tfrac{{{}}}{{{}}}", abs.numer(), abs.denom()));
                }
            }
            if v < 10 {
                out.push_str(&format!("z_{v}"));
            } else {
                out.push_str(&format!("z_{{{v}}}"));
            }
        }
        out
    }

    /// S-expression atom, e.g. `(linform (1 1) (3 1) (4 -1))`.
    pub fn sexpr(&self) -> String {
        let body: Vec<String> =
            self.iter().map(|(v, c)| format!("({} {})", v, rat_to_string(c))).collect();
        format!("(linform {})", body.join(" "))
    }

    /// Proportionality test: returns `Some(c)` when `self = c · other`.
    pub fn proportional_to(&self, other: &Self) -> Option<Rat> {
        if self.is_zero() || other.is_zero() {
            return if self.is_zero() && other.is_zero() { Some(Rat::one()) } else { None };
        }
        let (pa, sa) = self.normalize_primitive();
        let (pb, sb) = other.normalize_primitive();
        (pa == pb).then(|| sa / sb)
    }
}

impl Default for LinFormZ {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for LinFormZ {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (v, c)) in self.iter().enumerate() {
            let neg = c.is_negative();
            let abs = c.abs();
            if neg {
                write!(f, "-")?;
            } else if i > 0 {
                write!(f, "+")?;
            }
            if !abs.is_one() {
                write!(f, "{abs}*")?;
            }
            write!(f, "z_{v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::{int, rat};

    #[test]
    fn terms_cancel_and_zero_entries_are_dropped() {
        let mut f = LinFormZ::new();
        f.add_term(2, int(3));
        f.add_term(2, int(-3));
        assert!(f.is_zero());
    }

    #[test]
    fn primitive_normalization() {
        let f = LinFormZ::from_terms([(1, rat(-2, 3)), (3, rat(4, 3))]);
        let (p, s) = f.normalize_primitive();
        assert_eq!(p, LinFormZ::from_terms([(1, int(1)), (3, int(-2))]));
        assert_eq!(s, rat(-2, 3));
        assert_eq!(p.scale(&s), f);
    }

    #[test]
    fn evaluation_and_display() {
        let f = LinFormZ::from_terms([(1, int(1)), (3, int(1)), (4, int(-1))]);
        let z = [int(0), int(1), int(0), int(2)];
        assert_eq!(f.evaluate(&z), int(-2));
        assert_eq!(f.to_string(), "z_1+z_3-z_4");
        assert_eq!(f.latex(), "z_1+z_3-z_4");
        assert_eq!(f.sexpr(), "(linform (1 1) (3 1) (4 -1))");
    }

    #[test]
    fn proportionality_detects_scale() {
        let f = LinFormZ::from_terms([(1, int(2)), (2, int(-2))]);
        let g = LinFormZ::from_terms([(1, int(-1)), (2, int(1))]);
        assert_eq!(f.proportional_to(&g), Some(int(-2)));
        let h = LinFormZ::from_terms([(1, int(1)), (2, int(1))]);
        assert_eq!(f.proportional_to(&h), None);
    }
}
