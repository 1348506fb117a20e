//! Exact rational scalars.
//!
//! Every scalar in the library is an arbitrary-precision rational in reduced
//! form (gcd 1, positive denominator); machine integers are never used for
//! arithmetic, since minors and derivative coefficients overflow 64 bits
//! quickly. Rationals serialize as `"p/q"`, or `"p"` when the denominator
//! is 1, in all JSON interfaces.

use crate::error::{Error, Result};
use num::{BigInt, Zero};

/// Reduced arbitrary-precision rational. `num::BigRational` already keeps
/// the invariants this library needs: always reduced, denominator positive,
/// exact arithmetic with no rounding anywhere.
pub type Rat = num::BigRational;

/// Convenience constructor from machine integers.
pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

/// Convenience constructor for integer values.
pub fn int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Parses `"p/q"` or `"p"` (optionally signed, surrounding whitespace
/// ignored). Rejects zero denominators and anything else that is not a
/// plain integer fraction.
pub fn parse_rat(s: &str) -> Result<Rat> {
    let bad = || Error::Malformed(format!("invalid rational {s:?} (expected \"p\" or \"p/q\")"));
    let t = s.trim();
    let (p, q) = match t.split_once('/') {
        Some((p, q)) => (p.trim(), q.trim()),
        None => (t, "1"),
    };
    let p: BigInt = p.parse().map_err(|_| bad())?;
    let q: BigInt = q.parse().map_err(|_| bad())?;
    if q.is_zero() {
        return Err(bad());
    }
    Ok(Rat::new(p, q))
}

/// Formats as `"p/q"`, or `"p"` for integer values. Inverse of `parse_rat`
/// on canonical forms (the denominator is always positive).
pub fn rat_to_string(r: &Rat) -> String {
    r.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_accepts_integers_and_fractions() {
        assert_eq!(parse_rat("7").unwrap(), int(7));
        assert_eq!(parse_rat("-3/6").unwrap(), rat(-1, 2));
        assert_eq!(parse_rat(" 10/4 ").unwrap(), rat(5, 2));
        assert_eq!(parse_rat("4/-6").unwrap(), rat(-2, 3));
    }

    #[test]
    fn parse_rejects_garbage() {
        for s in ["", "1/0", "x", "1/2/3", "1.5", "--2"] {
            assert!(parse_rat(s).is_err(), "{s:?} should be rejected");
        }
    }

    #[test]
    fn format_is_canonical_and_round_trips() {
        assert_eq!(rat_to_string(&rat(4, 2)), "2");
        assert_eq!(rat_to_string(&rat(-1, 2)), "-1/2");
        assert_eq!(rat_to_string(&rat(1, -2)), "-1/2");
        let v = rat(22, -7);
        assert_eq!(parse_rat(&rat_to_string(&v)).unwrap(), v);
    }
}
