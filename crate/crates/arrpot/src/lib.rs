//! Exact arithmetic for the Frobenius-like algebra attached to a weighted
//! family of hyperplane arrangements with normal crossings.
//!
//! The crate models a family A(z) of n hyperplanes g_j + z_j = 0 in ℚ^k,
//! builds the flag-space description of its singular vectors, enumerates
//! elementary subarrangements, assembles the potentials of the first and
//! second kind, and realizes the algebra of functions on the critical set
//! through residue forms p_j = [a_j / f_j]. Everything is computed over
//! arbitrary-precision rationals; there are no floating-point tolerances
//! anywhere.
//!
//! Module layout follows the dependency order: [`rat`] and [`linalg`]
//! provide exact linear algebra, [`linform`] the linear forms in z,
//! [`arrangement`] the family and its matroid data, [`flag`] the flag
//! spaces and projection oracle, [`elementary`] the subarrangement
//! combinatorics and singular elements, [`potential`] the symbolic
//! potentials and their derivatives, and [`algebra`] the residue algebra
//! together with the identity-verification suite.

pub mod algebra;
pub mod arrangement;
pub mod elementary;
pub mod error;
pub mod flag;
pub mod linalg;
pub mod linform;
pub mod potential;
pub mod rat;

pub use algebra::{verify_family, AlgebraContext, CheckResult, FailureRecord, Pairing};
pub use arrangement::ArrangementFamily;
pub use error::{Error, Result};
pub use flag::FlagVector;
pub use linalg::RatMatrix;
pub use linform::LinFormZ;
pub use potential::{EChoice, PotentialExpr};
pub use rat::Rat;
