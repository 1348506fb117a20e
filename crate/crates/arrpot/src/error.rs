//! Error type shared by every module.
//!
//! The variants mirror the failure classes the CLI distinguishes: malformed
//! input, a base point on the discriminant, balanced weights, and evaluation
//! problems inside the expression engine. Identity failures are never errors;
//! they are report entries produced by the verification suite.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Structurally invalid input: bad dimensions, a zero weight, a zero or
    /// non-spanning coefficient matrix, an unparsable rational, and so on.
    #[error("malformed input: {0}")]
    Malformed(String),

    /// The base point lies in the discriminant; the payload names a witness
    /// (a circuit whose hyperplanes become concurrent).
    #[error("base point lies in the discriminant: {0}")]
    Discriminant(String),

    /// The weights are balanced (some dense edge has total weight zero); the
    /// payload names the offending flat or vanishing subarrangement weight.
    #[error("balanced weights: {0}")]
    Balanced(String),

    /// A negative power of a linear form was evaluated at a zero of that
    /// form. The payload names the form; this is a discriminant witness.
    #[error("pole during evaluation: linear form {0} vanishes at the base point")]
    Pole(String),

    /// An expression still carrying a logarithm was evaluated; logarithms
    /// must be differentiated away first.
    #[error("expression still contains a logarithm; differentiate before evaluating")]
    LogPresent,
}

pub type Result<T> = std::result::Result<T, Error>;
