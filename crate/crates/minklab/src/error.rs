//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// The column matrix is numerically singular under the scale-invariant
    /// rank test `|det| >= 1e-10 * (max column norm)^d`.
    #[error("degenerate basis: |det| = {det:.3e} is below the rank tolerance {tol:.3e}")]
    DegenerateBasis { det: f64, tol: f64 },

    /// An operation was asked to run above its supported dimension.
    #[error("dimension {dim} exceeds the limit {max} for {op}")]
    DimensionTooLarge {
        dim: usize,
        max: usize,
        op: &'static str,
    },

    /// The matrix handed to an SL(d) routine does not have determinant 1.
    #[error("matrix is not unimodular: det = {det}")]
    NotUnimodular { det: f64 },

    /// A parameter fell outside its documented range.
    #[error("invalid range: {0}")]
    InvalidRange(String),

    /// An exact enumeration would visit more nodes than the configured budget.
    #[error("enumeration budget exceeded: needed more than {budget} nodes")]
    EnumerationBudgetExceeded { budget: usize },

    /// Too few grid points kept enough effective hits to fit an exponent.
    #[error("insufficient effective mass: only {usable} usable grid points, need {need}")]
    InsufficientMass { usable: usize, need: usize },

    /// A hard mathematical invariant failed on concrete data. This signals a
    /// bug (or a broken input file), never a statistical fluctuation.
    #[error("invariant violated: {0}")]
    InvariantViolation(String),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
