use alloc::string::String;
use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input lengths or shapes disagree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// The leverage-constraint multiplier could not be bracketed.
    #[error(
        "no admissible multiplier in [{mu_lo}, {mu_hi}]: slack {slack_lo} at lower end, {slack_hi} at upper end"
    )]
    NoAdmissibleMultiplier {
        mu_lo: f64,
        mu_hi: f64,
        slack_lo: f64,
        slack_hi: f64,
    },

    /// A root-finder or optimizer stopped without meeting its tolerance.
    #[error("solver failure: {0}")]
    SolverFailure(String),

    /// No rotation angle satisfies the sign restrictions.
    #[error("identification failure: no admissible rotation; scanned sign pattern {pattern}")]
    Identification { pattern: String },

    /// A regressor of interest is collinear with the rest of the design.
    #[error("collinear regressors: {0}")]
    Collinear(String),

    /// Too few usable observations after truncation or deletion.
    #[error("insufficient observations: {0}")]
    InsufficientData(String),

    /// Operation requires a balanced panel.
    #[error("The VAR requires a balanced panel ({0}); use local projections for unbalanced data")]
    Unbalanced(String),

    /// A timestamp or key falls outside the supplied range.
    #[error("out of range: {0}")]
    Range(String),

    /// Alternating projections did not reach the tolerance.
    #[error("fixed-effect absorption did not converge after {sweeps} sweeps (last delta {last_delta:e})")]
    NotConverged { sweeps: usize, last_delta: f64 },

    /// Finite-difference step crossed a regime boundary.
    #[error("step too large: {0}")]
    StepTooLarge(String),

    /// Input carries no usable variation.
    #[error("degenerate input: {0}")]
    Degenerate(String),
}

pub type Result<T> = core::result::Result<T, Error>;

#[macro_export]
#[doc(hidden)]
macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::Error::$variant(alloc::format!($($arg)*)))
    };
}
