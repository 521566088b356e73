//! Error type shared across the toolkit.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter violates its domain constraints (e.g. alpha outside (1,2)).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A run configuration is inconsistent (window too small, missing section, ...).
    #[error("configuration error: {0}")]
    Config(String),

    /// Adaptive quadrature hit the refinement cap before reaching its tolerance.
    #[error("quadrature did not converge in {context}: error {error:.3e} > tolerance {tolerance:.3e}")]
    QuadratureNonConvergence {
        context: &'static str,
        error: f64,
        tolerance: f64,
    },

    /// A numeric intermediate left the representable range or turned non-finite.
    #[error("numerical failure in {context}: {detail}")]
    Numerical {
        context: &'static str,
        detail: String,
    },

    /// All Charlier coefficients of a subordinator fell below the rank tolerance.
    #[error("Charlier rank undefined: coefficients k=1..{max_order} all below tolerance")]
    UndefinedRank { max_order: usize },

    /// Mehler series cannot be truncated reliably because the correlation is too close to 1.
    #[error("Mehler expansion ill-conditioned: correlation {rho} >= 1 - 1e-6")]
    IllConditioned { rho: f64 },

    /// A statistic is undefined on the sample (e.g. Hill estimator on tied values).
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    /// The Hopf–Cole denominator fell below the degeneracy threshold.
    #[error("degenerate Hopf-Cole denominator: |den| = {denominator:.3e} below {threshold:.3e}")]
    DegenerateDenominator { denominator: f64, threshold: f64 },

    /// A run artifact failed its recorded content hash.
    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
