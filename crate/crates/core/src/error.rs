use thiserror::Error;

/// Errors raised by the pricing engine and the surrogate pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("Dupire denominator {denominator:e} is not positive at k = {k}, T = {t} (butterfly arbitrage)")]
    ButterflyViolation { k: f64, t: f64, denominator: f64 },

    #[error("maturity must be positive")]
    ZeroMaturity,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge after {intervals} intervals (last change {change:e})")]
    IntegrationNonConvergence { intervals: usize, change: f64 },

    #[error("singular tridiagonal system at row {row}")]
    SingularMatrix { row: usize },

    #[error("PSOR did not converge in {iterations} sweeps (residual {residual:e})")]
    PsorNonConvergence { iterations: usize, residual: f64 },

    #[error("spot {spot} is outside the grid interior [{lo}, {hi}]")]
    SpotOutOfGrid { spot: f64, lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("kernel matrix is not positive definite even with jitter {jitter:e}")]
    Factorization { jitter: f64 },

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error("{dropped} of {requested} records dropped ({rate:.1}% > 5%); first reason: {first_reason}")]
    ExcessiveDrops {
        dropped: usize,
        requested: usize,
        rate: f64,
        first_reason: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable identifier, used by the CLI for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::ButterflyViolation { .. } => "butterfly_violation",
            Error::ZeroMaturity => "zero_maturity",
            Error::Domain(_) => "domain",
            Error::IntegrationNonConvergence { .. } => "integration_non_convergence",
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::PsorNonConvergence { .. } => "psor_non_convergence",
            Error::SpotOutOfGrid { .. } => "spot_out_of_grid",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Factorization { .. } => "factorization",
            Error::DegenerateData(_) => "degenerate_data",
            Error::Schema(_) => "schema",
            Error::ExcessiveDrops { .. } => "excessive_drops",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
