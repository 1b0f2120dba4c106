use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A geometric or physical parameter is outside its valid domain.
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid window too small: {0}")]
    WindowTooSmall(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("mode {order} is cut off for this slab")]
    Cutoff { order: usize },

    #[error("eigensolver did not converge after {iterations} restarts (last residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("expected at least {expected} guided modes, found {found}")]
    TooFewModes { expected: usize, found: usize },

    #[error("coupled-mode pairing failed: {0}")]
    Pairing(String),

    #[error("coupling table does not cover gap {gap_nm} nm (table starts at {table_min_nm} nm)")]
    TableCoverage { gap_nm: f64, table_min_nm: f64 },

    #[error("no coincidence events possible: {0}")]
    NoCoincidence(String),

    #[error("objective is not finite at x = {x}")]
    NonFinite { x: f64 },

    #[error("empty data: {0}")]
    EmptyData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    /// True when the error stems from user configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::WindowTooSmall(_) | Error::GridMismatch(_) | Error::Config(_)
        )
    }
}
