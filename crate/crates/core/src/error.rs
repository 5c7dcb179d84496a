use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("edge list parse error on line {line}: {reason}")]
    EdgeListParse { line: usize, reason: String },

    #[error("non-finite weights at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("unstable recursion: spectral radius {spectral_radius:.6} >= 1")]
    Unstable { spectral_radius: f64 },

    #[error("singular matrix in {0}")]
    Singular(&'static str),

    #[error("negative coefficient variance {value:e} at node {node}, tap {tap}")]
    NegativeVariance { node: usize, tap: usize, value: f64 },

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("problem too large for {what}: M*N = {size} exceeds {limit}")]
    TooLarge {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("theory is only available for adapt-then-combine variants")]
    UnsupportedTheory,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
