use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite: pivot {pivot:e} at index {index}")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("symmetric eigensolver did not converge within {max_iter} iterations")]
    ConvergenceFailure { max_iter: usize },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix must have dimension at least 1")]
    EmptyMatrix,

    #[error("invalid correlation triple (rho12={rho12}, rho13={rho13}, rho23={rho23}): {reason}")]
    InvalidCorrelation {
        rho12: f64,
        rho13: f64,
        rho23: f64,
        reason: String,
    },

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid neighbor set: {0}")]
    InvalidNeighbors(String),

    #[error("invalid locations: {0}")]
    InvalidLocations(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wraps the error with a description of the configuration that produced it.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// The innermost error, with all context layers stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures of the numerical kind (factorization, convergence),
    /// as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::NotPositiveDefinite { .. } | Error::ConvergenceFailure { .. }
        )
    }
}
