use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),

    #[error("matrix is not positive definite (largest eigenvalue {largest:e})")]
    NotPositiveDefinite { largest: f64 },

    #[error("numerical range exceeded: {0}")]
    NumericalRange(String),

    #[error("objective returned NaN for candidate {index}")]
    ObjectiveNaN { index: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate variance at step {step} (v = {v:e})")]
    DegenerateVariance { step: u64, v: f64 },

    #[error("iteration {t}: {source}")]
    AtIteration {
        t: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_iteration(self, t: u64) -> Self {
        match self {
            e @ Error::AtIteration { .. } => e,
            other => Error::AtIteration {
                t,
                source: Box::new(other),
            },
        }
    }

    /// The innermost error, skipping iteration annotations.
    pub fn root(&self) -> &Error {
        match self {
            Error::AtIteration { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
