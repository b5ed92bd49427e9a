use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("probabilities sum to {sum}, not 1")]
    NormalizationFailure { sum: f64 },

    #[error("invalid CDF: {0}")]
    InvalidCdf(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("capacity {capacity} leaves no finite characteristic time for a catalog of {catalog} files")]
    CapacityExceedsCatalog { capacity: f64, catalog: usize },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("utility domain error: {0}")]
    Domain(String),

    #[error("infeasible split: {0}")]
    InfeasibleSplit(String),

    #[error("controller stalled at iteration {iteration}: sizes unchanged but not converged")]
    Stalled { iteration: usize },

    #[error("exact LRU oracle supports at most {max} files, got {n}")]
    TooLarge { n: usize, max: usize },
}
