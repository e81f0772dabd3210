use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("non-finite objective at iteration {iteration}: {value}")]
    Diverged { iteration: usize, value: f64 },

    #[error("rank-deficient person matrix: centered theta has rank {rank} < {n_factors} (dimension {deficient} is degenerate)")]
    RankDeficient { rank: usize, n_factors: usize, deficient: usize },

    #[error("thread pool: {0}")]
    ThreadPool(String),
}
