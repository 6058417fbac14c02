use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid specification: {0}")]
    InvalidSpec(String),
    #[error("rank-deficient reference sources: {0}")]
    RankDeficient(String),
    #[error("report export failed: {0}")]
    Report(String),
    #[error("external separator failed: {0}")]
    External(String),
    #[error(transparent)]
    Nlp(#[from] adis_nlp::NlpError),
    #[error(transparent)]
    Core(#[from] adis_core::CoreError),
}

pub type Result<T> = std::result::Result<T, BenchError>;
