use thiserror::Error;

#[derive(Debug, Error)]
pub enum NlpError {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid bounds at index {index}: lower {lower} > upper {upper}")]
    InvalidBounds {
        index: usize,
        lower: f64,
        upper: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("trace export failed: {0}")]
    Export(String),
}

pub type Result<T> = std::result::Result<T, NlpError>;

pub(crate) fn check_len(context: &str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(NlpError::DimensionMismatch {
            context: context.to_string(),
            expected,
            actual,
        });
    }
    Ok(())
}
