use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch for {what}: got {got}, expected {expected}")]
    ShapeMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("unsupported size: {0}")]
    UnsupportedSize(String),
    #[error("graph construction failed: {0}")]
    Construction(String),
    #[error("format error at byte {offset}: {msg}")]
    Format { offset: u64, msg: String },
    #[error("parse error at row {row}, column {col}: {msg}")]
    Parse { row: usize, col: usize, msg: String },
    #[error("undefined quantity: {0}")]
    Undefined(String),
    #[error("enumeration budget exceeded: {0}")]
    TooLarge(String),
    #[error("numerical divergence: {0}")]
    Divergence(String),
    #[error("model/data kind mismatch: {0}")]
    KindMismatch(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::ShapeMismatch {
            what,
            got,
            expected,
        });
    }
    Ok(())
}
