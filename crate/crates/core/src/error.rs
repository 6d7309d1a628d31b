use thiserror::Error;

#[derive(Debug, Error)]
pub enum HurstError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error(
        "tolerance {requested:e} not achieved: last change {achieved:e} at radius {radius} (cap {cap})"
    )]
    ToleranceNotAchieved {
        requested: f64,
        achieved: f64,
        radius: usize,
        cap: usize,
    },

    #[error("circulant embedding failed: smallest eigenvalue {min_eigenvalue:e}")]
    EmbeddingFailure { min_eigenvalue: f64 },

    #[error("size error: {0}")]
    Size(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<HurstError>,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, HurstError>;

pub(crate) fn check_hurst(h: f64) -> Result<()> {
    if h.is_finite() && h > 0.0 && h < 1.0 {
        Ok(())
    } else {
        Err(HurstError::Domain(format!(
            "Hurst coefficient must lie in (0, 1), got {h}"
        )))
    }
}
