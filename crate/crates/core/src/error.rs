use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors raised anywhere in the clustering pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Shape or layout problem in the input (ragged rows, dimension mismatch).
    #[error("structural error: {0}")]
    Structural(String),

    #[error("column '{column}' has no usable values")]
    UnrecoverableColumn { column: String },

    #[error("cannot decode value {value} in column '{column}'")]
    Decode { column: String, value: f64 },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("unsupported input: {0}")]
    UnsupportedInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the content of the input data rather than
    /// by the environment or by invalid parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Csv(_)
                | Error::Json(_)
                | Error::Structural(_)
                | Error::UnrecoverableColumn { .. }
                | Error::Decode { .. }
                | Error::Numeric(_)
                | Error::UnsupportedInput(_)
        )
    }
}
