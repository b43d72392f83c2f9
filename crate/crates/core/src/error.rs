use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid dimension {0}: must be at least 1")]
    InvalidDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    /// Every candidate in a selection step had zero density.
    #[error("no candidate has finite log density")]
    ImpossibleState,

    #[error("effective sample size is undefined: {0}")]
    UndefinedEss(&'static str),

    #[error("invalid initial state: {0}")]
    InvalidStart(String),

    #[error("{}", format_data_error(.path, *.row, .column.as_deref(), .message))]
    Data {
        path: PathBuf,
        row: Option<usize>,
        column: Option<String>,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn format_data_error(
    path: &std::path::Path,
    row: Option<usize>,
    column: Option<&str>,
    message: &str,
) -> String {
    let mut out = path.display().to_string();
    if let Some(row) = row {
        out.push_str(&format!(", row {row}"));
    }
    if let Some(column) = column {
        out.push_str(&format!(", column `{column}`"));
    }
    out.push_str(": ");
    out.push_str(message);
    out
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn dim_mismatch(what: &str, expected: usize, got: usize) -> Self {
        Error::InvalidArgument(format!("{what}: expected dimension {expected}, got {got}"))
    }
}
