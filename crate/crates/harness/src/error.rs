use std::path::PathBuf;

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;

/// Harness failures, grouped by process exit code.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("runtime failure: {0}")]
    Runtime(String),
    #[error("I/O error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) => 2,
            HarnessError::Data(_) => 3,
            HarnessError::Runtime(_) | HarnessError::Io { .. } => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<simplicial::Error> for HarnessError {
    fn from(e: simplicial::Error) -> Self {
        match e {
            simplicial::Error::Data { .. } | simplicial::Error::Io { .. } => HarnessError::Data(e.to_string()),
            other => HarnessError::Runtime(other.to_string()),
        }
    }
}
