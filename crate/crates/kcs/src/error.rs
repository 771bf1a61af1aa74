use std::path::PathBuf;

/// Crate-wide error type. The CLI maps variants onto exit codes:
/// data problems exit 1, configuration problems exit 2.
#[derive(Debug, thiserror::Error)]
pub enum KcsError {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("parse error at record {index}: {message}")]
    Parse { index: usize, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("generation error: {message}; input: {input}")]
    Generation { message: String, input: String },
}

impl KcsError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        KcsError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI contract.
    pub fn exit_code(&self) -> i32 {
        match self {
            KcsError::Config(_) => 2,
            _ => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, KcsError>;
