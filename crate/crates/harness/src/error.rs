use std::path::Path;

/// Harness failures, grouped by exit code.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: String,
        line: u64,
        message: String,
    },
    #[error("validation error in {path}: {message}")]
    Validation { path: String, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario {scenario}: run(s) {} failed; first failure: {first}", join_indices(.indices))]
    RunsFailed {
        scenario: String,
        indices: Vec<usize>,
        first: String,
    },
    #[error(transparent)]
    Core(#[from] gpett_core::Error),
}

fn join_indices(indices: &[usize]) -> String {
    indices
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

impl HarnessError {
    /// 2 for configuration and input problems, 1 for run-time failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Parse { .. } | HarnessError::Validation { .. } => 2,
            HarnessError::Core(gpett_core::Error::InvalidArgument(_)) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn validation(path: &str, message: impl Into<String>) -> Self {
        HarnessError::Validation {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;
