use std::io;

use weylscope_core::Error as CoreError;

/// Failures of a command, each mapped to a process exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    /// A verification check failed.
    #[error("{0}")]
    Check(String),
    /// Malformed flags, files or expressions.
    #[error("{0}")]
    Input(String),
    /// The geometry of the input does not admit the requested computation.
    #[error("{0}")]
    Math(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Check(_) => 1,
            Failure::Input(_) | Failure::Io(_) => 2,
            Failure::Math(_) => 3,
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        if e.is_math_domain() {
            Failure::Math(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, Failure>;
