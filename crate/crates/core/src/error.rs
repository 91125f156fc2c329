use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by mesh generation, assembly, the solvers and the I/O layer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mesh generation failed: {0}")]
    MeshGeneration(String),

    #[error("topology error: {0}")]
    Topology(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("coefficient evaluation failed: {0}")]
    Evaluation(String),

    #[error("trace is not the restriction of the bulk field: {0}")]
    Consistency(String),

    #[error("iterative solver did not converge ({iterations} iterations, relative residual {residual:.3e})")]
    SolverDivergence { iterations: usize, residual: f64 },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("certificate failure: {0}")]
    CertificateFailure(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("non-monotone convergence: {0}")]
    NonMonotoneConvergence(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid value for `{key}`: {message}")]
    Validation { key: String, message: String },

    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn validation(key: &str, message: impl Into<String>) -> Self {
        Error::Validation {
            key: key.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Strips any file context and returns the underlying error.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::Parse { .. }
            | Error::Validation { .. }
            | Error::Topology(_)
            | Error::Geometry(_)
            | Error::MeshGeneration(_) => 2,
            Error::SolverDivergence { .. }
            | Error::SingularSystem(_)
            | Error::CertificateFailure(_)
            | Error::Evaluation(_)
            | Error::Consistency(_)
            | Error::DomainMismatch(_) => 3,
            Error::NonMonotoneConvergence(_) => 4,
            _ => 1,
        }
    }
}
