use std::path::PathBuf;

use thiserror::Error;

/// Eigenvalue diagnostics for the two diagonal blocks of a dependence matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConditionReport {
    pub min_eig_xx: f64,
    pub min_eig_yy: f64,
    pub ridge_xx: f64,
    pub ridge_yy: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in {path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular block after maximum ridge (xx min eig {:.3e}, yy min eig {:.3e})", .0.min_eig_xx, .0.min_eig_yy)]
    Singular(ConditionReport),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("subject {subject}, stage {stage}: {source}")]
    Stage {
        subject: String,
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_stage(self, subject: &str, stage: &'static str) -> Self {
        Error::Stage {
            subject: subject.to_string(),
            stage,
            source: Box::new(self),
        }
    }

    /// Process exit code for this error: 2 validation, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Validation(_) | Error::InvalidArgument(_) => 2,
            Error::Singular(_) | Error::Numerical(_) => 3,
            Error::Io { .. } => 4,
            Error::Stage { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
