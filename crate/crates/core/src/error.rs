use std::path::PathBuf;

use crate::model::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the pipeline can report.
///
/// [`Error::kind`] folds the variants into three families (bad input,
/// unresolvable model, failed solve), which the CLI maps onto exit codes.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: unsupported schemaVersion {found:?} (expected \"1\")")]
    Schema { path: PathBuf, found: String },

    #[error("{subject} failed validation:\n{report}")]
    Invalid { subject: String, report: ValidationReport },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("mapping error: {0}")]
    Mapping(String),

    #[error("cannot resolve component {component}: {message}")]
    Resolution { component: String, message: String },

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("solver failed: {message} (relative residual {residual:e})")]
    Solver { message: String, residual: f64 },

    #[error("model error: {0}")]
    Model(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("scenario {id}: {source}")]
    Scenario {
        id: i64,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Resolution,
    Solver,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Schema { .. }
            | Error::Invalid { .. }
            | Error::Parameter(_)
            | Error::Data(_) => ErrorKind::Validation,
            Error::Mapping(_) | Error::Resolution { .. } | Error::Lookup(_) => ErrorKind::Resolution,
            Error::Solver { .. } | Error::Model(_) => ErrorKind::Solver,
            Error::Scenario { source, .. } => source.kind(),
        }
    }
}
