use thiserror::Error;

use crate::model::PliableFit;
use crate::solver::KktReport;

pub type Result<T> = std::result::Result<T, PliableError>;

#[derive(Debug, Error)]
pub enum PliableError {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("index {index} out of range for {what} (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("{block} column {index} is constant and cannot be scaled")]
    ConstantColumn { block: &'static str, index: usize },

    #[error("intercept design (1, Z) is rank deficient")]
    RankDeficient,

    #[error("solver did not converge at lambda = {lambda} after {iterations} passes (max KKT violation {})", .kkt.max_violation)]
    NotConverged {
        lambda: f64,
        iterations: usize,
        fit: Box<PliableFit>,
        kkt: KktReport,
    },

    #[error("fit failed at lambda index {index}: {source}")]
    PathFit {
        index: usize,
        #[source]
        source: Box<PliableError>,
    },

    #[error("cross-validation fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<PliableError>,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("unknown {what}: {name}")]
    Unknown { what: &'static str, name: String },

    #[error("model file: {0}")]
    ModelFile(String),

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PliableError {
    pub(crate) fn file(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> PliableError + '_ {
        move |source| PliableError::File {
            path: path.display().to_string(),
            source,
        }
    }

    /// True for failures of the iterative solver, as opposed to bad input.
    pub fn is_convergence_failure(&self) -> bool {
        match self {
            PliableError::NotConverged { .. } => true,
            PliableError::PathFit { source, .. } | PliableError::Fold { source, .. } => {
                source.is_convergence_failure()
            }
            _ => false,
        }
    }
}
