use thiserror::Error;

use crate::iddl::OuterRecord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("degenerate divergence: {0}")]
    DegenerateDivergence(String),

    #[error("retraction step overflowed the matrix exponential")]
    StepOverflow,

    #[error("objective is not finite at the starting point")]
    InvalidStart,

    #[error("gradient contains non-finite entries")]
    InvalidGradient,

    #[error("numerical breakdown in {context}")]
    NumericalBreakdown { context: String },

    #[error("linear system is singular: {0}")]
    SingularSystem(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("corrupt file: {0}")]
    CorruptFile(String),

    /// An error raised while processing a specific item (sample, atom, record).
    #[error("{what} {index}: {source}")]
    At {
        what: &'static str,
        index: usize,
        #[source]
        source: Box<Error>,
    },

    /// A fit stopped by an error in one of its blocks; `history` holds the
    /// outer iterations completed before the failure.
    #[error("fit aborted in the {block} block{}: {source}", atom.map(|k| format!(" at atom {k}")).unwrap_or_default())]
    FitAborted {
        block: &'static str,
        atom: Option<usize>,
        history: Vec<OuterRecord>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at(self, what: &'static str, index: usize) -> Error {
        Error::At {
            what,
            index,
            source: Box::new(self),
        }
    }

    /// The innermost error, with all `At` and `FitAborted` wrappers peeled off.
    pub fn root(&self) -> &Error {
        match self {
            Error::At { source, .. } | Error::FitAborted { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by bad inputs rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self.root(),
            Error::InvalidInput(_)
                | Error::DimensionMismatch { .. }
                | Error::InvalidDataset(_)
                | Error::CorruptFile(_)
                | Error::Io(_)
        )
    }
}
