use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("sign determination did not resolve after {rounds} refinement rounds")]
    PrecisionExhausted { rounds: u32 },

    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("rank mismatch: {left} vs {right}")]
    RankMismatch { left: usize, right: usize },

    #[error("singular matrix")]
    Singular,

    #[error("infinite initial index: the subgroup meets the first convex level trivially")]
    InfiniteInitialIndex,

    #[error("malformed value group: {0}")]
    MalformedGroup(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("step cap of {0} exceeded")]
    StepCap(usize),

    #[error("foreign parameter {0}")]
    ForeignParameter(String),

    #[error("invalid residue oracle: {0}")]
    Oracle(String),

    #[error("f = g/h is not in the valuation ring: ω(g) < ω(h)")]
    NotInValuationRing,

    #[error("not essentially finitely generated (e={e}, ε={epsilon}): no certificate exists since e ≠ ε")]
    NotEssentiallyFinite { e: u64, epsilon: u64 },

    #[error("arithmetic overflow in {0}")]
    Overflow(&'static str),
}

impl Error {
    pub fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    pub fn precondition(message: impl Into<String>) -> Self {
        Error::Precondition(message.into())
    }

    /// Process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } => 4,
            Error::StepCap(_) | Error::PrecisionExhausted { .. } => 3,
            _ => 2,
        }
    }
}
