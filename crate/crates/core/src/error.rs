use std::fmt;

use thiserror::Error;

/// Line/column position in a source text (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Loc {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at {loc}: {msg}")]
    Syntax { loc: Loc, msg: String },

    #[error("{msg} (at {loc})")]
    Semantic { loc: Loc, msg: String },

    #[error("unknown constant \"{0}\"")]
    UnknownConstant(String),

    #[error("constant \"{0}\" has no value; bind it with an override")]
    UnboundConstant(String),

    #[error("cyclic constant definition involving \"{0}\"")]
    CyclicConstant(String),

    #[error("type error: {0}")]
    Type(String),

    #[error("evaluation error: {0}")]
    Eval(String),

    #[error("non-positive rate {rate} in command {command} of module {module}")]
    NonPositiveRate {
        module: String,
        command: usize,
        rate: f64,
    },

    #[error("update sets {var} to {value}, outside [{lo}..{hi}], in command {command} of module {module}")]
    UpdateOutOfRange {
        var: String,
        value: i64,
        lo: i64,
        hi: i64,
        module: String,
        command: usize,
    },

    #[error("state space exceeds the cap of {cap} states ({count} states explored)")]
    StateSpaceTooLarge { cap: usize, count: usize },

    #[error("unknown reward structure \"{0}\"")]
    UnknownReward(String),

    #[error("unknown label \"{0}\"")]
    UnknownLabel(String),

    #[error("steady-state requires an irreducible chain")]
    NotIrreducible,

    #[error("no convergence after {iterations} iterations ({what})")]
    NoConvergence { what: String, iterations: usize },

    #[error("iteration cap of {cap} exceeded ({needed} terms needed); use a larger eps or a smaller time bound")]
    IterationCap { cap: usize, needed: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid sweep: {0}")]
    InvalidSweep(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn syntax(loc: Loc, msg: impl Into<String>) -> Self {
        Error::Syntax {
            loc,
            msg: msg.into(),
        }
    }

    pub(crate) fn semantic(loc: Loc, msg: impl Into<String>) -> Self {
        Error::Semantic {
            loc,
            msg: msg.into(),
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotIrreducible
            | Error::NoConvergence { .. }
            | Error::IterationCap { .. }
            | Error::StateSpaceTooLarge { .. } => 3,
            Error::InvalidSweep(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
