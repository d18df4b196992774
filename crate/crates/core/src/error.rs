use thiserror::Error;

/// Errors raised by simulators, transforms and compilers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spec: {}", .0.join("; "))]
    InvalidSpec(Vec<String>),
    #[error("symbol {0:?} is not in the input alphabet")]
    UnknownSymbol(char),
    #[error("expected a {expected} machine, got {found}")]
    WrongKind { expected: String, found: String },
    #[error("invalid probabilistic spec")]
    InvalidProbabilistic,
    #[error("diverging stationary loop at state {state} on {symbol:?}")]
    DivergingLoop { state: String, symbol: char },
    #[error("rigid real-amplitude machine required")]
    RigidRequired,
    #[error("path enumeration too large ({0} paths)")]
    EnumerationTooLarge(f64),
    #[error("not isometric (column norm {0})")]
    NotIsometric(f64),
    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),
    #[error("parse error at offset {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("bad table entry {index}: {reason}")]
    BadTableEntry { index: usize, reason: String },
    #[error("space overflow on branch {branch}")]
    SpaceOverflow { branch: String },
    #[error("compilation too large ({states} states, cap {cap})")]
    CompilationTooLarge { states: u64, cap: u64 },
    #[error("pr undefined for m = {0}")]
    PrUndefined(u64),
    #[error("infeasible error budget: alpha = {0}")]
    BudgetInfeasible(f64),
    #[error("verification budget exhausted, best error {best}")]
    VerificationFailed { best: f64 },
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
