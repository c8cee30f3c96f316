use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid cost entry {value} at ({row}, {col})")]
    InvalidCost { row: usize, col: usize, value: f64 },

    #[error("assignment is infeasible: every permutation crosses an infinite cell")]
    Infeasible,

    #[error("problem of size {n} exceeds the limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("model cannot enumerate its predictions")]
    NotEnumerable,

    #[error("value {value} outside of the domain {domain}")]
    OutOfDomain { value: f64, domain: &'static str },

    #[error("enumeration of {size} selections exceeds budget {budget}")]
    BudgetExceeded { size: f64, budget: u64 },

    #[error("cutting plane stopped after {iterations} iterations with bracket [{lower}, {upper}]")]
    MaxIterations {
        lower: f64,
        upper: f64,
        iterations: usize,
    },

    #[error("linear program failed: {0}")]
    Lp(&'static str),

    #[error("entry game supports at most {limit} players, got {players}")]
    TooManyPlayers { players: usize, limit: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}
