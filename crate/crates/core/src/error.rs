use thiserror::Error;

/// Errors raised by network construction, model compilation and evaluation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("self-loop at actor {0}")]
    SelfLoop(usize),
    #[error("actor index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("negative dyad value {value} for ({i}, {j})")]
    NegativeValue { i: usize, j: usize, value: i64 },
    #[error("duplicate dyad ({i}, {j})")]
    DuplicateDyad { i: usize, j: usize },
    #[error("dyad ({i}, {j}) is not in the dyad set")]
    DyadOutsideSet { i: usize, j: usize },
    #[error("network must have at least {min} actors, got {n}")]
    TooFewActors { n: usize, min: usize },
    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("attribute `{name}` has {len} values but the network has {n} actors")]
    AttributeLength { name: String, len: usize, n: usize },
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("covariate matrix is {rows}x{cols} but the network has {n} actors")]
    CovariateDimension { rows: usize, cols: usize, n: usize },
    #[error("term `{term}` requires a directed network")]
    RequiresDirected { term: String },
    #[error("term `{term}`: {message}")]
    InvalidTerm { term: String, message: String },
    #[error("parameter vector has length {got}, model has {expected} terms")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("parameter outside the natural parameter space: {0}")]
    OutsideParameterSpace(String),
    #[error("series did not converge within {terms} terms")]
    SeriesDivergence { terms: usize },
    #[error("root bracketing failed: {0}")]
    Bracketing(String),
    #[error("invalid control setting: {0}")]
    InvalidControl(String),
    #[error("proposal value equals the current value {0}")]
    DegenerateProposal(u64),
    #[error("fit did not converge: {0}")]
    NotConverged(String),
    #[error("empty sample")]
    EmptySample,
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
