use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("model has no states")]
    EmptyModel,

    #[error("duplicate state identifier `{0}`")]
    DuplicateState(String),

    #[error("transition {index}: unknown state `{state}`")]
    UnknownState { index: usize, state: String },

    #[error("transition {index}: duplicate entry for ({from}, {to})")]
    DuplicateTransition { index: usize, from: String, to: String },

    #[error("transition {index}: invalid probability {prob}")]
    InvalidProbability { index: usize, prob: f64 },

    #[error("non-stochastic row {row} (`{state}`): sum = {sum}")]
    NonStochasticRow { row: usize, state: String, sum: f64 },

    #[error("transition {index}: increment law not normalized (total weight {total})")]
    IncrementNotNormalized { index: usize, total: f64 },

    #[error("transition {index}: malformed increment law: {reason}")]
    MalformedIncrement { index: usize, reason: String },

    #[error("transition {index}: support point {point} is off the lattice with span {span}")]
    OffLattice { index: usize, point: f64, span: f64 },

    #[error("invalid lattice span {0}")]
    InvalidSpan(f64),

    #[error("reducible driving chain: state {unreachable} (`{state}`) is not reachable from state {from}")]
    Reducible {
        from: usize,
        unreachable: usize,
        state: String,
    },

    #[error("span mismatch: {0} vs {1}")]
    SpanMismatch(f64, f64),

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("singular linear system ({0})")]
    Singular(&'static str),

    #[error("unknown model generator `{0}`")]
    UnknownGenerator(String),

    #[error("infeasible generator parameters: {0}")]
    InfeasibleParams(String),

    #[error("unknown initial state {0}")]
    UnknownInitialState(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(
        "condition not certified: stationary drift {drift} is not positive \
         (dual positive divergence cannot be established; pass an explicit override)"
    )]
    DriftGate { drift: f64 },

    #[error("no convergence for {what} at truncation depth {depth}: residual {residual:e}")]
    NonConvergence {
        what: &'static str,
        depth: usize,
        residual: f64,
    },

    #[error(
        "escape mass of the dual walk is not bounded away from zero \
         (upper bound {upper:e}); the ladder chain has no stationary law"
    )]
    NoEscape { upper: f64 },

    #[error("numerical check failed: {0}")]
    Numerical(String),

    #[error("horizon exhausted after {steps} steps with {found} of {wanted} ladder epochs")]
    HorizonExhausted { steps: usize, found: usize, wanted: usize },

    #[error("json: {0}")]
    Json(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
