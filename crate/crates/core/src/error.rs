use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("qubit {qubit} is out of range for a {num_qubits}-qubit register")]
    TargetOutOfRange { qubit: usize, num_qubits: usize },

    #[error("qubit {0} appears more than once in a target list")]
    DuplicateTarget(usize),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("state has zero weight on every measurement branch")]
    ZeroNorm,

    #[error("input is not normalized: {0}")]
    NotNormalized(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no subset specification registered for lambda = {0}")]
    MissingSpec(u32),

    #[error("oracle query for lambda = {lambda} needs {expected} targets, got {found}")]
    OracleArity {
        lambda: u32,
        expected: usize,
        found: usize,
    },

    #[error("circuit is not in deferred-measurement form: {0}")]
    NotDeferred(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown key `{0}`")]
    UnknownKey(String),

    #[error("insufficient copies: need {needed}, have {available}")]
    InsufficientCopies { needed: usize, available: usize },

    #[error("resource generation failed after {attempts} attempts")]
    GenerationFailed { attempts: usize },

    #[error("gentle search found no qualifying key")]
    SearchFailed,

    #[error("forger aborted: no key satisfies the consistency constraint")]
    Aborted,

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    /// Whether the error stems from a desk-scale capacity limit.
    pub fn is_capacity(&self) -> bool {
        matches!(self, Error::Capacity(_))
    }
}
