use thiserror::Error;

/// Errors raised by the numerical engine.
///
/// Variants that end in `Violation` or `Mismatch` signal a broken internal
/// identity rather than bad user input.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),

    #[error("invalid subsystem selection {keep:?} for {parties} subsystems")]
    InvalidSubsystems { keep: Vec<usize>, parties: usize },

    #[error("state is not normalized: <psi|psi> = {0}")]
    NotNormalized(f64),

    #[error("operator is not {kind}: residual {residual:e}")]
    WrongOperatorKind { kind: &'static str, residual: f64 },

    #[error("measurement ensemble is invalid: {0}")]
    InvalidEnsemble(String),

    #[error("unknown measurement outcome {0:?}")]
    UnknownOutcome(String),

    #[error("outcome has zero probability ({0:e})")]
    ZeroProbability(f64),

    #[error("unknown name {0:?}")]
    UnknownName(String),

    #[error("party count must be at least {min}, got {actual}")]
    TooFewParties { min: usize, actual: usize },

    #[error("party count {0} is outside the supported range")]
    UnsupportedPartyCount(usize),

    #[error("matrix is not in the image of the complex-to-real map: residual {0:e}")]
    NotInImage(f64),

    #[error("vector lies entirely in the kernel of the quotient map")]
    KernelVector,

    #[error("index {index} out of range for {len} subsystems")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("identity check `{check}` violated: residual {residual:e}")]
    Violation { check: String, residual: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;
