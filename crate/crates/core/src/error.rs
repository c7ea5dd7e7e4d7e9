use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Numeric invariant violations carry the measured
/// deviation so callers can tell a hard bug from tolerance noise.
#[derive(Debug, Error)]
pub enum Error {
    #[error("state kinds must match (pure vs mixed)")]
    KindMismatch,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("length mismatch for {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("qubit index {index} out of range for {n_qubits} qubits")]
    QubitIndexOutOfRange { index: usize, n_qubits: usize },

    #[error("duplicate qubit index {0}")]
    DuplicateQubitIndex(usize),

    #[error("node index {index} out of range for {n_nodes} nodes")]
    NodeIndexOutOfRange { index: usize, n_nodes: usize },

    #[error("operator is not unitary (max deviation {deviation:.3e})")]
    NotUnitary { deviation: f64 },

    #[error("operator is not hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("keep set for partial trace is empty")]
    EmptyKeepSet,

    #[error("requested {requested} qubits, cap is {cap}")]
    QubitCapExceeded { requested: usize, cap: usize },

    #[error("need at least {min} nodes, got {got}")]
    TooFewNodes { min: usize, got: usize },

    #[error("honest set too small: need at least {min}, got {got}")]
    HonestSetTooSmall { min: usize, got: usize },

    #[error("no honest qubits to keep")]
    NoHonestQubits,

    #[error("all function weights are zero")]
    AllWeightsZero,

    #[error("family does not produce pure states")]
    NotPureFamily,

    #[error("finite-difference step must be positive, got {0}")]
    NonPositiveStep(f64),

    #[error("every eigenvalue pair fell below the truncation tolerance {tolerance:.3e}")]
    AllPairsTruncated { tolerance: f64 },

    #[error(
        "derivative weight {excluded:.3e} lies entirely on truncated eigenvalue pairs \
         (tolerance {tolerance:.3e})"
    )]
    DerivativeOnTruncatedSupport { excluded: f64, tolerance: f64 },

    #[error("fidelity argument {0} outside [0, 1]")]
    FidelityOutOfRange(f64),

    #[error("quantum Fisher information must be positive for a Cramer-Rao bound, got {0}")]
    NonPositiveQfi(f64),

    #[error("observable derivative vanishes at the operating point; bound undefined")]
    VanishingSignal,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("probability {value} for {what} outside [0, 1]")]
    ProbabilityOutOfRange { what: &'static str, value: f64 },

    #[error("Kraus set not trace preserving (max deviation {deviation:.3e})")]
    MalformedKraus { deviation: f64 },

    #[error("{name} must be positive, got {value}")]
    NonPositiveConstant { name: &'static str, value: f64 },

    #[error("verification parameters rejected: {}", .0.join("; "))]
    ConstraintViolated(Vec<String>),

    #[error("verifier must be an honest node for the verifier-led protocol")]
    VerifierNotHonest,

    #[error("protocol round count must be at least 1")]
    ZeroRounds,

    #[error("verification rejected every round; nothing to estimate")]
    ZeroAcceptedRounds,
}
