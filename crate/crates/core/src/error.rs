use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
    #[error("combined precision is numerically singular (condition estimate {condition:.3e})")]
    SingularSystem { condition: f64 },
    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("non-finite message produced at stage {stage}, node {node}")]
    NonFiniteMessage { stage: usize, node: usize },
    #[error("belief propagation did not converge within {iterations} BP iterations")]
    MaxItersExceeded { iterations: usize },
    #[error("tilted distribution is degenerate: {0}")]
    DegenerateTilt(&'static str),
    #[error("frequency response vanishes at bin {bin}")]
    ZeroFrequencyResponse { bin: usize },
    #[error("{taps} channel taps exceed the trellis limit of 12")]
    StateSpaceTooLarge { taps: usize },
    #[error("block length {len} exceeds the exhaustive-search limit of 16")]
    BlockTooLarge { len: usize },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("trial {trial} at {point} (seed {seed}, rng stream {stream}) failed: {source}")]
    Trial {
        trial: usize,
        /// Grid point of the sweep, e.g. `N=64` or `SNR=7 dB`.
        point: String,
        seed: u64,
        stream: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
