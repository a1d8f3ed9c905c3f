use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix must be square with even size, got {rows}x{cols}")]
    OddDimension { rows: usize, cols: usize },
    #[error("matrix is not symplectic")]
    NotSymplectic,
    #[error("matrix is not ergodic (an eigenvalue is a root of unity)")]
    NotErgodic,
    #[error("characteristic polynomial is reducible; supply the invariant blocks explicitly")]
    ReducibleWithoutBlocks,
    #[error("invalid blocks: {0}")]
    InvalidBlocks(String),
    #[error("zero lattice vector is not allowed here")]
    ZeroVector,
    #[error("empty search region")]
    EmptySearch,
    #[error("F - I is singular and theta = 0 is not admissible")]
    SingularFixedPoint,
    #[error("Bloch angle is not admissible for this map and N")]
    InadmissibleAngle,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("noise normalization vanishes")]
    VanishingNormalization,
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("too few rows for a fit (need at least 3, got {0})")]
    InsufficientRows(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
