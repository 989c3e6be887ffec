use thiserror::Error;

/// Errors raised by the library.
///
/// Variants carrying `level` use 1-based chain level numbers, matching the
/// numbering used in reports and documents.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown generator index {index} (rank {rank})")]
    UnknownGenerator { index: usize, rank: usize },

    #[error("unknown generator name `{0}`")]
    UnknownGeneratorName(String),

    #[error("malformed word `{word}`: {reason}")]
    MalformedWord { word: String, reason: String },

    #[error("invalid presentation: {0}")]
    InvalidPresentation(String),

    #[error("level {level}: {reason}")]
    InvalidLevel { level: usize, reason: String },

    #[error("level {level}: image array of generator `{generator}` is not a bijection (index {index})")]
    NotABijection {
        level: usize,
        generator: String,
        index: usize,
    },

    #[error("refinement {level}->{next}: {reason}")]
    InvalidRefinement {
        level: usize,
        next: usize,
        reason: String,
    },

    #[error("point {point} out of range for a set of size {size}")]
    PointOutOfRange { point: usize, size: usize },

    #[error("level {level} is not present")]
    LevelAbsent { level: usize },

    #[error("word-length budget {budget} exhausted while {context}")]
    SearchExhausted { budget: usize, context: String },

    #[error("sofic level is undefined on word `{0}`")]
    UndefinedOnWord(String),

    #[error("operation requires a homomorphic sofic level")]
    NotHomomorphic,

    #[error("operation requires a free group")]
    NotFree,

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("probe window is missing `{0}`")]
    ProbeWindowMissing(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("kappa must lie in [0, 1): the hole density limit θ must satisfy θ < 1; got {0}")]
    KappaOutOfRange(String),

    #[error("infeasible schedule: {0}")]
    Infeasible(String),

    #[error("instance too large for exact enumeration: {0}")]
    TooLarge(String),

    #[error("pattern source is empty")]
    EmptySource,

    #[error("internal invariant violated: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
