use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants map one-to-one onto the failure classes the CLI turns into exit
/// codes (geometry, staleness, no-decay, accuracy).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("degenerate pulse: Laplace transform vanishes on the whole grid")]
    DegeneratePulse,

    #[error("numerical instability detected at step {step}")]
    Instability { step: usize },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("missing dependency: {0}")]
    Dependency(String),

    #[error("wrong branch: {0}")]
    WrongBranch(String),

    #[error("incompatible inputs: {0}")]
    Incompatible(String),

    #[error("unsupported medium: {0}")]
    UnsupportedMedium(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("no decay: {0}")]
    NoDecay(String),

    #[error("accuracy error: {0}")]
    Accuracy(String),

    #[error("insufficient range: {0}")]
    InsufficientRange(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
