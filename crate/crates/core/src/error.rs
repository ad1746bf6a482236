use thiserror::Error;

/// Errors raised by construction, simulation and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mode space: {0}")]
    InvalidSpace(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid mode index {index} (space has {modes} modes)")]
    InvalidMode { index: usize, modes: usize },

    #[error("not PSD (min eigenvalue {0:e})")]
    NotPsd(f64),

    #[error("invalid group table: {0}")]
    InvalidGroup(String),

    #[error("not a group action: {0}")]
    InvalidAction(String),

    #[error("invalid representation: {0}")]
    InvalidRepresentation(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("instance too large: total dimension {dim} exceeds budget {budget}")]
    InstanceTooLarge { dim: usize, budget: usize },

    #[error("invalid lattice window: {0}")]
    InvalidWindow(String),

    #[error("decoder validation failed: {0}")]
    DecoderValidation(String),

    #[error("near-singular E\u{2020}E (min eigenvalue {0:e}); resample")]
    NearSingular(f64),

    #[error("empty charge sector for input charge(s) {0:?}")]
    EmptySector(Vec<i64>),

    #[error("no decoder for erased mode {0}")]
    MissingDecoder(usize),

    #[error("code has no symmetry context")]
    NoSymmetry,

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
