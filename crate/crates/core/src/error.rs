use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{op}: dimension mismatch ({left_rows}x{left_cols} vs {right_rows}x{right_cols})")]
    DimensionMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("modulus {0} is not an odd prime in [3, 2^63)")]
    InvalidModulus(u64),

    #[error("moduli differ ({0} vs {1})")]
    ModulusMismatch(u64, u64),

    #[error("entry {value} out of range for modulus {q}")]
    EntryOutOfRange { value: u64, q: u64 },

    #[error("{what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("basis is singular or its columns are linearly dependent")]
    RankDeficient,

    #[error("gaussian parameter must be positive and finite (got {0})")]
    InvalidSigma(f64),

    #[error("noise rate must lie in (0, 1) (got {0})")]
    InvalidAlpha(f64),

    #[error("sigma {sigma} is below the required {required}")]
    SigmaTooSmall { sigma: f64, required: f64 },

    #[error("m = {m} violates m >= 6 n ceil(log2 q) = {required}")]
    WidthTooSmall { m: usize, required: usize },

    #[error("target is not in the column space of the matrix mod q")]
    NoPreimage,

    #[error("sampling did not reach full rank after {0} attempts")]
    SamplingFailed(usize),

    #[error("invalid parameter set: {0}")]
    InvalidParams(String),

    #[error("identity must have {expected} entries in {{-1, +1}}")]
    InvalidIdentity { expected: usize },

    #[error("message must be exactly {expected} bits (got {got})")]
    InvalidMessage { expected: usize, got: usize },

    #[error("unknown parameter preset {0:?}")]
    UnknownPreset(String),

    #[error("{0}")]
    Format(String),

    #[error(transparent)]
    Load(#[from] LoadError),
}

/// Why a serialized artifact could not be read.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LoadError {
    #[error("not an artifact file (bad magic bytes)")]
    BadMagic,

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),

    #[error("unknown artifact kind {0}")]
    UnknownKind(u8),

    #[error("expected a {expected} file, found {found}")]
    WrongKind { expected: &'static str, found: &'static str },

    #[error("parameter fingerprint does not match the embedded parameters")]
    FingerprintMismatch,

    #[error("artifacts were produced under different parameter sets")]
    ParamsMismatch,

    #[error("file ends early ({needed} more bytes needed)")]
    Truncated { needed: usize },

    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),

    #[error("malformed payload: {0}")]
    Malformed(String),
}
