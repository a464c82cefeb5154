use thiserror::Error;

/// Errors produced by the sparc toolkit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("column index {index} out of range (dictionary has {len} columns)")]
    IndexOutOfRange { index: u64, len: u64 },

    #[error("dense dictionary needs {requested} bytes, cap is {cap}")]
    MemoryCapExceeded { requested: u128, cap: u128 },

    #[error("dimension mismatch: expected length {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("input contains non-finite values")]
    NonFiniteInput,

    #[error("exhaustive search over {size} codewords exceeds cap {cap}")]
    SearchSpaceTooLarge { size: u128, cap: u128 },

    #[error("bad magic bytes")]
    BadMagic,

    #[error("unsupported {what} version {version}")]
    UnsupportedVersion { what: &'static str, version: u8 },

    #[error("invalid header: {0}")]
    InvalidHeader(String),

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    #[error("truncated payload: need {needed} bytes, have {available}")]
    TruncatedPayload { needed: usize, available: usize },

    #[error("malformed input: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
