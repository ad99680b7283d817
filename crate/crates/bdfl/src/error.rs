//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by the cryptosystem and the fixed-point encoding layer.
#[derive(Debug, Error)]
pub enum CryptoError {
    #[error("unsupported key size {0} (expected 512, 1024, 2048 or 3072 bits)")]
    UnsupportedKeyBits(u32),
    #[error("cannot encode non-finite value {0}")]
    NonFinite(f64),
    #[error("value {value} at 2^{scale_bits} scaling exceeds the plaintext headroom")]
    EncodingOverflow { value: f64, scale_bits: u32 },
    #[error("accumulated magnitude could exceed half the plaintext ring")]
    HeadroomExceeded,
    #[error("ciphertext does not belong to this public key")]
    KeyMismatch,
    #[error("ciphertext value out of range or not coprime with the modulus")]
    MalformedCiphertext,
    #[error("exponent mismatch: {0} vs {1}")]
    ExponentMismatch(i32, i32),
    #[error("invalid big-integer literal {0:?}")]
    BadBigIntLiteral(String),
}

/// Errors raised by the model mathematics.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("labels must be -1 or +1 (offending entry {0})")]
    BadLabel(f64),
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
}

/// Errors raised while loading or splitting datasets.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("non-numeric cell at row {row}, column {col}: {cell:?}")]
    NonNumericCell { row: usize, col: usize, cell: String },
    #[error("unmapped label value {cell:?} at row {row}")]
    UnmappedLabel { row: usize, cell: String },
    #[error("label column {label_column} out of range for {columns} columns")]
    LabelColumnOutOfRange { label_column: usize, columns: usize },
    #[error("ragged csv: row {row} has {got} fields, expected {expected}")]
    RaggedRow { row: usize, expected: usize, got: usize },
    #[error("empty dataset")]
    Empty,
    #[error("party A columns must form a non-trivial partition: {0}")]
    BadColumnSplit(String),
    #[error("invalid parameter: {0}")]
    BadParameter(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Errors raised by the federated protocol engine.
#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("round {round}: {source}")]
    Crypto {
        round: u32,
        #[source]
        source: CryptoError,
    },
    #[error("round {round}: decryption failed: {reason}")]
    Decrypt { round: u32, reason: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected message: expected {expected}, got {got}")]
    UnexpectedMessage { expected: &'static str, got: String },
    #[error("frame too large: {0} bytes")]
    FrameTooLarge(u64),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Errors raised during configuration parsing and validation.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Data(#[from] DataError),
}
