//! Error types shared across the crate.
//!
//! Errors are grouped by the process exit code they map to: configuration
//! errors (2), data errors (3), and numeric divergence (4).

use std::path::PathBuf;
use thiserror::Error;

/// Top-level error for library entry points.
#[derive(Debug, Error)]
pub enum QtpError {
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad data in {path} line {line}: {reason}")]
    Data {
        path: PathBuf,
        line: usize,
        reason: String,
    },
}

impl QtpError {
    /// Process exit code for this error: 2 configuration, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            QtpError::Config(_) => 2,
            QtpError::Train(
                TrainError::Diverged { .. } | TrainError::NonFiniteGradient { .. },
            ) => 4,
            _ => 3,
        }
    }
}

/// Errors from the superdense-coding simulation kernel.
#[derive(Debug, Error, PartialEq)]
pub enum QuantumError {
    #[error("symbol index out of range: ({z}, {x}) for dimension {d}")]
    SymbolOutOfRange { z: usize, x: usize, d: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unsupported channel: kind {kind} at dimension {d}")]
    UnsupportedChannel { kind: String, d: usize },
    #[error("noise strength {lambda} outside [0, 1]")]
    LambdaOutOfRange { lambda: f64 },
    #[error("Kraus set fails completeness: residual {residual:.3e}")]
    NotTracePreserving { residual: f64 },
    #[error("matrix contains non-finite entries")]
    NonFiniteEntries,
    #[error("state vector is not normalized: |norm - 1| = {deviation:.3e}")]
    NotNormalized { deviation: f64 },
    #[error("outcome distribution invalid: {reason}")]
    InvalidDistribution { reason: String },
    #[error("flip probability {p} outside [0, 1]")]
    FlipProbOutOfRange { p: f64 },
}

/// Errors from ASCII pre-encoding and symbol framing.
#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("non-ASCII character {ch:?} at position {position}")]
    NonAscii { position: usize, ch: char },
    #[error("bit length {len} is not a multiple of {group}")]
    Framing { len: usize, group: usize },
    #[error("unsupported dimension {d}: expected 2 or 4")]
    UnsupportedDimension { d: usize },
    #[error("max_unit {max_unit} below the minimum of 5")]
    MaxUnitTooSmall { max_unit: usize },
}

/// Errors from the word-level repair module.
#[derive(Debug, Error, PartialEq)]
pub enum RepairError {
    #[error("word lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("character {ch:?} has no 8-bit code")]
    NotEightBit { ch: char },
    #[error("invalid dictionary entry {word:?} at line {line}: {reason}")]
    InvalidEntry {
        word: String,
        line: usize,
        reason: String,
    },
    #[error("input stage {got:?} where {expected:?} was required")]
    WrongStage { expected: String, got: String },
}

/// Errors from the sentence-level model.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: String, detail: String },
    #[error("sentence of {words} words exceeds max_len {max_len} (two positions are reserved)")]
    SentenceTooLong { words: usize, max_len: usize },
    #[error("length mismatch: {left} vs {right} words")]
    LengthMismatch { left: usize, right: usize },
    #[error("invalid model config: {reason}")]
    InvalidConfig { reason: String },
}

/// Errors from training.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("target word {word:?} not in vocabulary")]
    TargetOutOfVocab { word: String },
    #[error("non-finite gradient in {tensor}")]
    NonFiniteGradient { tensor: String },
    #[error("training diverged at epoch {epoch} (loss not finite)")]
    Diverged {
        epoch: usize,
        /// Parameters captured at the end of the last epoch with finite loss.
        last_good: Box<crate::model::ModelParams>,
    },
    #[error("label/word count mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("split ratios {0}:{1}:{2} do not sum to 100")]
    BadSplit(u32, u32, u32),
    #[error("corpus line {line}: {source}")]
    Corpus {
        line: usize,
        #[source]
        source: Box<QtpError>,
    },
}

/// Errors from metric computation.
#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input where at least one element is required")]
    EmptyInput,
    #[error("flagged position {position} outside 1..={len}")]
    PositionOutOfRange { position: usize, len: usize },
}

/// Configuration and manifest errors (exit code 2).
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("manifest field {field}: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("referenced file {path} does not exist")]
    MissingFile { path: PathBuf },
    #[error("failed to parse {path}: {reason}")]
    Unparseable { path: PathBuf, reason: String },
    #[error("post-decoding requested but no checkpoint configured")]
    MissingCheckpoint,
    #[error("corpus of {sentences} sentences is too small for an 80:10:10 split")]
    CorpusTooSmall { sentences: usize },
    #[error("{0}")]
    Other(String),
}
