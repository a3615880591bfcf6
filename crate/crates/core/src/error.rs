//! Error types shared across the engine.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A CSV row could not be parsed (wrong arity, non-numeric cell, bad index).
    #[error("parse error at data row {row}: {message}")]
    Parse { row: u64, message: String },

    /// A parsed value violates the declared schema (e.g. actuator state outside
    /// its domain).
    #[error("schema violation at data row {row} for device {device}: {message}")]
    SchemaViolation {
        row: u64,
        device: String,
        message: String,
    },

    #[error("unknown sensor {0}")]
    UnknownSensor(String),

    #[error("unknown device {0}")]
    UnknownDevice(String),

    #[error("invalid device name {0:?}: names must be non-empty and use only [A-Za-z0-9_.-]")]
    InvalidDeviceName(String),

    #[error("graph config line {line}: {message}")]
    GraphConfig { line: usize, message: String },

    #[error("time index {index} not present in dataset")]
    IndexOutOfRange { index: u64 },

    /// Training data is asserted attack-free and clean; a non-finite reading
    /// there is a data error, not an anomaly.
    #[error("non-finite reading for sensor {device} at time index {index} in training data")]
    NonFiniteTraining { device: String, index: u64 },

    #[error("probability contract violated: {0}")]
    ProbabilityContract(String),

    #[error("misaligned evaluation inputs: {verdicts} verdicts vs {labels} labels")]
    MisalignedEval { verdicts: usize, labels: usize },

    #[error("store format error at line {line}: {message}")]
    StoreFormat { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
