//! Deterministic synthetic plant traces and attack injection.
//!
//! Scenarios describe a small plant (level/flow sensors driven by valves and
//! pumps) whose actuators cycle through every scheduled state combination,
//! so trained stores cover the full switchboard space. The same seed and
//! scenario always produce byte-identical datasets. Attack specs overwrite
//! readings or states in place and come with a ground-truth manifest naming
//! every affected (device, index) pair and its expected detectability.

pub mod attack;
pub mod scenario;

pub use attack::{
    inject_attacks, AffectedPoint, AttackKind, AttackManifest, AttackSpec, DetectabilityClass,
    ManifestEntry,
};
pub use scenario::{generate_normal, ActuatorGen, GenSpec, PlantScenario, SensorGen, SensorKindGen};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("invalid attack spec #{index}: {message}")]
    InvalidAttack { index: usize, message: String },

    #[error("overlapping attack specs on device {device} at time index {index}")]
    Overlap { device: String, index: u64 },

    #[error(transparent)]
    Core(#[from] stepguard_core::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SynthError>;
