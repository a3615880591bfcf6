//! Attack injection and the ground-truth manifest.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use stepguard_core::dataset::{Dataset, Label};
use stepguard_core::schema::RelationshipGraph;

use crate::{Result, SynthError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackKind {
    /// Overwrite the sensor reading with a constant.
    SpoofConstant { value: f64 },
    /// Hold the sensor at its last pre-attack reading.
    Freeze,
    /// Add a small constant drift, delta per step, accumulated over tsteps.
    RampDrift { delta: f64, tsteps: usize },
    /// Force an actuator into a (legal) state regardless of schedule.
    ActuatorFlip { state: u8 },
    /// Force an actuator into a legal state the schedule never visits, so
    /// the tuple was never seen in training.
    UnseenStateForce { state: u8 },
}

impl AttackKind {
    fn name(&self) -> &'static str {
        match self {
            AttackKind::SpoofConstant { .. } => "spoof_constant",
            AttackKind::Freeze => "freeze",
            AttackKind::RampDrift { .. } => "ramp_drift",
            AttackKind::ActuatorFlip { .. } => "actuator_flip",
            AttackKind::UnseenStateForce { .. } => "unseen_state_force",
        }
    }

    fn targets_sensor(&self) -> bool {
        matches!(
            self,
            AttackKind::SpoofConstant { .. } | AttackKind::Freeze | AttackKind::RampDrift { .. }
        )
    }
}

/// How the injected attack is expected to surface, used as ground truth by
/// the evaluation harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectabilityClass {
    CoreDetectable,
    ExtendedDetectable,
    Undetectable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub target: String,
    /// Inclusive time-index window.
    pub start: u64,
    pub end: u64,
    #[serde(flatten)]
    pub kind: AttackKind,
    pub expected: DetectabilityClass,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffectedPoint {
    pub device: String,
    pub index: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub target: String,
    pub kind: String,
    pub start: u64,
    pub end: u64,
    pub expected: DetectabilityClass,
    pub affected: Vec<AffectedPoint>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AttackManifest {
    pub attacks: Vec<ManifestEntry>,
}

impl AttackManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<AttackManifest> {
        Ok(serde_json::from_str(text)?)
    }
}

fn validate_spec(
    i: usize,
    spec: &AttackSpec,
    dataset: &Dataset,
    graph: &RelationshipGraph,
) -> Result<()> {
    let fail = |message: String| SynthError::InvalidAttack { index: i, message };
    let last_index = dataset.records.last().map(|r| r.index).unwrap_or(0);
    if spec.start >= spec.end || spec.end > last_index {
        return Err(fail(format!(
            "window [{}, {}] must satisfy start < end <= {last_index}",
            spec.start, spec.end
        )));
    }
    if spec.kind.targets_sensor() {
        if dataset.sensor_position(&spec.target).is_none() {
            return Err(fail(format!("unknown sensor {}", spec.target)));
        }
    } else if dataset.actuator_position(&spec.target).is_none() {
        return Err(fail(format!("unknown actuator {}", spec.target)));
    }
    match &spec.kind {
        AttackKind::RampDrift { delta, tsteps } => {
            if *delta <= 0.0 {
                return Err(fail("ramp drift delta must be positive".to_string()));
            }
            let window = spec.end - spec.start + 1;
            if *tsteps as u64 != window {
                return Err(fail(format!(
                    "tsteps {tsteps} must equal the window length {window}"
                )));
            }
        }
        AttackKind::Freeze => {
            if dataset.position_of_index(spec.start).map(|p| p == 0).unwrap_or(true) {
                return Err(fail("freeze needs a pre-attack reading".to_string()));
            }
        }
        AttackKind::ActuatorFlip { state } | AttackKind::UnseenStateForce { state } => {
            let Some(actuator) = graph.actuator(&spec.target) else {
                return Err(fail(format!("actuator {} not in graph", spec.target)));
            };
            if !actuator.contains(*state) {
                return Err(fail(format!(
                    "state {state} outside {}'s domain {:?}",
                    spec.target, actuator.state_domain
                )));
            }
        }
        AttackKind::SpoofConstant { .. } => {}
    }
    Ok(())
}

/// Overwrite readings/states per the specs, label every affected record
/// Attack, and return the ground-truth manifest. Overlapping specs on the
/// same (device, index) are rejected.
pub fn inject_attacks(
    dataset: &Dataset,
    specs: &[AttackSpec],
    graph: &RelationshipGraph,
) -> Result<(Dataset, AttackManifest)> {
    let mut attacked = dataset.clone();
    let mut manifest = AttackManifest::default();
    let mut touched: BTreeSet<(String, u64)> = BTreeSet::new();

    for (i, spec) in specs.iter().enumerate() {
        validate_spec(i, spec, dataset, graph)?;
        let mut affected = Vec::new();
        let start_pos = attacked
            .position_of_index(spec.start)
            .ok_or_else(|| SynthError::InvalidAttack {
                index: i,
                message: format!("start index {} not in dataset", spec.start),
            })?;
        let freeze_value = if matches!(spec.kind, AttackKind::Freeze) {
            Some(attacked.records[start_pos - 1].sensors[
                attacked.sensor_position(&spec.target).expect("validated")
            ])
        } else {
            None
        };

        for (step, pos) in (start_pos..attacked.records.len()).enumerate() {
            let record = &mut attacked.records[pos];
            if record.index > spec.end {
                break;
            }
            let step = step as u64;
            if !touched.insert((spec.target.clone(), record.index)) {
                return Err(SynthError::Overlap {
                    device: spec.target.clone(),
                    index: record.index,
                });
            }
            match &spec.kind {
                AttackKind::SpoofConstant { value } => {
                    let col = attacked.sensor_position(&spec.target).expect("validated");
                    attacked.records[pos].sensors[col] = *value;
                }
                AttackKind::Freeze => {
                    let col = attacked.sensor_position(&spec.target).expect("validated");
                    attacked.records[pos].sensors[col] = freeze_value.expect("freeze value");
                }
                AttackKind::RampDrift { delta, .. } => {
                    let col = attacked.sensor_position(&spec.target).expect("validated");
                    attacked.records[pos].sensors[col] += delta * (step + 1) as f64;
                }
                AttackKind::ActuatorFlip { state } | AttackKind::UnseenStateForce { state } => {
                    let col = attacked.actuator_position(&spec.target).expect("validated");
                    attacked.records[pos].actuators[col] = *state;
                }
            }
            attacked.records[pos].label = Label::Attack;
            affected.push(AffectedPoint {
                device: spec.target.clone(),
                index: attacked.records[pos].index,
            });
        }

        manifest.attacks.push(ManifestEntry {
            id: format!("a{}", i + 1),
            target: spec.target.clone(),
            kind: spec.kind.name().to_string(),
            start: spec.start,
            end: spec.end,
            expected: spec.expected,
            affected,
        });
    }
    Ok((attacked, manifest))
}
