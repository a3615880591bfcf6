//! Plant scenarios and normal-trace generation.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use stepguard_core::dataset::{Dataset, Label, Record};
use stepguard_core::schema::{ActuatorSpec, RelationshipGraph};

use crate::attack::AttackSpec;
use crate::{Result, SynthError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ActuatorGen {
    pub name: String,
    /// Legal state domain declared to the schema.
    pub domain: Vec<u8>,
    /// States kept out of the normal schedule (legal but never seen in
    /// training; attack material).
    #[serde(default)]
    pub unscheduled: Vec<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKindGen {
    /// Integrates its per-state rate each step (tank level).
    Level,
    /// Settles directly at its per-state value each step (flow, analyzers).
    Flow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorGen {
    pub name: String,
    pub kind: SensorKindGen,
    pub initial: f64,
    /// Uniform noise amplitude added per step (bounded, so trained min/max
    /// envelopes are finite and replay-sound by construction).
    pub noise_amp: f64,
    /// nn-actuators in switchboard order.
    pub neighbors: Vec<String>,
    /// Per-actuator, per-state rate (Level) or offset (Flow) contribution.
    pub response: BTreeMap<String, BTreeMap<u8, f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantScenario {
    pub seed: u64,
    pub duration: usize,
    /// Steps spent in each state combination per visit.
    pub dwell: usize,
    /// Minimum visits every combination must receive; fewer is a warning.
    #[serde(default)]
    pub min_state_visits: usize,
    pub actuators: Vec<ActuatorGen>,
    pub sensors: Vec<SensorGen>,
}

/// A scenario file: the plant plus optional attack specs to derive an attack
/// trace from the normal one.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSpec {
    pub scenario: PlantScenario,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
}

impl PlantScenario {
    pub fn validate(&self) -> Result<()> {
        if self.duration == 0 || self.dwell == 0 {
            return Err(SynthError::InvalidScenario(
                "duration and dwell must be positive".to_string(),
            ));
        }
        if self.actuators.is_empty() || self.sensors.is_empty() {
            return Err(SynthError::InvalidScenario(
                "need at least one actuator and one sensor".to_string(),
            ));
        }
        for a in &self.actuators {
            if a.domain.is_empty() {
                return Err(SynthError::InvalidScenario(format!(
                    "actuator {} has an empty domain",
                    a.name
                )));
            }
            if a.scheduled_states().is_empty() {
                return Err(SynthError::InvalidScenario(format!(
                    "actuator {} has no scheduled states",
                    a.name
                )));
            }
            for s in &a.unscheduled {
                if !a.domain.contains(s) {
                    return Err(SynthError::InvalidScenario(format!(
                        "actuator {}: unscheduled state {s} not in domain",
                        a.name
                    )));
                }
            }
        }
        for s in &self.sensors {
            for n in &s.neighbors {
                if !self.actuators.iter().any(|a| &a.name == n) {
                    return Err(SynthError::InvalidScenario(format!(
                        "sensor {}: unknown neighbor {n}",
                        s.name
                    )));
                }
            }
            if s.noise_amp < 0.0 {
                return Err(SynthError::InvalidScenario(format!(
                    "sensor {}: negative noise amplitude",
                    s.name
                )));
            }
        }
        Ok(())
    }

    /// The relationship graph this plant implies (full domains, including
    /// unscheduled states).
    pub fn graph(&self) -> RelationshipGraph {
        let mut graph = RelationshipGraph::new();
        for a in &self.actuators {
            graph
                .add_actuator(ActuatorSpec::new(a.name.clone(), a.domain.clone()))
                .expect("validated names");
        }
        for s in &self.sensors {
            graph
                .add_sensor(s.name.clone(), s.neighbors.clone())
                .expect("validated names");
        }
        graph
    }

    /// Scheduled state combinations in deterministic order.
    fn combos(&self) -> Vec<Vec<u8>> {
        let mut combos = vec![Vec::new()];
        for a in &self.actuators {
            let states = a.scheduled_states();
            combos = combos
                .into_iter()
                .flat_map(|c| {
                    states.iter().map(move |s| {
                        let mut c = c.clone();
                        c.push(*s);
                        c
                    })
                })
                .collect();
        }
        combos
    }
}

impl ActuatorGen {
    fn scheduled_states(&self) -> Vec<u8> {
        self.domain
            .iter()
            .copied()
            .filter(|s| !self.unscheduled.contains(s))
            .collect()
    }
}

fn round4(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0
}

/// Generate a normal-operations trace: actuators cycle through every
/// scheduled state combination (dwell steps per visit) while each sensor
/// follows its per-state dynamics under bounded uniform noise. Same seed and
/// scenario give byte-identical output.
pub fn generate_normal(scenario: &PlantScenario) -> Result<(Dataset, Vec<String>)> {
    scenario.validate()?;
    let combos = scenario.combos();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut warnings = Vec::new();

    let full_cycles = scenario.duration / (scenario.dwell * combos.len());
    if full_cycles < scenario.min_state_visits.max(1) {
        warnings.push(format!(
            "duration {} gives each of {} state combinations only {} full visits (wanted {})",
            scenario.duration,
            combos.len(),
            full_cycles,
            scenario.min_state_visits.max(1)
        ));
    }

    let mut levels: Vec<f64> = scenario.sensors.iter().map(|s| s.initial).collect();
    let mut records = Vec::with_capacity(scenario.duration);
    for step in 0..scenario.duration {
        let combo = &combos[(step / scenario.dwell) % combos.len()];
        let mut sensors = Vec::with_capacity(scenario.sensors.len());
        for (si, sensor) in scenario.sensors.iter().enumerate() {
            let drive: f64 = sensor
                .neighbors
                .iter()
                .map(|n| {
                    let ai = scenario
                        .actuators
                        .iter()
                        .position(|a| &a.name == n)
                        .expect("validated neighbor");
                    sensor
                        .response
                        .get(n)
                        .and_then(|per_state| per_state.get(&combo[ai]))
                        .copied()
                        .unwrap_or(0.0)
                })
                .sum();
            let noise = if sensor.noise_amp > 0.0 {
                rng.random_range(-sensor.noise_amp..=sensor.noise_amp)
            } else {
                0.0
            };
            let value = match sensor.kind {
                SensorKindGen::Level => {
                    levels[si] = round4(levels[si] + drive + noise);
                    levels[si]
                }
                SensorKindGen::Flow => round4(sensor.initial + drive + noise),
            };
            sensors.push(value);
        }
        records.push(Record {
            index: (step + 1) as u64,
            sensors,
            actuators: combo.clone(),
            label: Label::Normal,
        });
    }

    let dataset = Dataset {
        sensor_names: scenario.sensors.iter().map(|s| s.name.clone()).collect(),
        actuator_names: scenario.actuators.iter().map(|a| a.name.clone()).collect(),
        records,
    };
    Ok((dataset, warnings))
}
