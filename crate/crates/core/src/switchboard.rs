//! Switchboard keys and linearized state groups.
//!
//! A switchboard key encodes the ordered tuple of a sensor's nn-actuator
//! states at one time index. Keys are delimiter-joined (`"1|1"`, `"0|1"`)
//! rather than plain digit concatenation so that multi-digit states decode
//! unambiguously; the key must invert exactly for explanations to trace a
//! verdict back to its actuation state.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::schema::{ActuatorSpec, RelationshipGraph};

pub const KEY_DELIMITER: char = '|';
/// Display form of the invalid/never-trained state sentinel.
pub const UNSEEN_KEY: &str = "-1";

/// A valid switchboard key: actuator states joined in graph order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SbKey(String);

impl SbKey {
    pub fn from_states(states: &[u8]) -> SbKey {
        let mut key = String::with_capacity(states.len() * 2);
        write_states(&mut key, states);
        SbKey(key)
    }

    /// Reconstruct from a stored key string (store files, config).
    pub fn parse(key: &str) -> Result<SbKey> {
        let parsed: std::result::Result<Vec<u8>, _> =
            key.split(KEY_DELIMITER).map(str::parse::<u8>).collect();
        match parsed {
            Ok(states) if !states.is_empty() => Ok(SbKey::from_states(&states)),
            _ => Err(Error::ProbabilityContract(format!(
                "invalid switchboard key {key:?}"
            ))),
        }
    }

    pub fn decode(&self) -> Vec<u8> {
        self.0
            .split(KEY_DELIMITER)
            .map(|s| s.parse().expect("keys only hold encoded states"))
            .collect()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SbKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn write_states(buf: &mut String, states: &[u8]) {
    use fmt::Write;
    for (i, s) in states.iter().enumerate() {
        if i > 0 {
            buf.push(KEY_DELIMITER);
        }
        let _ = write!(buf, "{s}");
    }
}

/// A record's switchboard state: a valid key, or the sentinel for state
/// tuples containing a value outside its actuator's domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SwitchboardState {
    Known(SbKey),
    Unseen,
}

impl SwitchboardState {
    pub fn key(&self) -> Option<&SbKey> {
        match self {
            SwitchboardState::Known(k) => Some(k),
            SwitchboardState::Unseen => None,
        }
    }
}

impl fmt::Display for SwitchboardState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SwitchboardState::Known(k) => k.fmt(f),
            SwitchboardState::Unseen => f.write_str(UNSEEN_KEY),
        }
    }
}

/// Encode an ordered actuator state tuple against the matching specs. Any
/// value outside its actuator's domain (or an arity mismatch) yields the
/// Unseen sentinel.
pub fn encode_state(states: &[u8], specs: &[&ActuatorSpec]) -> SwitchboardState {
    if states.len() != specs.len() || states.is_empty() {
        return SwitchboardState::Unseen;
    }
    for (state, spec) in states.iter().zip(specs) {
        if !spec.contains(*state) {
            return SwitchboardState::Unseen;
        }
    }
    SwitchboardState::Known(SbKey::from_states(states))
}

/// Which series a detector trains and tests on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Raw sensor readings per switchboard state.
    Giant,
    /// One-step differences (rate of change) per switchboard state.
    Baby,
}

impl DetectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            DetectorKind::Giant => "giant",
            DetectorKind::Baby => "baby",
        }
    }

    pub fn parse(s: &str) -> Option<DetectorKind> {
        match s {
            "giant" => Some(DetectorKind::Giant),
            "baby" => Some(DetectorKind::Baby),
            _ => None,
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Time-ordered rows of one sensor sharing one switchboard state. `rows`
/// holds raw readings in Giant mode and one-step diffs in Baby mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedStateGroup {
    pub sensor: String,
    pub sb: SbKey,
    pub rows: Vec<(u64, f64)>,
}

/// All groups for one (sensor, mode), plus rows routed to the Unseen
/// sentinel (reported, never trained on).
#[derive(Debug, Clone, Default)]
pub struct LinearizedGroups {
    pub groups: BTreeMap<SbKey, LinearizedStateGroup>,
    pub unseen: Vec<(u64, f64)>,
}

impl LinearizedGroups {
    pub fn row_count(&self) -> usize {
        self.groups.values().map(|g| g.rows.len()).sum()
    }
}

/// One-step difference series for a sensor: diff(i) = reading(i) − reading(i−1)
/// over consecutive records. The first record has no diff and is excluded.
pub fn dataset_diff(dataset: &Dataset, sensor: &str) -> Result<Vec<(u64, f64)>> {
    let col = dataset
        .sensor_position(sensor)
        .ok_or_else(|| Error::UnknownSensor(sensor.to_string()))?;
    Ok(dataset
        .records
        .windows(2)
        .map(|w| (w[1].index, w[1].sensors[col] - w[0].sensors[col]))
        .collect())
}

/// Split a sensor's series into linearized state groups keyed by each
/// record's switchboard state. In Baby mode the diff is computed across the
/// global series, and a diff spanning an sb change belongs to the current
/// record's group.
pub fn linearize(
    dataset: &Dataset,
    sensor: &str,
    graph: &RelationshipGraph,
    mode: DetectorKind,
) -> Result<LinearizedGroups> {
    let sensor_col = dataset
        .sensor_position(sensor)
        .ok_or_else(|| Error::UnknownSensor(sensor.to_string()))?;
    let specs = graph.neighbor_specs(sensor)?;
    let actuator_cols: Vec<usize> = specs
        .iter()
        .map(|spec| {
            dataset
                .actuator_position(&spec.name)
                .ok_or_else(|| Error::UnknownDevice(spec.name.clone()))
        })
        .collect::<Result<_>>()?;

    let mut out = LinearizedGroups::default();
    if specs.is_empty() {
        return Ok(out);
    }

    let skip = match mode {
        DetectorKind::Giant => 0,
        DetectorKind::Baby => 1,
    };
    let mut states = Vec::with_capacity(specs.len());
    for (pos, record) in dataset.records.iter().enumerate().skip(skip) {
        let value = match mode {
            DetectorKind::Giant => record.sensors[sensor_col],
            DetectorKind::Baby => {
                record.sensors[sensor_col] - dataset.records[pos - 1].sensors[sensor_col]
            }
        };
        states.clear();
        states.extend(actuator_cols.iter().map(|&c| record.actuators[c]));
        match encode_state(&states, &specs) {
            SwitchboardState::Known(key) => {
                out.groups
                    .entry(key.clone())
                    .or_insert_with(|| LinearizedStateGroup {
                        sensor: sensor.to_string(),
                        sb: key,
                        rows: Vec::new(),
                    })
                    .rows
                    .push((record.index, value));
            }
            SwitchboardState::Unseen => out.unseen.push((record.index, value)),
        }
    }
    Ok(out)
}
