//! Device schema and the sensor/actuator relationship graph.
//!
//! The graph config is a line-oriented document with two sections:
//!
//! ```text
//! # stage 1
//! [sensors]
//! LIT101 = MV101, P101
//! AIT503 = P501, P201
//!
//! [actuators]
//! MV101 = 0, 1, 2
//! P101  = 1, 2
//! ```
//!
//! `[sensors]` maps each sensor to its ordered nn-actuator list (the order
//! fixes the switchboard concatenation order). `[actuators]` declares each
//! actuator's legal state domain. Whitespace is insignificant and `#` starts
//! a comment.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviceKind {
    Sensor,
    Actuator,
}

/// A named device. Names are unique within a schema and the kind is fixed at
/// load time.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DeviceId {
    pub name: String,
    pub kind: DeviceKind,
}

impl DeviceId {
    pub fn sensor(name: impl Into<String>) -> Self {
        DeviceId {
            name: name.into(),
            kind: DeviceKind::Sensor,
        }
    }

    pub fn actuator(name: impl Into<String>) -> Self {
        DeviceId {
            name: name.into(),
            kind: DeviceKind::Actuator,
        }
    }
}

/// An actuator plus its legal state domain, e.g. P101 with {1, 2}.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActuatorSpec {
    pub name: String,
    /// Ordered set of small non-negative state integers.
    pub state_domain: Vec<u8>,
}

impl ActuatorSpec {
    pub fn new(name: impl Into<String>, mut domain: Vec<u8>) -> Self {
        domain.sort_unstable();
        domain.dedup();
        ActuatorSpec {
            name: name.into(),
            state_domain: domain,
        }
    }

    pub fn contains(&self, state: u8) -> bool {
        self.state_domain.contains(&state)
    }
}

/// Device names appear in CSV headers, graph configs, store files and JSON
/// output, so they are restricted to a character set every format can carry.
pub fn validate_device_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidDeviceName(name.to_string()))
    }
}

/// The actuator declarations used to validate a dataset while parsing.
/// Columns not declared here (and not Index/Label) are treated as sensors.
#[derive(Debug, Clone, Default)]
pub struct SchemaConfig {
    pub actuators: BTreeMap<String, ActuatorSpec>,
}

impl SchemaConfig {
    pub fn actuator(&self, name: &str) -> Option<&ActuatorSpec> {
        self.actuators.get(name)
    }
}

/// Per-sensor ordered nn-actuator lists plus actuator state domains.
/// Immutable after load; the ordering is stable across train and test.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationshipGraph {
    sensors: BTreeMap<String, Vec<String>>,
    actuators: BTreeMap<String, ActuatorSpec>,
}

impl RelationshipGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_sensor(&mut self, sensor: impl Into<String>, neighbors: Vec<String>) -> Result<()> {
        let sensor = sensor.into();
        validate_device_name(&sensor)?;
        for n in &neighbors {
            validate_device_name(n)?;
        }
        self.sensors.insert(sensor, neighbors);
        Ok(())
    }

    pub fn add_actuator(&mut self, spec: ActuatorSpec) -> Result<()> {
        validate_device_name(&spec.name)?;
        self.actuators.insert(spec.name.clone(), spec);
        Ok(())
    }

    /// The stored ordered nn-actuator list for a sensor (input/output-side
    /// neighbors plus any PLC-imposed additions, in declaration order).
    pub fn nearest_neighbors(&self, sensor: &str) -> Result<&[String]> {
        self.sensors
            .get(sensor)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownSensor(sensor.to_string()))
    }

    pub fn actuator(&self, name: &str) -> Option<&ActuatorSpec> {
        self.actuators.get(name)
    }

    /// Sensors in deterministic (name) order.
    pub fn sensors(&self) -> impl Iterator<Item = &str> {
        self.sensors.keys().map(String::as_str)
    }

    pub fn actuators(&self) -> impl Iterator<Item = &ActuatorSpec> {
        self.actuators.values()
    }

    /// The nn-actuator specs for a sensor, in switchboard order.
    pub fn neighbor_specs(&self, sensor: &str) -> Result<Vec<&ActuatorSpec>> {
        let names = self.nearest_neighbors(sensor)?;
        names
            .iter()
            .map(|n| {
                self.actuators
                    .get(n)
                    .ok_or_else(|| Error::UnknownDevice(n.clone()))
            })
            .collect()
    }

    pub fn schema(&self) -> SchemaConfig {
        SchemaConfig {
            actuators: self.actuators.clone(),
        }
    }

    /// Parse the line-oriented graph config document.
    pub fn parse(text: &str) -> Result<Self> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Sensors,
            Actuators,
        }
        let mut section = Section::None;
        let mut graph = RelationshipGraph::new();

        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let content = content.trim();
            if content.is_empty() {
                continue;
            }
            match content {
                "[sensors]" => {
                    section = Section::Sensors;
                    continue;
                }
                "[actuators]" => {
                    section = Section::Actuators;
                    continue;
                }
                _ => {}
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::GraphConfig {
                line,
                message: format!("expected `NAME = ...`, got {content:?}"),
            })?;
            let key = key.trim();
            validate_device_name(key).map_err(|e| Error::GraphConfig {
                line,
                message: e.to_string(),
            })?;
            let items: Vec<&str> = value
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            match section {
                Section::Sensors => {
                    let neighbors: Result<Vec<String>> = items
                        .iter()
                        .map(|n| {
                            validate_device_name(n)
                                .map(|_| n.to_string())
                                .map_err(|e| Error::GraphConfig {
                                    line,
                                    message: e.to_string(),
                                })
                        })
                        .collect();
                    graph.sensors.insert(key.to_string(), neighbors?);
                }
                Section::Actuators => {
                    let domain: Result<Vec<u8>> = items
                        .iter()
                        .map(|s| {
                            s.parse::<u8>().map_err(|_| Error::GraphConfig {
                                line,
                                message: format!("invalid state {s:?} for actuator {key}"),
                            })
                        })
                        .collect();
                    graph
                        .actuators
                        .insert(key.to_string(), ActuatorSpec::new(key, domain?));
                }
                Section::None => {
                    return Err(Error::GraphConfig {
                        line,
                        message: "entry outside of [sensors]/[actuators] section".to_string(),
                    })
                }
            }
        }
        Ok(graph)
    }

    /// Serialize back to the config document format.
    pub fn to_config(&self) -> String {
        let mut out = String::from("[sensors]\n");
        for (sensor, neighbors) in &self.sensors {
            out.push_str(sensor);
            out.push_str(" = ");
            out.push_str(&neighbors.join(", "));
            out.push('\n');
        }
        out.push_str("\n[actuators]\n");
        for spec in self.actuators.values() {
            out.push_str(&spec.name);
            out.push_str(" = ");
            let states: Vec<String> = spec.state_domain.iter().map(u8::to_string).collect();
            out.push_str(&states.join(", "));
            out.push('\n');
        }
        out
    }
}

/// One finding from [`validate_graph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "issue", rename_all = "snake_case")]
pub enum ValidationIssue {
    /// Sensor has no nn-actuators and will be excluded from training.
    NoNeighbors { sensor: String },
    /// A device referenced by the graph is absent from the dataset schema.
    DeviceAbsent { device: String },
    /// An actuator was observed in a state outside its declared domain.
    DomainMismatch {
        actuator: String,
        observed: u8,
        index: u64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Report-only consistency check of a graph against a dataset: sensors with
/// no nn-actuators, devices referenced but absent, and observed actuator
/// values outside their declared domain.
pub fn validate_graph(graph: &RelationshipGraph, dataset: &crate::dataset::Dataset) -> ValidationReport {
    let mut report = ValidationReport::default();

    for (sensor, neighbors) in &graph.sensors {
        if neighbors.is_empty() {
            report.issues.push(ValidationIssue::NoNeighbors {
                sensor: sensor.clone(),
            });
        }
        if dataset.sensor_position(sensor).is_none() {
            report.issues.push(ValidationIssue::DeviceAbsent {
                device: sensor.clone(),
            });
        }
        for n in neighbors {
            if dataset.actuator_position(n).is_none() {
                report.issues.push(ValidationIssue::DeviceAbsent { device: n.clone() });
            }
        }
    }

    for spec in graph.actuators.values() {
        let Some(col) = dataset.actuator_position(&spec.name) else {
            continue;
        };
        for record in &dataset.records {
            let observed = record.actuators[col];
            if !spec.contains(observed) {
                report.issues.push(ValidationIssue::DomainMismatch {
                    actuator: spec.name.clone(),
                    observed,
                    index: record.index,
                });
            }
        }
    }

    report.issues.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
    report.issues.dedup();
    report
}
