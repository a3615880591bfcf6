//! Command implementations and shared plumbing.

pub mod bench;
pub mod eval;
pub mod gen;
pub mod test;
pub mod train;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use anyhow::Context;

use stepguard_core::dataset::Record;
use stepguard_core::detector::{bounds_check, BoundEntry, Verdict};
use stepguard_core::extended::ExtendedTester;
use stepguard_core::schema::{ActuatorSpec, RelationshipGraph};
use stepguard_core::switchboard::{encode_state, DetectorKind, SbKey};
use stepguard_core::{CheckKind, TrainedStore};

#[derive(Debug, Clone, Copy)]
pub struct KindSet {
    pub giant: bool,
    pub baby: bool,
    pub extended: bool,
}

pub fn read_graph(path: &Path) -> anyhow::Result<RelationshipGraph> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading graph config {}", path.display()))?;
    Ok(RelationshipGraph::parse(&text)?)
}

pub fn read_store(path: &Path) -> anyhow::Result<TrainedStore> {
    let file =
        fs::File::open(path).with_context(|| format!("reading store {}", path.display()))?;
    Ok(TrainedStore::read(file)?)
}

/// A core detector slice as seen by the test loop: disabled, selected but
/// never trained (every record is then an unseen state), or trained.
enum CoreSlice<'a> {
    Off,
    Untrained,
    Trained(&'a HashMap<SbKey, BoundEntry>),
}

impl<'a> CoreSlice<'a> {
    fn resolve(selected: bool, slice: Option<&'a HashMap<SbKey, BoundEntry>>) -> CoreSlice<'a> {
        match (selected, slice) {
            (false, _) => CoreSlice::Off,
            (true, Some(s)) => CoreSlice::Trained(s),
            (true, None) => CoreSlice::Untrained,
        }
    }
}

/// Streaming checks for one sensor against a loaded store: core bound
/// lookups and extended window products, fed record by record.
pub struct SensorPipeline<'a> {
    pub sensor: String,
    sensor_col: usize,
    actuator_cols: Vec<usize>,
    specs: Vec<&'a ActuatorSpec>,
    giant: CoreSlice<'a>,
    baby: CoreSlice<'a>,
    ext_giant: Option<ExtendedTester<'a>>,
    ext_baby: Option<ExtendedTester<'a>>,
    epsilon: f64,
    emit_all: bool,
    prev: Option<f64>,
    states: Vec<u8>,
    empty: HashMap<SbKey, BoundEntry>,
}

impl<'a> SensorPipeline<'a> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        sensor: &str,
        sensor_names: &[String],
        actuator_names: &[String],
        graph: &'a RelationshipGraph,
        store: &'a TrainedStore,
        kinds: KindSet,
        epsilon: f64,
        emit_all: bool,
    ) -> anyhow::Result<SensorPipeline<'a>> {
        let sensor_col = sensor_names
            .iter()
            .position(|n| n == sensor)
            .with_context(|| format!("sensor {sensor} not in dataset"))?;
        let specs = graph.neighbor_specs(sensor)?;
        let actuator_cols = specs
            .iter()
            .map(|s| {
                actuator_names
                    .iter()
                    .position(|n| n == &s.name)
                    .with_context(|| format!("actuator {} not in dataset", s.name))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;

        let tester = |kind| {
            store.extended_for(sensor, kind).map(|art| {
                let t = ExtendedTester::new(sensor, kind, art, store.quantize);
                if emit_all {
                    t.emit_all()
                } else {
                    t
                }
            })
        };
        Ok(SensorPipeline {
            sensor: sensor.to_string(),
            sensor_col,
            actuator_cols,
            specs,
            giant: CoreSlice::resolve(
                kinds.giant,
                store.bounds.slice(sensor, DetectorKind::Giant),
            ),
            baby: CoreSlice::resolve(kinds.baby, store.bounds.slice(sensor, DetectorKind::Baby)),
            ext_giant: if kinds.extended {
                tester(DetectorKind::Giant)
            } else {
                None
            },
            ext_baby: if kinds.extended {
                tester(DetectorKind::Baby)
            } else {
                None
            },
            epsilon,
            emit_all,
            prev: None,
            states: Vec::new(),
            empty: HashMap::new(),
        })
    }

    pub fn check(&mut self, record: &Record, out: &mut Vec<Verdict>) {
        let value = record.sensors[self.sensor_col];
        self.states.clear();
        self.states
            .extend(self.actuator_cols.iter().map(|&c| record.actuators[c]));
        let sb = encode_state(&self.states, &self.specs);
        let diff = self.prev.map(|p| value - p);

        // An untrained slice checks against an empty map, so every state
        // resolves to an unseen-state verdict rather than silence.
        let slice_of = |slice: &CoreSlice<'a>, empty| match slice {
            CoreSlice::Off => None,
            CoreSlice::Untrained => Some(empty),
            CoreSlice::Trained(s) => Some(*s),
        };
        if let Some(slice) = slice_of(&self.giant, &self.empty) {
            let v = bounds_check(
                record.index,
                &self.sensor,
                value,
                &sb,
                slice,
                DetectorKind::Giant,
                self.epsilon,
            );
            if v.anomalous || self.emit_all {
                out.push(v);
            }
        }
        if let Some(slice) = slice_of(&self.baby, &self.empty) {
            match diff {
                Some(d) => {
                    let v = bounds_check(
                        record.index,
                        &self.sensor,
                        d,
                        &sb,
                        slice,
                        DetectorKind::Baby,
                        self.epsilon,
                    );
                    if v.anomalous || self.emit_all {
                        out.push(v);
                    }
                }
                None => {
                    if self.emit_all {
                        out.push(Verdict::not_applicable(
                            &self.sensor,
                            record.index,
                            CheckKind::Baby,
                        ));
                    }
                }
            }
        }
        if let Some(tester) = &mut self.ext_giant {
            tester.push(record.index, value, &sb, out);
        }
        if let Some(tester) = &mut self.ext_baby {
            if let Some(d) = diff {
                tester.push(record.index, d, &sb, out);
            }
        }
        self.prev = Some(value);
    }
}

/// Latency percentiles over per-record sample durations (microseconds).
#[derive(Debug, Clone, Copy)]
pub struct LatencySummary {
    pub samples: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

pub fn summarize_latency(samples_ns: &mut [u64]) -> Option<LatencySummary> {
    if samples_ns.is_empty() {
        return None;
    }
    samples_ns.sort_unstable();
    let n = samples_ns.len();
    let pct = |p: f64| samples_ns[(((n - 1) as f64) * p) as usize] as f64 / 1000.0;
    let mean = samples_ns.iter().sum::<u64>() as f64 / n as f64 / 1000.0;
    Some(LatencySummary {
        samples: n,
        mean_us: mean,
        p50_us: pct(0.50),
        p99_us: pct(0.99),
        max_us: *samples_ns.last().unwrap() as f64 / 1000.0,
    })
}
