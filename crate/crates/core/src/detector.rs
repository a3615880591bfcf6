//! Giant-step and baby-step training and testing.
//!
//! Training linearizes a sensor's series per switchboard state and keeps the
//! inclusive [min, max] envelope of each group. Testing is a single state
//! lookup plus two comparisons per record, so per-record latency does not
//! depend on store size.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{format_reading, Dataset, Record};
use crate::error::{Error, Result};
use crate::schema::{ActuatorSpec, RelationshipGraph};
use crate::switchboard::{
    encode_state, linearize, DetectorKind, LinearizedStateGroup, SbKey, SwitchboardState,
};

/// Trained [lb, ub] for one (sensor, switchboard state, detector kind).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub sensor: String,
    pub sb: SbKey,
    pub kind: DetectorKind,
    pub lb: f64,
    pub ub: f64,
    pub sample_count: u64,
}

/// Provenance of a trained store. The timestamp stays in memory only;
/// serialized output must be byte-identical across runs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub dataset_digest: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SensorBounds {
    pub giant: HashMap<SbKey, BoundEntry>,
    pub baby: HashMap<SbKey, BoundEntry>,
}

impl SensorBounds {
    pub fn slice(&self, kind: DetectorKind) -> &HashMap<SbKey, BoundEntry> {
        match kind {
            DetectorKind::Giant => &self.giant,
            DetectorKind::Baby => &self.baby,
        }
    }

    fn slice_mut(&mut self, kind: DetectorKind) -> &mut HashMap<SbKey, BoundEntry> {
        match kind {
            DetectorKind::Giant => &mut self.giant,
            DetectorKind::Baby => &mut self.baby,
        }
    }
}

/// Core bound store: at most one entry per (sensor, kind, sb). Lookups for
/// absent keys resolve to the UnseenState verdict.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundStore {
    pub provenance: Provenance,
    sensors: BTreeMap<String, SensorBounds>,
}

impl BoundStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: BoundEntry) {
        self.sensors
            .entry(entry.sensor.clone())
            .or_default()
            .slice_mut(entry.kind)
            .insert(entry.sb.clone(), entry);
    }

    pub fn slice(&self, sensor: &str, kind: DetectorKind) -> Option<&HashMap<SbKey, BoundEntry>> {
        self.sensors.get(sensor).map(|s| s.slice(kind))
    }

    pub fn get(&self, sensor: &str, kind: DetectorKind, sb: &SbKey) -> Option<&BoundEntry> {
        self.slice(sensor, kind).and_then(|s| s.get(sb))
    }

    pub fn sensors(&self) -> impl Iterator<Item = &str> {
        self.sensors.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.values().all(|s| s.giant.is_empty() && s.baby.is_empty())
    }

    /// Entries in (kind, sensor, sb) order, matching the store file layout.
    pub fn sorted_entries(&self) -> Vec<&BoundEntry> {
        let mut out: Vec<&BoundEntry> = self
            .sensors
            .values()
            .flat_map(|s| s.giant.values().chain(s.baby.values()))
            .collect();
        out.sort_by(|a, b| {
            (a.kind.as_str(), &a.sensor, &a.sb).cmp(&(b.kind.as_str(), &b.sensor, &b.sb))
        });
        out
    }

    /// Entries with fewer supporting samples than `threshold` (operators may
    /// gate low-support states; off by default).
    pub fn weakly_trained(&self, threshold: u64) -> Vec<&BoundEntry> {
        self.sorted_entries()
            .into_iter()
            .filter(|e| e.sample_count < threshold)
            .collect()
    }

    /// Widen the matching interval to include `observed`, or create a
    /// degenerate entry when the state was never trained. Intervals only
    /// ever grow, so prior detections stay detections.
    pub fn widen(&mut self, sensor: &str, kind: DetectorKind, sb: &SbKey, observed: f64) {
        let slice = self
            .sensors
            .entry(sensor.to_string())
            .or_default()
            .slice_mut(kind);
        match slice.get_mut(sb) {
            Some(entry) => {
                entry.lb = entry.lb.min(observed);
                entry.ub = entry.ub.max(observed);
                entry.sample_count += 1;
            }
            None => {
                slice.insert(
                    sb.clone(),
                    BoundEntry {
                        sensor: sensor.to_string(),
                        sb: sb.clone(),
                        kind,
                        lb: observed,
                        ub: observed,
                        sample_count: 1,
                    },
                );
            }
        }
    }
}

/// What a single check concluded. `None` is the in-bounds outcome;
/// `NotApplicable` marks the index-1 baby-step cell that has no diff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Breach {
    None,
    BelowLb,
    AboveUb,
    UnseenState,
    NonFinite,
    NotApplicable,
}

/// Which detector produced a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Giant,
    Baby,
    Extended,
}

impl From<DetectorKind> for CheckKind {
    fn from(kind: DetectorKind) -> Self {
        match kind {
            DetectorKind::Giant => CheckKind::Giant,
            DetectorKind::Baby => CheckKind::Baby,
        }
    }
}

impl fmt::Display for CheckKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckKind::Giant => "giant",
            CheckKind::Baby => "baby",
            CheckKind::Extended => "extended",
        })
    }
}

/// The outcome of checking one value, carrying every field needed to render
/// the explanation sentence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub anomalous: bool,
    pub sensor: String,
    pub index: u64,
    pub check: CheckKind,
    /// Switchboard key, or "-1" for invalid/unseen states.
    pub sb: String,
    pub observed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ub: Option<f64>,
    pub breach: Breach,
    /// Distinguishes "invalid actuation state" from "state not seen in
    /// training" for UnseenState breaches.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// Window length for extended-detector verdicts.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_len: Option<usize>,
    /// Time index of the oldest reading in the violated window, so alarms
    /// can be attributed to the readings that caused them.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_start: Option<u64>,
    /// Which series an extended window was computed over.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<DetectorKind>,
}

impl Verdict {
    #[allow(clippy::too_many_arguments)]
    fn new(
        sensor: &str,
        index: u64,
        check: CheckKind,
        sb: String,
        observed: f64,
        lb: Option<f64>,
        ub: Option<f64>,
        breach: Breach,
        detail: Option<String>,
    ) -> Verdict {
        Verdict {
            anomalous: !matches!(breach, Breach::None | Breach::NotApplicable),
            sensor: sensor.to_string(),
            index,
            check,
            sb,
            observed,
            lb,
            ub,
            breach,
            detail,
            window_len: None,
            window_start: None,
            series: None,
        }
    }

    pub fn not_applicable(sensor: &str, index: u64, check: CheckKind) -> Verdict {
        Verdict::new(
            sensor,
            index,
            check,
            String::new(),
            f64::NAN,
            None,
            None,
            Breach::NotApplicable,
            None,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn extended(
        sensor: &str,
        index: u64,
        sb: String,
        observed: f64,
        lb: Option<f64>,
        ub: Option<f64>,
        breach: Breach,
        detail: Option<String>,
        window_len: Option<usize>,
        window_start: Option<u64>,
        series: DetectorKind,
    ) -> Verdict {
        let mut v = Verdict::new(
            sensor,
            index,
            CheckKind::Extended,
            sb,
            observed,
            lb,
            ub,
            breach,
            detail,
        );
        v.window_len = window_len;
        v.window_start = window_start;
        v.series = Some(series);
        v
    }
}

/// Round to 9 decimals before shortest-printing, so explanation text shows
/// the log's decimals rather than float-subtraction residue. JSON output
/// keeps full precision.
fn display_value(v: f64) -> String {
    if v.is_finite() {
        format_reading((v * 1e9).round() / 1e9)
    } else {
        format_reading(v)
    }
}

/// The operator-facing explanation sentence for a verdict.
pub fn explanation(verdict: &Verdict) -> String {
    match verdict.breach {
        Breach::None => "No anomaly was detected.".to_string(),
        Breach::NotApplicable => format!(
            "Not applicable for sensor {} at time index {}: no previous reading exists.",
            verdict.sensor, verdict.index
        ),
        Breach::UnseenState => format!(
            "Anomaly DETECTED for sensor {} at time index {} for actuation state {} because actuation state is invalid or not seen in training",
            verdict.sensor, verdict.index, verdict.sb
        ),
        Breach::BelowLb | Breach::AboveUb | Breach::NonFinite => format!(
            "Anomaly DETECTED for sensor {} at time index {} for actuation state {} because sensor value {} not in [{},{}]",
            verdict.sensor,
            verdict.index,
            verdict.sb,
            display_value(verdict.observed),
            verdict.lb.map(display_value).unwrap_or_else(|| "?".into()),
            verdict.ub.map(display_value).unwrap_or_else(|| "?".into()),
        ),
    }
}

/// Text plus a machine-readable record with identical fields.
pub fn render_explanation(verdict: &Verdict) -> (String, serde_json::Value) {
    let text = explanation(verdict);
    let mut record = serde_json::to_value(verdict).expect("verdicts serialize");
    record
        .as_object_mut()
        .expect("verdict is an object")
        .insert("message".to_string(), serde_json::Value::String(text.clone()));
    (text, record)
}

/// Inclusive min/max of a non-empty group; empty groups produce no entry.
pub fn determine_bounds(group: &LinearizedStateGroup, kind: DetectorKind) -> Option<BoundEntry> {
    let mut rows = group.rows.iter();
    let (_, first) = rows.next()?;
    let (mut lb, mut ub) = (*first, *first);
    for (_, v) in rows {
        if *v < lb {
            lb = *v;
        }
        if *v > ub {
            ub = *v;
        }
    }
    Some(BoundEntry {
        sensor: group.sensor.clone(),
        sb: group.sb.clone(),
        kind,
        lb,
        ub,
        sample_count: group.rows.len() as u64,
    })
}

/// Output of training one (sensor, kind).
#[derive(Debug, Clone, Default)]
pub struct TrainedSlice {
    pub entries: Vec<BoundEntry>,
    /// Rows routed to the Unseen sentinel (data errors in training).
    pub unseen_rows: usize,
    pub warnings: Vec<String>,
}

fn train_slice(
    sensor: &str,
    dataset: &Dataset,
    graph: &RelationshipGraph,
    kind: DetectorKind,
) -> Result<TrainedSlice> {
    let col = dataset
        .sensor_position(sensor)
        .ok_or_else(|| Error::UnknownSensor(sensor.to_string()))?;
    for record in &dataset.records {
        if !record.sensors[col].is_finite() {
            return Err(Error::NonFiniteTraining {
                device: sensor.to_string(),
                index: record.index,
            });
        }
    }

    let mut out = TrainedSlice::default();
    if graph.nearest_neighbors(sensor)?.is_empty() {
        out.warnings.push(format!(
            "sensor {sensor} has no nn-actuators; skipped"
        ));
        return Ok(out);
    }

    let groups = linearize(dataset, sensor, graph, kind)?;
    out.unseen_rows = groups.unseen.len();
    if out.unseen_rows > 0 {
        out.warnings.push(format!(
            "sensor {sensor}: {} training rows in invalid actuation states were excluded",
            out.unseen_rows
        ));
    }
    out.entries = groups
        .groups
        .values()
        .filter_map(|g| determine_bounds(g, kind))
        .collect();
    Ok(out)
}

/// Train giant-step bounds (raw readings) for one sensor.
pub fn giant_step_train(
    sensor: &str,
    dataset: &Dataset,
    graph: &RelationshipGraph,
) -> Result<TrainedSlice> {
    train_slice(sensor, dataset, graph, DetectorKind::Giant)
}

/// Train baby-step bounds (one-step diffs) for one sensor.
pub fn baby_step_train(
    sensor: &str,
    dataset: &Dataset,
    graph: &RelationshipGraph,
) -> Result<TrainedSlice> {
    train_slice(sensor, dataset, graph, DetectorKind::Baby)
}

/// Check one value against the trained slice for (sensor, kind). Every
/// outcome is a verdict; breach classification is exhaustive for any real
/// input including NaN.
pub fn bounds_check(
    index: u64,
    sensor: &str,
    value: f64,
    sb: &SwitchboardState,
    slice: &HashMap<SbKey, BoundEntry>,
    kind: DetectorKind,
    epsilon: f64,
) -> Verdict {
    let check = CheckKind::from(kind);
    let key = match sb {
        SwitchboardState::Unseen => {
            return Verdict::new(
                sensor,
                index,
                check,
                sb.to_string(),
                value,
                None,
                None,
                Breach::UnseenState,
                Some("invalid actuation state".to_string()),
            )
        }
        SwitchboardState::Known(key) => key,
    };
    let Some(entry) = slice.get(key) else {
        return Verdict::new(
            sensor,
            index,
            check,
            sb.to_string(),
            value,
            None,
            None,
            Breach::UnseenState,
            Some("state not seen in training".to_string()),
        );
    };
    let (lb, ub) = (entry.lb - epsilon, entry.ub + epsilon);
    let breach = if !value.is_finite() {
        Breach::NonFinite
    } else if value < lb {
        Breach::BelowLb
    } else if value > ub {
        Breach::AboveUb
    } else {
        Breach::None
    };
    Verdict::new(
        sensor,
        index,
        check,
        sb.to_string(),
        value,
        Some(entry.lb),
        Some(entry.ub),
        breach,
        None,
    )
}

fn record_state(
    record: &Record,
    actuator_cols: &[usize],
    specs: &[&ActuatorSpec],
) -> SwitchboardState {
    let states: Vec<u8> = actuator_cols.iter().map(|&c| record.actuators[c]).collect();
    encode_state(&states, specs)
}

/// Test the raw reading at a time index against trained giant-step bounds.
pub fn giant_step_test(
    index: u64,
    sensor: &str,
    dataset: &Dataset,
    graph: &RelationshipGraph,
    store: &BoundStore,
    epsilon: f64,
) -> Result<Verdict> {
    let pos = dataset
        .position_of_index(index)
        .ok_or(Error::IndexOutOfRange { index })?;
    let col = dataset
        .sensor_position(sensor)
        .ok_or_else(|| Error::UnknownSensor(sensor.to_string()))?;
    let specs = graph.neighbor_specs(sensor)?;
    let actuator_cols: Vec<usize> = specs
        .iter()
        .map(|s| {
            dataset
                .actuator_position(&s.name)
                .ok_or_else(|| Error::UnknownDevice(s.name.clone()))
        })
        .collect::<Result<_>>()?;
    let record = &dataset.records[pos];
    let sb = record_state(record, &actuator_cols, &specs);
    let empty = HashMap::new();
    let slice = store.slice(sensor, DetectorKind::Giant).unwrap_or(&empty);
    Ok(bounds_check(
        index,
        sensor,
        record.sensors[col],
        &sb,
        slice,
        DetectorKind::Giant,
        epsilon,
    ))
}

/// Test the one-step diff ending at a time index against trained baby-step
/// bounds. The first record has no diff and yields a NotApplicable verdict.
pub fn baby_step_test(
    index: u64,
    sensor: &str,
    dataset: &Dataset,
    graph: &RelationshipGraph,
    store: &BoundStore,
    epsilon: f64,
) -> Result<Verdict> {
    let pos = dataset
        .position_of_index(index)
        .ok_or(Error::IndexOutOfRange { index })?;
    if pos == 0 {
        return Ok(Verdict::not_applicable(sensor, index, CheckKind::Baby));
    }
    let col = dataset
        .sensor_position(sensor)
        .ok_or_else(|| Error::UnknownSensor(sensor.to_string()))?;
    let specs = graph.neighbor_specs(sensor)?;
    let actuator_cols: Vec<usize> = specs
        .iter()
        .map(|s| {
            dataset
                .actuator_position(&s.name)
                .ok_or_else(|| Error::UnknownDevice(s.name.clone()))
        })
        .collect::<Result<_>>()?;
    let record = &dataset.records[pos];
    let diff = record.sensors[col] - dataset.records[pos - 1].sensors[col];
    let sb = record_state(record, &actuator_cols, &specs);
    let empty = HashMap::new();
    let slice = store.slice(sensor, DetectorKind::Baby).unwrap_or(&empty);
    Ok(bounds_check(
        index,
        sensor,
        diff,
        &sb,
        slice,
        DetectorKind::Baby,
        epsilon,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::parse_dataset;

    const TRAIN_CSV: &str = "\
Index,LIT101,MV101,P101
1,121.2518,1,1
2,121.4088,1,1
3,121.4099,1,1
4,121.6050,0,1
5,121.6835,0,1
6,122.1546,0,1
";

    const ATTACK_CSV: &str = "\
Index,LIT101,MV101,P101
1,123.2151,1,1
2,121.6835,1,1
";

    fn graph() -> RelationshipGraph {
        RelationshipGraph::parse(
            "[sensors]\nLIT101 = MV101, P101\n[actuators]\nMV101 = 0,1,2\nP101 = 1,2\n",
        )
        .unwrap()
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    fn trained_store() -> BoundStore {
        let ds = parse_dataset(TRAIN_CSV.as_bytes(), &graph().schema()).unwrap();
        let mut store = BoundStore::new();
        for slice in [
            giant_step_train("LIT101", &ds, &graph()).unwrap(),
            baby_step_train("LIT101", &ds, &graph()).unwrap(),
        ] {
            for e in slice.entries {
                store.insert(e);
            }
        }
        store
    }

    #[test]
    fn baby_bounds_match_worked_example() {
        let store = trained_store();
        let b11 = store
            .get("LIT101", DetectorKind::Baby, &SbKey::parse("1|1").unwrap())
            .unwrap();
        assert!(close(b11.lb, 0.0011));
        assert!(close(b11.ub, 0.1570));
        assert_eq!(b11.sample_count, 2);

        let b01 = store
            .get("LIT101", DetectorKind::Baby, &SbKey::parse("0|1").unwrap())
            .unwrap();
        assert!(close(b01.lb, 0.0785));
        assert!(close(b01.ub, 0.4711));
        assert_eq!(b01.sample_count, 3);
    }

    #[test]
    fn singleton_group_gives_degenerate_interval() {
        let group = LinearizedStateGroup {
            sensor: "S".into(),
            sb: SbKey::parse("1").unwrap(),
            rows: vec![(1, 5.0)],
        };
        let entry = determine_bounds(&group, DetectorKind::Giant).unwrap();
        assert_eq!((entry.lb, entry.ub, entry.sample_count), (5.0, 5.0, 1));
    }

    #[test]
    fn empty_group_produces_no_entry() {
        let group = LinearizedStateGroup {
            sensor: "S".into(),
            sb: SbKey::parse("1").unwrap(),
            rows: vec![],
        };
        assert!(determine_bounds(&group, DetectorKind::Giant).is_none());
    }

    #[test]
    fn attack_diff_breaches_below_lb() {
        let store = trained_store();
        let attack = parse_dataset(ATTACK_CSV.as_bytes(), &graph().schema()).unwrap();
        let verdict = baby_step_test(2, "LIT101", &attack, &graph(), &store, 0.0).unwrap();
        assert!(verdict.anomalous);
        assert_eq!(verdict.breach, Breach::BelowLb);
        assert_eq!(verdict.sb, "1|1");
        assert!(close(verdict.observed, -1.5316));
        assert!(close(verdict.lb.unwrap(), 0.0011));
        assert!(close(verdict.ub.unwrap(), 0.1570));
        assert_eq!(
            explanation(&verdict),
            "Anomaly DETECTED for sensor LIT101 at time index 2 for actuation state 1|1 \
             because sensor value -1.5316 not in [0.0011,0.157]"
        );
    }

    #[test]
    fn index_one_is_not_applicable() {
        let store = trained_store();
        let attack = parse_dataset(ATTACK_CSV.as_bytes(), &graph().schema()).unwrap();
        let verdict = baby_step_test(1, "LIT101", &attack, &graph(), &store, 0.0).unwrap();
        assert_eq!(verdict.breach, Breach::NotApplicable);
        assert!(!verdict.anomalous);
    }

    #[test]
    fn boundary_values_are_inclusive() {
        let store = trained_store();
        let slice = store.slice("LIT101", DetectorKind::Baby).unwrap();
        let sb = SwitchboardState::Known(SbKey::parse("1|1").unwrap());
        let lb = store
            .get("LIT101", DetectorKind::Baby, &SbKey::parse("1|1").unwrap())
            .unwrap()
            .lb;
        let v = bounds_check(9, "LIT101", lb, &sb, slice, DetectorKind::Baby, 0.0);
        assert_eq!(v.breach, Breach::None);
        assert!(!v.anomalous);
        assert_eq!(explanation(&v), "No anomaly was detected.");
    }

    #[test]
    fn absent_state_is_unseen() {
        let store = trained_store();
        let slice = store.slice("LIT101", DetectorKind::Baby).unwrap();
        let sb = SwitchboardState::Known(SbKey::parse("2|2").unwrap());
        let v = bounds_check(4, "LIT101", 0.1, &sb, slice, DetectorKind::Baby, 0.0);
        assert_eq!(v.breach, Breach::UnseenState);
        assert!(v.anomalous);
        assert_eq!(v.detail.as_deref(), Some("state not seen in training"));
        assert!(explanation(&v).contains("actuation state is invalid or not seen in training"));
    }

    #[test]
    fn invalid_state_is_unseen_with_detail() {
        let store = trained_store();
        let slice = store.slice("LIT101", DetectorKind::Giant).unwrap();
        let v = bounds_check(
            4,
            "LIT101",
            121.5,
            &SwitchboardState::Unseen,
            slice,
            DetectorKind::Giant,
            0.0,
        );
        assert_eq!(v.breach, Breach::UnseenState);
        assert_eq!(v.detail.as_deref(), Some("invalid actuation state"));
        assert_eq!(v.sb, "-1");
    }

    #[test]
    fn nan_test_value_is_anomalous() {
        let store = trained_store();
        let slice = store.slice("LIT101", DetectorKind::Giant).unwrap();
        let sb = SwitchboardState::Known(SbKey::parse("1|1").unwrap());
        let v = bounds_check(3, "LIT101", f64::NAN, &sb, slice, DetectorKind::Giant, 0.0);
        assert_eq!(v.breach, Breach::NonFinite);
        assert!(v.anomalous);
    }

    #[test]
    fn nan_training_value_is_a_hard_error() {
        let csv = "Index,LIT101,MV101,P101\n1,NaN,1,1\n2,1.0,1,1\n";
        let ds = parse_dataset(csv.as_bytes(), &graph().schema()).unwrap();
        let err = giant_step_train("LIT101", &ds, &graph()).unwrap_err();
        assert!(matches!(err, Error::NonFiniteTraining { index: 1, .. }));
    }

    #[test]
    fn training_replay_is_sound() {
        let store = trained_store();
        let ds = parse_dataset(TRAIN_CSV.as_bytes(), &graph().schema()).unwrap();
        for record in &ds.records {
            let g = giant_step_test(record.index, "LIT101", &ds, &graph(), &store, 0.0).unwrap();
            assert!(!g.anomalous, "giant flagged training row {}", record.index);
            let b = baby_step_test(record.index, "LIT101", &ds, &graph(), &store, 0.0).unwrap();
            assert!(!b.anomalous, "baby flagged training row {}", record.index);
        }
    }

    #[test]
    fn epsilon_expands_the_envelope() {
        let store = trained_store();
        let slice = store.slice("LIT101", DetectorKind::Baby).unwrap();
        let sb = SwitchboardState::Known(SbKey::parse("1|1").unwrap());
        let v = bounds_check(5, "LIT101", 0.158, &sb, slice, DetectorKind::Baby, 0.0);
        assert_eq!(v.breach, Breach::AboveUb);
        let v = bounds_check(5, "LIT101", 0.158, &sb, slice, DetectorKind::Baby, 0.01);
        assert_eq!(v.breach, Breach::None);
    }

    #[test]
    fn constant_reading_sensor_trains_degenerate_intervals() {
        let csv = "Index,LIT101,MV101,P101\n1,5.5,1,1\n2,5.5,1,1\n3,5.5,0,1\n4,5.5,0,1\n";
        let ds = parse_dataset(csv.as_bytes(), &graph().schema()).unwrap();
        let slice = giant_step_train("LIT101", &ds, &graph()).unwrap();
        assert_eq!(slice.entries.len(), 2);
        assert!(slice.entries.iter().all(|e| e.lb == e.ub && e.lb == 5.5));
    }

    #[test]
    fn monotone_ramp_trains_degenerate_diff_interval() {
        let mut csv = String::from("Index,LIT101,MV101,P101\n");
        for i in 1..=10 {
            csv.push_str(&format!("{i},{},1,1\n", 100.0 + 0.05 * i as f64));
        }
        let ds = parse_dataset(csv.as_bytes(), &graph().schema()).unwrap();
        let slice = baby_step_train("LIT101", &ds, &graph()).unwrap();
        assert_eq!(slice.entries.len(), 1);
        let e = &slice.entries[0];
        assert!(close(e.lb, 0.05) && close(e.ub, 0.05));
    }

    #[test]
    fn sensor_without_neighbors_is_a_warned_noop() {
        let graph = RelationshipGraph::parse(
            "[sensors]\nLIT101 =\n[actuators]\nMV101 = 0,1,2\nP101 = 1,2\n",
        )
        .unwrap();
        let ds = parse_dataset(TRAIN_CSV.as_bytes(), &graph.schema()).unwrap();
        let slice = giant_step_train("LIT101", &ds, &graph).unwrap();
        assert!(slice.entries.is_empty());
        assert_eq!(slice.warnings.len(), 1);
    }

    #[test]
    fn widen_never_shrinks() {
        let mut store = trained_store();
        let key = SbKey::parse("1|1").unwrap();
        let before = store.get("LIT101", DetectorKind::Baby, &key).unwrap().clone();
        store.widen("LIT101", DetectorKind::Baby, &key, -2.0);
        let after = store.get("LIT101", DetectorKind::Baby, &key).unwrap();
        assert_eq!(after.lb, -2.0);
        assert_eq!(after.ub, before.ub);

        let novel = SbKey::parse("2|2").unwrap();
        store.widen("LIT101", DetectorKind::Baby, &novel, 0.5);
        let e = store.get("LIT101", DetectorKind::Baby, &novel).unwrap();
        assert_eq!((e.lb, e.ub, e.sample_count), (0.5, 0.5, 1));
    }

    #[test]
    fn low_support_states_are_reportable() {
        let store = trained_store();
        // The 1|1 baby group has two samples, 0|1 has three.
        let weak = store.weakly_trained(3);
        assert!(weak
            .iter()
            .any(|e| e.kind == DetectorKind::Baby && e.sb.as_str() == "1|1"));
        assert!(!weak
            .iter()
            .any(|e| e.kind == DetectorKind::Baby && e.sb.as_str() == "0|1"));
        assert!(store.weakly_trained(1).is_empty());
    }

    #[test]
    fn render_explanation_carries_identical_fields() {
        let store = trained_store();
        let attack = parse_dataset(ATTACK_CSV.as_bytes(), &graph().schema()).unwrap();
        let verdict = baby_step_test(2, "LIT101", &attack, &graph(), &store, 0.0).unwrap();
        let (text, record) = render_explanation(&verdict);
        assert_eq!(record["message"].as_str().unwrap(), text);
        assert_eq!(record["sensor"], "LIT101");
        assert_eq!(record["index"], 2);
        assert_eq!(record["sb"], "1|1");
        assert_eq!(record["breach"], "below_lb");
        assert!(record["anomalous"].as_bool().unwrap());
    }
}
