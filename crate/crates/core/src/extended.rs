//! Extended detection: empirical not-anomaly probabilities per reading and
//! sliding-window product bounds.
//!
//! Stateless bound checks miss stealth patterns that stay inside the trained
//! envelope. The extended detector assigns each reading an empirical
//! not-anomaly probability from the trained per-state value distribution,
//! multiplies the probabilities of the last `window_len` readings of that
//! state, and bounds the product by its training min/max. Windows are keyed
//! per (sensor, sb) and pause across sb changes, mirroring how training
//! populates per-state linearized groups.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::detector::{Breach, Verdict};
use crate::error::{Error, Result};
use crate::schema::RelationshipGraph;
use crate::switchboard::{
    encode_state, linearize, DetectorKind, LinearizedStateGroup, SbKey, SwitchboardState,
};

/// Above this window length the running product is kept in log space to
/// avoid underflow in the incremental state.
pub const LOG_SPACE_THRESHOLD: usize = 64;

/// One unique value with its exact-equality count and the cumulative counts
/// strictly below and above it.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqEntry {
    pub value: f64,
    pub freq: u64,
    pub cum_below: u64,
    pub cum_above: u64,
}

/// Sorted unique-value frequency distribution for one (sensor, sb, kind).
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub sensor: String,
    pub sb: SbKey,
    pub kind: DetectorKind,
    pub entries: Vec<FreqEntry>,
    pub total: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Position {
    Exact(usize),
    BelowMin,
    AboveMax,
    /// Strictly between entries i and i+1.
    Straddle(usize, usize),
}

impl FrequencyTable {
    /// Build from raw (finite) values; returns None for an empty slice.
    pub fn from_values(
        sensor: &str,
        sb: &SbKey,
        kind: DetectorKind,
        values: &[f64],
    ) -> Option<FrequencyTable> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let total = sorted.len() as u64;
        let mut entries: Vec<FreqEntry> = Vec::new();
        for v in sorted {
            match entries.last_mut() {
                Some(e) if e.value == v => e.freq += 1,
                _ => entries.push(FreqEntry {
                    value: v,
                    freq: 1,
                    cum_below: 0,
                    cum_above: 0,
                }),
            }
        }
        let mut below = 0;
        for e in &mut entries {
            e.cum_below = below;
            below += e.freq;
            e.cum_above = total - below;
        }
        Some(FrequencyTable {
            sensor: sensor.to_string(),
            sb: sb.clone(),
            kind,
            entries,
            total,
        })
    }

    /// Rebuild from stored (value, freq) pairs sorted ascending by value.
    pub fn from_counts(
        sensor: &str,
        sb: &SbKey,
        kind: DetectorKind,
        counts: &[(f64, u64)],
    ) -> Option<FrequencyTable> {
        if counts.is_empty() {
            return None;
        }
        let total: u64 = counts.iter().map(|(_, f)| f).sum();
        let mut below = 0;
        let entries = counts
            .iter()
            .map(|&(value, freq)| {
                let e = FreqEntry {
                    value,
                    freq,
                    cum_below: below,
                    cum_above: total - below - freq,
                };
                below += freq;
                e
            })
            .collect();
        Some(FrequencyTable {
            sensor: sensor.to_string(),
            sb: sb.clone(),
            kind,
            entries,
            total,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn find(&self, v: f64) -> Position {
        match self
            .entries
            .binary_search_by(|e| e.value.partial_cmp(&v).expect("finite values"))
        {
            Ok(i) => Position::Exact(i),
            Err(0) => Position::BelowMin,
            Err(n) if n == self.entries.len() => Position::AboveMax,
            Err(n) => Position::Straddle(n - 1, n),
        }
    }
}

/// Build the sorted frequency distribution of one linearized group. The
/// group does not know which series it was linearized over, so the table is
/// tagged Giant; `extended_train` tags tables with the series it trains.
pub fn build_frequency_table(group: &LinearizedStateGroup) -> Option<FrequencyTable> {
    let values: Vec<f64> = group.rows.iter().map(|r| r.1).collect();
    FrequencyTable::from_values(&group.sensor, &group.sb, DetectorKind::Giant, &values)
}

/// Left anomaly probability of the n-th entry (1-based): mass strictly below.
pub fn pr_left(n: usize, table: &FrequencyTable) -> f64 {
    table.entries[n - 1].cum_below as f64 / table.total as f64
}

/// Right anomaly probability of the n-th entry (1-based): mass strictly above.
pub fn pr_right(n: usize, table: &FrequencyTable) -> f64 {
    table.entries[n - 1].cum_above as f64 / table.total as f64
}

/// Empirical anomaly probability from left/right tail probabilities. The
/// branch sequence is evaluated in order and later branches overwrite
/// earlier results.
pub fn anom_probability(pr_l: f64, pr_r: f64) -> Result<f64> {
    let in_unit = |p: f64| (0.0..=1.0).contains(&p);
    if !in_unit(pr_l) || !in_unit(pr_r) || pr_l + pr_r > 1.0 + 1e-9 {
        return Err(Error::ProbabilityContract(format!(
            "pr_left={pr_l}, pr_right={pr_r}"
        )));
    }

    let mut p = if pr_l == 0.0 || pr_r == 0.0 {
        1.0
    } else if pr_l != 0.5 && pr_r != 0.5 {
        (0.5 - pr_l.min(pr_r)).abs() * 2.0
    } else {
        0.5
    };
    if pr_l + pr_r < 0.5 {
        p = (pr_l + pr_r).abs();
    }
    if pr_r == 0.0 && pr_l != 1.0 {
        p = pr_l;
    } else if pr_l == 0.0 && pr_r != 1.0 {
        p = pr_r;
    }
    Ok(p)
}

/// Anomaly probability of a value present in the table (training rows and
/// exact-match test lookups): the imbalance between the two tail masses;
/// balanced entries fall back to the tail-probability branch sequence.
/// Integer arithmetic on counts, divided once.
pub fn entry_anom_probability(entry: &FreqEntry, total: u64) -> f64 {
    if entry.cum_below == entry.cum_above {
        let t = total as f64;
        anom_probability(entry.cum_below as f64 / t, entry.cum_above as f64 / t)
            .expect("count-derived probabilities are in contract")
    } else {
        entry.cum_below.abs_diff(entry.cum_above) as f64 / total as f64
    }
}

/// A value's not-anomaly probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NotAnomProb {
    pub value: f64,
    pub p: f64,
}

/// Not-anomaly probability of a test value against a trained table. Exact
/// matches use the entry rule (identical to training, so replayed training
/// data reproduces its own products). A value straddling two entries takes
/// probabilities that include the neighboring mass on each side. Values
/// outside the table's support are fully anomalous.
pub fn lookup_test_probability(testval: f64, table: &FrequencyTable) -> NotAnomProb {
    let p = if !testval.is_finite() {
        0.0
    } else {
        match table.find(testval) {
            Position::Exact(i) => 1.0 - entry_anom_probability(&table.entries[i], table.total),
            Position::BelowMin | Position::AboveMax => 0.0,
            Position::Straddle(i, j) => {
                let t = table.total as f64;
                let left = &table.entries[i];
                let right = &table.entries[j];
                let pr_l = (left.cum_below + left.freq) as f64 / t;
                let pr_r = (right.freq + right.cum_above) as f64 / t;
                1.0 - anom_probability(pr_l, pr_r)
                    .expect("count-derived probabilities are in contract")
            }
        }
    };
    NotAnomProb { value: testval, p }
}

/// Not-anomaly probabilities for a group's rows, evaluated against a table
/// built from those same rows.
pub fn not_anom_series(values: &[f64], table: &FrequencyTable) -> Vec<f64> {
    values
        .iter()
        .map(|v| match table.find(*v) {
            Position::Exact(i) => 1.0 - entry_anom_probability(&table.entries[i], table.total),
            _ => unreachable!("training rows are table entries"),
        })
        .collect()
}

/// Round to `digits` decimal places before frequency binning; `None` keeps
/// exact equality on the parsed value.
pub fn quantize(v: f64, digits: Option<u32>) -> f64 {
    match digits {
        None => v,
        Some(d) => {
            let factor = 10f64.powi(d as i32);
            (v * factor).round() / factor
        }
    }
}

/// Product of one full window of not-anomaly probabilities.
pub fn sw_product(probs: &[f64]) -> f64 {
    probs.iter().product()
}

/// Incrementally maintained product over the last `len` probabilities: the
/// newest factor is multiplied in and the tail of the window divided out.
/// Exact zeros are tracked by count; the product is recomputed from scratch
/// whenever the last zero leaves the window. Long windows keep the running
/// state as a sum of logs.
#[derive(Debug, Clone)]
pub struct SlidingProduct {
    len: usize,
    buf: Vec<f64>,
    pos: usize,
    filled: usize,
    zero_count: usize,
    log_space: bool,
    linear: f64,
    sum_logs: f64,
}

impl SlidingProduct {
    pub fn new(len: usize) -> SlidingProduct {
        assert!(len >= 1, "window length must be positive");
        SlidingProduct {
            len,
            buf: vec![0.0; len],
            pos: 0,
            filled: 0,
            zero_count: 0,
            log_space: len > LOG_SPACE_THRESHOLD,
            linear: 1.0,
            sum_logs: 0.0,
        }
    }

    pub fn window_len(&self) -> usize {
        self.len
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.len
    }

    /// (zero factors, sum of logs of non-zero factors) when in log space.
    pub fn log_state(&self) -> Option<(usize, f64)> {
        self.log_space.then_some((self.zero_count, self.sum_logs))
    }

    /// Push the next probability; returns the window product once the
    /// window is full.
    pub fn push(&mut self, p: f64) -> Option<f64> {
        let evicted = if self.filled == self.len {
            let e = std::mem::replace(&mut self.buf[self.pos], p);
            self.pos = (self.pos + 1) % self.len;
            Some(e)
        } else {
            self.buf[self.pos] = p;
            self.pos = (self.pos + 1) % self.len;
            self.filled += 1;
            None
        };

        let had_zeros = self.zero_count > 0;
        if let Some(e) = evicted {
            if e == 0.0 {
                self.zero_count -= 1;
            }
        }
        if p == 0.0 {
            self.zero_count += 1;
        }

        if had_zeros && self.zero_count == 0 {
            self.rebuild();
        } else {
            if let Some(e) = evicted {
                if e != 0.0 {
                    if self.log_space {
                        self.sum_logs -= e.ln();
                    } else {
                        self.linear /= e;
                    }
                }
            }
            if p != 0.0 {
                if self.log_space {
                    self.sum_logs += p.ln();
                } else {
                    self.linear *= p;
                }
            }
            // Sub-normal linear products lose mantissa bits under division
            // (and an underflow to zero can never recover); rebuild from the
            // buffer until the product is back in the normal range.
            if !self.log_space && self.zero_count == 0 && self.linear < f64::MIN_POSITIVE {
                self.rebuild();
            }
        }

        self.is_full().then(|| self.product())
    }

    fn rebuild(&mut self) {
        let live = self.buf[..self.filled].iter().copied().filter(|&v| v != 0.0);
        if self.log_space {
            self.sum_logs = live.map(f64::ln).sum();
        } else {
            self.linear = live.product();
        }
    }

    fn product(&self) -> f64 {
        if self.zero_count > 0 {
            0.0
        } else if self.log_space {
            self.sum_logs.exp()
        } else {
            self.linear
        }
    }
}

/// Trained [min, max] of the sliding-window product for one
/// (sensor, sb, kind, window length).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowBounds {
    pub sensor: String,
    pub sb: SbKey,
    pub kind: DetectorKind,
    pub window_len: usize,
    pub min_prod: f64,
    pub max_prod: f64,
}

/// Min and max product over all full windows of a probability series, taken
/// in time order. None when the series is shorter than the window.
pub fn find_min_max_product(probs: &[f64], window_len: usize) -> Option<(f64, f64)> {
    if probs.len() < window_len {
        return None;
    }
    let mut sp = SlidingProduct::new(window_len);
    let mut bounds: Option<(f64, f64)> = None;
    for &p in probs {
        if let Some(prod) = sp.push(p) {
            bounds = Some(match bounds {
                None => (prod, prod),
                Some((lo, hi)) => (lo.min(prod), hi.max(prod)),
            });
        }
    }
    bounds
}

/// Everything extended training produces for one (sensor, kind).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtendedArtifacts {
    pub sensor: String,
    pub window_lens: Vec<usize>,
    pub tables: BTreeMap<SbKey, FrequencyTable>,
    pub windows: BTreeMap<SbKey, BTreeMap<usize, WindowBounds>>,
    pub warnings: Vec<String>,
}

/// Train the extended detector for one (sensor, kind): per sb, the frequency
/// table of (quantized) values, the per-row not-anomaly probabilities, and
/// the window product bounds for each configured length.
pub fn extended_train(
    sensor: &str,
    dataset: &Dataset,
    graph: &RelationshipGraph,
    kind: DetectorKind,
    window_lens: &[usize],
    quantize_digits: Option<u32>,
) -> Result<ExtendedArtifacts> {
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

    let mut out = ExtendedArtifacts {
        sensor: sensor.to_string(),
        window_lens: window_lens.to_vec(),
        ..Default::default()
    };
    if graph.nearest_neighbors(sensor)?.is_empty() {
        out.warnings
            .push(format!("sensor {sensor} has no nn-actuators; skipped"));
        return Ok(out);
    }

    let groups = linearize(dataset, sensor, graph, kind)?;
    if !groups.unseen.is_empty() {
        out.warnings.push(format!(
            "sensor {sensor}: {} training rows in invalid actuation states were excluded",
            groups.unseen.len()
        ));
    }
    for (sb, group) in &groups.groups {
        let values: Vec<f64> = group
            .rows
            .iter()
            .map(|r| quantize(r.1, quantize_digits))
            .collect();
        let Some(table) = FrequencyTable::from_values(sensor, sb, kind, &values) else {
            continue;
        };
        let probs = not_anom_series(&values, &table);
        let mut per_len = BTreeMap::new();
        for &len in window_lens {
            match find_min_max_product(&probs, len) {
                Some((min_prod, max_prod)) => {
                    per_len.insert(
                        len,
                        WindowBounds {
                            sensor: sensor.to_string(),
                            sb: sb.clone(),
                            kind,
                            window_len: len,
                            min_prod,
                            max_prod,
                        },
                    );
                }
                None => out.warnings.push(format!(
                    "sensor {sensor} sb {sb}: group of {} rows shorter than window {len}; skipped",
                    values.len()
                )),
            }
        }
        out.tables.insert(sb.clone(), table);
        out.windows.insert(sb.clone(), per_len);
    }
    Ok(out)
}

/// Streaming extended tester for one (sensor, kind). Single writer per
/// (sensor, sb); different sensors stream independently.
pub struct ExtendedTester<'a> {
    sensor: String,
    series: DetectorKind,
    artifacts: &'a ExtendedArtifacts,
    quantize_digits: Option<u32>,
    states: BTreeMap<SbKey, SbState>,
    emit_all: bool,
}

/// Per-switchboard-state stream state: one sliding product per window
/// length plus a ring of the indices currently inside the longest window.
struct SbState {
    products: Vec<SlidingProduct>,
    indices: std::collections::VecDeque<u64>,
}

impl<'a> ExtendedTester<'a> {
    pub fn new(
        sensor: &str,
        series: DetectorKind,
        artifacts: &'a ExtendedArtifacts,
        quantize_digits: Option<u32>,
    ) -> ExtendedTester<'a> {
        ExtendedTester {
            sensor: sensor.to_string(),
            series,
            artifacts,
            quantize_digits,
            states: BTreeMap::new(),
            emit_all: false,
        }
    }

    /// Also emit in-bounds window products (review mode).
    pub fn emit_all(mut self) -> ExtendedTester<'a> {
        self.emit_all = true;
        self
    }

    /// Feed the next reading (raw for giant, one-step diff for baby) with its
    /// switchboard state; verdicts are appended for each violated window.
    pub fn push(&mut self, index: u64, value: f64, sb: &SwitchboardState, out: &mut Vec<Verdict>) {
        let key = match sb {
            SwitchboardState::Unseen => {
                out.push(Verdict::extended(
                    &self.sensor,
                    index,
                    sb.to_string(),
                    value,
                    None,
                    None,
                    Breach::UnseenState,
                    Some("invalid actuation state".to_string()),
                    None,
                    None,
                    self.series,
                ));
                return;
            }
            SwitchboardState::Known(key) => key,
        };
        let Some(table) = self.artifacts.tables.get(key) else {
            out.push(Verdict::extended(
                &self.sensor,
                index,
                key.to_string(),
                value,
                None,
                None,
                Breach::UnseenState,
                Some("state not seen in training".to_string()),
                None,
                None,
                self.series,
            ));
            return;
        };
        let prob = lookup_test_probability(quantize(value, self.quantize_digits), table).p;
        let lens = &self.artifacts.window_lens;
        let max_len = lens.iter().copied().max().unwrap_or(1);
        let state = self.states.entry(key.clone()).or_insert_with(|| SbState {
            products: lens.iter().map(|&l| SlidingProduct::new(l)).collect(),
            indices: std::collections::VecDeque::with_capacity(max_len),
        });
        if state.indices.len() == max_len {
            state.indices.pop_front();
        }
        state.indices.push_back(index);
        let per_len = self.artifacts.windows.get(key);
        for sp in state.products.iter_mut() {
            let Some(product) = sp.push(prob) else {
                continue;
            };
            let Some(bounds) = per_len.and_then(|m| m.get(&sp.window_len())) else {
                continue;
            };
            let breach = if product < bounds.min_prod {
                Breach::BelowLb
            } else if product > bounds.max_prod {
                Breach::AboveUb
            } else {
                Breach::None
            };
            if breach != Breach::None || self.emit_all {
                let window_start = state.indices[state.indices.len() - sp.window_len()];
                out.push(Verdict::extended(
                    &self.sensor,
                    index,
                    key.to_string(),
                    product,
                    Some(bounds.min_prod),
                    Some(bounds.max_prod),
                    breach,
                    None,
                    Some(sp.window_len()),
                    Some(window_start),
                    self.series,
                ));
            }
        }
    }
}

/// Run the extended tester over a whole dataset.
pub fn extended_test_dataset(
    sensor: &str,
    dataset: &Dataset,
    graph: &RelationshipGraph,
    kind: DetectorKind,
    artifacts: &ExtendedArtifacts,
    quantize_digits: Option<u32>,
) -> Result<Vec<Verdict>> {
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

    let mut tester = ExtendedTester::new(sensor, kind, artifacts, quantize_digits);
    let mut verdicts = Vec::new();
    let skip = match kind {
        DetectorKind::Giant => 0,
        DetectorKind::Baby => 1,
    };
    let mut states = Vec::with_capacity(specs.len());
    for (pos, record) in dataset.records.iter().enumerate().skip(skip) {
        let value = match kind {
            DetectorKind::Giant => record.sensors[col],
            DetectorKind::Baby => record.sensors[col] - dataset.records[pos - 1].sensors[col],
        };
        states.clear();
        states.extend(actuator_cols.iter().map(|&c| record.actuators[c]));
        let sb = encode_state(&states, &specs);
        tester.push(record.index, value, &sb, &mut verdicts);
    }
    Ok(verdicts)
}
