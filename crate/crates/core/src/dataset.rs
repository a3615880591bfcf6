//! Dataset schema and CSV ingestion.
//!
//! Datasets are RFC-4180-style CSV, UTF-8, header row required, `.` decimal
//! separator. Columns are device names; an optional leading `Index` column and
//! trailing `Label` column (values `Normal`/`Attack`) are recognized by name.
//! Sensor readings parse as f64 (the original decimal text is not retained);
//! actuator states parse as small non-negative integers validated against
//! their declared domain.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schema::{validate_device_name, SchemaConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Normal,
    Attack,
    Unlabeled,
}

impl Label {
    fn parse(s: &str) -> Option<Label> {
        match s {
            "Normal" => Some(Label::Normal),
            "Attack" => Some(Label::Attack),
            "Unlabeled" => Some(Label::Unlabeled),
            _ => None,
        }
    }

    fn as_str(&self) -> &'static str {
        match self {
            Label::Normal => "Normal",
            Label::Attack => "Attack",
            Label::Unlabeled => "Unlabeled",
        }
    }
}

/// One time-indexed row. Sensor readings and actuator states are stored in
/// schema column order; [`Dataset`] maps device names to positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    /// 1-based, strictly increasing time index at 1-second resolution.
    pub index: u64,
    pub sensors: Vec<f64>,
    pub actuators: Vec<u8>,
    pub label: Label,
}

/// An index-ordered, immutable-after-load collection of records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Dataset {
    pub sensor_names: Vec<String>,
    pub actuator_names: Vec<String>,
    pub records: Vec<Record>,
}

impl Dataset {
    pub fn sensor_position(&self, name: &str) -> Option<usize> {
        self.sensor_names.iter().position(|n| n == name)
    }

    pub fn actuator_position(&self, name: &str) -> Option<usize> {
        self.actuator_names.iter().position(|n| n == name)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Record position for a time index (records are strictly increasing).
    pub fn position_of_index(&self, index: u64) -> Option<usize> {
        self.records
            .binary_search_by_key(&index, |r| r.index)
            .ok()
    }

    pub fn reading(&self, pos: usize, sensor_col: usize) -> f64 {
        self.records[pos].sensors[sensor_col]
    }

    pub fn labels(&self) -> Vec<Label> {
        self.records.iter().map(|r| r.label).collect()
    }
}

/// Column layout resolved from a CSV header.
struct HeaderLayout {
    has_index: bool,
    label_col: Option<usize>,
    /// (csv column, sensor slot) pairs.
    sensor_cols: Vec<(usize, usize)>,
    /// (csv column, actuator slot, domain) pairs.
    actuator_cols: Vec<(usize, usize)>,
    sensor_names: Vec<String>,
    actuator_names: Vec<String>,
    width: usize,
}

fn resolve_header(header: &csv::StringRecord, schema: &SchemaConfig) -> Result<HeaderLayout> {
    let cells: Vec<&str> = header.iter().map(str::trim).collect();
    if cells.is_empty() {
        return Err(Error::Parse {
            row: 0,
            message: "empty header".to_string(),
        });
    }
    let has_index = cells
        .first()
        .map(|c| c.eq_ignore_ascii_case("index"))
        .unwrap_or(false);
    let label_col = cells
        .last()
        .filter(|c| c.eq_ignore_ascii_case("label"))
        .map(|_| cells.len() - 1);

    let device_range = (has_index as usize)..label_col.unwrap_or(cells.len());
    let mut sensor_cols = Vec::new();
    let mut actuator_cols = Vec::new();
    let mut sensor_names = Vec::new();
    let mut actuator_names = Vec::new();
    let mut seen = BTreeMap::new();
    for col in device_range {
        let name = cells[col];
        validate_device_name(name)?;
        if seen.insert(name.to_string(), col).is_some() {
            return Err(Error::Parse {
                row: 0,
                message: format!("duplicate device column {name:?}"),
            });
        }
        if schema.actuator(name).is_some() {
            actuator_cols.push((col, actuator_names.len()));
            actuator_names.push(name.to_string());
        } else {
            sensor_cols.push((col, sensor_names.len()));
            sensor_names.push(name.to_string());
        }
    }
    Ok(HeaderLayout {
        has_index,
        label_col,
        sensor_cols,
        actuator_cols,
        sensor_names,
        actuator_names,
        width: cells.len(),
    })
}

fn parse_row(
    layout: &HeaderLayout,
    schema: &SchemaConfig,
    row_no: u64,
    fallback_index: u64,
    last_index: Option<u64>,
    record: &csv::StringRecord,
) -> Result<Record> {
    if record.len() != layout.width {
        return Err(Error::Parse {
            row: row_no,
            message: format!("expected {} cells, got {}", layout.width, record.len()),
        });
    }
    let index = if layout.has_index {
        let cell = record.get(0).unwrap_or("").trim();
        cell.parse::<u64>().map_err(|_| Error::Parse {
            row: row_no,
            message: format!("invalid index cell {cell:?}"),
        })?
    } else {
        fallback_index
    };
    if let Some(last) = last_index {
        if index <= last {
            return Err(Error::Parse {
                row: row_no,
                message: format!("index {index} not strictly increasing (previous {last})"),
            });
        }
    }

    let mut sensors = vec![0.0; layout.sensor_cols.len()];
    for &(col, slot) in &layout.sensor_cols {
        let cell = record.get(col).unwrap_or("").trim();
        sensors[slot] = cell.parse::<f64>().map_err(|_| Error::Parse {
            row: row_no,
            message: format!("non-numeric cell {cell:?} in column {}", layout.sensor_names[slot]),
        })?;
    }

    let mut actuators = vec![0u8; layout.actuator_cols.len()];
    for &(col, slot) in &layout.actuator_cols {
        let name = &layout.actuator_names[slot];
        let cell = record.get(col).unwrap_or("").trim();
        let state = cell.parse::<u8>().map_err(|_| Error::Parse {
            row: row_no,
            message: format!("non-numeric cell {cell:?} in column {name}"),
        })?;
        let spec = schema.actuator(name).expect("actuator column has a spec");
        if !spec.contains(state) {
            return Err(Error::SchemaViolation {
                row: row_no,
                device: name.clone(),
                message: format!(
                    "state {state} outside declared domain {:?}",
                    spec.state_domain
                ),
            });
        }
        actuators[slot] = state;
    }

    let label = match layout.label_col {
        Some(col) => {
            let cell = record.get(col).unwrap_or("").trim();
            Label::parse(cell).ok_or_else(|| Error::Parse {
                row: row_no,
                message: format!("invalid label {cell:?}"),
            })?
        }
        None => Label::Unlabeled,
    };

    Ok(Record {
        index,
        sensors,
        actuators,
        label,
    })
}

/// Streaming record reader; memory use is independent of input length.
pub struct RecordStream<R: Read> {
    reader: csv::Reader<R>,
    layout: HeaderLayout,
    schema: SchemaConfig,
    row_no: u64,
    last_index: Option<u64>,
}

impl<R: Read> RecordStream<R> {
    pub fn new(source: R, schema: &SchemaConfig) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(source);
        let header = reader.headers()?.clone();
        let layout = resolve_header(&header, schema)?;
        Ok(RecordStream {
            reader,
            layout,
            schema: schema.clone(),
            row_no: 0,
            last_index: None,
        })
    }

    pub fn sensor_names(&self) -> &[String] {
        &self.layout.sensor_names
    }

    pub fn actuator_names(&self) -> &[String] {
        &self.layout.actuator_names
    }
}

impl<R: Read> Iterator for RecordStream<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut raw = csv::StringRecord::new();
        match self.reader.read_record(&mut raw) {
            Err(e) => Some(Err(e.into())),
            Ok(false) => None,
            Ok(true) => {
                self.row_no += 1;
                let fallback = self.row_no;
                let parsed = parse_row(
                    &self.layout,
                    &self.schema,
                    self.row_no,
                    fallback,
                    self.last_index,
                    &raw,
                );
                if let Ok(rec) = &parsed {
                    self.last_index = Some(rec.index);
                }
                Some(parsed)
            }
        }
    }
}

/// Parse a complete dataset from a header-bearing CSV byte stream.
pub fn parse_dataset<R: Read>(source: R, schema: &SchemaConfig) -> Result<Dataset> {
    let mut stream = RecordStream::new(source, schema)?;
    let mut records = Vec::new();
    for rec in &mut stream {
        records.push(rec?);
    }
    Ok(Dataset {
        sensor_names: stream.layout.sensor_names,
        actuator_names: stream.layout.actuator_names,
        records,
    })
}

/// Serialize a dataset back to CSV. The Index column is always written; the
/// Label column is written only when some record carries a label, so a
/// re-parse yields a field-for-field identical [`Dataset`].
pub fn write_csv<W: Write>(dataset: &Dataset, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let labeled = dataset
        .records
        .iter()
        .any(|r| r.label != Label::Unlabeled);

    let mut header = vec!["Index".to_string()];
    header.extend(dataset.sensor_names.iter().cloned());
    header.extend(dataset.actuator_names.iter().cloned());
    if labeled {
        header.push("Label".to_string());
    }
    writer.write_record(&header)?;

    let mut row: Vec<String> = Vec::with_capacity(header.len());
    for record in &dataset.records {
        row.clear();
        row.push(record.index.to_string());
        for v in &record.sensors {
            row.push(format_reading(*v));
        }
        for s in &record.actuators {
            row.push(s.to_string());
        }
        if labeled {
            row.push(record.label.as_str().to_string());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Shortest decimal text that round-trips to the same f64.
pub fn format_reading(v: f64) -> String {
    format!("{v}")
}

/// FNV-1a 64 over raw bytes; identifies the training data in store headers.
#[derive(Debug, Clone)]
pub struct Digest(u64);

impl Digest {
    pub fn new() -> Self {
        Digest(0xcbf29ce484222325)
    }

    pub fn update(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x100000001b3);
        }
    }

    pub fn hex(&self) -> String {
        format!("{:016x}", self.0)
    }
}

impl Default for Digest {
    fn default() -> Self {
        Self::new()
    }
}

/// A reader wrapper that digests bytes as they are consumed, so parsing and
/// provenance hashing share one pass.
pub struct HashingReader<R: Read> {
    inner: R,
    digest: Digest,
}

impl<R: Read> HashingReader<R> {
    pub fn new(inner: R) -> Self {
        HashingReader {
            inner,
            digest: Digest::new(),
        }
    }

    pub fn digest_hex(&self) -> String {
        self.digest.hex()
    }
}

impl<R: Read> Read for HashingReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.digest.update(&buf[..n]);
        Ok(n)
    }
}
