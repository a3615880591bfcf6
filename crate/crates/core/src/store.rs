//! Versioned, sorted, human-diffable text persistence for trained artifacts.
//!
//! Layout: a header line carrying the format version, the training-data
//! digest, and the quantization setting, followed by one line per trained
//! entry:
//!
//! ```text
//! stepguard v1 digest=8f1e... quantize=-
//! baby,LIT101,0|1,0.0785,0.4711,3
//! giant,LIT101,1|1,121.2518,121.4099,3
//! ext,LIT101,0|1,baby,0.0785,1
//! win,LIT101,0|1,baby,3,0.072,0.096
//! ```
//!
//! Lines sort by their field tuples, so training output is deterministic
//! byte-for-byte. Floats are written with shortest round-trip formatting and
//! reload to the exact same f64.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};

use crate::dataset::format_reading;
use crate::detector::{BoundEntry, BoundStore, Provenance};
use crate::error::{Error, Result};
use crate::extended::{ExtendedArtifacts, FrequencyTable, WindowBounds};
use crate::switchboard::{DetectorKind, SbKey};

pub const FORMAT_VERSION: &str = "v1";
const MAGIC: &str = "stepguard";

/// Everything one training run produces: core bounds plus extended tables
/// and window bounds, with provenance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainedStore {
    pub digest: String,
    pub quantize: Option<u32>,
    pub bounds: BoundStore,
    extended: BTreeMap<(String, DetectorKind), ExtendedArtifacts>,
}

impl TrainedStore {
    pub fn new(digest: impl Into<String>, quantize: Option<u32>) -> TrainedStore {
        let digest = digest.into();
        let mut bounds = BoundStore::new();
        bounds.provenance = Provenance {
            dataset_digest: digest.clone(),
        };
        TrainedStore {
            bounds,
            digest,
            quantize,
            extended: BTreeMap::new(),
        }
    }

    pub fn insert_extended(&mut self, kind: DetectorKind, artifacts: ExtendedArtifacts) {
        self.extended
            .insert((artifacts.sensor.clone(), kind), artifacts);
    }

    pub fn extended_for(&self, sensor: &str, kind: DetectorKind) -> Option<&ExtendedArtifacts> {
        self.extended.get(&(sensor.to_string(), kind))
    }

    pub fn extended_entries(
        &self,
    ) -> impl Iterator<Item = (&(String, DetectorKind), &ExtendedArtifacts)> {
        self.extended.iter()
    }

    /// Widen the matching extended window bound to include a reviewed
    /// product observation. Returns false when no matching bound exists.
    pub fn widen_window(
        &mut self,
        sensor: &str,
        kind: DetectorKind,
        sb: &SbKey,
        window_len: usize,
        product: f64,
    ) -> bool {
        let Some(art) = self.extended.get_mut(&(sensor.to_string(), kind)) else {
            return false;
        };
        let Some(wb) = art.windows.get_mut(sb).and_then(|m| m.get_mut(&window_len)) else {
            return false;
        };
        wb.min_prod = wb.min_prod.min(product);
        wb.max_prod = wb.max_prod.max(product);
        true
    }

    pub fn write<W: Write>(&self, mut sink: W) -> Result<()> {
        let quantize = match self.quantize {
            Some(d) => d.to_string(),
            None => "-".to_string(),
        };
        writeln!(
            sink,
            "{MAGIC} {FORMAT_VERSION} digest={} quantize={quantize}",
            if self.digest.is_empty() { "-" } else { &self.digest }
        )?;

        for entry in self.bounds.sorted_entries() {
            writeln!(
                sink,
                "{},{},{},{},{},{}",
                entry.kind.as_str(),
                entry.sensor,
                entry.sb,
                format_reading(entry.lb),
                format_reading(entry.ub),
                entry.sample_count
            )?;
        }

        for ((sensor, kind), art) in &self.extended {
            for (sb, table) in &art.tables {
                for e in &table.entries {
                    writeln!(
                        sink,
                        "ext,{sensor},{sb},{},{},{}",
                        kind.as_str(),
                        format_reading(e.value),
                        e.freq
                    )?;
                }
            }
        }

        for ((sensor, kind), art) in &self.extended {
            for (sb, per_len) in &art.windows {
                for wb in per_len.values() {
                    writeln!(
                        sink,
                        "win,{sensor},{sb},{},{},{},{}",
                        kind.as_str(),
                        wb.window_len,
                        format_reading(wb.min_prod),
                        format_reading(wb.max_prod)
                    )?;
                }
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to memory");
        String::from_utf8(out).expect("store text is utf-8")
    }

    pub fn read<R: Read>(source: R) -> Result<TrainedStore> {
        let reader = BufReader::new(source);
        let mut lines = reader.lines().enumerate();

        let (_, header) = lines.next().ok_or(Error::StoreFormat {
            line: 1,
            message: "empty store file".to_string(),
        })?;
        let header = header?;
        let mut store = parse_header(&header)?;

        // (sensor, kind, sb) -> ascending (value, freq) pairs.
        let mut counts: BTreeMap<(String, DetectorKind, SbKey), Vec<(f64, u64)>> = BTreeMap::new();
        let mut windows: Vec<WindowBounds> = Vec::new();

        for (lineno, line) in lines {
            let line_no = lineno + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let fail = |message: String| Error::StoreFormat {
                line: line_no,
                message,
            };
            match fields[0] {
                "ext" => {
                    if fields.len() != 6 {
                        return Err(fail(format!("expected 6 fields, got {}", fields.len())));
                    }
                    let kind = DetectorKind::parse(fields[3])
                        .ok_or_else(|| fail(format!("unknown kind {:?}", fields[3])))?;
                    let sb = SbKey::parse(fields[2])
                        .map_err(|e| fail(e.to_string()))?;
                    let value: f64 = fields[4]
                        .parse()
                        .map_err(|_| fail(format!("bad value {:?}", fields[4])))?;
                    let freq: u64 = fields[5]
                        .parse()
                        .map_err(|_| fail(format!("bad freq {:?}", fields[5])))?;
                    counts
                        .entry((fields[1].to_string(), kind, sb))
                        .or_default()
                        .push((value, freq));
                }
                "win" => {
                    if fields.len() != 7 {
                        return Err(fail(format!("expected 7 fields, got {}", fields.len())));
                    }
                    let kind = DetectorKind::parse(fields[3])
                        .ok_or_else(|| fail(format!("unknown kind {:?}", fields[3])))?;
                    let sb = SbKey::parse(fields[2]).map_err(|e| fail(e.to_string()))?;
                    let window_len: usize = fields[4]
                        .parse()
                        .map_err(|_| fail(format!("bad window length {:?}", fields[4])))?;
                    let min_prod: f64 = fields[5]
                        .parse()
                        .map_err(|_| fail(format!("bad min {:?}", fields[5])))?;
                    let max_prod: f64 = fields[6]
                        .parse()
                        .map_err(|_| fail(format!("bad max {:?}", fields[6])))?;
                    windows.push(WindowBounds {
                        sensor: fields[1].to_string(),
                        sb,
                        kind,
                        window_len,
                        min_prod,
                        max_prod,
                    });
                }
                kind_str => {
                    let kind = DetectorKind::parse(kind_str)
                        .ok_or_else(|| fail(format!("unknown line tag {kind_str:?}")))?;
                    if fields.len() != 6 {
                        return Err(fail(format!("expected 6 fields, got {}", fields.len())));
                    }
                    let sb = SbKey::parse(fields[2]).map_err(|e| fail(e.to_string()))?;
                    let lb: f64 = fields[3]
                        .parse()
                        .map_err(|_| fail(format!("bad lb {:?}", fields[3])))?;
                    let ub: f64 = fields[4]
                        .parse()
                        .map_err(|_| fail(format!("bad ub {:?}", fields[4])))?;
                    let sample_count: u64 = fields[5]
                        .parse()
                        .map_err(|_| fail(format!("bad count {:?}", fields[5])))?;
                    store.bounds.insert(BoundEntry {
                        sensor: fields[1].to_string(),
                        sb,
                        kind,
                        lb,
                        ub,
                        sample_count,
                    });
                }
            }
        }

        for ((sensor, kind, sb), pairs) in counts {
            let table = FrequencyTable::from_counts(&sensor, &sb, kind, &pairs)
                .expect("non-empty count groups");
            store
                .extended
                .entry((sensor.clone(), kind))
                .or_insert_with(|| ExtendedArtifacts {
                    sensor,
                    ..Default::default()
                })
                .tables
                .insert(sb, table);
        }
        for wb in windows {
            let art = store
                .extended
                .entry((wb.sensor.clone(), wb.kind))
                .or_insert_with(|| ExtendedArtifacts {
                    sensor: wb.sensor.clone(),
                    ..Default::default()
                });
            if !art.window_lens.contains(&wb.window_len) {
                art.window_lens.push(wb.window_len);
            }
            art.windows.entry(wb.sb.clone()).or_default().insert(wb.window_len, wb);
        }
        for art in store.extended.values_mut() {
            art.window_lens.sort_unstable();
        }
        store.bounds.provenance.dataset_digest = store.digest.clone();
        Ok(store)
    }
}

fn parse_header(header: &str) -> Result<TrainedStore> {
    let fail = |message: String| Error::StoreFormat { line: 1, message };
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 4 || tokens[0] != MAGIC {
        return Err(fail(format!("bad header {header:?}")));
    }
    if tokens[1] != FORMAT_VERSION {
        return Err(fail(format!(
            "unsupported format version {:?} (expected {FORMAT_VERSION})",
            tokens[1]
        )));
    }
    let digest = tokens[2]
        .strip_prefix("digest=")
        .ok_or_else(|| fail(format!("bad digest token {:?}", tokens[2])))?;
    let quantize_str = tokens[3]
        .strip_prefix("quantize=")
        .ok_or_else(|| fail(format!("bad quantize token {:?}", tokens[3])))?;
    let quantize = match quantize_str {
        "-" => None,
        d => Some(
            d.parse::<u32>()
                .map_err(|_| fail(format!("bad quantize value {d:?}")))?,
        ),
    };
    let digest = if digest == "-" { String::new() } else { digest.to_string() };
    Ok(TrainedStore::new(digest, quantize))
}
