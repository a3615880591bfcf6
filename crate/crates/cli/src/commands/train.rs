//! `stepguard train`

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::Context;

use stepguard_core::dataset::{parse_dataset, HashingReader};
use stepguard_core::schema::validate_graph;
use stepguard_core::switchboard::{DetectorKind, SbKey};
use stepguard_core::{baby_step_train, extended_train, giant_step_train, TrainedStore};

use super::{read_graph, KindSet};

#[allow(clippy::too_many_arguments)]
pub fn run(
    normal: &Path,
    graph_path: &Path,
    store_path: &Path,
    sensors: &[String],
    kinds: KindSet,
    windows: &[usize],
    quantize: Option<u32>,
    promote: Option<&Path>,
) -> anyhow::Result<i32> {
    let graph = read_graph(graph_path)?;
    let file = fs::File::open(normal)
        .with_context(|| format!("reading training data {}", normal.display()))?;
    let mut reader = HashingReader::new(file);
    let dataset = parse_dataset(&mut reader, &graph.schema())?;
    let digest = reader.digest_hex();

    let selected: Vec<String> = if sensors.is_empty() {
        graph
            .sensors()
            .filter(|s| dataset.sensor_position(s).is_some())
            .map(str::to_string)
            .collect()
    } else {
        for s in sensors {
            if dataset.sensor_position(s).is_none() {
                anyhow::bail!("config validation: sensor {s} not present in {}", normal.display());
            }
        }
        sensors.to_vec()
    };
    if selected.is_empty() {
        anyhow::bail!("config validation: no graph sensor appears in the training data");
    }

    let report = validate_graph(&graph, &dataset);
    for issue in &report.issues {
        eprintln!("graph validation: {issue:?}");
    }

    let mut store = TrainedStore::new(digest, quantize);
    let mut warnings = Vec::new();
    eprintln!(
        "training {} sensors over {} records",
        selected.len(),
        dataset.len()
    );
    for sensor in &selected {
        let t0 = Instant::now();
        let mut entries = 0usize;
        if kinds.giant {
            let slice = giant_step_train(sensor, &dataset, &graph)?;
            entries += slice.entries.len();
            warnings.extend(slice.warnings);
            for e in slice.entries {
                store.bounds.insert(e);
            }
        }
        if kinds.baby {
            let slice = baby_step_train(sensor, &dataset, &graph)?;
            entries += slice.entries.len();
            warnings.extend(slice.warnings);
            for e in slice.entries {
                store.bounds.insert(e);
            }
        }
        if kinds.extended {
            for kind in [DetectorKind::Giant, DetectorKind::Baby] {
                let art = extended_train(sensor, &dataset, &graph, kind, windows, quantize)?;
                warnings.extend(art.warnings.iter().cloned());
                entries += art.tables.len();
                store.insert_extended(kind, art);
            }
        }
        eprintln!(
            "  {sensor}: {entries} trained entries in {:.1} ms",
            t0.elapsed().as_secs_f64() * 1e3
        );
    }

    if let Some(path) = promote {
        let promoted = promote_warnings(&mut store, path, &mut warnings)?;
        eprintln!("promoted {promoted} reviewed warnings into the trained bounds");
    }

    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let mut out = fs::File::create(store_path)
        .with_context(|| format!("writing store {}", store_path.display()))?;
    store.write(&mut out)?;
    out.flush()?;
    eprintln!("store written to {}", store_path.display());
    Ok(0)
}

/// Merge reviewed false positives into the store: each verdict widens the
/// matching interval (or window bound) to include its observation, so the
/// warning cannot re-appear. Intervals only grow.
fn promote_warnings(
    store: &mut TrainedStore,
    path: &Path,
    warnings: &mut Vec<String>,
) -> anyhow::Result<usize> {
    let file = fs::File::open(path)
        .with_context(|| format!("reading reviewed warnings {}", path.display()))?;
    let mut promoted = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line)
            .with_context(|| format!("warning line {}", lineno + 1))?;
        let field = |name: &str| {
            v.get(name)
                .and_then(|x| x.as_str())
                .map(str::to_string)
                .with_context(|| format!("warning line {}: missing {name}", lineno + 1))
        };
        let sensor = field("sensor")?;
        let check = field("check")?;
        let sb_str = field("sb")?;
        let observed = v
            .get("observed")
            .and_then(|x| x.as_f64())
            .with_context(|| format!("warning line {}: missing observed", lineno + 1))?;
        let Ok(sb) = SbKey::parse(&sb_str) else {
            warnings.push(format!(
                "promote: line {}: cannot widen invalid actuation state {sb_str:?}",
                lineno + 1
            ));
            continue;
        };
        match check.as_str() {
            "giant" => {
                store
                    .bounds
                    .widen(&sensor, DetectorKind::Giant, &sb, observed);
                promoted += 1;
            }
            "baby" => {
                store
                    .bounds
                    .widen(&sensor, DetectorKind::Baby, &sb, observed);
                promoted += 1;
            }
            "extended" => {
                let window_len = v.get("window_len").and_then(|x| x.as_u64());
                let Some(len) = window_len else {
                    warnings.push(format!(
                        "promote: line {}: extended warning without window_len",
                        lineno + 1
                    ));
                    continue;
                };
                // An extended warning carries the series it was computed on
                // only implicitly; widen whichever series has this window.
                let mut done = false;
                for kind in [DetectorKind::Giant, DetectorKind::Baby] {
                    if store.widen_window(&sensor, kind, &sb, len as usize, observed) {
                        done = true;
                    }
                }
                if done {
                    promoted += 1;
                } else {
                    warnings.push(format!(
                        "promote: line {}: no trained window for {sensor} sb {sb_str} len {len}",
                        lineno + 1
                    ));
                }
            }
            other => warnings.push(format!(
                "promote: line {}: unknown check kind {other:?}",
                lineno + 1
            )),
        }
    }
    Ok(promoted)
}
