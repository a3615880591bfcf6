//! `stepguard bench`
//!
//! Trains on the given data in-process, then replays it measuring the
//! per-record, per-sensor test step: core (giant + baby bound checks) and
//! extended (probability lookup plus window maintenance) separately.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;

use stepguard_core::dataset::{parse_dataset, HashingReader};
use stepguard_core::switchboard::DetectorKind;
use stepguard_core::{baby_step_train, extended_train, giant_step_train, TrainedStore};

use super::{read_graph, summarize_latency, KindSet, LatencySummary, SensorPipeline};

pub fn run(
    normal: &Path,
    graph_path: &Path,
    kinds: KindSet,
    windows: &[usize],
    quantize: Option<u32>,
    out: Option<&Path>,
) -> anyhow::Result<i32> {
    let graph = read_graph(graph_path)?;
    let file = fs::File::open(normal)
        .with_context(|| format!("reading data {}", normal.display()))?;
    let mut reader = HashingReader::new(file);
    let dataset = parse_dataset(&mut reader, &graph.schema())?;
    let digest = reader.digest_hex();

    let sensors: Vec<String> = graph
        .sensors()
        .filter(|s| dataset.sensor_position(s).is_some())
        .map(str::to_string)
        .collect();
    if sensors.is_empty() {
        anyhow::bail!("config validation: no graph sensor appears in the data");
    }

    eprintln!("training {} sensors over {} records", sensors.len(), dataset.len());
    let t0 = Instant::now();
    let mut store = TrainedStore::new(digest, quantize);
    for sensor in &sensors {
        if kinds.giant {
            for e in giant_step_train(sensor, &dataset, &graph)?.entries {
                store.bounds.insert(e);
            }
        }
        if kinds.baby {
            for e in baby_step_train(sensor, &dataset, &graph)?.entries {
                store.bounds.insert(e);
            }
        }
        if kinds.extended {
            for kind in [DetectorKind::Giant, DetectorKind::Baby] {
                store.insert_extended(
                    kind,
                    extended_train(sensor, &dataset, &graph, kind, windows, quantize)?,
                );
            }
        }
    }
    let train_secs = t0.elapsed().as_secs_f64();
    eprintln!("training took {train_secs:.2} s");

    let core_only = KindSet {
        giant: kinds.giant,
        baby: kinds.baby,
        extended: false,
    };
    let ext_only = KindSet {
        giant: false,
        baby: false,
        extended: kinds.extended,
    };

    let mut report = serde_json::Map::new();
    report.insert("records".into(), dataset.len().into());
    report.insert("sensors".into(), sensors.len().into());
    report.insert(
        "train_seconds".into(),
        serde_json::Number::from_f64(train_secs).unwrap().into(),
    );

    let measure = |label: &str, set: KindSet| -> anyhow::Result<Option<LatencySummary>> {
        if !(set.giant || set.baby || set.extended) {
            return Ok(None);
        }
        let mut samples_ns: Vec<u64> = Vec::with_capacity(dataset.len() * sensors.len());
        let mut sink = Vec::new();
        for sensor in &sensors {
            let mut pipeline = SensorPipeline::new(
                sensor,
                &dataset.sensor_names,
                &dataset.actuator_names,
                &graph,
                &store,
                set,
                0.0,
                false,
            )?;
            for record in &dataset.records {
                let t0 = Instant::now();
                pipeline.check(record, &mut sink);
                samples_ns.push(t0.elapsed().as_nanos() as u64);
                sink.clear();
            }
        }
        let summary = summarize_latency(&mut samples_ns);
        if let Some(lat) = &summary {
            eprintln!(
                "{label}: mean {:.2} us, p50 {:.2} us, p99 {:.2} us, max {:.2} us over {} checks",
                lat.mean_us, lat.p50_us, lat.p99_us, lat.max_us, lat.samples
            );
        }
        Ok(summary)
    };

    if let Some(lat) = measure("core per-record per-sensor", core_only)? {
        report.insert("core".into(), latency_json(&lat));
    }
    if let Some(lat) = measure("extended per-record per-sensor", ext_only)? {
        report.insert("extended".into(), latency_json(&lat));
    }

    let json = serde_json::Value::Object(report).to_string();
    match out {
        Some(path) => fs::write(path, &json)
            .with_context(|| format!("writing report {}", path.display()))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(json.as_bytes())?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(0)
}

fn latency_json(lat: &LatencySummary) -> serde_json::Value {
    serde_json::json!({
        "samples": lat.samples,
        "mean_us": lat.mean_us,
        "p50_us": lat.p50_us,
        "p99_us": lat.p99_us,
        "max_us": lat.max_us,
    })
}
