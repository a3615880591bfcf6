//! `stepguard test`

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::Context;

use stepguard_core::dataset::RecordStream;
use stepguard_core::render_explanation;

use super::{read_graph, read_store, summarize_latency, KindSet, SensorPipeline};

#[allow(clippy::too_many_arguments)]
pub fn run(
    attack: &Path,
    graph_path: &Path,
    store_path: &Path,
    out: Option<&Path>,
    sensors: &[String],
    kinds: KindSet,
    epsilon: f64,
    emit_all: bool,
) -> anyhow::Result<i32> {
    let graph = read_graph(graph_path)?;
    let store = read_store(store_path)?;
    let file = fs::File::open(attack)
        .with_context(|| format!("reading test data {}", attack.display()))?;
    let mut stream = RecordStream::new(file, &graph.schema())?;
    let sensor_names = stream.sensor_names().to_vec();
    let actuator_names = stream.actuator_names().to_vec();

    let selected: Vec<String> = if sensors.is_empty() {
        let mut trained: Vec<String> = store.bounds.sensors().map(str::to_string).collect();
        for ((sensor, _), _) in store.extended_entries() {
            if !trained.contains(sensor) {
                trained.push(sensor.clone());
            }
        }
        trained.sort();
        trained
            .into_iter()
            .filter(|s| sensor_names.contains(s))
            .collect()
    } else {
        sensors.to_vec()
    };
    if selected.is_empty() {
        anyhow::bail!("config validation: no trained sensor appears in the test data");
    }

    let mut pipelines: Vec<SensorPipeline> = selected
        .iter()
        .map(|s| {
            SensorPipeline::new(
                s,
                &sensor_names,
                &actuator_names,
                &graph,
                &store,
                kinds,
                epsilon,
                emit_all,
            )
        })
        .collect::<anyhow::Result<_>>()?;

    let mut sink: BufWriter<Box<dyn Write>> = BufWriter::new(match out {
        Some(path) => Box::new(
            fs::File::create(path)
                .with_context(|| format!("writing warnings {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    });

    let mut verdicts = Vec::new();
    let mut anomalies = 0u64;
    let mut emitted = 0u64;
    let mut records = 0u64;
    let mut samples_ns: Vec<u64> = Vec::new();
    for record in &mut stream {
        let record = record?;
        records += 1;
        let t0 = Instant::now();
        verdicts.clear();
        for pipeline in &mut pipelines {
            pipeline.check(&record, &mut verdicts);
        }
        samples_ns.push(t0.elapsed().as_nanos() as u64);
        for v in &verdicts {
            if v.anomalous {
                anomalies += 1;
            }
            let (_, json) = render_explanation(v);
            serde_json::to_writer(&mut sink, &json)?;
            sink.write_all(b"\n")?;
            emitted += 1;
        }
    }
    sink.flush()?;

    eprintln!(
        "checked {records} records across {} sensors: {anomalies} anomalous verdicts ({emitted} emitted)",
        pipelines.len()
    );
    if let Some(lat) = summarize_latency(&mut samples_ns) {
        eprintln!(
            "per-record latency (all sensors): mean {:.1} us, p50 {:.1} us, p99 {:.1} us, max {:.1} us",
            lat.mean_us, lat.p50_us, lat.p99_us, lat.max_us
        );
    }
    Ok(if anomalies > 0 { 1 } else { 0 })
}
