//! `stepguard eval`

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use anyhow::Context;

use stepguard_core::dataset::parse_dataset;
use stepguard_core::metrics::{confusion, scores, EvalUnit, Policy};
use stepguard_synth::AttackManifest;

use super::read_graph;

/// A parsed warning line: the index span of readings it implicates and how
/// it was detected. Baby verdicts implicate the previous reading too;
/// extended verdicts implicate their whole window.
struct Warning {
    span_start: u64,
    index: u64,
    detected_by: String,
}

fn read_warnings(path: &Path) -> anyhow::Result<Vec<Warning>> {
    let file =
        fs::File::open(path).with_context(|| format!("reading warnings {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(&line)
            .with_context(|| format!("warning line {}", lineno + 1))?;
        if !v.get("anomalous").and_then(|x| x.as_bool()).unwrap_or(false) {
            continue;
        }
        let index = v
            .get("index")
            .and_then(|x| x.as_u64())
            .with_context(|| format!("warning line {}: missing index", lineno + 1))?;
        let breach = v.get("breach").and_then(|x| x.as_str()).unwrap_or("");
        let check = v.get("check").and_then(|x| x.as_str()).unwrap_or("");
        let detected_by = if breach == "unseen_state" {
            "unseen_state".to_string()
        } else {
            check.to_string()
        };
        // Diffs implicate the previous reading as well as the current one.
        let over_diffs = check == "baby" || v.get("series").and_then(|x| x.as_str()) == Some("baby");
        let span_start = match v.get("window_start").and_then(|x| x.as_u64()) {
            Some(start) if over_diffs => start.saturating_sub(1),
            Some(start) => start,
            None if over_diffs => index.saturating_sub(1),
            None => index,
        };
        out.push(Warning {
            span_start,
            index,
            detected_by,
        });
    }
    Ok(out)
}

pub fn run(
    warnings_path: &Path,
    attack: &Path,
    graph_path: &Path,
    manifest: Option<&Path>,
    policies: &[Policy],
    out: Option<&Path>,
) -> anyhow::Result<i32> {
    let graph = read_graph(graph_path)?;
    let file = fs::File::open(attack)
        .with_context(|| format!("reading labeled data {}", attack.display()))?;
    let dataset = parse_dataset(file, &graph.schema())?;
    let warnings = read_warnings(warnings_path)?;

    let (units, per_attack) = match manifest {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading manifest {}", path.display()))?;
            let manifest = AttackManifest::from_json(&text)?;
            per_attack_units(&manifest, &warnings)
        }
        None => per_record_units(&dataset, &warnings)?,
    };

    let mut reports = Vec::new();
    for &policy in policies {
        let mut report = scores(confusion(&units, policy));
        report.per_attack = per_attack.clone();
        reports.push(report);
    }

    for report in &reports {
        eprintln!(
            "{:?}: accuracy {:.4}  precision {:.4}{}  recall {:.4}{}  f1 {:.4}  (tp {} fp {} tn {} fn {})",
            report.policy,
            report.accuracy,
            report.precision,
            if report.vacuous_precision { "*" } else { "" },
            report.recall,
            if report.vacuous_recall { "*" } else { "" },
            report.f1,
            report.counts.true_pos,
            report.counts.false_pos,
            report.counts.true_neg,
            report.counts.false_neg,
        );
    }
    if !per_attack.is_empty() {
        eprintln!("per-attack detection:");
        for (id, kinds) in &per_attack {
            let by = if kinds.is_empty() {
                "none".to_string()
            } else {
                kinds.join("+")
            };
            eprintln!("  {id}: {by}");
        }
    }

    let json = serde_json::to_string_pretty(&reports)?;
    match out {
        Some(path) => {
            fs::write(path, json).with_context(|| format!("writing report {}", path.display()))?
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(json.as_bytes())?;
            stdout.write_all(b"\n")?;
        }
    }
    Ok(0)
}

type UnitsAndTable = (Vec<EvalUnit>, BTreeMap<String, Vec<String>>);

/// One unit per manifest attack: detected iff any anomalous verdict landed
/// inside its window. Anomalous indices outside every window become
/// false-positive units.
fn per_attack_units(manifest: &AttackManifest, warnings: &[Warning]) -> UnitsAndTable {
    let mut units = Vec::new();
    let mut per_attack = BTreeMap::new();
    let mut covered: BTreeSet<u64> = BTreeSet::new();

    for entry in &manifest.attacks {
        let mut kinds: BTreeSet<String> = BTreeSet::new();
        for w in warnings {
            if w.span_start <= entry.end && w.index >= entry.start {
                kinds.insert(w.detected_by.clone());
            }
        }
        covered.extend(entry.start..=entry.end);
        let detected = !kinds.is_empty();
        per_attack.insert(entry.id.clone(), kinds.into_iter().collect());
        units.push(EvalUnit {
            id: entry.id.clone(),
            labeled_attack: true,
            predicted_anomalous: detected,
            within_safety_bounds: !detected,
            training_coverage: true,
        });
    }

    let mut fp_indices: BTreeSet<u64> = BTreeSet::new();
    for w in warnings {
        if !(w.span_start..=w.index).any(|i| covered.contains(&i)) {
            fp_indices.insert(w.index);
        }
    }
    for index in fp_indices {
        units.push(EvalUnit {
            id: format!("fp-{index}"),
            labeled_attack: false,
            predicted_anomalous: true,
            within_safety_bounds: false,
            training_coverage: true,
        });
    }
    (units, per_attack)
}

fn per_record_units(
    dataset: &stepguard_core::Dataset,
    warnings: &[Warning],
) -> anyhow::Result<UnitsAndTable> {
    let flagged: BTreeSet<u64> = warnings.iter().map(|w| w.index).collect();
    let units = dataset
        .records
        .iter()
        .map(|r| {
            let predicted = flagged.contains(&r.index);
            EvalUnit {
                id: format!("record-{}", r.index),
                labeled_attack: r.label == stepguard_core::Label::Attack,
                predicted_anomalous: predicted,
                within_safety_bounds: !predicted,
                training_coverage: true,
            }
        })
        .collect();
    Ok((units, BTreeMap::new()))
}
