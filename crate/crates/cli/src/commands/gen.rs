//! `stepguard gen`

use std::fs;
use std::path::Path;

use anyhow::Context;

use stepguard_core::write_csv;
use stepguard_synth::{generate_normal, inject_attacks, GenSpec};

pub fn run(
    scenario_path: &Path,
    out: &Path,
    attack_out: Option<&Path>,
    manifest_out: Option<&Path>,
    graph_out: Option<&Path>,
) -> anyhow::Result<i32> {
    let text = fs::read_to_string(scenario_path)
        .with_context(|| format!("reading scenario {}", scenario_path.display()))?;
    let spec: GenSpec = serde_json::from_str(&text)
        .map_err(stepguard_synth::SynthError::Json)
        .context("config validation: scenario file")?;

    let (normal, warnings) = generate_normal(&spec.scenario)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let graph = spec.scenario.graph();

    let mut file =
        fs::File::create(out).with_context(|| format!("writing dataset {}", out.display()))?;
    write_csv(&normal, &mut file)?;
    eprintln!("normal dataset: {} records to {}", normal.len(), out.display());

    if !spec.attacks.is_empty() {
        let (attacked, manifest) = inject_attacks(&normal, &spec.attacks, &graph)?;
        let attack_path = attack_out
            .with_context(|| "config validation: scenario has attacks but no --attack output path")?;
        let mut file = fs::File::create(attack_path)
            .with_context(|| format!("writing dataset {}", attack_path.display()))?;
        write_csv(&attacked, &mut file)?;
        eprintln!(
            "attack dataset: {} attacks over {} records to {}",
            manifest.attacks.len(),
            attacked.len(),
            attack_path.display()
        );
        if let Some(path) = manifest_out {
            fs::write(path, manifest.to_json()?)
                .with_context(|| format!("writing manifest {}", path.display()))?;
            eprintln!("manifest to {}", path.display());
        }
    } else if let Some(path) = manifest_out {
        fs::write(path, stepguard_synth::AttackManifest::default().to_json()?)
            .with_context(|| format!("writing manifest {}", path.display()))?;
    }

    if let Some(path) = graph_out {
        fs::write(path, graph.to_config())
            .with_context(|| format!("writing graph config {}", path.display()))?;
        eprintln!("graph config to {}", path.display());
    }
    Ok(0)
}
