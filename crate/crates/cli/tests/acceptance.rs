//! Acceptance suite: every release criterion as one test, each printing a
//! PASS line (run with `cargo test --test acceptance -- --nocapture` to see
//! them). Expected values come from the worked reference examples or from
//! independent brute-force oracles computed inside this file.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};
use std::time::Instant;

use stepguard_core::dataset::{parse_dataset, Dataset, Label, Record};
use stepguard_core::extended::{extended_test_dataset, extended_train, SlidingProduct};
use stepguard_core::metrics::{confusion, scores, EvalUnit, Policy};
use stepguard_core::schema::{ActuatorSpec, RelationshipGraph};
use stepguard_core::switchboard::{linearize, DetectorKind, SbKey};
use stepguard_core::{
    anom_probability, baby_step_test, baby_step_train, giant_step_test, giant_step_train,
    pr_left, pr_right, BoundStore,
};
use stepguard_synth::{generate_normal, GenSpec};

const LIT101_GRAPH: &str = "\
[sensors]
LIT101 = MV101, P101

[actuators]
MV101 = 0, 1, 2
P101 = 1, 2
";

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

const PROB_TRAIN_CSV: &str = "\
Index,LIT101,MV101,P101
1,186.2518,1,1
2,186.4088,1,1
3,186.4099,1,1
4,186.6050,1,1
5,186.6835,1,1
6,187.1546,1,1
";

const PROB_TEST_CSV: &str = "\
Index,LIT101,MV101,P101
1,111.2324,1,1
2,111.2824,1,1
3,111.3324,1,1
4,111.3824,1,1
";

/// The calibrated synthetic plant: a tank level integrating per-state
/// fill/drain rates and a pump-driven flow meter, cycling all six scheduled
/// state combinations. Attacks: an end-of-trace ramp drift (the documented
/// miss), a far-out spoof, a freeze inside the always-filling state, a
/// legal-but-never-scheduled pump state, and an in-envelope constant spoof
/// of the flow meter that only the window detector can see.
fn tank_spec(seed: u64, duration: usize, with_attacks: bool) -> serde_json::Value {
    let attacks = if with_attacks {
        serde_json::json!([
            { "target": "LIT1", "start": 5801, "end": 6000, "kind": "ramp_drift",
              "delta": 0.01, "tsteps": 200, "expected": "undetectable" },
            { "target": "LIT1", "start": 3301, "end": 3320, "kind": "spoof_constant",
              "value": 5000.0, "expected": "core_detectable" },
            { "target": "LIT1", "start": 3801, "end": 3830, "kind": "freeze",
              "expected": "core_detectable" },
            { "target": "P1", "start": 4201, "end": 4210, "kind": "unseen_state_force",
              "state": 0, "expected": "core_detectable" },
            { "target": "FIT1", "start": 4451, "end": 4490, "kind": "spoof_constant",
              "value": 2.4, "expected": "extended_detectable" }
        ])
    } else {
        serde_json::json!([])
    };
    serde_json::json!({
        "scenario": {
            "seed": seed,
            "duration": duration,
            "dwell": 50,
            "min_state_visits": 5,
            "actuators": [
                { "name": "MV1", "domain": [0, 1, 2] },
                { "name": "P1", "domain": [0, 1, 2], "unscheduled": [0] }
            ],
            "sensors": [
                {
                    "name": "LIT1",
                    "kind": "level",
                    "initial": 2000.0,
                    "noise_amp": 2.5,
                    "neighbors": ["MV1", "P1"],
                    "response": {
                        "MV1": { "0": 0.2, "1": 0.0, "2": 3.0 },
                        "P1": { "1": 0.0, "2": -2.5 }
                    }
                },
                {
                    "name": "FIT1",
                    "kind": "flow",
                    "initial": 0.0,
                    "noise_amp": 0.1,
                    "neighbors": ["P1"],
                    "response": { "P1": { "1": 0.0, "2": 2.4 } }
                }
            ]
        },
        "attacks": attacks
    })
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stepguard"))
}

fn run_ok(args: &[String]) -> Output {
    let out = bin().args(args).output().expect("spawn stepguard");
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn args(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| s.to_string()).collect()
}

struct Workdir {
    dir: tempfile::TempDir,
}

impl Workdir {
    fn new() -> Workdir {
        Workdir {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn arg(&self, name: &str) -> String {
        self.path(name).display().to_string()
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn lit101_graph() -> RelationshipGraph {
    RelationshipGraph::parse(LIT101_GRAPH).unwrap()
}

#[test]
fn criterion_01_worked_example_core_fidelity() {
    let t0 = Instant::now();
    let graph = lit101_graph();
    let train = parse_dataset(TRAIN_CSV.as_bytes(), &graph.schema()).unwrap();

    let mut store = BoundStore::new();
    for e in baby_step_train("LIT101", &train, &graph).unwrap().entries {
        store.insert(e);
    }
    let b11 = store
        .get("LIT101", DetectorKind::Baby, &SbKey::parse("1|1").unwrap())
        .unwrap();
    assert!(close(b11.lb, 0.0011, 1e-9));
    assert!(close(b11.ub, 0.1570, 1e-9));
    let b01 = store
        .get("LIT101", DetectorKind::Baby, &SbKey::parse("0|1").unwrap())
        .unwrap();
    assert!(close(b01.lb, 0.0785, 1e-9));
    assert!(close(b01.ub, 0.4711, 1e-9));

    let attack = parse_dataset(ATTACK_CSV.as_bytes(), &graph.schema()).unwrap();
    let verdict = baby_step_test(2, "LIT101", &attack, &graph, &store, 0.0).unwrap();
    assert!(verdict.anomalous);
    assert_eq!(format!("{:?}", verdict.breach), "BelowLb");
    assert_eq!(verdict.sensor, "LIT101");
    assert_eq!(verdict.index, 2);
    assert_eq!(verdict.sb, "1|1");
    assert!(close(verdict.observed, -1.5316, 1e-9));
    assert!(close(verdict.lb.unwrap(), 0.0011, 1e-9));
    assert!(close(verdict.ub.unwrap(), 0.1570, 1e-9));

    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE PASS criterion 01: core worked example — baby bounds \
         [0.0011,0.1570]/[0.0785,0.4711], diff -1.5316 below LB ({elapsed:?})"
    );
}

#[test]
fn criterion_02_worked_example_extended_fidelity() {
    let t0 = Instant::now();
    let graph = lit101_graph();
    let train = parse_dataset(PROB_TRAIN_CSV.as_bytes(), &graph.schema()).unwrap();
    let art = extended_train("LIT101", &train, &graph, DetectorKind::Baby, &[3], None).unwrap();
    let sb = SbKey::parse("1|1").unwrap();

    // Per-row window products over the reference probability column.
    let groups = linearize(&train, "LIT101", &graph, DetectorKind::Baby).unwrap();
    let values: Vec<f64> = groups.groups[&sb].rows.iter().map(|r| r.1).collect();
    let table = &art.tables[&sb];
    let probs = stepguard_core::extended::not_anom_series(&values, table);
    let products: Vec<f64> = probs.windows(3).map(|w| w.iter().product()).collect();
    assert_eq!(products.len(), 3);
    assert!(close(products[0], 0.096, 1e-12), "got {}", products[0]);
    assert!(close(products[1], 0.072, 1e-12), "got {}", products[1]);
    assert!(close(products[2], 0.072, 1e-12), "got {}", products[2]);

    let wb = &art.windows[&sb][&3];
    assert!(close(wb.min_prod, 0.072, 1e-12));
    assert!(close(wb.max_prod, 0.096, 1e-12));

    let test = parse_dataset(PROB_TEST_CSV.as_bytes(), &graph.schema()).unwrap();
    let verdicts =
        extended_test_dataset("LIT101", &test, &graph, DetectorKind::Baby, &art, None).unwrap();
    assert_eq!(verdicts.len(), 1);
    assert_eq!(verdicts[0].index, 4);
    assert!(verdicts[0].anomalous);
    assert!(close(verdicts[0].observed, 0.064, 1e-12));

    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE PASS criterion 02: extended worked example — products \
         0.096/0.072/0.072, bounds [0.072,0.096], test product 0.064 flagged ({elapsed:?})"
    );
}

#[test]
fn criterion_03_empirical_probability_check() {
    // Frequency layout with the tested value third from the left: 3 readings
    // below it, own frequency 2, 31 above, total 36.
    let mut values = vec![0.5, 1.0, 1.0, 2.0, 2.0];
    values.extend(std::iter::repeat_n(3.0, 31));
    let table = stepguard_core::FrequencyTable::from_values(
        "S",
        &SbKey::parse("1").unwrap(),
        DetectorKind::Giant,
        &values,
    )
    .unwrap();
    assert_eq!(table.total, 36);
    assert_eq!(pr_left(3, &table), 3.0 / 36.0);
    assert_eq!(pr_right(3, &table), 31.0 / 36.0);

    // Hand-traced branch sequence: neither tail is zero and neither equals
    // 0.5, so the result is |0.5 - min| * 2; no later branch applies.
    let got = anom_probability(3.0 / 36.0, 31.0 / 36.0).unwrap();
    let hand = (0.5 - 3.0 / 36.0) * 2.0;
    assert_eq!(got, hand);
    assert!(close(got, 0.8333333333333334, 1e-12));

    println!(
        "ACCEPTANCE PASS criterion 03: P_left = 3/36, P_right = 31/36, \
         anomaly probability {got:.4} matches the hand-traced branch sequence"
    );
}

struct Xorshift(u64);

impl Xorshift {
    fn next(&mut self) -> u64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        self.0
    }

    fn below(&mut self, n: u64) -> u64 {
        self.next() % n
    }
}

fn random_dataset(rng: &mut Xorshift, rows: usize) -> (Dataset, RelationshipGraph) {
    let n_actuators = 1 + rng.below(3) as usize;
    let mut graph = RelationshipGraph::new();
    let mut names = Vec::new();
    let mut domains = Vec::new();
    for i in 0..n_actuators {
        let size = 2 + rng.below(2) as usize;
        let mut domain: Vec<u8> = (0..4u8).collect();
        while domain.len() > size {
            let drop = rng.below(domain.len() as u64) as usize;
            domain.remove(drop);
        }
        let name = format!("A{i}");
        graph
            .add_actuator(ActuatorSpec::new(name.clone(), domain.clone()))
            .unwrap();
        names.push(name);
        domains.push(domain);
    }
    graph.add_sensor("S", names.clone()).unwrap();

    let records = (0..rows)
        .map(|i| {
            let value = (rng.below(200) as f64 - 100.0) * 0.25;
            let actuators = domains
                .iter()
                .map(|d| d[rng.below(d.len() as u64) as usize])
                .collect();
            Record {
                index: (i + 1) as u64,
                sensors: vec![value],
                actuators,
                label: Label::Unlabeled,
            }
        })
        .collect();
    (
        Dataset {
            sensor_names: vec!["S".to_string()],
            actuator_names: names,
            records,
        },
        graph,
    )
}

/// Brute-force oracle: group by raw actuator tuple, min/max per group.
fn oracle_bounds(dataset: &Dataset, kind: DetectorKind) -> BTreeMap<Vec<u8>, (f64, f64)> {
    let mut out: BTreeMap<Vec<u8>, (f64, f64)> = BTreeMap::new();
    for (pos, record) in dataset.records.iter().enumerate() {
        let value = match kind {
            DetectorKind::Giant => record.sensors[0],
            DetectorKind::Baby => {
                if pos == 0 {
                    continue;
                }
                record.sensors[0] - dataset.records[pos - 1].sensors[0]
            }
        };
        out.entry(record.actuators.clone())
            .and_modify(|(lo, hi)| {
                *lo = lo.min(value);
                *hi = hi.max(value);
            })
            .or_insert((value, value));
    }
    out
}

/// Brute-force per-row not-anomaly probabilities from first principles.
fn oracle_probs(values: &[f64]) -> Vec<f64> {
    let t = values.len() as u64;
    values
        .iter()
        .map(|v| {
            let below = values.iter().filter(|x| **x < *v).count() as u64;
            let above = values.iter().filter(|x| **x > *v).count() as u64;
            let anom = if below == above {
                anom_probability(below as f64 / t as f64, above as f64 / t as f64).unwrap()
            } else {
                below.abs_diff(above) as f64 / t as f64
            };
            1.0 - anom
        })
        .collect()
}

#[test]
fn criterion_04_oracle_equivalence_on_randomized_datasets() {
    let t0 = Instant::now();
    let mut rng = Xorshift(0xDEADBEEFCAFE1234);
    let lens = [5usize, 10];
    for round in 0..50 {
        let rows = if round >= 48 {
            10_000
        } else {
            200 + rng.below(1500) as usize
        };
        let (dataset, graph) = random_dataset(&mut rng, rows);

        for kind in [DetectorKind::Giant, DetectorKind::Baby] {
            let trained = match kind {
                DetectorKind::Giant => giant_step_train("S", &dataset, &graph).unwrap(),
                DetectorKind::Baby => baby_step_train("S", &dataset, &graph).unwrap(),
            };
            let oracle = oracle_bounds(&dataset, kind);
            assert_eq!(trained.entries.len(), oracle.len(), "round {round} {kind:?}");
            for entry in &trained.entries {
                let (lo, hi) = oracle[&entry.sb.decode()];
                assert_eq!(entry.lb, lo, "round {round} {kind:?} sb {}", entry.sb);
                assert_eq!(entry.ub, hi, "round {round} {kind:?} sb {}", entry.sb);
            }

            let art = extended_train("S", &dataset, &graph, kind, &lens, None).unwrap();
            let groups = linearize(&dataset, "S", &graph, kind).unwrap();
            for (sb, group) in &groups.groups {
                let values: Vec<f64> = group.rows.iter().map(|r| r.1).collect();
                let probs = oracle_probs(&values);
                for &len in &lens {
                    let trained = art.windows.get(sb).and_then(|m| m.get(&len));
                    if values.len() < len {
                        assert!(trained.is_none());
                        continue;
                    }
                    let mut lo = f64::INFINITY;
                    let mut hi = f64::NEG_INFINITY;
                    for w in probs.windows(len) {
                        let p: f64 = w.iter().product();
                        lo = lo.min(p);
                        hi = hi.max(p);
                    }
                    let wb = trained.expect("bounds trained");
                    let rel = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(f64::MIN_POSITIVE);
                    assert!(rel(wb.min_prod, lo), "round {round} min {} vs {lo}", wb.min_prod);
                    assert!(rel(wb.max_prod, hi), "round {round} max {} vs {hi}", wb.max_prod);
                }
            }
        }
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "took {elapsed:?}");
    println!(
        "ACCEPTANCE PASS criterion 04: 50 randomized datasets match the \
         brute-force oracle exactly (bounds) and within 1e-9 (products) ({elapsed:?})"
    );
}

#[test]
fn criterion_05_replay_soundness() {
    // Library-level: several scenario variants, every detector kind.
    for seed in [13u64, 99, 2024] {
        let spec: GenSpec =
            serde_json::from_value(tank_spec(seed, 3000, false)).unwrap();
        let (dataset, _) = generate_normal(&spec.scenario).unwrap();
        let graph = spec.scenario.graph();
        let mut store = BoundStore::new();
        for sensor in ["LIT1", "FIT1"] {
            for e in giant_step_train(sensor, &dataset, &graph).unwrap().entries {
                store.insert(e);
            }
            for e in baby_step_train(sensor, &dataset, &graph).unwrap().entries {
                store.insert(e);
            }
        }
        for sensor in ["LIT1", "FIT1"] {
            for record in &dataset.records {
                let g =
                    giant_step_test(record.index, sensor, &dataset, &graph, &store, 0.0).unwrap();
                assert!(!g.anomalous, "seed {seed} giant flagged {}", record.index);
                let b =
                    baby_step_test(record.index, sensor, &dataset, &graph, &store, 0.0).unwrap();
                assert!(!b.anomalous, "seed {seed} baby flagged {}", record.index);
            }
            for kind in [DetectorKind::Giant, DetectorKind::Baby] {
                let art =
                    extended_train(sensor, &dataset, &graph, kind, &[5, 10, 25, 50, 100], Some(2))
                        .unwrap();
                let verdicts =
                    extended_test_dataset(sensor, &dataset, &graph, kind, &art, Some(2)).unwrap();
                assert!(
                    verdicts.is_empty(),
                    "seed {seed} {sensor} {kind:?}: {verdicts:?}"
                );
            }
        }
    }

    // Binary-level: the full pipeline replays its own training data cleanly.
    let wd = Workdir::new();
    fs::write(wd.path("scenario.json"), tank_spec(13, 6000, true).to_string()).unwrap();
    let out = run_ok(&args(&[
        "gen",
        "--scenario",
        &wd.arg("scenario.json"),
        "--out",
        &wd.arg("normal.csv"),
        "--attack",
        &wd.arg("attack.csv"),
        "--manifest",
        &wd.arg("manifest.json"),
        "--graph",
        &wd.arg("graph.cfg"),
    ]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_ok(&args(&[
        "train",
        "--normal",
        &wd.arg("normal.csv"),
        "--graph",
        &wd.arg("graph.cfg"),
        "--store",
        &wd.arg("model.store"),
        "--quantize",
        "2",
    ]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_ok(&args(&[
        "test",
        "--attack",
        &wd.arg("normal.csv"),
        "--graph",
        &wd.arg("graph.cfg"),
        "--store",
        &wd.arg("model.store"),
        "--out",
        &wd.arg("replay.jsonl"),
    ]));
    assert_eq!(code(&out), 0, "replay must be clean");
    assert_eq!(fs::read_to_string(wd.path("replay.jsonl")).unwrap(), "");

    println!(
        "ACCEPTANCE PASS criterion 05: replaying training data yields zero \
         anomalous verdicts across all kinds and window lengths"
    );
}

#[test]
fn criterion_06_attack_detection_on_synthetic_manifest() {
    let wd = Workdir::new();
    fs::write(wd.path("scenario.json"), tank_spec(13, 6000, true).to_string()).unwrap();
    for step in [
        vec![
            "gen",
            "--scenario",
            &wd.arg("scenario.json"),
            "--out",
            &wd.arg("normal.csv"),
            "--attack",
            &wd.arg("attack.csv"),
            "--manifest",
            &wd.arg("manifest.json"),
            "--graph",
            &wd.arg("graph.cfg"),
        ],
        vec![
            "train",
            "--normal",
            &wd.arg("normal.csv"),
            "--graph",
            &wd.arg("graph.cfg"),
            "--store",
            &wd.arg("model.store"),
            "--quantize",
            "2",
        ],
    ] {
        let out = run_ok(&args(&step.iter().map(|s| &**s).collect::<Vec<_>>()));
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    let out = run_ok(&args(&[
        "test",
        "--attack",
        &wd.arg("attack.csv"),
        "--graph",
        &wd.arg("graph.cfg"),
        "--store",
        &wd.arg("model.store"),
        "--out",
        &wd.arg("warnings.jsonl"),
    ]));
    assert_eq!(code(&out), 1, "attacked data must flag");

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(wd.path("manifest.json")).unwrap()).unwrap();
    let warnings: Vec<serde_json::Value> = fs::read_to_string(wd.path("warnings.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();

    for attack in manifest["attacks"].as_array().unwrap() {
        let (start, end) = (
            attack["start"].as_u64().unwrap(),
            attack["end"].as_u64().unwrap(),
        );
        let affected: Vec<u64> = attack["affected"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| p["index"].as_u64().unwrap())
            .collect();
        assert_eq!(affected.len() as u64, end - start + 1, "manifest soundness");

        let flagged_inside = warnings.iter().any(|w| {
            let idx = w["index"].as_u64().unwrap();
            idx >= start && idx <= end
        });
        let expected = attack["expected"].as_str().unwrap();
        let id = attack["id"].as_str().unwrap();
        match expected {
            "core_detectable" | "extended_detectable" => {
                assert!(flagged_inside, "attack {id} ({expected}) was not flagged");
            }
            "undetectable" => {
                // The documented miss is itself the assertion.
                assert!(
                    !flagged_inside,
                    "ramp drift (delta 0.01 over 200 steps) must evade detection"
                );
            }
            other => panic!("unknown class {other}"),
        }
    }

    // The in-envelope flow spoof is invisible to the core detectors: every
    // warning inside its window comes from the extended detector.
    let fit_window = (4451u64, 4490u64);
    let fit_core_hits = warnings.iter().any(|w| {
        let idx = w["index"].as_u64().unwrap();
        idx >= fit_window.0
            && idx <= fit_window.1
            && w["check"] != "extended"
    });
    assert!(!fit_core_hits, "flow spoof must be a pure extended detection");

    println!(
        "ACCEPTANCE PASS criterion 06: all core/extended attacks flagged in \
         window; ramp drift (0.01 x 200) evades as documented"
    );
}

/// Reference per-attack outcomes as a 44-mark fixture: 33 detected and
/// 11 missed marks; two misses lack training coverage entirely and all other
/// misses except the ramp attack's second state stayed within bounds.
fn attack_table_fixture() -> Vec<EvalUnit> {
    let mut units = Vec::new();
    let mut mark = |id: &str, detected: bool, within: bool, coverage: bool| {
        units.push(EvalUnit {
            id: id.to_string(),
            labeled_attack: true,
            predicted_anomalous: detected,
            within_safety_bounds: within,
            training_coverage: coverage,
        });
    };
    for id in [
        "1", "2", "3a", "6", "7", "8", "10", "11", "16", "19", "20", "21", "22", "23", "24b",
        "25", "26a", "27", "29c", "30a", "30b", "31", "32", "33", "34", "36", "37", "38a", "38b",
        "39a", "39b", "40", "41",
    ] {
        mark(id, true, false, true);
    }
    mark("3b", false, false, true);
    for id in ["13", "14", "17", "24a", "26b", "28", "29b", "35"] {
        mark(id, false, true, true);
    }
    mark("4", false, true, false);
    mark("29a", false, true, false);
    units
}

#[test]
fn criterion_07_metrics_arithmetic() {
    let units = attack_table_fixture();
    assert_eq!(units.len(), 44);

    let conventional = scores(confusion(&units, Policy::Conventional));
    assert_eq!(conventional.counts.total(), 42);
    assert!(close(conventional.accuracy, 33.0 / 42.0, 1e-4));
    assert!(close(conventional.accuracy, 0.785, 1e-3));

    let safe = scores(confusion(&units, Policy::WithinBoundsSafe));
    assert_eq!(safe.counts.total(), 44);
    assert!(close(safe.accuracy, 43.0 / 44.0, 1e-4));
    assert!(close(safe.accuracy, 0.9772, 1e-4));

    println!(
        "ACCEPTANCE PASS criterion 07: conventional accuracy {:.4} (33/42), \
         within-bounds-safe accuracy {:.4} (43/44)",
        conventional.accuracy, safe.accuracy
    );
}

#[test]
fn criterion_08_latency_budget() {
    let wd = Workdir::new();
    fs::write(
        wd.path("scenario.json"),
        tank_spec(21, 100_000, false).to_string(),
    )
    .unwrap();
    let out = run_ok(&args(&[
        "gen",
        "--scenario",
        &wd.arg("scenario.json"),
        "--out",
        &wd.arg("bench.csv"),
        "--graph",
        &wd.arg("graph.cfg"),
    ]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let out = run_ok(&args(&[
        "bench",
        "--normal",
        &wd.arg("bench.csv"),
        "--graph",
        &wd.arg("graph.cfg"),
        "--out",
        &wd.arg("bench.json"),
    ]));
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(wd.path("bench.json")).unwrap()).unwrap();
    assert!(report["records"].as_u64().unwrap() >= 100_000);
    let core_mean_us = report["core"]["mean_us"].as_f64().unwrap();
    let ext_mean_us = report["extended"]["mean_us"].as_f64().unwrap();

    // Budget: 1 ms core / 2 ms extended, with 10x CI headroom (report,
    // don't fail, between the target and the headroom limit).
    if core_mean_us > 1000.0 {
        println!("note: core mean {core_mean_us:.1} us exceeds the 1 ms target");
    }
    if ext_mean_us > 2000.0 {
        println!("note: extended mean {ext_mean_us:.1} us exceeds the 2 ms target");
    }
    assert!(core_mean_us < 10_000.0, "core mean {core_mean_us} us");
    assert!(ext_mean_us < 20_000.0, "extended mean {ext_mean_us} us");

    println!(
        "ACCEPTANCE PASS criterion 08: per-record per-sensor mean — core \
         {core_mean_us:.2} us, extended {ext_mean_us:.2} us over 100k records"
    );
}

#[test]
fn criterion_09_incremental_product_equivalence() {
    // 10,000 probabilities with exact zeros and stretches of tiny values
    // whose window products fall through the sub-normal range.
    let mut rng = Xorshift(0x5EEDBA5EBA11);
    let mut probs = Vec::with_capacity(10_000);
    for i in 0..10_000u64 {
        let u = (rng.below(1_000_000) as f64 + 1.0) / 1_000_001.0;
        let p = if i % 551 == 0 {
            0.0
        } else if (i / 500) % 3 == 2 {
            u * 1e-7
        } else {
            u
        };
        probs.push(p);
    }

    for len in [5usize, 64] {
        let mut sp = SlidingProduct::new(len);
        for (i, &p) in probs.iter().enumerate() {
            let got = sp.push(p);
            if i + 1 < len {
                continue;
            }
            let window = &probs[i + 1 - len..=i];
            let got = got.unwrap();
            if window.contains(&0.0) {
                assert_eq!(got, 0.0, "len {len} window ending {i}");
            } else {
                let naive: f64 = window.iter().product();
                assert!(
                    (got - naive).abs() <= 1e-9 * naive.abs().max(f64::MIN_POSITIVE),
                    "len {len} window ending {i}: {got} vs {naive}"
                );
            }
        }
    }

    // Window 100 runs in log space; compare the log state against a naive
    // recomputation so sub-normal-range products stay comparable.
    let len = 100usize;
    let mut sp = SlidingProduct::new(len);
    let mut exercised_subnormal = false;
    for (i, &p) in probs.iter().enumerate() {
        let got = sp.push(p);
        if i + 1 < len {
            continue;
        }
        let window = &probs[i + 1 - len..=i];
        let (zeros, sum_logs) = sp.log_state().expect("log path engaged for length 100");
        let naive_zeros = window.iter().filter(|&&p| p == 0.0).count();
        assert_eq!(zeros, naive_zeros);
        if naive_zeros > 0 {
            assert_eq!(got.unwrap(), 0.0);
            continue;
        }
        let naive_sum: f64 = window.iter().map(|p| p.ln()).sum();
        assert!(
            (sum_logs - naive_sum).abs() <= 1e-9 * naive_sum.abs().max(1.0),
            "window ending {i}: log sums {sum_logs} vs {naive_sum}"
        );
        if naive_sum < (f64::MIN_POSITIVE).ln() {
            exercised_subnormal = true;
        }
    }
    assert!(exercised_subnormal, "stream must cross the sub-normal range");

    println!(
        "ACCEPTANCE PASS criterion 09: incremental products match naive \
         recomputation within 1e-9 over 10,000 values incl. zeros and \
         sub-normal products (log path at length 100)"
    );
}

#[test]
fn criterion_10_full_pipeline_determinism() {
    let mut outputs: Vec<Vec<u8>> = Vec::new();
    for _ in 0..2 {
        let wd = Workdir::new();
        fs::write(wd.path("scenario.json"), tank_spec(13, 6000, true).to_string()).unwrap();
        for step in [
            vec![
                "gen",
                "--scenario",
                &wd.arg("scenario.json"),
                "--out",
                &wd.arg("normal.csv"),
                "--attack",
                &wd.arg("attack.csv"),
                "--manifest",
                &wd.arg("manifest.json"),
                "--graph",
                &wd.arg("graph.cfg"),
            ],
            vec![
                "train",
                "--normal",
                &wd.arg("normal.csv"),
                "--graph",
                &wd.arg("graph.cfg"),
                "--store",
                &wd.arg("model.store"),
                "--quantize",
                "2",
            ],
        ] {
            let out = run_ok(&args(&step.iter().map(|s| &**s).collect::<Vec<_>>()));
            assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        }
        let out = run_ok(&args(&[
            "test",
            "--attack",
            &wd.arg("attack.csv"),
            "--graph",
            &wd.arg("graph.cfg"),
            "--store",
            &wd.arg("model.store"),
            "--out",
            &wd.arg("warnings.jsonl"),
        ]));
        assert_eq!(code(&out), 1);

        let mut concat = Vec::new();
        for name in ["normal.csv", "attack.csv", "manifest.json", "model.store", "warnings.jsonl"]
        {
            concat.extend(fs::read(wd.path(name)).unwrap());
            concat.push(0);
        }
        outputs.push(concat);
    }
    assert_eq!(
        outputs[0], outputs[1],
        "gen->train->test must be byte-identical across runs"
    );
    println!(
        "ACCEPTANCE PASS criterion 10: two gen->train->test runs produced \
         byte-identical datasets, store files and verdict streams"
    );
}
