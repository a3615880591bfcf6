//! Operator command line: train, test, eval, gen, bench.
//!
//! Exit codes: 0 clean run, 1 detection run found anomalies, 2 missing or
//! unreadable input files, 3 configuration validation failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::KindSet;

#[derive(Parser, Debug)]
#[command(
    name = "stepguard",
    version,
    about = "Per-sensor safety-bound anomaly detection for control-system time series"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train safety bounds and probability tables from a normal-operations log
    Train(TrainArgs),
    /// Check a dataset against a trained store, streaming warnings as JSONL
    Test(TestArgs),
    /// Score a warning stream against labels or an attack manifest
    Eval(EvalArgs),
    /// Generate a synthetic plant trace (and optionally an attacked variant)
    Gen(GenArgs),
    /// Measure per-record, per-sensor detection latency
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Giant,
    Baby,
    Extended,
}

fn kind_set(kinds: &[KindArg]) -> KindSet {
    KindSet {
        giant: kinds.contains(&KindArg::Giant),
        baby: kinds.contains(&KindArg::Baby),
        extended: kinds.contains(&KindArg::Extended),
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Normal-operations CSV (asserted attack-free)
    #[arg(long)]
    normal: PathBuf,
    /// Relationship graph config
    #[arg(long)]
    graph: PathBuf,
    /// Where to write the trained store
    #[arg(long)]
    store: PathBuf,
    /// Sensors to train (default: every graph sensor present in the data)
    #[arg(long, value_delimiter = ',')]
    sensors: Vec<String>,
    /// Detector kinds to train
    #[arg(long, value_delimiter = ',', value_enum,
          default_values_t = [KindArg::Giant, KindArg::Baby, KindArg::Extended])]
    kinds: Vec<KindArg>,
    /// Sliding-window lengths for the extended detector
    #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 25, 50, 100])]
    windows: Vec<usize>,
    /// Round readings to this many decimal places before probability binning
    #[arg(long)]
    quantize: Option<u32>,
    /// Reviewed warnings (JSONL) to merge into the trained bounds
    #[arg(long)]
    promote_warnings: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TestArgs {
    /// Dataset to check
    #[arg(long)]
    attack: PathBuf,
    /// Relationship graph config
    #[arg(long)]
    graph: PathBuf,
    /// Trained store
    #[arg(long)]
    store: PathBuf,
    /// Warning stream output (JSONL); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sensors to check (default: every trained sensor present in the data)
    #[arg(long, value_delimiter = ',')]
    sensors: Vec<String>,
    /// Detector kinds to run
    #[arg(long, value_delimiter = ',', value_enum,
          default_values_t = [KindArg::Giant, KindArg::Baby, KindArg::Extended])]
    kinds: Vec<KindArg>,
    /// Symmetric tolerance added to every trained interval
    #[arg(long, default_value_t = 0.0)]
    epsilon: f64,
    /// Emit every verdict, not just anomalous ones (review mode)
    #[arg(long)]
    emit_all: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Warning stream (JSONL) produced by `test`
    #[arg(long)]
    warnings: PathBuf,
    /// Labeled dataset the warnings were produced from
    #[arg(long)]
    attack: PathBuf,
    /// Relationship graph config
    #[arg(long)]
    graph: PathBuf,
    /// Attack manifest for per-attack evaluation (per-record without it)
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Counting policy
    #[arg(long, value_enum, default_value_t = PolicyArg::Both)]
    policy: PolicyArg,
    /// Report output (JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Conventional,
    WithinBoundsSafe,
    Both,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Scenario file (JSON)
    #[arg(long)]
    scenario: PathBuf,
    /// Where to write the normal dataset CSV
    #[arg(long)]
    out: PathBuf,
    /// Where to write the attacked dataset CSV (when the scenario has attacks)
    #[arg(long)]
    attack: Option<PathBuf>,
    /// Where to write the ground-truth manifest JSON
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Where to write the derived relationship graph config
    #[arg(long)]
    graph: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Dataset to train on and replay for timing
    #[arg(long)]
    normal: PathBuf,
    /// Relationship graph config
    #[arg(long)]
    graph: PathBuf,
    /// Detector kinds to include
    #[arg(long, value_delimiter = ',', value_enum,
          default_values_t = [KindArg::Giant, KindArg::Baby, KindArg::Extended])]
    kinds: Vec<KindArg>,
    /// Sliding-window lengths for the extended detector
    #[arg(long, value_delimiter = ',', default_values_t = [5, 10, 25, 50, 100])]
    windows: Vec<usize>,
    /// Round readings to this many decimal places before probability binning
    #[arg(long)]
    quantize: Option<u32>,
    /// Latency report output (JSON); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

fn validate_windows(windows: &[usize]) -> anyhow::Result<()> {
    if windows.is_empty() {
        anyhow::bail!("config validation: at least one window length required");
    }
    if windows.contains(&0) {
        anyhow::bail!("config validation: window lengths must be positive");
    }
    let mut sorted = windows.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != windows.len() {
        anyhow::bail!("config validation: window lengths must be distinct");
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Train(args) => {
            validate_windows(&args.windows)?;
            if args.kinds.is_empty() {
                anyhow::bail!("config validation: at least one detector kind required");
            }
            commands::train::run(
                &args.normal,
                &args.graph,
                &args.store,
                &args.sensors,
                kind_set(&args.kinds),
                &args.windows,
                args.quantize,
                args.promote_warnings.as_deref(),
            )
        }
        Command::Test(args) => {
            if args.kinds.is_empty() {
                anyhow::bail!("config validation: at least one detector kind required");
            }
            commands::test::run(
                &args.attack,
                &args.graph,
                &args.store,
                args.out.as_deref(),
                &args.sensors,
                kind_set(&args.kinds),
                args.epsilon,
                args.emit_all,
            )
        }
        Command::Eval(args) => {
            let policies = match args.policy {
                PolicyArg::Conventional => vec![stepguard_core::Policy::Conventional],
                PolicyArg::WithinBoundsSafe => vec![stepguard_core::Policy::WithinBoundsSafe],
                PolicyArg::Both => vec![
                    stepguard_core::Policy::Conventional,
                    stepguard_core::Policy::WithinBoundsSafe,
                ],
            };
            commands::eval::run(
                &args.warnings,
                &args.attack,
                &args.graph,
                args.manifest.as_deref(),
                &policies,
                args.out.as_deref(),
            )
        }
        Command::Gen(args) => commands::gen::run(
            &args.scenario,
            &args.out,
            args.attack.as_deref(),
            args.manifest.as_deref(),
            args.graph.as_deref(),
        ),
        Command::Bench(args) => {
            validate_windows(&args.windows)?;
            commands::bench::run(
                &args.normal,
                &args.graph,
                kind_set(&args.kinds),
                &args.windows,
                args.quantize,
                args.out.as_deref(),
            )
        }
    }
}

/// Missing/unreadable inputs exit 2; configuration problems exit 3.
fn classify(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            if io.kind() == std::io::ErrorKind::NotFound {
                return 2;
            }
        }
        if let Some(core) = cause.downcast_ref::<stepguard_core::Error>() {
            return match core {
                stepguard_core::Error::GraphConfig { .. }
                | stepguard_core::Error::InvalidDeviceName(_)
                | stepguard_core::Error::UnknownSensor(_)
                | stepguard_core::Error::UnknownDevice(_)
                | stepguard_core::Error::MisalignedEval { .. }
                | stepguard_core::Error::ProbabilityContract(_) => 3,
                stepguard_core::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
                _ => 2,
            };
        }
        if let Some(synth) = cause.downcast_ref::<stepguard_synth::SynthError>() {
            return match synth {
                stepguard_synth::SynthError::InvalidScenario(_)
                | stepguard_synth::SynthError::InvalidAttack { .. }
                | stepguard_synth::SynthError::Overlap { .. }
                | stepguard_synth::SynthError::Json(_) => 3,
                _ => 2,
            };
        }
        if cause.to_string().starts_with("config validation") {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err) as u8)
        }
    }
}
