use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use goalpred::tracks::LengthUnit;
use goalpred_cli::commands::{self, SplitChoice};
use goalpred_cli::config::{Config, ConfigError};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "goalpred", version, about = "Goal-based trajectory prediction for highway traffic")]
struct Cli {
    /// TOML configuration; defaults apply to anything not set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the expert networks and fit the baseline error models.
    Train {
        #[arg(long)]
        map: PathBuf,
        /// Track CSV files (native or NGSIM layout). Repeatable.
        #[arg(long, required = true, num_args = 1..)]
        tracks: Vec<PathBuf>,
        #[arg(long, default_value = "metres")]
        unit: LengthUnit,
        /// Output directory for the models.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "train")]
        split: SplitChoice,
        /// Overrides the training seeds from the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the predictor over every vehicle and write a JSONL prediction log.
    Predict {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long, default_value = "metres")]
        unit: LengthUnit,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        split: SplitChoice,
        /// Record per-step timings in the log.
        #[arg(long)]
        timing: bool,
    },
    /// Score a prediction log against the recorded tracks.
    Eval {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long, default_value = "metres")]
        unit: LengthUnit,
        /// Map used to label behaviour; without it labels come from the lane column.
        #[arg(long)]
        map: Option<PathBuf>,
        /// Models directory holding fitted baselines.
        #[arg(long)]
        models: Option<PathBuf>,
        /// Write the metric report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitChoice,
    },
    /// Time single-threaded prediction steps.
    Bench {
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long, default_value = "metres")]
        unit: LengthUnit,
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        calls: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate synthetic track files from scenario definitions.
    Synth {
        /// Map JSON; defaults to the bundled highway.
        #[arg(long)]
        map: Option<PathBuf>,
        /// TOML file with `[[scenario]]` tables; defaults to the bundled set.
        #[arg(long)]
        scenarios: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> Result<Value> {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    Ok(match cli.command {
        Command::Train { map, tracks, unit, out, split, seed } => {
            commands::train(&config, &commands::TrainArgs { map, tracks, unit, out, split, seed })?
        }
        Command::Predict { map, tracks, unit, models, out, split, timing } => {
            commands::predict(&config, &commands::PredictArgs { map, tracks, unit, models, out, split, timing })?
        }
        Command::Eval { log, tracks, unit, map, models, out, split } => {
            let args = commands::EvalArgs { log, tracks, unit, map, models, out, split };
            let (report, summary) = commands::evaluate(&config, &args)?;
            eprint!("{}", report.to_table());
            json!({"summary": summary, "report": report})
        }
        Command::Bench { map, tracks, unit, models, calls, out } => {
            let report = commands::bench(&config, &commands::BenchArgs { map, tracks, unit, models, calls, out })?;
            eprint!("{}", report.to_table());
            serde_json::to_value(report)?
        }
        Command::Synth { map, scenarios, out, seed } => {
            commands::synth(&config, &commands::SynthArgs { map, scenarios, out, seed })?
        }
    })
}

fn error_kind(err: &anyhow::Error) -> &'static str {
    if err.downcast_ref::<ConfigError>().is_some() {
        "config"
    } else if err.chain().any(|e| e.is::<std::io::Error>()) {
        "io"
    } else {
        "runtime"
    }
}

// Ignores write errors so a closed pipe does not panic.
fn emit(text: &str) {
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn fail(kind: &str, message: String) -> ExitCode {
    emit(&json!({"error": {"kind": kind, "message": message}}).to_string());
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim().to_string()),
    };
    match run(cli) {
        Ok(v) => {
            emit(&serde_json::to_string_pretty(&v).expect("json"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(error_kind(&e), format!("{e:#}")),
    }
}
