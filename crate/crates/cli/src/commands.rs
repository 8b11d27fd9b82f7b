//! Implementations of the command-line verbs. Each returns a JSON summary
//! that `main` prints on success.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use goalpred::bayes::{MotionModel, Predictor, PredictorState, StepTimings};
use goalpred::dataset::{build_examples, fit_baseline, train_experts, Example};
use goalpred::eval::{
    label_behaviour, label_from_lane_column, segment_table, split_of, MetricReport, Sample, SamplePrediction, Split,
};
use goalpred::fixtures;
use goalpred::lane_map::LaneGraph;
use goalpred::mdn::{BaselineKind, ExpertCollection, PhysicsBaseline};
use goalpred::synth::{generate, Scenario};
use goalpred::tracks::{ingest_ngsim, LengthUnit, TrackTable, FRAME_PERIOD};
use goalpred::AgentId;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{Config, MotionSource};
use crate::log::{index_records, read_records, write_records, LogRecord};

pub const BASELINES_FILE: &str = "baselines.json";
pub const TRAIN_REPORT_FILE: &str = "train_report.json";

/// Which vehicles a command uses, by the id-hash split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SplitChoice {
    All,
    Train,
    Val,
    Test,
}

impl SplitChoice {
    pub fn contains(self, vehicle: u64) -> bool {
        match self {
            SplitChoice::All => true,
            SplitChoice::Train => split_of(vehicle) == Split::Train,
            SplitChoice::Val => split_of(vehicle) == Split::Val,
            SplitChoice::Test => split_of(vehicle) == Split::Test,
        }
    }
}

/// Loads a native track CSV, or an NGSIM-style one if its header has a
/// `Vehicle_ID` column.
pub fn load_tracks(path: &Path, unit: LengthUnit, config: &Config) -> Result<TrackTable> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read tracks {}", path.display()))?;
    let header = text.lines().next().unwrap_or("");
    let table = if header.split(',').any(|c| c.trim() == "Vehicle_ID") {
        ingest_ngsim(text.as_bytes(), unit, &config.heading)
    } else {
        TrackTable::read_csv(text.as_bytes())
    };
    table.with_context(|| format!("in {}", path.display()))
}

pub fn load_map(path: &Path) -> Result<LaneGraph> {
    LaneGraph::load(path).with_context(|| format!("in map {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baselines {
    pub cv: PhysicsBaseline,
    pub da: PhysicsBaseline,
}

impl Baselines {
    pub fn defaults(config: &Config) -> Self {
        Self {
            cv: config.baseline(BaselineKind::ConstantVelocity),
            da: config.baseline(BaselineKind::DecayingAcceleration),
        }
    }

    /// Reads `baselines.json` from a models directory, falling back to the
    /// default error model when absent.
    pub fn load_or_default(models: Option<&Path>, config: &Config) -> Result<Self> {
        match models.map(|m| m.join(BASELINES_FILE)) {
            Some(p) if p.exists() => {
                let text = fs::read_to_string(&p)?;
                serde_json::from_str(&text).with_context(|| format!("in {}", p.display()))
            }
            _ => Ok(Self::defaults(config)),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    scenario: Vec<Scenario>,
}

pub struct SynthArgs {
    pub map: Option<PathBuf>,
    pub scenarios: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
}

/// Writes one track CSV per scenario, plus the map they were generated on.
pub fn synth(_config: &Config, args: &SynthArgs) -> Result<Value> {
    let graph = match &args.map {
        Some(p) => load_map(p)?,
        None => fixtures::highway(),
    };
    let scenarios = match &args.scenarios {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
            let file: ScenarioFile = toml::from_str(&text).with_context(|| format!("in {}", p.display()))?;
            file.scenario
        }
        None => Scenario::bundled(),
    };
    fs::create_dir_all(&args.out)?;
    let map_path = args.out.join("map.json");
    fs::write(&map_path, graph.to_json())?;
    let mut files = Vec::new();
    for (i, s) in scenarios.iter().enumerate() {
        let table = generate(&graph, s, args.seed.wrapping_add(i as u64))?;
        let path = args.out.join(format!("{}.csv", s.name));
        table.save(&path)?;
        files.push(json!({"scenario": s.name, "path": path, "rows": table.len()}));
    }
    Ok(json!({"map": map_path, "tracks": files}))
}

pub struct TrainArgs {
    pub map: PathBuf,
    pub tracks: Vec<PathBuf>,
    pub unit: LengthUnit,
    pub out: PathBuf,
    pub split: SplitChoice,
    pub seed: Option<u64>,
}

fn labelled_samples(table: &TrackTable, config: &Config, split: SplitChoice, graph: Option<&LaneGraph>) -> Vec<Sample> {
    let mut samples: Vec<Sample> = segment_table(table, &config.segment)
        .into_iter()
        .filter(|s| split.contains(s.target))
        .collect();
    for s in &mut samples {
        s.label = match graph {
            Some(g) => label_behaviour(s, g, &config.map).ok(),
            None => Some(label_from_lane_column(s)),
        };
    }
    samples
}

/// Trains every expert and fits both baselines' error models.
pub fn train(config: &Config, args: &TrainArgs) -> Result<Value> {
    let graph = load_map(&args.map)?;
    let mut examples: Vec<Example> = Vec::new();
    for path in &args.tracks {
        let table = load_tracks(path, args.unit, config)?;
        let samples = labelled_samples(&table, config, args.split, Some(&graph));
        examples.extend(build_examples(&samples, &table, &graph, &config.map, &config.neighbours));
    }
    if examples.is_empty() {
        bail!("no training samples: tracks need at least {} s of contiguous frames on the map", config.segment.history + config.segment.future);
    }
    let mut settings = config.train_settings();
    if let Some(seed) = args.seed {
        settings.follow.seed = seed;
        settings.change.seed = seed;
    }
    let started = Instant::now();
    let (experts, reports) = train_experts(&examples, &settings)?;
    let elapsed = started.elapsed().as_secs_f64();
    experts.save(&args.out)?;

    let mut baselines = Baselines::defaults(config);
    fit_baseline(&mut baselines.cv, &examples);
    fit_baseline(&mut baselines.da, &examples);
    fs::write(args.out.join(BASELINES_FILE), serde_json::to_string_pretty(&baselines)?)?;

    let report = json!({
        "examples": examples.len(),
        "seconds": elapsed,
        "experts": reports,
    });
    fs::write(args.out.join(TRAIN_REPORT_FILE), serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}

pub fn motion_model(config: &Config, models: Option<&Path>) -> Result<MotionModel> {
    let baselines = Baselines::load_or_default(models, config)?;
    Ok(match config.predict.motion {
        MotionSource::Experts => {
            let dir = models.context("--models is required when predict.motion = \"experts\"")?;
            MotionModel::Experts(ExpertCollection::load(dir).with_context(|| format!("in models {}", dir.display()))?)
        }
        MotionSource::ConstantVelocity => MotionModel::Physics(baselines.cv),
        MotionSource::DecayingAcceleration => MotionModel::Physics(baselines.da),
    })
}

/// Runs the predictor over one vehicle's whole track. Steps where the
/// vehicle cannot be located reset its state and are skipped.
pub fn predict_track(
    predictor: &Predictor<'_>,
    table: &TrackTable,
    vehicle: u64,
    timed: bool,
) -> (Vec<LogRecord>, usize) {
    let mut state = PredictorState::default();
    let mut records = Vec::new();
    let mut skipped = 0;
    let mut last_frame = None;
    for row in table.track(vehicle).unwrap_or_default() {
        if last_frame.is_some_and(|f| row.frame != f + 1) {
            state = PredictorState::default();
        }
        last_frame = Some(row.frame);
        let time = row.frame as f64 * FRAME_PERIOD;
        let scene = table.scene_at(row.frame);
        match predictor.step_timed(&mut state, &scene, AgentId(vehicle), time) {
            Ok((posterior, timings)) => {
                records.push(LogRecord::new(vehicle, row.frame, time, &posterior, timed.then_some(timings)));
            }
            Err(_) => {
                skipped += 1;
                state = PredictorState::default();
            }
        }
    }
    (records, skipped)
}

pub struct PredictArgs {
    pub map: PathBuf,
    pub tracks: PathBuf,
    pub unit: LengthUnit,
    pub models: Option<PathBuf>,
    pub out: PathBuf,
    pub split: SplitChoice,
    /// Record wall-clock timings in the log.
    pub timing: bool,
}

pub fn predict(config: &Config, args: &PredictArgs) -> Result<Value> {
    let graph = load_map(&args.map)?;
    let table = load_tracks(&args.tracks, args.unit, config)?;
    let motion = motion_model(config, args.models.as_deref())?;
    let predictor = Predictor::new(&graph, &motion, config.predictor());
    let vehicles: Vec<u64> = table.vehicles().filter(|&v| args.split.contains(v)).collect();
    let results: Vec<(Vec<LogRecord>, usize)> = vehicles
        .par_iter()
        .map(|&v| predict_track(&predictor, &table, v, args.timing))
        .collect();
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let file = fs::File::create(&args.out).with_context(|| format!("cannot create {}", args.out.display()))?;
    write_records(BufWriter::new(file), results.iter().flat_map(|(r, _)| r))?;
    let records: usize = results.iter().map(|(r, _)| r.len()).sum();
    let skipped: usize = results.iter().map(|(_, s)| s).sum();
    Ok(json!({"log": args.out, "agents": vehicles.len(), "records": records, "skipped_steps": skipped}))
}

pub struct EvalArgs {
    pub log: PathBuf,
    pub tracks: PathBuf,
    pub unit: LengthUnit,
    pub map: Option<PathBuf>,
    pub models: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub split: SplitChoice,
}

pub const MODEL_ROWS: [&str; 3] = ["goalpred", "cv", "da"];

/// Metrics of the logged most-likely trajectories and of straight-line
/// CV/DA extrapolation on the same samples.
pub fn evaluate(config: &Config, args: &EvalArgs) -> Result<(MetricReport, Value)> {
    let table = load_tracks(&args.tracks, args.unit, config)?;
    let graph = args.map.as_deref().map(load_map).transpose()?;
    let file = fs::File::open(&args.log).with_context(|| format!("cannot open {}", args.log.display()))?;
    let records = read_records(BufReader::new(file))?;
    let index = index_records(&records);
    let baselines = Baselines::load_or_default(args.models.as_deref(), config)?;
    let samples = labelled_samples(&table, config, args.split, graph.as_ref());

    let mut items = Vec::new();
    let mut missing = 0;
    for s in &samples {
        let Some(record) = index.get(&(s.target, s.current().frame)) else {
            missing += 1;
            continue;
        };
        let preds = vec![
            record.prediction()?,
            SamplePrediction::from_baseline(s.current(), &baselines.cv),
            SamplePrediction::from_baseline(s.current(), &baselines.da),
        ];
        items.push((s, preds));
    }
    let report = MetricReport::from_predictions(&MODEL_ROWS, items);
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    let summary = json!({"samples": samples.len(), "evaluated": samples.len() - missing, "missing_predictions": missing});
    Ok((report, summary))
}

pub struct BenchArgs {
    pub map: PathBuf,
    pub tracks: PathBuf,
    pub unit: LengthUnit,
    pub models: Option<PathBuf>,
    pub calls: usize,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub calls: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub features_ms: f64,
    pub motion_profile_ms: f64,
    pub inference_ms: f64,
}

impl BenchReport {
    pub fn from_timings(timings: &[(Duration, StepTimings)]) -> Self {
        let ms = |d: Duration| d.as_secs_f64() * 1e3;
        let mut totals: Vec<f64> = timings.iter().map(|(d, _)| ms(*d)).collect();
        totals.sort_by(f64::total_cmp);
        let n = totals.len().max(1) as f64;
        let pick = |q: f64| totals.get(((totals.len() as f64 - 1.0) * q).round() as usize).copied().unwrap_or(0.0);
        let mean_of = |f: fn(&StepTimings) -> Duration| timings.iter().map(|(_, t)| ms(f(t))).sum::<f64>() / n;
        Self {
            calls: timings.len(),
            median_ms: pick(0.5),
            mean_ms: totals.iter().sum::<f64>() / n,
            p95_ms: pick(0.95),
            features_ms: mean_of(|t| t.features),
            motion_profile_ms: mean_of(|t| t.motion_profile),
            inference_ms: mean_of(|t| t.inference),
        }
    }

    pub fn to_table(&self) -> String {
        format!(
            "{:>10} {:>16} {:>12} {:>10} {:>10}\n{:>10.3} {:>16.3} {:>12.3} {:>10.3} {:>10.3}\n",
            "features",
            "motion profile",
            "inference",
            "mean",
            "median",
            self.features_ms,
            self.motion_profile_ms,
            self.inference_ms,
            self.mean_ms,
            self.median_ms
        )
    }
}

/// Times single-threaded `step` calls, cycling through every vehicle's
/// track until `calls` calls have been made.
pub fn bench_calls(predictor: &Predictor<'_>, table: &TrackTable, calls: usize) -> Vec<(Duration, StepTimings)> {
    let mut out = Vec::with_capacity(calls);
    let vehicles: Vec<u64> = table.vehicles().collect();
    while out.len() < calls {
        let before = out.len();
        for &v in &vehicles {
            let mut state = PredictorState::default();
            for row in table.track(v).unwrap_or_default() {
                if out.len() >= calls {
                    return out;
                }
                let scene = table.scene_at(row.frame);
                let started = Instant::now();
                let step = predictor.step_timed(&mut state, &scene, AgentId(v), row.frame as f64 * FRAME_PERIOD);
                let elapsed = started.elapsed();
                match step {
                    Ok((_, t)) => out.push((elapsed, t)),
                    Err(_) => state = PredictorState::default(),
                }
            }
        }
        if out.len() == before {
            break;
        }
    }
    out
}

pub fn bench(config: &Config, args: &BenchArgs) -> Result<BenchReport> {
    let graph = load_map(&args.map)?;
    let table = load_tracks(&args.tracks, args.unit, config)?;
    let motion = motion_model(config, args.models.as_deref())?;
    let predictor = Predictor::new(&graph, &motion, config.predictor());
    let timings = bench_calls(&predictor, &table, args.calls);
    if timings.is_empty() {
        bail!("no vehicle in {} could be located on the map", args.tracks.display());
    }
    let report = BenchReport::from_timings(&timings);
    if let Some(out) = &args.out {
        fs::write(out, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// Per-expert sample counts and losses, as written by `train`.
pub fn read_train_report(models: &Path) -> Result<BTreeMap<String, Value>> {
    let text = fs::read_to_string(models.join(TRAIN_REPORT_FILE))?;
    let v: Value = serde_json::from_str(&text)?;
    Ok(serde_json::from_value(v["experts"].clone())?)
}
