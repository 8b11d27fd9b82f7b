//! Tunables for every command, loaded from a TOML file. Missing sections
//! take their defaults; unknown keys are rejected.

use std::path::Path;

use goalpred::bayes::{BayesParams, PredictorConfig};
use goalpred::dataset::ExpertTrainSettings;
use goalpred::eval::SegmentParams;
use goalpred::features::NeighbourParams;
use goalpred::lane_map::MapParams;
use goalpred::mdn::{BaselineKind, Optimizer, PhysicsBaseline, TrainParams, DEFAULT_DECAY_TIME, DEFAULT_HIDDEN};
use goalpred::pursuit::PursuitParams;
use goalpred::tracks::HeadingParams;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config value `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
}

/// Which motion-profile source `predict` and `bench` use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionSource {
    /// The trained expert collection from `--models`.
    Experts,
    ConstantVelocity,
    DecayingAcceleration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PredictSection {
    pub motion: MotionSource,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            motion: MotionSource::Experts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineSection {
    /// Decay time of the decaying-acceleration model, seconds.
    pub decay_time: f64,
}

impl Default for BaselineSection {
    fn default() -> Self {
        Self {
            decay_time: DEFAULT_DECAY_TIME,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub hidden: Vec<usize>,
    pub components: usize,
    #[serde(deserialize_with = "follow_params")]
    pub follow: TrainParams,
    #[serde(deserialize_with = "change_params")]
    pub change: TrainParams,
}

/// Training settings where only some keys are given; the rest keep the
/// behaviour's defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialTrainParams {
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    seed: Option<u64>,
    optimizer: Option<Optimizer>,
    freeze_variance: Option<bool>,
}

impl PartialTrainParams {
    fn over(self, base: TrainParams) -> TrainParams {
        TrainParams {
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            epochs: self.epochs.unwrap_or(base.epochs),
            seed: self.seed.unwrap_or(base.seed),
            optimizer: self.optimizer.unwrap_or(base.optimizer),
            freeze_variance: self.freeze_variance.unwrap_or(base.freeze_variance),
        }
    }
}

fn follow_params<'de, D: Deserializer<'de>>(d: D) -> Result<TrainParams, D::Error> {
    Ok(PartialTrainParams::deserialize(d)?.over(TrainParams::follow_lane()))
}

fn change_params<'de, D: Deserializer<'de>>(d: D) -> Result<TrainParams, D::Error> {
    Ok(PartialTrainParams::deserialize(d)?.over(TrainParams::change_lane()))
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            hidden: DEFAULT_HIDDEN.to_vec(),
            components: 1,
            follow: TrainParams::follow_lane(),
            change: TrainParams::change_lane(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub map: MapParams,
    pub neighbours: NeighbourParams,
    pub pursuit: PursuitParams,
    pub bayes: BayesParams,
    pub segment: SegmentParams,
    pub heading: HeadingParams,
    pub baseline: BaselineSection,
    pub train: TrainSection,
    pub predict: PredictSection,
}

fn check(ok: bool, field: &'static str, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(ConfigError::Invalid {
            field,
            reason: reason.to_string(),
        })
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn check_train(p: &TrainParams, field: &'static str) -> Result<(), ConfigError> {
    check(
        p.learning_rate.is_finite() && p.learning_rate >= 0.0 && p.batch_size > 0,
        field,
        "learning_rate must be >= 0 and batch_size > 0",
    )
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.map;
        check(positive(m.max_offroad_distance), "map.max_offroad_distance", "must be positive")?;
        check(m.offset_threshold.is_finite() && m.offset_threshold >= 0.0, "map.offset_threshold", "must be >= 0")?;
        check(positive(m.lookahead_goal_horizon), "map.lookahead_goal_horizon", "must be positive")?;
        let n = &self.neighbours;
        check(positive(n.radius), "neighbours.radius", "must be positive")?;
        check((1..=3).contains(&n.max_front), "neighbours.max_front", "must be 1..=3")?;
        check((1..=3).contains(&n.max_side), "neighbours.max_side", "must be 1..=3")?;
        check(self.pursuit.is_valid(), "pursuit", "all values must be positive and the delay shorter than the horizon")?;
        check(self.bayes.is_valid(), "bayes", "sigmas must be positive, lambda >= 0, gamma in [0, 1]")?;
        check(self.segment.is_valid(), "segment", "history must be positive, future at least 5 s, stride positive")?;
        let h = &self.heading;
        check(positive(h.window) && h.min_speed >= 0.0, "heading", "window must be positive and min_speed >= 0")?;
        check(positive(self.baseline.decay_time), "baseline.decay_time", "must be positive")?;
        let t = &self.train;
        check(!t.hidden.is_empty() && t.hidden.iter().all(|&w| w > 0), "train.hidden", "layer widths must be positive")?;
        check(t.components >= 1, "train.components", "must be at least 1")?;
        check_train(&t.follow, "train.follow")?;
        check_train(&t.change, "train.change")?;
        Ok(())
    }

    pub fn predictor(&self) -> PredictorConfig {
        PredictorConfig {
            map: self.map,
            neighbours: self.neighbours,
            pursuit: self.pursuit,
            bayes: self.bayes,
        }
    }

    pub fn train_settings(&self) -> ExpertTrainSettings {
        ExpertTrainSettings {
            hidden: self.train.hidden.clone(),
            components: self.train.components,
            follow: self.train.follow,
            change: self.train.change,
        }
    }

    pub fn baseline(&self, kind: BaselineKind) -> PhysicsBaseline {
        let mut b = PhysicsBaseline::new(kind);
        b.decay_time = self.baseline.decay_time;
        b
    }
}
