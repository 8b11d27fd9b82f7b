//! Prediction log: JSON Lines, one record per (agent, step).
//!
//! Format `goalpred-predictions`, version 1. Each line is an object:
//!
//! | field         | type                                                     |
//! |---------------|----------------------------------------------------------|
//! | `format`      | `"goalpred-predictions"`                                 |
//! | `version`     | `1`                                                      |
//! | `agent`       | vehicle id                                               |
//! | `frame`       | frame number of the observation                          |
//! | `time`        | seconds, `frame * 0.1`                                   |
//! | `most_likely` | index into `entries`                                     |
//! | `entries`     | per goal: `goal`, `probability`, `expert` (schema id or  |
//! |               | null), `max_lateral_acceleration`, `distances` (mixture  |
//! |               | over cumulative distance at 1..5 s), `trajectory`        |
//! | `timing`      | microseconds spent in `features`, `motion_profile`,      |
//! |               | `inference`                                              |
//!
//! Trajectory points are `{t, x, y, heading, speed, velocity_heading, covariance}`
//! at 10 Hz. Records are ordered by agent id, then frame. Apart from
//! `timing`, a log is a deterministic function of its inputs.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use anyhow::{bail, Context, Result};
use goalpred::bayes::GoalPosterior;
use goalpred::bayes::StepTimings;
use goalpred::eval::{SamplePrediction, FRAMES_PER_SECOND};
use goalpred::geometry::Vec2;
use goalpred::lane_map::Goal;
use goalpred::mdn::{MixtureOutput, HORIZON_STEPS};
use serde::{Deserialize, Serialize};

pub const LOG_FORMAT: &str = "goalpred-predictions";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub velocity_heading: f64,
    pub covariance: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub goal: Goal,
    pub probability: f64,
    pub expert: Option<String>,
    pub max_lateral_acceleration: f64,
    pub distances: MixtureOutput,
    pub trajectory: Vec<LogPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub features: u64,
    pub motion_profile: u64,
    pub inference: u64,
}

impl From<StepTimings> for Timing {
    fn from(t: StepTimings) -> Self {
        Self {
            features: t.features.as_micros() as u64,
            motion_profile: t.motion_profile.as_micros() as u64,
            inference: t.inference.as_micros() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub format: String,
    pub version: u32,
    pub agent: u64,
    pub frame: u64,
    pub time: f64,
    pub most_likely: usize,
    pub entries: Vec<LogEntry>,
    pub timing: Option<Timing>,
}

impl LogRecord {
    pub fn new(agent: u64, frame: u64, time: f64, posterior: &GoalPosterior, timing: Option<StepTimings>) -> Self {
        let most_likely = posterior.most_likely_index();
        let entries = posterior
            .entries
            .iter()
            .map(|e| LogEntry {
                goal: e.goal.clone(),
                probability: e.probability,
                expert: e.expert.map(|s| s.id()),
                max_lateral_acceleration: e.trajectory.max_lateral_acceleration,
                distances: e.distances.clone(),
                trajectory: e
                    .trajectory
                    .points
                    .iter()
                    .map(|p| LogPoint {
                        t: p.time,
                        x: p.state.position.x,
                        y: p.state.position.y,
                        heading: p.state.heading,
                        speed: p.state.speed,
                        velocity_heading: p.velocity_heading,
                        covariance: p.covariance,
                    })
                    .collect(),
            })
            .collect();
        Self {
            format: LOG_FORMAT.to_string(),
            version: LOG_VERSION,
            agent,
            frame,
            time,
            most_likely,
            entries,
            timing: timing.map(Timing::from),
        }
    }

    /// Most-likely trajectory at 1..=5 s and its distance distribution.
    pub fn prediction(&self) -> Result<SamplePrediction> {
        let best = self.entries.get(self.most_likely).context("most_likely index out of range")?;
        let positions = (1..=HORIZON_STEPS)
            .map(|h| {
                best.trajectory
                    .get(h * FRAMES_PER_SECOND - 1)
                    .map(|p| Vec2::new(p.x, p.y))
                    .with_context(|| format!("agent {} frame {}: trajectory shorter than {h} s", self.agent, self.frame))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SamplePrediction {
            positions,
            distances: best.distances.clone(),
        })
    }
}

pub fn write_records<'a>(mut out: impl Write, records: impl IntoIterator<Item = &'a LogRecord>) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_records(input: impl BufRead) -> Result<Vec<LogRecord>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: LogRecord = serde_json::from_str(&line).with_context(|| format!("prediction log line {}", i + 1))?;
        if r.format != LOG_FORMAT || r.version != LOG_VERSION {
            bail!("prediction log line {}: unsupported format {} v{}", i + 1, r.format, r.version);
        }
        out.push(r);
    }
    Ok(out)
}

/// Index by (agent, frame).
pub fn index_records(records: &[LogRecord]) -> HashMap<(u64, u64), &LogRecord> {
    records.iter().map(|r| ((r.agent, r.frame), r)).collect()
}
