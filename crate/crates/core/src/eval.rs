//! Dataset segmentation and splitting, behaviour labels and the metric
//! suite (RMSE, FDE, MNLL).

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bayes::GoalPosterior;
use crate::geometry::Vec2;
use crate::lane_map::{LaneGraph, MapError, MapParams};
use crate::mdn::{MixtureOutput, PhysicsBaseline, HORIZON_STEPS};
use crate::tracks::{TrackRow, TrackTable, FRAME_PERIOD};

/// Frames per second of evaluated horizon.
pub const FRAMES_PER_SECOND: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SegmentParams {
    pub history: f64,
    pub future: f64,
    pub stride: f64,
}

impl Default for SegmentParams {
    fn default() -> Self {
        Self {
            history: 3.0,
            future: 5.0,
            stride: 1.0,
        }
    }
}

impl SegmentParams {
    pub fn history_frames(&self) -> usize {
        (self.history / FRAME_PERIOD).round() as usize
    }

    pub fn future_frames(&self) -> usize {
        (self.future / FRAME_PERIOD).round() as usize
    }

    pub fn stride_frames(&self) -> usize {
        ((self.stride / FRAME_PERIOD).round() as usize).max(1)
    }

    pub fn window_frames(&self) -> usize {
        self.history_frames() + self.future_frames()
    }

    pub fn is_valid(&self) -> bool {
        self.history_frames() >= 1 && self.future_frames() >= HORIZON_STEPS * FRAMES_PER_SECOND && self.stride > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviourLabel {
    FollowLane,
    ChangeLane,
}

impl BehaviourLabel {
    pub fn name(self) -> &'static str {
        match self {
            BehaviourLabel::FollowLane => "follow_lane",
            BehaviourLabel::ChangeLane => "change_lane",
        }
    }
}

/// An evaluation window of one target vehicle. The last history row is the
/// current observation; the scene at any frame is read from the table.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub target: u64,
    pub history: Vec<TrackRow>,
    pub future: Vec<TrackRow>,
    pub label: Option<BehaviourLabel>,
}

impl Sample {
    pub fn current(&self) -> &TrackRow {
        self.history.last().expect("non-empty history")
    }

    pub fn start_frame(&self) -> u64 {
        self.history[0].frame
    }

    /// Ground-truth position `h` seconds after the current frame.
    pub fn future_position(&self, h: usize) -> Vec2 {
        self.future[h * FRAMES_PER_SECOND - 1].position()
    }

    /// Ground-truth path length travelled from the current position after
    /// 1..=5 seconds.
    pub fn travelled_distances(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(HORIZON_STEPS);
        let mut prev = self.current().position();
        let mut total = 0.0;
        for (k, row) in self.future.iter().enumerate() {
            total += row.position().distance(prev);
            prev = row.position();
            if (k + 1) % FRAMES_PER_SECOND == 0 && out.len() < HORIZON_STEPS {
                out.push(total);
            }
        }
        out
    }
}

/// Sliding windows over one vehicle's track. Windows that contain a frame
/// gap are dropped.
pub fn segment(track: &[TrackRow], params: &SegmentParams) -> Vec<Sample> {
    let w = params.window_frames();
    let h = params.history_frames();
    let mut out = Vec::new();
    let mut i = 0;
    while i + w <= track.len() {
        let window = &track[i..i + w];
        if window[w - 1].frame - window[0].frame == (w - 1) as u64 {
            out.push(Sample {
                target: window[0].id,
                history: window[..h].to_vec(),
                future: window[h..].to_vec(),
                label: None,
            });
        }
        i += params.stride_frames();
    }
    out
}

pub fn segment_table(table: &TrackTable, params: &SegmentParams) -> Vec<Sample> {
    table.tracks().flat_map(|(_, t)| segment(t, params)).collect()
}

/// Lanes reachable from `lane` through successors of the same lane type.
fn same_lane_corridor(graph: &LaneGraph, lane: usize) -> HashSet<usize> {
    let kind = graph.lane(lane).lane_type;
    let mut seen = HashSet::from([lane]);
    let mut stack = vec![lane];
    while let Some(l) = stack.pop() {
        for &s in &graph.lane(l).successors {
            if graph.lane(s).lane_type == kind && seen.insert(s) {
                stack.push(s);
            }
        }
    }
    seen
}

/// Change-lane if the target leaves its current lane during the future
/// window. Moving onto a successor segment of the same lane type does not
/// count; entering or leaving a ramp does.
pub fn label_behaviour(sample: &Sample, graph: &LaneGraph, map: &MapParams) -> Result<BehaviourLabel, MapError> {
    let start = graph.locate_agent(&sample.current().state(), map)?.lane;
    let corridor = same_lane_corridor(graph, start);
    for row in &sample.future {
        let lane = graph.locate_agent(&row.state(), map)?.lane;
        if !corridor.contains(&lane) {
            return Ok(BehaviourLabel::ChangeLane);
        }
    }
    Ok(BehaviourLabel::FollowLane)
}

/// Label from the recorded lane column, for data without a lane graph.
pub fn label_from_lane_column(sample: &Sample) -> BehaviourLabel {
    let lane = &sample.current().lane;
    if sample.future.iter().any(|r| &r.lane != lane) {
        BehaviourLabel::ChangeLane
    } else {
        BehaviourLabel::FollowLane
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 70/10/20 assignment by a fixed hash of the vehicle id.
pub fn split_of(vehicle: u64) -> Split {
    match splitmix64(vehicle) % 100 {
        0..=69 => Split::Train,
        70..=79 => Split::Val,
        _ => Split::Test,
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Splits {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

pub fn split_dataset(samples: Vec<Sample>) -> Splits {
    let mut out = Splits::default();
    for s in samples {
        match split_of(s.target) {
            Split::Train => out.train.push(s),
            Split::Val => out.val.push(s),
            Split::Test => out.test.push(s),
        }
    }
    out
}

/// Root mean squared Euclidean displacement.
pub fn rmse(predicted: &[Vec2], truth: &[Vec2]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if predicted.is_empty() {
        return 0.0;
    }
    let sq: f64 = predicted.iter().zip(truth).map(|(p, t)| (*p - *t).dot(*p - *t)).sum();
    (sq / predicted.len() as f64).sqrt()
}

/// Mean Euclidean displacement.
pub fn fde(predicted: &[Vec2], truth: &[Vec2]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if predicted.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).map(|(p, t)| p.distance(*t)).sum::<f64>() / predicted.len() as f64
}

/// Mean 1-D negative log likelihood of the true distance at horizon step
/// `step` (0-based) under each predicted distribution.
pub fn mnll(predicted: &[MixtureOutput], truth: &[f64], step: usize) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if predicted.is_empty() {
        return 0.0;
    }
    predicted.iter().zip(truth).map(|(m, &d)| m.marginal_nll(step, d)).sum::<f64>() / predicted.len() as f64
}

/// A model's forecast for one sample: positions after 1..=5 s and the
/// cumulative distance distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePrediction {
    pub positions: Vec<Vec2>,
    pub distances: MixtureOutput,
}

impl SamplePrediction {
    /// Most likely trajectory of a posterior.
    pub fn from_posterior(posterior: &GoalPosterior) -> Self {
        let best = posterior.most_likely();
        Self {
            positions: (1..=HORIZON_STEPS)
                .map(|h| best.trajectory.points[h * FRAMES_PER_SECOND - 1].state.position)
                .collect(),
            distances: best.distances.clone(),
        }
    }

    /// Straight-line extrapolation along the heading with a physics
    /// baseline's distances.
    pub fn from_baseline(row: &TrackRow, baseline: &PhysicsBaseline) -> Self {
        let state = row.state();
        let profile = baseline.profile(&state);
        let dir = Vec2::from_angle(state.velocity_direction());
        Self {
            positions: profile.distances.iter().map(|&d| state.position + dir * d).collect(),
            distances: baseline.distribution(&state),
        }
    }
}

/// Running sums for one (model, stratum) cell.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricAccumulator {
    count: usize,
    squared: [f64; HORIZON_STEPS],
    absolute: [f64; HORIZON_STEPS],
    nll: [f64; HORIZON_STEPS],
}

impl MetricAccumulator {
    pub fn push(&mut self, prediction: &SamplePrediction, sample: &Sample) {
        let travelled = sample.travelled_distances();
        for h in 0..HORIZON_STEPS {
            let e = prediction.positions[h] - sample.future_position(h + 1);
            self.squared[h] += e.dot(e);
            self.absolute[h] += e.norm();
            self.nll[h] += prediction.distances.marginal_nll(h, travelled[h]);
        }
        self.count += 1;
    }

    pub fn merge(&mut self, other: &MetricAccumulator) {
        self.count += other.count;
        for h in 0..HORIZON_STEPS {
            self.squared[h] += other.squared[h];
            self.absolute[h] += other.absolute[h];
            self.nll[h] += other.nll[h];
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn row(&self, model: &str, stratum: &str) -> MetricRow {
        let n = self.count.max(1) as f64;
        MetricRow {
            model: model.to_string(),
            stratum: stratum.to_string(),
            count: self.count,
            rmse: self.squared.iter().map(|s| (s / n).sqrt()).collect(),
            fde: self.absolute.iter().map(|s| s / n).collect(),
            mnll: self.nll.iter().map(|s| s / n).collect(),
        }
    }
}

/// Metrics at 1..=5 s for one model on one stratum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub model: String,
    pub stratum: String,
    pub count: usize,
    pub rmse: Vec<f64>,
    pub fde: Vec<f64>,
    pub mnll: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

/// Strata reported for every model, in order.
pub const STRATA: [&str; 3] = ["all", "follow_lane", "change_lane"];

impl MetricReport {
    /// Builds overall and per-behaviour rows for each model from
    /// `(sample, prediction per model)` pairs.
    pub fn from_predictions<'a>(models: &[&str], items: impl IntoIterator<Item = (&'a Sample, Vec<SamplePrediction>)>) -> Self {
        let mut cells = vec![[MetricAccumulator::default(), MetricAccumulator::default(), MetricAccumulator::default()]; models.len()];
        for (sample, predictions) in items {
            let stratum = match sample.label {
                Some(BehaviourLabel::FollowLane) => Some(1),
                Some(BehaviourLabel::ChangeLane) => Some(2),
                None => None,
            };
            for (cell, p) in cells.iter_mut().zip(&predictions) {
                cell[0].push(p, sample);
                if let Some(s) = stratum {
                    cell[s].push(p, sample);
                }
            }
        }
        let mut rows = Vec::new();
        for (model, cell) in models.iter().zip(&cells) {
            for (acc, stratum) in cell.iter().zip(STRATA) {
                rows.push(acc.row(model, stratum));
            }
        }
        Self { rows }
    }

    pub fn row(&self, model: &str, stratum: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.model == model && r.stratum == stratum)
    }

    /// Plain-text table, one line per (model, stratum).
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = write!(s, "{:<10} {:<12} {:>6}", "model", "stratum", "n");
        for metric in ["RMSE", "FDE", "MNLL"] {
            for h in 1..=HORIZON_STEPS {
                let _ = write!(s, " {:>8}", format!("{metric}@{h}s"));
            }
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{:<10} {:<12} {:>6}", r.model, r.stratum, r.count);
            for v in r.rmse.iter().chain(&r.fde).chain(&r.mnll) {
                let _ = write!(s, " {:>8.3}", v);
            }
            s.push('\n');
        }
        s
    }
}
