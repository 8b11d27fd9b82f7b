//! Scripted kinematic scenes on a lane graph, used as ground truth for
//! end-to-end tests and as small training sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentClass;
use crate::geometry::Vec2;
use crate::lane_map::{LaneGraph, LaneType, MapError};
use crate::tracks::{TrackError, TrackRow, TrackTable, FRAME_PERIOD};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Tracks(#[from] TrackError),
    #[error("invalid scenario `{name}`: {reason}")]
    Invalid { name: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Motion {
    /// One vehicle on the centre line at constant speed.
    ConstantVelocity { lane: String, start: f64, speed: f64 },
    /// A platoon whose leader oscillates in speed; follower `i` replays the
    /// leader's motion delayed by `i * lag` seconds and `i * spacing` metres.
    StopAndGo {
        lane: String,
        start: f64,
        speed: f64,
        amplitude: f64,
        period: f64,
        vehicles: usize,
        spacing: f64,
        lag: f64,
    },
    /// Constant speed with a raised-cosine lateral transition from `from`
    /// to `to`, starting at `onset` seconds and lasting `manoeuvre` seconds.
    ChangeLane {
        from: String,
        to: String,
        start: f64,
        speed: f64,
        onset: f64,
        manoeuvre: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub duration: f64,
    /// Standard deviation of isotropic position noise, metres.
    #[serde(default)]
    pub position_noise: f64,
    /// Extra constant-velocity vehicles placed at random on driving lanes.
    #[serde(default)]
    pub background: usize,
    pub motion: Motion,
}

impl Scenario {
    pub fn constant_velocity(speed: f64, duration: f64) -> Self {
        Self {
            name: "constant_velocity".into(),
            duration,
            position_noise: 0.0,
            background: 0,
            motion: Motion::ConstantVelocity {
                lane: "lane_2a".into(),
                start: 100.0,
                speed,
            },
        }
    }

    pub fn stop_and_go(duration: f64) -> Self {
        Self {
            name: "stop_and_go".into(),
            duration,
            position_noise: 0.0,
            background: 0,
            motion: Motion::StopAndGo {
                lane: "lane_3a".into(),
                start: 150.0,
                speed: 8.0,
                amplitude: 6.0,
                period: 8.0,
                vehicles: 4,
                spacing: 15.0,
                lag: 1.0,
            },
        }
    }

    /// Change into the left neighbour of the middle lane.
    pub fn change_left(speed: f64, onset: f64, manoeuvre: f64, duration: f64) -> Self {
        Self {
            name: "change_left".into(),
            duration,
            position_noise: 0.0,
            background: 0,
            motion: Motion::ChangeLane {
                from: "lane_2a".into(),
                to: "lane_1a".into(),
                start: 100.0,
                speed,
                onset,
                manoeuvre,
            },
        }
    }

    pub fn entry_merge(duration: f64) -> Self {
        Self {
            name: "entry_merge".into(),
            duration,
            position_noise: 0.0,
            background: 0,
            motion: Motion::ChangeLane {
                from: "entry".into(),
                to: "lane_3a".into(),
                start: 10.0,
                speed: 15.0,
                onset: 3.0,
                manoeuvre: 4.0,
            },
        }
    }

    /// The scenarios shipped with the command-line tool, all on the
    /// built-in highway fixture.
    pub fn bundled() -> Vec<Scenario> {
        let mut traffic = Scenario::change_left(10.0, 3.0, 3.0, 12.0);
        traffic.name = "change_left_traffic".into();
        traffic.background = 6;
        traffic.position_noise = 0.05;
        vec![
            Scenario::constant_velocity(10.0, 8.0),
            Scenario::stop_and_go(12.0),
            Scenario::change_left(10.0, 3.0, 3.0, 10.0),
            Scenario::entry_merge(10.0),
            traffic,
        ]
    }

    pub fn frames(&self) -> usize {
        (self.duration / FRAME_PERIOD).round() as usize
    }

    fn invalid(&self, reason: impl Into<String>) -> SynthError {
        SynthError::Invalid {
            name: self.name.clone(),
            reason: reason.into(),
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(self.invalid("duration must be positive"));
        }
        if !(self.position_noise >= 0.0 && self.position_noise.is_finite()) {
            return Err(self.invalid("position_noise must be non-negative"));
        }
        match &self.motion {
            Motion::ConstantVelocity { speed, .. } if *speed < 0.0 => Err(self.invalid("speed must be non-negative")),
            Motion::StopAndGo {
                speed,
                amplitude,
                period,
                vehicles,
                ..
            } => {
                if *amplitude < 0.0 || amplitude > speed {
                    Err(self.invalid("amplitude must lie in [0, speed]"))
                } else if *period <= 0.0 || *vehicles == 0 {
                    Err(self.invalid("period and vehicles must be positive"))
                } else {
                    Ok(())
                }
            }
            Motion::ChangeLane { speed, manoeuvre, .. } if *speed < 0.0 || *manoeuvre <= 0.0 => {
                Err(self.invalid("speed must be non-negative and manoeuvre positive"))
            }
            _ => Ok(()),
        }
    }
}

/// Raised-cosine progress from 0 to 1 over `[onset, onset + manoeuvre]`.
pub fn lateral_progress(t: f64, onset: f64, manoeuvre: f64) -> f64 {
    let u = ((t - onset) / manoeuvre).clamp(0.0, 1.0);
    0.5 * (1.0 - (std::f64::consts::PI * u).cos())
}

type PositionFn<'a> = Box<dyn Fn(f64) -> Vec2 + 'a>;

fn scripted<'g>(graph: &'g LaneGraph, motion: &Motion) -> Result<Vec<PositionFn<'g>>, MapError> {
    Ok(match motion.clone() {
        Motion::ConstantVelocity { lane, start, speed } => {
            let line = &graph.lane_by_id(&lane)?.centerline;
            vec![Box::new(move |t| line.point_at(start + speed * t))]
        }
        Motion::StopAndGo {
            lane,
            start,
            speed,
            amplitude,
            period,
            vehicles,
            spacing,
            lag,
        } => {
            let line = &graph.lane_by_id(&lane)?.centerline;
            let omega = 2.0 * std::f64::consts::PI / period;
            // leader speed is speed - amplitude * sin(omega t), constant before t = 0
            let leader = move |t: f64| {
                if t <= 0.0 {
                    speed * t
                } else {
                    speed * t - amplitude / omega * (1.0 - (omega * t).cos())
                }
            };
            (0..vehicles)
                .map(|i| {
                    let f: PositionFn<'_> =
                        Box::new(move |t| line.point_at(start + leader(t - i as f64 * lag) - i as f64 * spacing));
                    f
                })
                .collect()
        }
        Motion::ChangeLane {
            from,
            to,
            start,
            speed,
            onset,
            manoeuvre,
        } => {
            let src = &graph.lane_by_id(&from)?.centerline;
            let dst = &graph.lane_by_id(&to)?.centerline;
            vec![Box::new(move |t| {
                let p = src.point_at(start + speed * t);
                let q = dst.point_at(dst.project(p).arclength);
                p + (q - p) * lateral_progress(t, onset, manoeuvre)
            })]
        }
    })
}

/// Generates the scene. Vehicle ids start at 1 for scripted vehicles and at
/// 100 for background traffic. Deterministic for a given seed.
pub fn generate(graph: &LaneGraph, scenario: &Scenario, seed: u64) -> Result<TrackTable, SynthError> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = scripted(graph, &scenario.motion)?;
    let n_scripted = paths.len();

    let driving: Vec<usize> = (0..graph.lanes().len())
        .filter(|&i| graph.lane(i).lane_type == LaneType::Driving)
        .collect();
    let reference_speed = match &scenario.motion {
        Motion::ConstantVelocity { speed, .. } | Motion::StopAndGo { speed, .. } | Motion::ChangeLane { speed, .. } => *speed,
    };
    for _ in 0..scenario.background {
        let lane = driving[rng.gen_range(0..driving.len())];
        let line = &graph.lane(lane).centerline;
        let s0 = rng.gen_range(0.0..line.length());
        let v = (reference_speed + rng.gen_range(-3.0..3.0)).max(0.0);
        paths.push(Box::new(move |t| line.point_at(s0 + v * t)));
    }

    let noise = Normal::new(0.0, scenario.position_noise.max(f64::MIN_POSITIVE)).expect("finite std");
    let h = 1e-3;
    let mut rows = Vec::with_capacity(paths.len() * scenario.frames());
    for (k, pos) in paths.iter().enumerate() {
        let id = if k < n_scripted { k as u64 + 1 } else { 100 + (k - n_scripted) as u64 };
        let class = if k >= n_scripted && rng.gen_bool(0.2) { AgentClass::Truck } else { AgentClass::Car };
        let (length, width) = match class {
            AgentClass::Truck => (12.0, 2.5),
            _ => (4.5, 1.8),
        };
        let vel = |t: f64| (pos(t + h) - pos(t - h)) * (0.5 / h);
        let mut heading = 0.0;
        for f in 0..scenario.frames() {
            let t = f as f64 * FRAME_PERIOD;
            let v = vel(t);
            let speed = v.norm();
            if speed > 1e-6 {
                heading = v.angle();
            } else if f == 0 {
                heading = (pos(t + 1.0) - pos(t)).angle();
            }
            let acceleration = (vel(t + h).norm() - vel(t - h).norm()) * (0.5 / h);
            let mut p = pos(t);
            if scenario.position_noise > 0.0 {
                p = p + Vec2::new(noise.sample(&mut rng), noise.sample(&mut rng));
            }
            let lane = graph
                .locate(p, heading, f64::INFINITY)
                .map(|l| graph.lane(l.lane).id.clone())
                .unwrap_or_default();
            rows.push(TrackRow {
                id,
                frame: f as u64,
                x: p.x,
                y: p.y,
                heading,
                speed,
                acceleration,
                lane,
                class,
                length,
                width,
            });
        }
    }
    Ok(TrackTable::from_rows(rows)?)
}
