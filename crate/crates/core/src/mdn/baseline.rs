//! Constant-velocity and decaying-acceleration motion profiles.

use serde::{Deserialize, Serialize};

use super::{MixtureOutput, MotionProfile, HORIZON_STEPS};
use crate::agent::AgentState;

/// Decay time constant of the decaying-acceleration model, seconds.
pub const DEFAULT_DECAY_TIME: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    ConstantVelocity,
    DecayingAcceleration,
}

/// Physics motion model with a centred Gaussian error model per step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicsBaseline {
    pub kind: BaselineKind,
    pub decay_time: f64,
    pub distance_std: Vec<f64>,
}

impl PhysicsBaseline {
    /// Baseline with the default error model: std of `t` metres at `t` s.
    pub fn new(kind: BaselineKind) -> Self {
        Self {
            kind,
            decay_time: DEFAULT_DECAY_TIME,
            distance_std: (1..=HORIZON_STEPS).map(|t| t as f64).collect(),
        }
    }

    /// Speed and cumulative distance at time `t`.
    pub fn kinematics(&self, speed: f64, acceleration: f64, t: f64) -> (f64, f64) {
        match self.kind {
            BaselineKind::ConstantVelocity => (speed, speed * t),
            BaselineKind::DecayingAcceleration => decaying(speed, acceleration, self.decay_time, t),
        }
    }

    pub fn profile(&self, state: &AgentState) -> MotionProfile {
        let (speeds, distances): (Vec<f64>, Vec<f64>) = (1..=HORIZON_STEPS)
            .map(|k| self.kinematics(state.speed, state.acceleration, k as f64))
            .unzip();
        MotionProfile {
            initial_speed: state.speed,
            speeds,
            distances,
            distance_std: self.distance_std.clone(),
            step: 1.0,
        }
    }

    pub fn distribution(&self, state: &AgentState) -> MixtureOutput {
        MixtureOutput::gaussian(self.profile(state).distances, &self.distance_std)
    }

    /// Fits the per-step error std as the root mean square residual of the
    /// model on `(speed, acceleration, true distances)` samples. Steps with
    /// no spread keep a small positive floor.
    pub fn fit(&mut self, samples: &[(f64, f64, Vec<f64>)]) {
        if samples.is_empty() {
            return;
        }
        let mut sq = [0.0; HORIZON_STEPS];
        for (speed, accel, truth) in samples {
            for k in 0..HORIZON_STEPS {
                let (_, d) = self.kinematics(*speed, *accel, (k + 1) as f64);
                sq[k] += (truth[k] - d).powi(2);
            }
        }
        self.distance_std = sq
            .iter()
            .map(|s| (s / samples.len() as f64).sqrt().max(1e-3))
            .collect();
    }
}

/// Closed form of a(t) = a0 exp(-t / tau) integrated from speed v0, with
/// the speed held at zero once reached.
fn decaying(v0: f64, a0: f64, tau: f64, t: f64) -> (f64, f64) {
    let speed = |t: f64| v0 + a0 * tau * (1.0 - (-t / tau).exp());
    let dist = |t: f64| v0 * t + a0 * tau * (t - tau * (1.0 - (-t / tau).exp()));
    let terminal = v0 + a0 * tau;
    if a0 < 0.0 && terminal < 0.0 {
        let stop = -tau * (1.0 + v0 / (a0 * tau)).ln();
        if t >= stop {
            return (0.0, dist(stop));
        }
    }
    (speed(t).max(0.0), dist(t))
}

pub fn cv_baseline(state: &AgentState) -> MotionProfile {
    PhysicsBaseline::new(BaselineKind::ConstantVelocity).profile(state)
}

pub fn da_baseline(state: &AgentState) -> MotionProfile {
    PhysicsBaseline::new(BaselineKind::DecayingAcceleration).profile(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::{AgentClass, AgentId};
    use crate::geometry::Vec2;

    fn agent(speed: f64, accel: f64) -> AgentState {
        AgentState::new(AgentId(0), Vec2::ZERO, 0.0, speed, accel, AgentClass::Car, 4.0, 2.0)
    }

    /// 1 ms forward-Euler integration of the decaying acceleration model.
    fn euler(v0: f64, a0: f64, tau: f64, t_end: f64) -> (f64, f64) {
        let dt = 1e-3;
        let (mut v, mut d, mut t) = (v0, 0.0, 0.0);
        let steps = (t_end / dt).round() as usize;
        for _ in 0..steps {
            let a = a0 * (-(t + 0.5 * dt) / tau).exp();
            let v_next = (v + a * dt).max(0.0);
            d += 0.5 * (v + v_next) * dt;
            v = v_next;
            t += dt;
        }
        (v, d)
    }

    #[test]
    fn cv_distances() {
        assert_eq!(cv_baseline(&agent(10.0, 3.0)).distances, vec![10.0, 20.0, 30.0, 40.0, 50.0]);
    }

    #[test]
    fn da_without_acceleration_is_cv() {
        assert_eq!(da_baseline(&agent(10.0, 0.0)), cv_baseline(&agent(10.0, 0.0)));
    }

    #[test]
    fn da_matches_fine_euler_integration() {
        for &(v0, a0) in &[(10.0, 2.0), (3.0, -2.5), (10.0, -1.0)] {
            let p = da_baseline(&agent(v0, a0));
            for k in 0..5 {
                let (v, d) = euler(v0, a0, 2.0, (k + 1) as f64);
                assert!((p.speeds[k] - v).abs() < 1e-3, "speed {v0} {a0} {k}");
                assert!((p.distances[k] - d).abs() < 1e-3, "distance {v0} {a0} {k}");
            }
        }
    }

    #[test]
    fn fit_recovers_residual_spread() {
        let mut b = PhysicsBaseline::new(BaselineKind::ConstantVelocity);
        let samples = vec![
            (10.0, 0.0, vec![11.0, 22.0, 33.0, 44.0, 55.0]),
            (10.0, 0.0, vec![9.0, 18.0, 27.0, 36.0, 45.0]),
        ];
        b.fit(&samples);
        for k in 0..5 {
            assert!((b.distance_std[k] - (k + 1) as f64).abs() < 1e-12);
        }
    }
}
