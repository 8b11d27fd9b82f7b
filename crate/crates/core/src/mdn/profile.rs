use serde::{Deserialize, Serialize};

use super::MixtureOutput;

/// Longitudinal plan sampled once per `step` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    /// Speed at t = 0, the first interpolation knot.
    pub initial_speed: f64,
    /// Speeds at t = step, 2*step, ...
    pub speeds: Vec<f64>,
    /// Cumulative distances matching `speeds`.
    pub distances: Vec<f64>,
    /// Standard deviation of the cumulative distance at each step.
    pub distance_std: Vec<f64>,
    pub step: f64,
}

impl MotionProfile {
    pub fn horizon(&self) -> f64 {
        self.step * self.speeds.len() as f64
    }

    /// Target speed at time `t`, linearly interpolated between knots and
    /// held at the final speed past the horizon.
    pub fn speed_at(&self, t: f64) -> f64 {
        if t <= 0.0 || self.speeds.is_empty() {
            return self.initial_speed;
        }
        let u = t / self.step;
        let k = u.floor() as usize;
        if k >= self.speeds.len() {
            return *self.speeds.last().unwrap();
        }
        let lo = if k == 0 { self.initial_speed } else { self.speeds[k - 1] };
        let hi = self.speeds[k];
        lo + (hi - lo) * (u - k as f64)
    }

    /// Distance standard deviation at `t`, interpolated from zero at t = 0.
    pub fn std_at(&self, t: f64) -> f64 {
        if t <= 0.0 || self.distance_std.is_empty() {
            return 0.0;
        }
        let u = t / self.step;
        let k = u.floor() as usize;
        if k >= self.distance_std.len() {
            return *self.distance_std.last().unwrap();
        }
        let lo = if k == 0 { 0.0 } else { self.distance_std[k - 1] };
        lo + (self.distance_std[k] - lo) * (u - k as f64)
    }
}

/// Motion profile from the dominant mixture component: speeds are
/// successive differences of the predicted cumulative distances over a 1 s
/// step, floored at zero.
pub fn to_motion_profile(out: &MixtureOutput, current_speed: f64) -> MotionProfile {
    let c = &out.components[out.dominant()];
    let step = 1.0;
    let mut speeds = Vec::with_capacity(c.mean.len());
    let mut distances = Vec::with_capacity(c.mean.len());
    let (mut prev, mut travelled) = (0.0, 0.0);
    for &mu in &c.mean {
        let s = ((mu - prev) / step).max(0.0);
        travelled += s * step;
        speeds.push(s);
        distances.push(travelled);
        prev = mu;
    }
    MotionProfile {
        initial_speed: current_speed,
        speeds,
        distances,
        distance_std: c.variance.iter().map(|v| v.sqrt()).collect(),
        step,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(mu: &[f64]) -> MotionProfile {
        to_motion_profile(&MixtureOutput::gaussian(mu.to_vec(), &[1.0; 5]), 10.0)
    }

    #[test]
    fn constant_distances_give_constant_speed() {
        assert_eq!(profile(&[10.0, 20.0, 30.0, 40.0, 50.0]).speeds, vec![10.0; 5]);
    }

    #[test]
    fn decelerating_distances() {
        assert_eq!(profile(&[10.0, 18.0, 24.0, 28.0, 30.0]).speeds, vec![10.0, 8.0, 6.0, 4.0, 2.0]);
    }

    #[test]
    fn negative_difference_floored() {
        let p = profile(&[10.0, 8.0, 12.0, 14.0, 15.0]);
        assert_eq!(p.speeds[1], 0.0);
        assert!(p.speeds.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn interpolation_between_knots() {
        let p = profile(&[10.0, 18.0, 24.0, 28.0, 30.0]);
        assert_eq!(p.speed_at(0.0), 10.0);
        assert!((p.speed_at(1.5) - 9.0).abs() < 1e-12);
        assert_eq!(p.speed_at(7.0), 2.0);
        assert!((p.std_at(0.5) - 0.5).abs() < 1e-12);
    }
}
