//! Trajectory generation: pure pursuit steering and a delayed proportional
//! speed controller driving a kinematic bicycle model, with acceleration and
//! jerk limits.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentState;
use crate::geometry::{wrap_angle, Vec2};
use crate::lane_map::Path;
use crate::mdn::MotionProfile;

#[derive(Debug, Error, PartialEq)]
pub enum PursuitError {
    #[error("vehicle geometry needs 0 < rear_to_centre < wheelbase, got L = {wheelbase}, L_r = {rear_to_centre}")]
    InvalidGeometry { wheelbase: f64, rear_to_centre: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    pub wheelbase: f64,
    /// Distance from the rear axle to the geometric centre.
    pub rear_to_centre: f64,
}

/// Wheelbase as a fraction of body length when only the bounding box is
/// known.
const WHEELBASE_RATIO: f64 = 0.6;

impl VehicleGeometry {
    pub fn new(wheelbase: f64, rear_to_centre: f64) -> Result<Self, PursuitError> {
        if !(rear_to_centre > 0.0 && rear_to_centre < wheelbase) {
            return Err(PursuitError::InvalidGeometry { wheelbase, rear_to_centre });
        }
        Ok(Self { wheelbase, rear_to_centre })
    }

    pub fn from_length(length: f64) -> Self {
        let wheelbase = WHEELBASE_RATIO * length;
        Self {
            wheelbase,
            rear_to_centre: 0.5 * wheelbase,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub acceleration: f64,
    pub steering: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PursuitParams {
    pub lookahead: f64,
    pub gain: f64,
    pub delay_steps: usize,
    pub max_accel: f64,
    pub max_jerk: f64,
    pub dt: f64,
    pub horizon: f64,
    /// Fixed lateral position standard deviation, metres.
    pub lateral_std: f64,
}

impl Default for PursuitParams {
    fn default() -> Self {
        Self {
            lookahead: 10.0,
            gain: 2.0,
            delay_steps: 5,
            max_accel: 6.0,
            max_jerk: 10.0,
            dt: 0.1,
            horizon: 5.0,
            lateral_std: 0.5,
        }
    }
}

impl PursuitParams {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn is_valid(&self) -> bool {
        [self.lookahead, self.gain, self.max_accel, self.max_jerk, self.dt, self.horizon, self.lateral_std]
            .iter()
            .all(|v| v.is_finite() && *v > 0.0)
            && self.delay_steps > 0
            && (self.delay_steps as f64) * self.dt < self.horizon
    }
}

/// Centre pose and speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinematicState {
    pub position: Vec2,
    pub heading: f64,
    pub speed: f64,
}

impl KinematicState {
    pub fn rear_axle(&self, geom: &VehicleGeometry) -> Vec2 {
        self.position - Vec2::from_angle(self.heading) * geom.rear_to_centre
    }
}

impl From<&AgentState> for KinematicState {
    fn from(a: &AgentState) -> Self {
        Self {
            position: a.position,
            heading: a.heading,
            speed: a.speed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    pub state: KinematicState,
    /// Direction of the centre's velocity (heading plus side slip).
    pub velocity_heading: f64,
    /// Position covariance, m^2.
    pub covariance: [[f64; 2]; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub start: KinematicState,
    pub points: Vec<TrajectoryPoint>,
    /// `controls[k]` moves `points[k-1]` (or `start`) to `points[k]`.
    pub controls: Vec<ControlInput>,
    pub lateral_accelerations: Vec<f64>,
    pub max_lateral_acceleration: f64,
    pub wheelbase: f64,
}

impl Trajectory {
    /// Speeds including the start state.
    pub fn speeds(&self) -> Vec<f64> {
        std::iter::once(self.start.speed)
            .chain(self.points.iter().map(|p| p.state.speed))
            .collect()
    }

    /// Point closest in time to `t` seconds after the start.
    pub fn at_time(&self, t: f64, dt: f64) -> Option<&TrajectoryPoint> {
        let k = (t / dt).round() as isize - 1;
        (k >= 0).then(|| self.points.get(k as usize)).flatten()
    }
}

pub fn side_slip(geom: &VehicleGeometry, steering: f64) -> f64 {
    (geom.rear_to_centre / geom.wheelbase * steering.tan()).atan()
}

/// One step of the kinematic bicycle model about the vehicle centre. Speed
/// is floored at zero.
pub fn bicycle_step(state: &KinematicState, u: ControlInput, geom: &VehicleGeometry, dt: f64) -> KinematicState {
    let beta = side_slip(geom, u.steering);
    let d = state.speed * dt + 0.5 * u.acceleration * dt * dt;
    KinematicState {
        position: Vec2::new(
            state.position.x + d * (state.heading + beta).cos(),
            state.position.y + d * (state.heading + beta).sin(),
        ),
        heading: state.heading + d / geom.wheelbase * beta.cos() * u.steering.tan(),
        speed: (state.speed + u.acceleration * dt).max(0.0),
    }
}

/// Point `lookahead` metres of arclength past the projection of the rear
/// axle onto the path, extrapolating along the final tangent past its end.
pub fn lookahead_goal(path: &Path, rear_axle: Vec2, lookahead: f64) -> Vec2 {
    let line = path.polyline();
    let s = line.project(rear_axle).arclength;
    line.point_at(s + lookahead)
}

/// Steering angle that puts the rear axle on the circle through the goal.
pub fn steering_from_error(heading_error: f64, lookahead: f64, wheelbase: f64) -> f64 {
    let curvature = 2.0 * heading_error.sin() / lookahead;
    (curvature * wheelbase).atan()
}

/// Speed loss when ramping acceleration from `-decel` back to zero at the
/// jerk limit, counting the current step.
fn ramp_speed_loss(decel: f64, jerk_step: f64, dt: f64) -> f64 {
    let n = (decel / jerk_step).ceil();
    dt * (n * decel - jerk_step * n * (n - 1.0) / 2.0)
}

/// Most negative acceleration from which the vehicle can still ease off to
/// zero acceleration at the jerk limit before its speed reaches zero.
fn stop_safe_min_accel(speed: f64, params: &PursuitParams) -> f64 {
    let jerk_step = params.max_jerk * params.dt;
    if ramp_speed_loss(params.max_accel, jerk_step, params.dt) <= speed {
        return -params.max_accel;
    }
    let (mut lo, mut hi) = (0.0, params.max_accel);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ramp_speed_loss(mid, jerk_step, params.dt) <= speed {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    -lo
}

/// Delayed proportional speed control: the error to the target speed
/// `delay_steps` ahead, clamped to the acceleration limit and rate-limited
/// by the jerk limit relative to `previous`. Deceleration is additionally
/// bounded so the vehicle can reach a standstill without breaking the jerk
/// limit.
pub fn accel_command(profile: &MotionProfile, speed: f64, step: usize, previous: f64, params: &PursuitParams) -> f64 {
    let t = (step + params.delay_steps) as f64 * params.dt;
    let raw = params.gain * (profile.speed_at(t) - speed);
    let jerk_step = params.max_jerk * params.dt;
    let lo = (-params.max_accel).max(previous - jerk_step).max(stop_safe_min_accel(speed, params));
    let hi = params.max_accel.min(previous + jerk_step);
    if lo <= hi {
        raw.clamp(lo, hi)
    } else if step == 0 {
        lo
    } else {
        hi
    }
}

/// Closed-loop rollout over the horizon.
pub fn generate_trajectory(
    agent: &AgentState,
    path: &Path,
    profile: &MotionProfile,
    geom: &VehicleGeometry,
    params: &PursuitParams,
) -> Trajectory {
    let start = KinematicState::from(agent);
    let steps = params.steps();
    let mut points = Vec::with_capacity(steps);
    let mut controls = Vec::with_capacity(steps);
    let mut lateral = Vec::with_capacity(steps);
    let mut state = start;
    let mut previous = agent.acceleration.clamp(-params.max_accel, params.max_accel);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let lat_var = params.lateral_std * params.lateral_std;

    for k in 0..steps {
        let rear = state.rear_axle(geom);
        let goal = lookahead_goal(path, rear, params.lookahead);
        let heading_error = wrap_angle((goal - rear).angle() - state.heading);
        let steering = steering_from_error(
            (params.gain * heading_error).clamp(-half_pi, half_pi),
            params.lookahead,
            geom.wheelbase,
        );
        let acceleration = accel_command(profile, state.speed, k, previous, params);
        let u = ControlInput { acceleration, steering };
        lateral.push(state.speed * state.speed * steering.tan().abs() / geom.wheelbase);
        let next = bicycle_step(&state, u, geom, params.dt);
        let time = (k + 1) as f64 * params.dt;
        let lon_std = profile.std_at(time);
        let (c, s) = (next.heading.cos(), next.heading.sin());
        let lon_var = lon_std * lon_std;
        let covariance = [
            [lon_var * c * c + lat_var * s * s, (lon_var - lat_var) * c * s],
            [(lon_var - lat_var) * c * s, lon_var * s * s + lat_var * c * c],
        ];
        points.push(TrajectoryPoint {
            time,
            state: next,
            velocity_heading: next.heading + side_slip(geom, steering),
            covariance,
        });
        controls.push(u);
        previous = acceleration;
        state = next;
    }
    let max_lateral_acceleration = lateral.iter().copied().fold(0.0, f64::max);
    Trajectory {
        start,
        points,
        controls,
        lateral_accelerations: lateral,
        max_lateral_acceleration,
        wheelbase: geom.wheelbase,
    }
}

/// Maximum of v^2 / r over the trajectory, with r = L / tan(steer) the
/// rear-axle turning radius; zero steer gives zero.
pub fn lateral_acceleration(trajectory: &Trajectory) -> f64 {
    let speeds = trajectory.speeds();
    trajectory
        .controls
        .iter()
        .zip(&speeds)
        .map(|(u, v)| v * v * u.steering.tan().abs() / trajectory.wheelbase)
        .fold(0.0, f64::max)
}
