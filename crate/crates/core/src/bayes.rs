//! Recursive Bayesian inference over hypothesised goals and the per-step
//! prediction loop that ties goal extraction, motion-profile prediction and
//! trajectory generation together.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentId, AgentState};
use crate::features::{neighbours_at, Behaviour, ContextBlocks, FeatureError, FeatureSchema, NeighbourParams, Side};
use crate::geometry::wrap_angle;
use crate::lane_map::{goals_at, match_goals_on, target_path_from, Goal, GoalKind, GoalMatching, LaneGraph, MapError, MapParams};
use crate::mdn::{select_schema, to_motion_profile, ExpertCollection, MixtureOutput, ModelError, MotionProfile, PhysicsBaseline};
use crate::pursuit::{generate_trajectory, PursuitParams, Trajectory, TrajectoryPoint, VehicleGeometry};

#[derive(Debug, Error)]
pub enum PredictError {
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BayesParams {
    pub sigma_x: f64,
    pub sigma_y: f64,
    pub sigma_phi: f64,
    /// Lateral-acceleration penalty rate.
    pub lambda: f64,
    /// Forgetting factor.
    pub gamma: f64,
    /// Lateral acceleration tolerated without penalty, m/s^2.
    pub max_lateral_accel: f64,
}

impl Default for BayesParams {
    fn default() -> Self {
        Self {
            sigma_x: 0.4,
            sigma_y: 0.4,
            sigma_phi: 0.15,
            lambda: 0.5,
            gamma: 0.1,
            max_lateral_accel: 0.0,
        }
    }
}

impl BayesParams {
    pub fn is_valid(&self) -> bool {
        self.sigma_x > 0.0
            && self.sigma_y > 0.0
            && self.sigma_phi > 0.0
            && self.lambda >= 0.0
            && (0.0..=1.0).contains(&self.gamma)
            && self.max_lateral_accel >= 0.0
            && self.max_lateral_accel.is_finite()
    }
}

fn normal_pdf(residual: f64, sigma: f64) -> f64 {
    (-0.5 * (residual / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Density of an observation under a predicted state: independent normals
/// on x, y and velocity direction, the angle residual wrapped.
pub fn likelihood(observed: &AgentState, predicted: &TrajectoryPoint, params: &BayesParams) -> f64 {
    let dx = observed.position.x - predicted.state.position.x;
    let dy = observed.position.y - predicted.state.position.y;
    let dphi = wrap_angle(observed.velocity_direction() - predicted.velocity_heading);
    normal_pdf(dx, params.sigma_x) * normal_pdf(dy, params.sigma_y) * normal_pdf(dphi, params.sigma_phi)
}

pub fn normalise(dist: &mut [f64]) -> bool {
    let total: f64 = dist.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return false;
    }
    dist.iter_mut().for_each(|p| *p /= total);
    true
}

pub fn uniform(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

/// Elementwise prior x likelihood, normalised. If every product is zero the
/// prior is returned unchanged.
pub fn posterior_update(prior: &[f64], likelihoods: &[f64]) -> Vec<f64> {
    assert_eq!(prior.len(), likelihoods.len(), "goal sets differ");
    let mut post: Vec<f64> = prior.iter().zip(likelihoods).map(|(p, l)| p * l).collect();
    if normalise(&mut post) {
        post
    } else {
        prior.to_vec()
    }
}

/// Scales each goal by `exp(-lambda * max(0, alpha_g - max_alpha))` and
/// renormalises.
pub fn lateral_acc_penalty(dist: &[f64], max_alpha: &[f64], params: &BayesParams) -> Vec<f64> {
    let mut out: Vec<f64> = dist
        .iter()
        .zip(max_alpha)
        .map(|(p, a)| p * (-params.lambda * (a - params.max_lateral_accel).max(0.0)).exp())
        .collect();
    if normalise(&mut out) {
        out
    } else {
        dist.to_vec()
    }
}

/// Mixes with the uniform distribution.
pub fn forget(dist: &[f64], gamma: f64) -> Vec<f64> {
    let u = 1.0 / dist.len() as f64;
    dist.iter().map(|p| (1.0 - gamma) * p + gamma * u).collect()
}

/// Carries probability mass from the previous goal set to the current one.
/// Removed goals' mass is split equally over the surviving goals; each added
/// goal receives `1 / n_current`, taken equally from the surviving goals.
/// Surviving masses are clamped at zero and the result renormalised. With no
/// survivors the result is uniform.
pub fn remap_goal_masses(dist: &[f64], matching: &GoalMatching, n_current: usize) -> Vec<f64> {
    if n_current == 0 {
        return Vec::new();
    }
    if matching.matched.is_empty() {
        return uniform(n_current);
    }
    let survivors = matching.matched.len() as f64;
    let removed: f64 = matching.removed.iter().map(|&p| dist[p]).sum();
    let added_mass = matching.added.len() as f64 / n_current as f64;
    let mut out = vec![0.0; n_current];
    for &(p, c) in &matching.matched {
        out[c] = (dist[p] + removed / survivors - added_mass / survivors).max(0.0);
    }
    for &c in &matching.added {
        out[c] = 1.0 / n_current as f64;
    }
    normalise(&mut out);
    out
}

/// Source of motion-profile distributions.
#[derive(Debug, Clone)]
pub enum MotionModel {
    Experts(ExpertCollection),
    Physics(PhysicsBaseline),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PredictorConfig {
    pub map: MapParams,
    pub neighbours: NeighbourParams,
    pub pursuit: PursuitParams,
    pub bayes: BayesParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorEntry {
    pub goal: Goal,
    pub probability: f64,
    pub trajectory: Trajectory,
    /// Predicted cumulative-distance distribution behind the trajectory.
    pub distances: MixtureOutput,
    pub profile: MotionProfile,
    /// Expert used, if the motion model is the expert collection.
    pub expert: Option<FeatureSchema>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalPosterior {
    pub entries: Vec<PosteriorEntry>,
}

impl GoalPosterior {
    pub fn probabilities(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.probability).collect()
    }

    pub fn goals(&self) -> Vec<Goal> {
        self.entries.iter().map(|e| e.goal.clone()).collect()
    }

    /// Index of the highest-probability entry; ties go to the earlier goal.
    pub fn most_likely_index(&self) -> usize {
        let mut best = 0;
        for (i, e) in self.entries.iter().enumerate() {
            if e.probability > self.entries[best].probability {
                best = i;
            }
        }
        best
    }

    pub fn most_likely(&self) -> &PosteriorEntry {
        &self.entries[self.most_likely_index()]
    }

    pub fn probability_of(&self, kind: GoalKind) -> f64 {
        self.entries.iter().filter(|e| e.goal.kind == kind).map(|e| e.probability).sum()
    }
}

/// Per-agent recursion state.
#[derive(Debug, Clone, Default)]
pub struct PredictorState {
    pub posterior: Option<GoalPosterior>,
    pub last_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepTimings {
    /// Localisation, goal extraction, neighbour selection and encoding.
    pub features: Duration,
    pub motion_profile: Duration,
    /// Likelihoods, posterior updates and trajectory generation.
    pub inference: Duration,
}

impl StepTimings {
    pub fn total(&self) -> Duration {
        self.features + self.motion_profile + self.inference
    }
}

pub struct Predictor<'a> {
    pub graph: &'a LaneGraph,
    pub motion: &'a MotionModel,
    pub config: PredictorConfig,
}

fn behaviour_of(kind: GoalKind) -> Behaviour {
    if kind.is_change() {
        Behaviour::Change
    } else {
        Behaviour::Follow
    }
}

impl<'a> Predictor<'a> {
    pub fn new(graph: &'a LaneGraph, motion: &'a MotionModel, config: PredictorConfig) -> Self {
        Self { graph, motion, config }
    }

    fn path_length(&self, agent: &AgentState) -> f64 {
        let p = &self.config.pursuit;
        agent.speed * p.horizon + 0.5 * p.max_accel * p.horizon * p.horizon + 2.0 * p.lookahead
    }

    pub fn step(&self, state: &mut PredictorState, scene: &[AgentState], target: AgentId, time: f64) -> Result<GoalPosterior, PredictError> {
        self.step_timed(state, scene, target, time).map(|(p, _)| p)
    }

    /// One observation update for `target`, returning the new posterior with
    /// fresh trajectories.
    pub fn step_timed(
        &self,
        state: &mut PredictorState,
        scene: &[AgentState],
        target: AgentId,
        time: f64,
    ) -> Result<(GoalPosterior, StepTimings), PredictError> {
        let cfg = &self.config;
        let mut timings = StepTimings::default();

        let clock = Instant::now();
        let agent = scene
            .iter()
            .find(|a| a.id == target)
            .ok_or(FeatureError::MissingTarget(target))?;
        let location = self.graph.locate_agent(agent, &cfg.map)?;
        let goals = goals_at(self.graph, &location, &cfg.map);
        let hood = neighbours_at(scene, agent, location, self.graph, &cfg.map, &cfg.neighbours);
        let path_length = self.path_length(agent);
        let mut paths = Vec::with_capacity(goals.len());
        let mut sides = Vec::with_capacity(goals.len());
        for g in &goals {
            let path = target_path_from(self.graph, g, &location, agent.position, path_length)?;
            sides.push(self.manoeuvre_side(g, location.lane, agent, &path));
            paths.push(path);
        }
        let mut encoded: HashMap<(FeatureSchema, Option<Side>), Vec<f64>> = HashMap::new();
        if let MotionModel::Experts(_) = self.motion {
            for (g, side) in goals.iter().zip(&sides) {
                let behaviour = behaviour_of(g.kind);
                let n_side = side.map_or(0, |s| hood.side(s).len());
                let schema = select_schema(behaviour, hood.front.len(), n_side);
                encoded
                    .entry((schema, *side))
                    .or_insert_with(|| ContextBlocks::new(&hood, *side).encode(schema).map(|v| v.values).unwrap_or_default());
            }
        }
        timings.features += clock.elapsed();

        let clock = Instant::now();
        let mut predictions: Vec<(MixtureOutput, MotionProfile, Option<FeatureSchema>)> = Vec::with_capacity(goals.len());
        let mut memo: HashMap<(FeatureSchema, Option<Side>), (MixtureOutput, MotionProfile)> = HashMap::new();
        for (g, side) in goals.iter().zip(&sides) {
            match self.motion {
                MotionModel::Physics(b) => predictions.push((b.distribution(agent), b.profile(agent), None)),
                MotionModel::Experts(experts) => {
                    let n_side = side.map_or(0, |s| hood.side(s).len());
                    let schema = select_schema(behaviour_of(g.kind), hood.front.len(), n_side);
                    let key = (schema, *side);
                    if let std::collections::hash_map::Entry::Vacant(e) = memo.entry(key) {
                        let model = experts.select_expert(schema.behaviour, schema.n_front, schema.n_side);
                        let out = model.forward_values(&encoded[&key])?;
                        let profile = to_motion_profile(&out, agent.speed);
                        e.insert((out, profile));
                    }
                    let (out, profile) = &memo[&key];
                    predictions.push((out.clone(), profile.clone(), Some(schema)));
                }
            }
        }
        timings.motion_profile += clock.elapsed();

        let clock = Instant::now();
        let n = goals.len();
        let (prior, likelihoods) = match &state.posterior {
            None => (uniform(n), vec![1.0; n]),
            Some(prev) => {
                let matching = match_goals_on(self.graph, &prev.goals(), &goals)?;
                let prior = remap_goal_masses(&prev.probabilities(), &matching, n);
                let elapsed = state.last_time.map_or(cfg.pursuit.dt, |t| time - t);
                let mut lik = vec![f64::NAN; n];
                for &(p, c) in &matching.matched {
                    let traj = &prev.entries[p].trajectory;
                    let k = ((elapsed / cfg.pursuit.dt).round() as usize).clamp(1, traj.points.len()) - 1;
                    lik[c] = likelihood(agent, &traj.points[k], &cfg.bayes);
                }
                // goals without a previous prediction get the mean evidence
                let known: Vec<f64> = lik.iter().copied().filter(|l| !l.is_nan()).collect();
                let fill = if known.is_empty() { 1.0 } else { known.iter().sum::<f64>() / known.len() as f64 };
                lik.iter_mut().filter(|l| l.is_nan()).for_each(|l| *l = fill);
                (prior, lik)
            }
        };
        let updated = posterior_update(&prior, &likelihoods);

        let geom = VehicleGeometry::from_length(agent.length);
        let trajectories: Vec<Trajectory> = paths
            .iter()
            .zip(&predictions)
            .map(|(path, (_, profile, _))| generate_trajectory(agent, path, profile, &geom, &cfg.pursuit))
            .collect();
        let alphas: Vec<f64> = trajectories.iter().map(|t| t.max_lateral_acceleration).collect();
        let penalised = lateral_acc_penalty(&updated, &alphas, &cfg.bayes);
        let final_dist = forget(&penalised, cfg.bayes.gamma);

        let entries = goals
            .into_iter()
            .zip(final_dist)
            .zip(trajectories.into_iter().zip(predictions))
            .map(|((goal, probability), (trajectory, (distances, profile, expert)))| PosteriorEntry {
                goal,
                probability,
                trajectory,
                distances,
                profile,
                expert,
            })
            .collect();
        let posterior = GoalPosterior { entries };
        state.posterior = Some(posterior.clone());
        state.last_time = Some(time);
        timings.inference += clock.elapsed();
        Ok((posterior, timings))
    }

    /// Side of the manoeuvre for change-type goals.
    fn manoeuvre_side(&self, goal: &Goal, lane: usize, agent: &AgentState, path: &crate::lane_map::Path) -> Option<Side> {
        match goal.kind {
            GoalKind::FollowLane | GoalKind::FollowLaneWithOffset => None,
            GoalKind::ChangeLeft => Some(Side::Left),
            GoalKind::ChangeRight => Some(Side::Right),
            GoalKind::EnterHighway | GoalKind::ExitHighway => {
                let l = self.graph.lane(lane);
                let target = self.graph.index_of(&goal.target_lane);
                if target.is_some() && target == l.left {
                    Some(Side::Left)
                } else if target.is_some() && target == l.right {
                    Some(Side::Right)
                } else {
                    let ahead = path.polyline().point_at(path.length().min(3.0 * self.config.pursuit.lookahead));
                    let lateral = crate::geometry::Vec2::from_angle(agent.heading).cross(ahead - agent.position);
                    Some(if lateral >= 0.0 { Side::Left } else { Side::Right })
                }
            }
        }
    }
}
