//! Goal-conditioned trajectory prediction for highway traffic.
//!
//! The pipeline per observation: locate the agent on the lane graph, extract
//! the goals reachable from its lane, predict a longitudinal motion profile
//! for each goal with a mixture-density expert, roll the profile out along
//! the goal's path with a pure-pursuit controller, and update a posterior
//! over goals from how well earlier predictions explain the new observation.

pub mod agent;
pub mod bayes;
pub mod dataset;
pub mod eval;
pub mod features;
pub mod fixtures;
pub mod geometry;
pub mod lane_map;
pub mod mdn;
pub mod pursuit;
pub mod synth;
pub mod tracks;

pub use agent::{AgentClass, AgentId, AgentState};
pub use bayes::{
    BayesParams, GoalPosterior, MotionModel, PosteriorEntry, PredictError, Predictor, PredictorConfig, PredictorState,
    StepTimings,
};
pub use features::{Behaviour, FeatureError, FeatureSchema, FeatureVector, NeighbourParams, Side};
pub use geometry::{Polyline, Vec2};
pub use lane_map::{Goal, GoalKind, LaneGraph, LaneType, MapError, MapParams, Path};
pub use mdn::{ExpertCollection, MdnModel, MixtureOutput, ModelError, MotionProfile, PhysicsBaseline};
pub use pursuit::{PursuitParams, Trajectory, TrajectoryPoint, VehicleGeometry};
