//! Mixture density networks for motion-profile prediction, the expert
//! collection that selects between them, and physics baselines.

mod baseline;
mod experts;
mod network;
mod profile;
mod train;

pub use baseline::{cv_baseline, da_baseline, BaselineKind, PhysicsBaseline, DEFAULT_DECAY_TIME};
pub use experts::{select_schema, ExpertCollection, MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use network::{
    gradients, nll_loss, Gradient, MdnModel, MixtureComponent, MixtureOutput, DEFAULT_HIDDEN, HORIZON_STEPS,
};
pub use profile::{to_motion_profile, MotionProfile};
pub use train::{train, Dataset, Optimizer, TrainParams, TrainReport};

use thiserror::Error;

use crate::features::FeatureSchema;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature schema {got} does not match model schema {expected}")]
    SchemaMismatch { expected: FeatureSchema, got: FeatureSchema },
    #[error("expected {expected} values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("empty dataset")]
    EmptyDataset,
    #[error("missing expert {0}")]
    MissingExpert(FeatureSchema),
    #[error("model file {path}: {reason}")]
    Format { path: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
