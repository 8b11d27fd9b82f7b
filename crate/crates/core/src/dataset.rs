//! Training examples for the expert networks and the physics baselines,
//! built from recorded tracks.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eval::{label_behaviour, BehaviourLabel, Sample};
use crate::features::{lane_direction, neighbours_at, Behaviour, ContextBlocks, FeatureSchema, NeighbourParams, Side};
use crate::lane_map::{LaneGraph, MapParams};
use crate::mdn::{train, Dataset, ExpertCollection, MdnModel, ModelError, PhysicsBaseline, TrainParams, HORIZON_STEPS};
use crate::tracks::TrackTable;

/// One observation with its full context and ground-truth distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub target: u64,
    pub behaviour: Behaviour,
    pub side: Option<Side>,
    pub blocks: ContextBlocks,
    pub speed: f64,
    pub acceleration: f64,
    /// Path length travelled after 1..=5 s.
    pub distances: Vec<f64>,
}

impl Example {
    pub fn n_front(&self) -> usize {
        self.blocks.front.len()
    }

    pub fn n_side(&self) -> usize {
        self.blocks.side.len()
    }
}

/// Builds an example at the current frame of each sample. Samples whose
/// target cannot be located on the map are skipped.
pub fn build_examples(
    samples: &[Sample],
    table: &TrackTable,
    graph: &LaneGraph,
    map: &MapParams,
    neighbours: &NeighbourParams,
) -> Vec<Example> {
    samples
        .par_iter()
        .filter_map(|sample| {
            let current = sample.current();
            let target = current.state();
            let location = graph.locate_agent(&target, map).ok()?;
            let label = match sample.label {
                Some(l) => l,
                None => label_behaviour(sample, graph, map).ok()?,
            };
            let scene = table.scene_at(current.frame);
            let hood = neighbours_at(&scene, &target, location, graph, map, neighbours);
            let (behaviour, side) = match label {
                BehaviourLabel::FollowLane => (Behaviour::Follow, None),
                BehaviourLabel::ChangeLane => {
                    let end = sample.future.last()?.position();
                    let lateral = lane_direction(graph, &location).cross(end - target.position);
                    (Behaviour::Change, Some(if lateral >= 0.0 { Side::Left } else { Side::Right }))
                }
            };
            Some(Example {
                target: sample.target,
                behaviour,
                side,
                blocks: ContextBlocks::new(&hood, side),
                speed: current.speed,
                acceleration: current.acceleration,
                distances: sample.travelled_distances(),
            })
        })
        .collect()
}

/// Training set of one expert: every example of the same behaviour with at
/// least as many context agents as the schema, truncated to it.
pub fn expert_dataset(examples: &[Example], schema: FeatureSchema) -> Dataset {
    let mut data = Dataset::default();
    for e in examples {
        if e.behaviour == schema.behaviour && e.blocks.supports(schema) {
            let z = e.blocks.encode(schema).expect("supported schema");
            data.push(z.values, e.distances.clone());
        }
    }
    data
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertTrainSettings {
    pub hidden: Vec<usize>,
    pub components: usize,
    pub follow: TrainParams,
    pub change: TrainParams,
}

impl Default for ExpertTrainSettings {
    fn default() -> Self {
        Self {
            hidden: crate::mdn::DEFAULT_HIDDEN.to_vec(),
            components: 1,
            follow: TrainParams::follow_lane(),
            change: TrainParams::change_lane(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertReport {
    pub samples: usize,
    /// Mean training NLL before and after training; absent for experts
    /// without data, which fall back to constant velocity.
    pub initial_loss: Option<f64>,
    pub final_loss: Option<f64>,
}

/// Trains all 20 experts in parallel.
pub fn train_experts(
    examples: &[Example],
    settings: &ExpertTrainSettings,
) -> Result<(ExpertCollection, BTreeMap<String, ExpertReport>), ModelError> {
    let std: Vec<f64> = (1..=HORIZON_STEPS).map(|t| t as f64).collect();
    let trained: Result<Vec<(MdnModel, ExpertReport)>, ModelError> = FeatureSchema::all()
        .into_par_iter()
        .enumerate()
        .map(|(i, schema)| {
            let data = expert_dataset(examples, schema);
            if data.is_empty() {
                let model = MdnModel::constant_velocity(schema, &settings.hidden, &std);
                return Ok((
                    model,
                    ExpertReport {
                        samples: 0,
                        initial_loss: None,
                        final_loss: None,
                    },
                ));
            }
            let params = match schema.behaviour {
                Behaviour::Follow => settings.follow,
                Behaviour::Change => settings.change,
            };
            let seed = params.seed.wrapping_add(i as u64);
            let mut model = MdnModel::new(schema, &settings.hidden, settings.components, seed);
            model.fit_normalisation(&data);
            let (model, report) = train(&model, &data, &params)?;
            Ok((
                model,
                ExpertReport {
                    samples: report.samples,
                    initial_loss: Some(report.initial_loss),
                    final_loss: Some(report.final_loss()),
                },
            ))
        })
        .collect();
    let trained = trained?;
    let reports = trained.iter().map(|(m, r)| (m.schema.id(), r.clone())).collect();
    let collection = ExpertCollection::new(trained.into_iter().map(|(m, _)| m))?;
    Ok((collection, reports))
}

/// Fits a baseline's error model on the examples' ground truth.
pub fn fit_baseline(baseline: &mut PhysicsBaseline, examples: &[Example]) {
    let samples: Vec<(f64, f64, Vec<f64>)> = examples.iter().map(|e| (e.speed, e.acceleration, e.distances.clone())).collect();
    baseline.fit(&samples);
}
