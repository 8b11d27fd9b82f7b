//! Neighbourhood selection and fixed-size feature encoding for the expert
//! networks.
//!
//! Feature layout (schema version 1), all values in SI units:
//!
//! | block  | fields                                                           |
//! |--------|------------------------------------------------------------------|
//! | target | speed, acceleration, is_car, is_truck, is_motorbike               |
//! | front  | speed, acceleration, is_car, is_truck, is_motorbike, headway      |
//! | side   | speed, acceleration, is_car, is_truck, is_motorbike, ahead, centre_distance, polygon_distance |
//!
//! A vector is `target ++ front[..n_front] ++ side[..n_side]`, nearest first.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentClass, AgentId, AgentState};
use crate::geometry::{convex_polygon_distance, rectangle, Vec2};
use crate::lane_map::{LaneGraph, Location, MapError, MapParams};

pub const SCHEMA_VERSION: u32 = 1;
pub const MAX_FRONT: usize = 3;
pub const MAX_SIDE: usize = 3;
pub const TARGET_BLOCK: usize = 2 + AgentClass::COUNT;
pub const FRONT_BLOCK: usize = 3 + AgentClass::COUNT;
pub const SIDE_BLOCK: usize = 5 + AgentClass::COUNT;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("target agent {0} not in scene")]
    MissingTarget(AgentId),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("schema {schema} needs {needed} {role} agents, neighbourhood has {available}")]
    NotEnoughAgents {
        schema: FeatureSchema,
        role: &'static str,
        needed: usize,
        available: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behaviour {
    Follow,
    Change,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Identifies one expert's input layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub behaviour: Behaviour,
    pub n_front: usize,
    pub n_side: usize,
}

impl FeatureSchema {
    pub fn follow(n_front: usize) -> Self {
        Self {
            behaviour: Behaviour::Follow,
            n_front,
            n_side: 0,
        }
    }

    pub fn change(n_front: usize, n_side: usize) -> Self {
        Self {
            behaviour: Behaviour::Change,
            n_front,
            n_side,
        }
    }

    /// The 4 follow-lane and 16 change-lane schemas.
    pub fn all() -> Vec<FeatureSchema> {
        let mut v: Vec<_> = (0..=MAX_FRONT).map(Self::follow).collect();
        for f in 0..=MAX_FRONT {
            for s in 0..=MAX_SIDE {
                v.push(Self::change(f, s));
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        TARGET_BLOCK + self.n_front * FRONT_BLOCK + self.n_side * SIDE_BLOCK
    }

    pub fn id(&self) -> String {
        self.to_string()
    }

    pub fn parse(id: &str) -> Option<Self> {
        let mut parts = id.split('-');
        let kind = parts.next()?;
        let front = parts.next()?.strip_prefix('f')?.parse().ok()?;
        let schema = match kind {
            "follow" => Self::follow(front),
            "change" => Self::change(front, parts.next()?.strip_prefix('s')?.parse().ok()?),
            _ => return None,
        };
        (parts.next().is_none() && schema.n_front <= MAX_FRONT && schema.n_side <= MAX_SIDE).then_some(schema)
    }
}

impl fmt::Display for FeatureSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.behaviour {
            Behaviour::Follow => write!(f, "follow-f{}", self.n_front),
            Behaviour::Change => write!(f, "change-f{}-s{}", self.n_front, self.n_side),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema: FeatureSchema,
    pub values: Vec<f64>,
}

/// A neighbour with its signed longitudinal gap (positive ahead) measured
/// along the target lane direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighbour {
    pub agent: AgentState,
    pub gap: f64,
    pub centre_distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbourhood {
    pub target: AgentState,
    pub location: Location,
    pub front: Vec<Neighbour>,
    pub left_side: Vec<Neighbour>,
    pub right_side: Vec<Neighbour>,
}

impl Neighbourhood {
    pub fn side(&self, side: Side) -> &[Neighbour] {
        match side {
            Side::Left => &self.left_side,
            Side::Right => &self.right_side,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NeighbourParams {
    pub radius: f64,
    pub max_front: usize,
    pub max_side: usize,
}

impl Default for NeighbourParams {
    fn default() -> Self {
        Self {
            radius: 60.0,
            max_front: MAX_FRONT,
            max_side: MAX_SIDE,
        }
    }
}

/// Lanes treated as "the same lane" when looking for front or side agents:
/// the lane plus successor/predecessor segments two hops away.
const CORRIDOR_DEPTH: usize = 2;

pub fn select_neighbours(
    scene: &[AgentState],
    target: AgentId,
    graph: &LaneGraph,
    map: &MapParams,
    params: &NeighbourParams,
) -> Result<Neighbourhood, FeatureError> {
    let target_state = scene
        .iter()
        .find(|a| a.id == target)
        .ok_or(FeatureError::MissingTarget(target))?;
    let location = graph.locate_agent(target_state, map)?;
    Ok(neighbours_at(scene, target_state, location, graph, map, params))
}

pub fn neighbours_at(
    scene: &[AgentState],
    target: &AgentState,
    location: Location,
    graph: &LaneGraph,
    map: &MapParams,
    params: &NeighbourParams,
) -> Neighbourhood {
    let lane = graph.lane(location.lane);
    let tangent = lane.centerline.tangent_at(location.arclength);
    let own = graph.corridor(location.lane, CORRIDOR_DEPTH);
    let left = lane.left.map(|l| graph.corridor(l, CORRIDOR_DEPTH)).unwrap_or_default();
    let right = lane.right.map(|r| graph.corridor(r, CORRIDOR_DEPTH)).unwrap_or_default();

    let mut front = Vec::new();
    let mut left_side = Vec::new();
    let mut right_side = Vec::new();
    for other in scene {
        if other.id == target.id {
            continue;
        }
        let centre_distance = other.position.distance(target.position);
        if centre_distance > params.radius {
            continue;
        }
        let Ok(loc) = graph.locate_agent(other, map) else {
            continue;
        };
        let n = Neighbour {
            agent: other.clone(),
            gap: (other.position - target.position).dot(tangent),
            centre_distance,
        };
        if own.contains(&loc.lane) {
            if n.gap > 0.0 {
                front.push(n);
            }
        } else if left.contains(&loc.lane) {
            left_side.push(n);
        } else if right.contains(&loc.lane) {
            right_side.push(n);
        }
    }
    front.sort_by(|a, b| a.gap.total_cmp(&b.gap).then(a.agent.id.cmp(&b.agent.id)));
    let by_abs_gap = |a: &Neighbour, b: &Neighbour| a.gap.abs().total_cmp(&b.gap.abs()).then(a.agent.id.cmp(&b.agent.id));
    left_side.sort_by(by_abs_gap);
    right_side.sort_by(by_abs_gap);
    front.truncate(params.max_front);
    left_side.truncate(params.max_side);
    right_side.truncate(params.max_side);
    Neighbourhood {
        target: target.clone(),
        location,
        front,
        left_side,
        right_side,
    }
}

/// Bumper-to-bumper gap along the lane, floored at zero.
pub fn headway(target: &AgentState, front: &Neighbour) -> f64 {
    (front.gap - 0.5 * (target.length + front.agent.length)).max(0.0)
}

pub fn polygon_distance(a: &AgentState, b: &AgentState) -> f64 {
    let pa = rectangle(a.position, a.heading, a.length, a.width);
    let pb = rectangle(b.position, b.heading, b.length, b.width);
    convex_polygon_distance(&pa, &pb)
}

fn agent_block(a: &AgentState) -> [f64; TARGET_BLOCK] {
    let c = a.class.one_hot();
    [a.speed, a.acceleration, c[0], c[1], c[2]]
}

/// Per-agent feature blocks for a neighbourhood; the full-context encoding
/// from which every schema is a truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextBlocks {
    pub target: [f64; TARGET_BLOCK],
    pub front: Vec<[f64; FRONT_BLOCK]>,
    pub side: Vec<[f64; SIDE_BLOCK]>,
}

impl ContextBlocks {
    pub fn new(n: &Neighbourhood, side: Option<Side>) -> Self {
        let front = n
            .front
            .iter()
            .map(|f| {
                let b = agent_block(&f.agent);
                [b[0], b[1], b[2], b[3], b[4], headway(&n.target, f)]
            })
            .collect();
        let side = side
            .map(|s| {
                n.side(s)
                    .iter()
                    .map(|o| {
                        let b = agent_block(&o.agent);
                        // zero gap counts as behind
                        let ahead = if o.gap > 0.0 { 1.0 } else { 0.0 };
                        [b[0], b[1], b[2], b[3], b[4], ahead, o.centre_distance, polygon_distance(&n.target, &o.agent)]
                    })
                    .collect()
            })
            .unwrap_or_default();
        Self {
            target: agent_block(&n.target),
            front,
            side,
        }
    }

    pub fn supports(&self, schema: FeatureSchema) -> bool {
        self.front.len() >= schema.n_front && self.side.len() >= schema.n_side
    }

    pub fn encode(&self, schema: FeatureSchema) -> Result<FeatureVector, FeatureError> {
        if self.front.len() < schema.n_front {
            return Err(FeatureError::NotEnoughAgents {
                schema,
                role: "front",
                needed: schema.n_front,
                available: self.front.len(),
            });
        }
        if self.side.len() < schema.n_side {
            return Err(FeatureError::NotEnoughAgents {
                schema,
                role: "side",
                needed: schema.n_side,
                available: self.side.len(),
            });
        }
        let mut values = Vec::with_capacity(schema.len());
        values.extend_from_slice(&self.target);
        for f in &self.front[..schema.n_front] {
            values.extend_from_slice(f);
        }
        for s in &self.side[..schema.n_side] {
            values.extend_from_slice(s);
        }
        Ok(FeatureVector { schema, values })
    }
}

pub fn follow_lane_features(n: &Neighbourhood, n_front: usize) -> Result<FeatureVector, FeatureError> {
    ContextBlocks::new(n, None).encode(FeatureSchema::follow(n_front))
}

pub fn change_lane_features(n: &Neighbourhood, side: Side, n_front: usize, n_side: usize) -> Result<FeatureVector, FeatureError> {
    ContextBlocks::new(n, Some(side)).encode(FeatureSchema::change(n_front, n_side))
}

/// Longitudinal unit vector of the lane at a location.
pub fn lane_direction(graph: &LaneGraph, loc: &Location) -> Vec2 {
    graph.lane(loc.lane).centerline.tangent_at(loc.arclength)
}
