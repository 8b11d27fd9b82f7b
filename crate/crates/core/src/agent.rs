use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u64);

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentClass {
    Car,
    Truck,
    Motorbike,
}

impl AgentClass {
    pub const COUNT: usize = 3;

    pub fn one_hot(self) -> [f64; Self::COUNT] {
        let mut v = [0.0; Self::COUNT];
        v[self as usize] = 1.0;
        v
    }
}

/// Kinematic snapshot of a tracked road user. Position is the geometric
/// centre of the bounding box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub id: AgentId,
    pub position: Vec2,
    pub heading: f64,
    pub velocity: Vec2,
    pub speed: f64,
    pub acceleration: f64,
    pub class: AgentClass,
    pub length: f64,
    pub width: f64,
}

impl AgentState {
    /// Builds a state whose velocity points along `heading`.
    pub fn new(
        id: AgentId,
        position: Vec2,
        heading: f64,
        speed: f64,
        acceleration: f64,
        class: AgentClass,
        length: f64,
        width: f64,
    ) -> Self {
        Self {
            id,
            position,
            heading,
            velocity: Vec2::from_angle(heading) * speed,
            speed,
            acceleration,
            class,
            length,
            width,
        }
    }

    /// Same as [`AgentState::new`] but with an explicit velocity vector;
    /// `speed` is taken as its norm.
    pub fn with_velocity(mut self, velocity: Vec2) -> Self {
        self.velocity = velocity;
        self.speed = velocity.norm();
        self
    }

    /// Direction of travel. Falls back to the heading when nearly stopped.
    pub fn velocity_direction(&self) -> f64 {
        if self.speed > 1e-3 {
            self.velocity.angle()
        } else {
            self.heading
        }
    }

    pub fn is_valid(&self) -> bool {
        self.length > 0.0
            && self.width > 0.0
            && (self.velocity.norm() - self.speed).abs() <= 1e-6
            && self.position.x.is_finite()
            && self.position.y.is_finite()
            && self.heading.is_finite()
            && self.acceleration.is_finite()
    }
}
