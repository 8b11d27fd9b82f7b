//! Lane-graph map model: loading, agent localisation, goal hypotheses and
//! target paths.
//!
//! The on-disk format is a small JSON document:
//!
//! ```json
//! {"lanes": [{"id": "a", "type": "driving", "width": 3.7,
//!             "centerline": [[0, 0], [100, 0]],
//!             "successors": [], "left": null, "right": null}]}
//! ```
//!
//! Lanes are immutable once loaded; every query is a pure function.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentState;
use crate::geometry::{Polyline, PolylineError, Vec2};

#[derive(Debug, Error)]
pub enum MapError {
    #[error("lane graph parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("lane graph io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("lane {lane}: degenerate centerline: {source}")]
    Degenerate {
        lane: String,
        #[source]
        source: PolylineError,
    },
    #[error("lane {lane}: width must be positive and finite, got {width}")]
    InvalidWidth { lane: String, width: f64 },
    #[error("lane {lane}: dangling reference to {reference}")]
    DanglingReference { lane: String, reference: String },
    #[error("lane {lane}: neighbour {neighbour} does not link back")]
    AsymmetricNeighbour { lane: String, neighbour: String },
    #[error("duplicate lane id {0}")]
    DuplicateLane(String),
    #[error("no lane within {max_distance} m of ({x:.2}, {y:.2})")]
    OffRoad { x: f64, y: f64, max_distance: f64 },
    #[error("unknown lane {0}")]
    UnknownLane(String),
    #[error("duplicate goal ({kind}, {lane})")]
    DuplicateGoal { kind: GoalKind, lane: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneType {
    Driving,
    EntryRamp,
    ExitRamp,
}

#[derive(Debug, Clone)]
pub struct Lane {
    pub id: String,
    pub lane_type: LaneType,
    pub width: f64,
    pub centerline: Polyline,
    pub successors: Vec<usize>,
    pub predecessors: Vec<usize>,
    pub left: Option<usize>,
    pub right: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLane {
    id: String,
    #[serde(rename = "type")]
    lane_type: LaneType,
    width: f64,
    centerline: Vec<[f64; 2]>,
    successors: Vec<String>,
    left: Option<String>,
    right: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGraph {
    lanes: Vec<RawLane>,
}

/// Tunables for localisation and goal extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapParams {
    /// Agents further than this from every centerline are off-road.
    pub max_offroad_distance: f64,
    /// Minimum |lateral offset| that adds a follow-with-offset goal.
    pub offset_threshold: f64,
    /// Exit branches within this arclength ahead yield an exit goal.
    pub lookahead_goal_horizon: f64,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            max_offroad_distance: 3.0,
            offset_threshold: 0.3,
            lookahead_goal_horizon: 200.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LaneGraph {
    lanes: Vec<Lane>,
    index: HashMap<String, usize>,
}

/// Where an agent sits on the map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub lane: usize,
    pub arclength: f64,
    /// Signed lateral offset from the centerline, positive to the left.
    pub offset: f64,
    pub distance: f64,
    /// Absolute heading difference to the local centerline tangent.
    pub heading_error: f64,
}

const TIE_TOLERANCE: f64 = 1e-9;

impl LaneGraph {
    pub fn from_reader(reader: impl Read) -> Result<Self, MapError> {
        let raw: RawGraph = serde_json::from_reader(reader)?;
        Self::from_raw(raw)
    }

    pub fn from_json(text: &str) -> Result<Self, MapError> {
        let raw: RawGraph = serde_json::from_str(text)?;
        Self::from_raw(raw)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, MapError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    fn from_raw(raw: RawGraph) -> Result<Self, MapError> {
        let mut index = HashMap::new();
        for (i, lane) in raw.lanes.iter().enumerate() {
            if index.insert(lane.id.clone(), i).is_some() {
                return Err(MapError::DuplicateLane(lane.id.clone()));
            }
        }
        let resolve = |lane: &str, reference: &str| {
            index
                .get(reference)
                .copied()
                .ok_or_else(|| MapError::DanglingReference {
                    lane: lane.to_string(),
                    reference: reference.to_string(),
                })
        };
        let mut lanes = Vec::with_capacity(raw.lanes.len());
        for r in &raw.lanes {
            if !(r.width.is_finite() && r.width > 0.0) {
                return Err(MapError::InvalidWidth {
                    lane: r.id.clone(),
                    width: r.width,
                });
            }
            let centerline = Polyline::new(r.centerline.iter().map(|&p| p.into()).collect())
                .map_err(|source| MapError::Degenerate {
                    lane: r.id.clone(),
                    source,
                })?;
            let successors = r
                .successors
                .iter()
                .map(|s| resolve(&r.id, s))
                .collect::<Result<Vec<_>, _>>()?;
            let left = r.left.as_deref().map(|s| resolve(&r.id, s)).transpose()?;
            let right = r.right.as_deref().map(|s| resolve(&r.id, s)).transpose()?;
            lanes.push(Lane {
                id: r.id.clone(),
                lane_type: r.lane_type,
                width: r.width,
                centerline,
                successors,
                predecessors: Vec::new(),
                left,
                right,
            });
        }
        for i in 0..lanes.len() {
            if let Some(l) = lanes[i].left {
                if lanes[l].right != Some(i) {
                    return Err(MapError::AsymmetricNeighbour {
                        lane: lanes[i].id.clone(),
                        neighbour: lanes[l].id.clone(),
                    });
                }
            }
            if let Some(r) = lanes[i].right {
                if lanes[r].left != Some(i) {
                    return Err(MapError::AsymmetricNeighbour {
                        lane: lanes[i].id.clone(),
                        neighbour: lanes[r].id.clone(),
                    });
                }
            }
            for k in 0..lanes[i].successors.len() {
                let s = lanes[i].successors[k];
                lanes[s].predecessors.push(i);
            }
        }
        Ok(Self { lanes, index })
    }

    pub fn to_json(&self) -> String {
        let raw = RawGraph {
            lanes: self
                .lanes
                .iter()
                .map(|l| RawLane {
                    id: l.id.clone(),
                    lane_type: l.lane_type,
                    width: l.width,
                    centerline: l.centerline.points().iter().map(|&p| p.into()).collect(),
                    successors: l.successors.iter().map(|&s| self.lanes[s].id.clone()).collect(),
                    left: l.left.map(|i| self.lanes[i].id.clone()),
                    right: l.right.map(|i| self.lanes[i].id.clone()),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("lane graph serialises")
    }

    pub fn lanes(&self) -> &[Lane] {
        &self.lanes
    }

    pub fn lane(&self, index: usize) -> &Lane {
        &self.lanes[index]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn lane_by_id(&self, id: &str) -> Result<&Lane, MapError> {
        self.index_of(id)
            .map(|i| &self.lanes[i])
            .ok_or_else(|| MapError::UnknownLane(id.to_string()))
    }

    /// A driving lane with no driving lane to its right.
    pub fn is_slow_lane(&self, lane: usize) -> bool {
        let l = &self.lanes[lane];
        l.lane_type == LaneType::Driving
            && l.right.is_none_or(|r| self.lanes[r].lane_type != LaneType::Driving)
    }

    /// Nearest lane by distance to its centerline. Near-ties prefer the
    /// smallest heading difference, then a projection that is not clamped to
    /// the lane end (so an agent on a lane joint belongs to the successor),
    /// then graph order.
    pub fn locate(&self, position: Vec2, heading: f64, max_distance: f64) -> Result<Location, MapError> {
        let mut candidates: Vec<(Location, bool)> = Vec::new();
        for (i, lane) in self.lanes.iter().enumerate() {
            let p = lane.centerline.project(position);
            if p.distance > max_distance {
                continue;
            }
            let heading_error = crate::geometry::wrap_angle(heading - p.tangent.angle()).abs();
            let at_end = p.arclength >= lane.centerline.length() - TIE_TOLERANCE;
            candidates.push((
                Location {
                    lane: i,
                    arclength: p.arclength,
                    offset: p.offset,
                    distance: p.distance,
                    heading_error,
                },
                at_end,
            ));
        }
        let min_distance = candidates
            .iter()
            .map(|(c, _)| c.distance)
            .fold(f64::INFINITY, f64::min);
        candidates
            .into_iter()
            .filter(|(c, _)| c.distance <= min_distance + TIE_TOLERANCE)
            .min_by(|(a, a_end), (b, b_end)| {
                a.heading_error
                    .total_cmp(&b.heading_error)
                    .then(a_end.cmp(b_end))
                    .then(a.lane.cmp(&b.lane))
            })
            .map(|(c, _)| c)
            .ok_or(MapError::OffRoad {
                x: position.x,
                y: position.y,
                max_distance,
            })
    }

    pub fn locate_agent(&self, state: &AgentState, params: &MapParams) -> Result<Location, MapError> {
        self.locate(state.position, state.heading, params.max_offroad_distance)
    }

    /// Lane indices on the shortest successor route from `from` to `to`
    /// (inclusive), if one exists.
    pub fn route(&self, from: usize, to: usize) -> Option<Vec<usize>> {
        let mut parent: HashMap<usize, usize> = HashMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = HashSet::from([from]);
        while let Some(l) = queue.pop_front() {
            if l == to {
                let mut route = vec![to];
                let mut cur = to;
                while let Some(&p) = parent.get(&cur) {
                    route.push(p);
                    cur = p;
                }
                route.reverse();
                return Some(route);
            }
            for &s in &self.lanes[l].successors {
                if seen.insert(s) {
                    parent.insert(s, l);
                    queue.push_back(s);
                }
            }
        }
        None
    }

    /// Successor to continue along: a successor of the same lane type if
    /// there is one, else the first listed.
    pub fn continuation(&self, lane: usize) -> Option<usize> {
        let l = &self.lanes[lane];
        l.successors
            .iter()
            .copied()
            .find(|&s| self.lanes[s].lane_type == l.lane_type)
            .or_else(|| l.successors.first().copied())
    }

    /// Lanes reachable from `lane` by following successor or predecessor
    /// links up to `depth` hops, including `lane` itself.
    pub fn corridor(&self, lane: usize, depth: usize) -> Vec<usize> {
        let mut out = vec![lane];
        let mut frontier = vec![lane];
        for _ in 0..depth {
            let mut next = Vec::new();
            for &l in &frontier {
                for &n in self.lanes[l].successors.iter().chain(&self.lanes[l].predecessors) {
                    if !out.contains(&n) {
                        out.push(n);
                        next.push(n);
                    }
                }
            }
            frontier = next;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalKind {
    FollowLane,
    FollowLaneWithOffset,
    ChangeLeft,
    ChangeRight,
    EnterHighway,
    ExitHighway,
}

impl GoalKind {
    pub fn is_change(self) -> bool {
        !matches!(self, GoalKind::FollowLane | GoalKind::FollowLaneWithOffset)
    }

    pub fn name(self) -> &'static str {
        match self {
            GoalKind::FollowLane => "follow_lane",
            GoalKind::FollowLaneWithOffset => "follow_lane_with_offset",
            GoalKind::ChangeLeft => "change_left",
            GoalKind::ChangeRight => "change_right",
            GoalKind::EnterHighway => "enter_highway",
            GoalKind::ExitHighway => "exit_highway",
        }
    }
}

impl fmt::Display for GoalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A hypothesised intention. `offset` is zero except for
/// [`GoalKind::FollowLaneWithOffset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub kind: GoalKind,
    pub target_lane: String,
    pub offset: f64,
}

impl Goal {
    pub fn new(kind: GoalKind, target_lane: impl Into<String>) -> Self {
        Self {
            kind,
            target_lane: target_lane.into(),
            offset: 0.0,
        }
    }

    pub fn key(&self) -> (GoalKind, &str) {
        (self.kind, &self.target_lane)
    }
}

/// Hypothesised goals for an agent, in the fixed order follow, offset-follow,
/// left, right, enter, exit.
pub fn extract_goals(graph: &LaneGraph, state: &AgentState, params: &MapParams) -> Result<Vec<Goal>, MapError> {
    let loc = graph.locate_agent(state, params)?;
    Ok(goals_at(graph, &loc, params))
}

pub fn goals_at(graph: &LaneGraph, loc: &Location, params: &MapParams) -> Vec<Goal> {
    let lane = graph.lane(loc.lane);
    let mut goals = vec![Goal::new(GoalKind::FollowLane, &lane.id)];
    if loc.offset.abs() > params.offset_threshold {
        goals.push(Goal {
            kind: GoalKind::FollowLaneWithOffset,
            target_lane: lane.id.clone(),
            offset: loc.offset,
        });
    }
    match lane.lane_type {
        LaneType::Driving => {
            let driving = |n: Option<usize>| n.filter(|&i| graph.lane(i).lane_type == LaneType::Driving);
            if let Some(l) = driving(lane.left) {
                goals.push(Goal::new(GoalKind::ChangeLeft, &graph.lane(l).id));
            }
            if let Some(r) = driving(lane.right) {
                goals.push(Goal::new(GoalKind::ChangeRight, &graph.lane(r).id));
            }
            if graph.is_slow_lane(loc.lane) {
                if let Some(exit) = nearest_exit(graph, loc, params.lookahead_goal_horizon) {
                    goals.push(Goal::new(GoalKind::ExitHighway, &graph.lane(exit).id));
                }
            }
        }
        LaneType::EntryRamp => {
            if let Some(target) = merge_target(graph, loc, params.lookahead_goal_horizon) {
                goals.push(Goal::new(GoalKind::EnterHighway, &graph.lane(target).id));
            }
        }
        LaneType::ExitRamp => {}
    }
    goals
}

fn is_driving(graph: &LaneGraph, lane: usize) -> bool {
    graph.lane(lane).lane_type == LaneType::Driving
}

/// Driving lane an entry ramp merges into: a driving neighbour (left first),
/// else the nearest driving lane reachable through successors.
fn merge_target(graph: &LaneGraph, loc: &Location, horizon: f64) -> Option<usize> {
    let lane = graph.lane(loc.lane);
    if let Some(n) = [lane.left, lane.right].into_iter().flatten().find(|&n| is_driving(graph, n)) {
        return Some(n);
    }
    let mut queue = VecDeque::from([(loc.lane, lane.centerline.length() - loc.arclength)]);
    let mut seen = HashSet::from([loc.lane]);
    while let Some((l, to_end)) = queue.pop_front() {
        for &s in &graph.lane(l).successors {
            if is_driving(graph, s) && to_end <= horizon {
                return Some(s);
            }
            if seen.insert(s) && to_end < horizon {
                queue.push_back((s, to_end + graph.lane(s).centerline.length()));
            }
        }
    }
    None
}

/// Closest exit ramp branching off the driving corridor ahead of `loc`, or
/// running alongside as the right neighbour.
fn nearest_exit(graph: &LaneGraph, loc: &Location, horizon: f64) -> Option<usize> {
    let lane = graph.lane(loc.lane);
    if let Some(r) = lane.right.filter(|&r| graph.lane(r).lane_type == LaneType::ExitRamp) {
        return Some(r);
    }
    let mut best: Option<(f64, usize)> = None;
    let mut queue = VecDeque::from([(loc.lane, lane.centerline.length() - loc.arclength)]);
    let mut seen = HashSet::from([loc.lane]);
    while let Some((l, to_end)) = queue.pop_front() {
        if to_end > horizon && l != loc.lane {
            continue;
        }
        for &s in &graph.lane(l).successors {
            match graph.lane(s).lane_type {
                LaneType::ExitRamp if to_end <= horizon => {
                    if best.is_none_or(|(d, _)| to_end < d) {
                        best = Some((to_end, s));
                    }
                }
                LaneType::Driving if seen.insert(s) && to_end < horizon => {
                    queue.push_back((s, to_end + graph.lane(s).centerline.length()));
                }
                _ => {}
            }
        }
    }
    best.map(|(_, s)| s)
}

/// Target centre-line path for trajectory generation.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    line: Polyline,
}

impl Path {
    pub fn new(points: Vec<Vec2>) -> Result<Self, PolylineError> {
        Polyline::new(points).map(|line| Self { line })
    }

    pub fn points(&self) -> &[Vec2] {
        self.line.points()
    }

    pub fn cumulative_arclength(&self) -> &[f64] {
        self.line.arclengths()
    }

    pub fn length(&self) -> f64 {
        self.line.length()
    }

    pub fn polyline(&self) -> &Polyline {
        &self.line
    }
}

/// Builds the path for `goal`, at least `horizon_distance` long. Lane
/// centre lines are chained through successors; if the topology runs out,
/// the final tangent is extended.
pub fn target_path(
    graph: &LaneGraph,
    goal: &Goal,
    state: &AgentState,
    horizon_distance: f64,
    params: &MapParams,
) -> Result<Path, MapError> {
    let loc = graph.locate_agent(state, params)?;
    target_path_from(graph, goal, &loc, state.position, horizon_distance)
}

pub fn target_path_from(
    graph: &LaneGraph,
    goal: &Goal,
    loc: &Location,
    position: Vec2,
    horizon_distance: f64,
) -> Result<Path, MapError> {
    let target = graph
        .index_of(&goal.target_lane)
        .ok_or_else(|| MapError::UnknownLane(goal.target_lane.clone()))?;
    let (route, start_s) = if target == loc.lane {
        (vec![loc.lane], loc.arclength)
    } else if let Some(route) = graph.route(loc.lane, target) {
        (route, loc.arclength)
    } else {
        (vec![target], graph.lane(target).centerline.project(position).arclength)
    };

    let mut points: Vec<Vec2> = Vec::new();
    let mut covered = 0.0;
    let push = |points: &mut Vec<Vec2>, covered: &mut f64, p: Vec2| {
        if let Some(&last) = points.last() {
            let step = p.distance(last);
            if step <= 1e-9 {
                return;
            }
            *covered += step;
        }
        points.push(p);
    };

    let mut lane = route[0];
    let mut from_s = start_s;
    let mut next_in_route = 1;
    let mut visited = HashSet::new();
    loop {
        let line = &graph.lane(lane).centerline;
        push(&mut points, &mut covered, line.point_at(from_s));
        for (p, &s) in line.points().iter().zip(line.arclengths()) {
            if s > from_s {
                push(&mut points, &mut covered, *p);
            }
            if covered >= horizon_distance {
                break;
            }
        }
        if covered >= horizon_distance || !visited.insert(lane) {
            break;
        }
        let next = if next_in_route < route.len() {
            next_in_route += 1;
            Some(route[next_in_route - 1])
        } else {
            graph.continuation(lane)
        };
        match next {
            Some(n) => {
                lane = n;
                from_s = 0.0;
            }
            None => break,
        }
    }
    if covered < horizon_distance || points.len() < 2 {
        let (last, tangent) = match points.len() {
            0 | 1 => {
                let line = &graph.lane(lane).centerline;
                (points.last().copied().unwrap_or(line.last()), line.tangent_at(line.length()))
            }
            n => (points[n - 1], (points[n - 1] - points[n - 2]).normalized()),
        };
        let extra = (horizon_distance - covered).max(1.0);
        push(&mut points, &mut covered, last + tangent * extra);
    }

    if goal.offset != 0.0 {
        points = offset_polyline(&points, goal.offset);
    }
    let mut cleaned: Vec<Vec2> = Vec::with_capacity(points.len());
    for p in points {
        if cleaned.last().is_none_or(|&q: &Vec2| q.distance(p) > 1e-9) {
            cleaned.push(p);
        }
    }
    Path::new(cleaned).map_err(|source| MapError::Degenerate {
        lane: goal.target_lane.clone(),
        source,
    })
}

/// Shifts every vertex along its (averaged) left normal.
fn offset_polyline(points: &[Vec2], offset: f64) -> Vec<Vec2> {
    let n = points.len();
    (0..n)
        .map(|i| {
            let before = if i > 0 { Some((points[i] - points[i - 1]).normalized()) } else { None };
            let after = if i + 1 < n { Some((points[i + 1] - points[i]).normalized()) } else { None };
            let t = match (before, after) {
                (Some(a), Some(b)) => {
                    let s = a + b;
                    if s.norm() < 1e-12 { b } else { s.normalized() }
                }
                (Some(a), None) => a,
                (None, Some(b)) => b,
                (None, None) => Vec2::new(1.0, 0.0),
            };
            points[i] + t.perp() * offset
        })
        .collect()
}

/// Correspondence between goal sets of consecutive steps.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GoalMatching {
    /// (previous index, current index)
    pub matched: Vec<(usize, usize)>,
    pub added: Vec<usize>,
    pub removed: Vec<usize>,
}

impl GoalMatching {
    pub fn is_identity(&self, len: usize) -> bool {
        self.added.is_empty()
            && self.removed.is_empty()
            && self.matched.len() == len
            && self.matched.iter().all(|&(p, c)| p == c)
    }

    pub fn previous_of(&self, current: usize) -> Option<usize> {
        self.matched.iter().find(|&&(_, c)| c == current).map(|&(p, _)| p)
    }
}

fn check_unique(goals: &[Goal]) -> Result<(), MapError> {
    let mut seen = HashSet::new();
    for g in goals {
        if !seen.insert(g.key()) {
            return Err(MapError::DuplicateGoal {
                kind: g.kind,
                lane: g.target_lane.clone(),
            });
        }
    }
    Ok(())
}

/// Matches goals by `(kind, target_lane)`.
pub fn match_goals(previous: &[Goal], current: &[Goal]) -> Result<GoalMatching, MapError> {
    check_unique(previous)?;
    check_unique(current)?;
    let mut out = GoalMatching::default();
    let mut used = vec![false; current.len()];
    for (p, g) in previous.iter().enumerate() {
        match current.iter().position(|c| c.key() == g.key()) {
            Some(c) => {
                used[c] = true;
                out.matched.push((p, c));
            }
            None => out.removed.push(p),
        }
    }
    out.added = (0..current.len()).filter(|&c| !used[c]).collect();
    Ok(out)
}

/// [`match_goals`], then a second pass that pairs leftover goals of the same
/// kind whose target lanes are linked by successors. This keeps a follow
/// goal alive when the agent rolls from one lane segment onto the next.
pub fn match_goals_on(graph: &LaneGraph, previous: &[Goal], current: &[Goal]) -> Result<GoalMatching, MapError> {
    let mut m = match_goals(previous, current)?;
    let mut still_removed = Vec::new();
    for &p in &m.removed {
        let prev = &previous[p];
        let found = m.added.iter().position(|&c| {
            let cur = &current[c];
            cur.kind == prev.kind
                && match (graph.index_of(&prev.target_lane), graph.index_of(&cur.target_lane)) {
                    (Some(a), Some(b)) => graph.lane(a).successors.contains(&b),
                    _ => false,
                }
        });
        match found {
            Some(i) => {
                let c = m.added.remove(i);
                m.matched.push((p, c));
            }
            None => still_removed.push(p),
        }
    }
    m.removed = still_removed;
    m.matched.sort_by_key(|&(_, c)| c);
    Ok(m)
}
