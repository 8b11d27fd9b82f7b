//! Bundled lane graphs used by the synthetic scenarios and tests.

use serde_json::{json, Value};

use crate::lane_map::LaneGraph;

pub const LANE_WIDTH: f64 = 3.7;
/// x coordinate where the slow lane branches into the exit ramp.
pub const EXIT_BRANCH_X: f64 = 600.0;
pub const ENTRY_START_X: f64 = 50.0;
pub const ENTRY_END_X: f64 = 350.0;
pub const HIGHWAY_END_X: f64 = 2000.0;

fn straight(y: f64, x0: f64, x1: f64, step: f64) -> Vec<[f64; 2]> {
    let n = ((x1 - x0) / step).ceil() as usize;
    (0..=n).map(|i| [(x0 + i as f64 * step).min(x1), y]).collect()
}

fn lane(id: &str, kind: &str, centerline: Vec<[f64; 2]>, successors: &[&str], left: Option<&str>, right: Option<&str>) -> Value {
    json!({
        "id": id,
        "type": kind,
        "width": LANE_WIDTH,
        "centerline": centerline,
        "successors": successors,
        "left": left,
        "right": right,
    })
}

/// Three-lane straight highway running along +x with an entry ramp
/// (parallel acceleration lane right of the slow lane) and an exit ramp
/// branching off the slow lane at `EXIT_BRANCH_X`. Lane `lane_3*` is the
/// slow lane at y = 0; `lane_1*` is the fast lane at y = 2 * LANE_WIDTH.
pub fn highway_json() -> String {
    let w = LANE_WIDTH;
    let (bx, ex) = (EXIT_BRANCH_X, HIGHWAY_END_X);
    let exit_ramp = vec![
        [bx, 0.0],
        [bx + 50.0, -1.5],
        [bx + 100.0, -5.0],
        [bx + 150.0, -10.5],
        [bx + 250.0, -25.0],
        [bx + 400.0, -50.0],
    ];
    let lanes = vec![
        lane("lane_1a", "driving", straight(2.0 * w, 0.0, bx, 100.0), &["lane_1b"], None, Some("lane_2a")),
        lane("lane_2a", "driving", straight(w, 0.0, bx, 100.0), &["lane_2b"], Some("lane_1a"), Some("lane_3a")),
        lane("lane_3a", "driving", straight(0.0, 0.0, bx, 100.0), &["lane_3b", "exit"], Some("lane_2a"), Some("entry")),
        lane("entry", "entry_ramp", straight(-w, ENTRY_START_X, ENTRY_END_X, 100.0), &[], Some("lane_3a"), None),
        lane("lane_1b", "driving", straight(2.0 * w, bx, ex, 100.0), &[], None, Some("lane_2b")),
        lane("lane_2b", "driving", straight(w, bx, ex, 100.0), &[], Some("lane_1b"), Some("lane_3b")),
        lane("lane_3b", "driving", straight(0.0, bx, ex, 100.0), &[], Some("lane_2b"), None),
        lane("exit", "exit_ramp", exit_ramp, &[], None, None),
    ];
    serde_json::to_string_pretty(&json!({ "lanes": lanes })).unwrap()
}

pub fn highway() -> LaneGraph {
    LaneGraph::from_json(&highway_json()).expect("bundled highway map is valid")
}
