//! Planar geometry helpers: 2-D vectors, polylines with arclength
//! parameterisation, and oriented-rectangle distances.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Self::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product; positive when `other` lies to
    /// the left of `self`.
    pub fn cross(self, other: Vec2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from(p: [f64; 2]) -> Self {
        Vec2::new(p[0], p[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(p: Vec2) -> Self {
        [p.x, p.y]
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(angle: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let mut a = angle.rem_euclid(TAU);
    if a > PI {
        a -= TAU;
    }
    a
}

#[derive(Debug, Error, PartialEq)]
pub enum PolylineError {
    #[error("polyline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("points {0} and {1} coincide")]
    RepeatedPoint(usize, usize),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
}

/// Result of projecting a point onto a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    /// Arclength of the closest point, clamped to `[0, length]`.
    pub arclength: f64,
    /// Signed perpendicular offset to the closest segment, positive on the left.
    pub offset: f64,
    /// Euclidean distance to the closest point.
    pub distance: f64,
    pub segment: usize,
    pub point: Vec2,
    /// Unit tangent of the closest segment.
    pub tangent: Vec2,
}

/// Open polyline with cumulative arclength. Successive points are distinct,
/// so arclength is strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    points: Vec<Vec2>,
    arclength: Vec<f64>,
}

impl Polyline {
    pub fn new(points: Vec<Vec2>) -> Result<Self, PolylineError> {
        if points.len() < 2 {
            return Err(PolylineError::TooFewPoints(points.len()));
        }
        let mut arclength = Vec::with_capacity(points.len());
        arclength.push(0.0);
        for i in 0..points.len() {
            if !(points[i].x.is_finite() && points[i].y.is_finite()) {
                return Err(PolylineError::NonFinite(i));
            }
            if i > 0 {
                let step = points[i].distance(points[i - 1]);
                if step <= 0.0 {
                    return Err(PolylineError::RepeatedPoint(i - 1, i));
                }
                arclength.push(arclength[i - 1] + step);
            }
        }
        Ok(Self { points, arclength })
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn arclengths(&self) -> &[f64] {
        &self.arclength
    }

    pub fn length(&self) -> f64 {
        *self.arclength.last().unwrap()
    }

    pub fn first(&self) -> Vec2 {
        self.points[0]
    }

    pub fn last(&self) -> Vec2 {
        *self.points.last().unwrap()
    }

    pub fn segment_tangent(&self, segment: usize) -> Vec2 {
        let seg = segment.min(self.points.len() - 2);
        (self.points[seg + 1] - self.points[seg]).normalized()
    }

    fn segment_at(&self, s: f64) -> usize {
        let last = self.points.len() - 2;
        match self.arclength.binary_search_by(|a| a.total_cmp(&s)) {
            Ok(i) => i.min(last),
            Err(i) => i.saturating_sub(1).min(last),
        }
    }

    /// Point at arclength `s`. Outside `[0, length]` the first or last
    /// segment is extended along its tangent.
    pub fn point_at(&self, s: f64) -> Vec2 {
        let seg = self.segment_at(s);
        let t = self.segment_tangent(seg);
        self.points[seg] + t * (s - self.arclength[seg])
    }

    pub fn tangent_at(&self, s: f64) -> Vec2 {
        self.segment_tangent(self.segment_at(s))
    }

    pub fn heading_at(&self, s: f64) -> f64 {
        self.tangent_at(s).angle()
    }

    /// Closest point on the polyline. Ties go to the earliest segment.
    pub fn project(&self, p: Vec2) -> Projection {
        let mut best: Option<Projection> = None;
        for seg in 0..self.points.len() - 1 {
            let a = self.points[seg];
            let len = self.arclength[seg + 1] - self.arclength[seg];
            let t = (self.points[seg + 1] - a) * (1.0 / len);
            let along = (p - a).dot(t).clamp(0.0, len);
            let q = a + t * along;
            let distance = p.distance(q);
            if best.is_none_or(|b| distance < b.distance) {
                best = Some(Projection {
                    arclength: self.arclength[seg] + along,
                    offset: t.cross(p - a),
                    distance,
                    segment: seg,
                    point: q,
                    tangent: t,
                });
            }
        }
        best.unwrap()
    }
}

/// Corners of an oriented rectangle, counter-clockwise.
pub fn rectangle(centre: Vec2, heading: f64, length: f64, width: f64) -> [Vec2; 4] {
    let f = Vec2::from_angle(heading) * (length / 2.0);
    let l = Vec2::from_angle(heading).perp() * (width / 2.0);
    [centre + f + l, centre - f + l, centre - f - l, centre + f - l]
}

pub fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.distance(a + ab * t)
}

fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

pub fn segment_distance(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    if segments_intersect(a, b, c, d) {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

fn contains_convex(poly: &[Vec2], p: Vec2) -> bool {
    (0..poly.len()).all(|i| {
        let a = poly[i];
        let b = poly[(i + 1) % poly.len()];
        (b - a).cross(p - a) >= 0.0
    })
}

/// Shortest distance between two counter-clockwise convex polygons; zero
/// when they overlap.
pub fn convex_polygon_distance(p: &[Vec2], q: &[Vec2]) -> f64 {
    if p.iter().any(|&v| contains_convex(q, v)) || q.iter().any(|&v| contains_convex(p, v)) {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..p.len() {
        let (a, b) = (p[i], p[(i + 1) % p.len()]);
        for j in 0..q.len() {
            let (c, d) = (q[j], q[(j + 1) % q.len()]);
            best = best.min(segment_distance(a, b, c, d));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_polylines() {
        assert_eq!(
            Polyline::new(vec![Vec2::ZERO]).unwrap_err(),
            PolylineError::TooFewPoints(1)
        );
        assert_eq!(
            Polyline::new(vec![Vec2::ZERO, Vec2::ZERO]).unwrap_err(),
            PolylineError::RepeatedPoint(0, 1)
        );
    }

    #[test]
    fn projection_reports_signed_offset() {
        let line = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]).unwrap();
        let p = line.project(Vec2::new(4.0, 1.2));
        assert!((p.arclength - 4.0).abs() < 1e-12);
        assert!((p.offset - 1.2).abs() < 1e-12);
        let p = line.project(Vec2::new(4.0, -0.5));
        assert!((p.offset + 0.5).abs() < 1e-12);
    }

    #[test]
    fn point_at_extrapolates_past_the_end() {
        let line = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(4.0, 0.0)]).unwrap();
        assert_eq!(line.point_at(10.0), Vec2::new(10.0, 0.0));
        assert_eq!(line.point_at(-1.0), Vec2::new(-1.0, 0.0));
    }

    #[test]
    fn wrap_angle_range() {
        use std::f64::consts::PI;
        assert!((wrap_angle(2.0 * PI - 0.01) + 0.01).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
    }

    #[test]
    fn overlapping_rectangles_have_zero_distance() {
        let a = rectangle(Vec2::ZERO, 0.0, 4.0, 2.0);
        let b = rectangle(Vec2::new(1.0, 0.5), 0.3, 4.0, 2.0);
        assert_eq!(convex_polygon_distance(&a, &b), 0.0);
    }
}
