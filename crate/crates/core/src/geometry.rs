//! Angles on the circle, configurations on the flat two-torus, and the
//! planar primitives (points, segments, obstacles) used for contact tests.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("angle is not finite: {0}")]
    NonFiniteAngle(f64),
    #[error("polygon needs at least 3 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("polygon vertex {0} is not finite")]
    NonFiniteVertex(usize),
    #[error("polygon edges {0} and {1} intersect (polygon must be simple)")]
    SelfIntersecting(usize, usize),
    #[error("polygon edge {0} has zero length")]
    DegenerateEdge(usize),
    #[error("circle radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("circle center is not finite")]
    NonFiniteCenter,
}

/// An angle canonicalized into `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    pub fn new(raw: f64) -> Result<Self, GeometryError> {
        wrap_angle(raw)
    }

    /// Wraps a value already known to be finite.
    pub(crate) fn wrap_finite(raw: f64) -> Self {
        debug_assert!(raw.is_finite());
        let mut v = raw.rem_euclid(TAU);
        // rem_euclid of a tiny negative number rounds up to exactly 2π
        if v >= TAU {
            v = 0.0;
        }
        Angle(v)
    }

    pub fn radians(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Angle {
    type Error = GeometryError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        wrap_angle(value)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn wrap_angle(raw: f64) -> Result<Angle, GeometryError> {
    if !raw.is_finite() {
        return Err(GeometryError::NonFiniteAngle(raw));
    }
    Ok(Angle::wrap_finite(raw))
}

/// Shortest signed rotation taking `from` to `to`, in `(-π, π]`.
/// The antipodal case resolves to `+π`.
pub fn angle_delta(from: Angle, to: Angle) -> f64 {
    let d = (to.0 - from.0).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

/// Arm configuration `(θ1, θ2)`: a point on the two-torus.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Configuration {
    pub theta1: Angle,
    pub theta2: Angle,
}

impl Configuration {
    pub fn new(theta1: f64, theta2: f64) -> Result<Self, GeometryError> {
        Ok(Configuration {
            theta1: wrap_angle(theta1)?,
            theta2: wrap_angle(theta2)?,
        })
    }

    pub(crate) fn wrapped(theta1: f64, theta2: f64) -> Self {
        Configuration {
            theta1: Angle::wrap_finite(theta1),
            theta2: Angle::wrap_finite(theta2),
        }
    }

    pub fn from_angles(theta1: Angle, theta2: Angle) -> Self {
        Configuration { theta1, theta2 }
    }

    pub fn as_array(self) -> [f64; 2] {
        [self.theta1.0, self.theta2.0]
    }

    /// Moves by a signed joint-space offset, wrapping both coordinates.
    pub fn offset(self, d1: f64, d2: f64) -> Self {
        Configuration::wrapped(self.theta1.0 + d1, self.theta2.0 + d2)
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.theta1, self.theta2)
    }
}

/// Component-wise shortest displacement between two configurations.
///
/// Each component lies in `(-π, π]`. Of the four straight lines joining two
/// points on the torus (one per winding direction of each joint), this is
/// the one that is shortest in every coordinate.
pub fn torus_geodesic(from: Configuration, to: Configuration) -> (f64, f64) {
    (
        angle_delta(from.theta1, to.theta1),
        angle_delta(from.theta2, to.theta2),
    )
}

/// Sum of absolute joint changes along the component-wise geodesic.
pub fn torus_l1(from: Configuration, to: Configuration) -> f64 {
    let (a, b) = torus_geodesic(from, to);
    a.abs() + b.abs()
}

/// Largest absolute joint change along the component-wise geodesic.
pub fn torus_linf(from: Configuration, to: Configuration) -> f64 {
    let (a, b) = torus_geodesic(from, to);
    a.abs().max(b.abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const ORIGIN: Point2 = Point2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Point2,
    pub b: Point2,
}

impl Segment {
    pub const fn new(a: Point2, b: Point2) -> Self {
        Segment { a, b }
    }

    pub fn reversed(self) -> Self {
        Segment::new(self.b, self.a)
    }

    pub fn point_at(self, t: f64) -> Point2 {
        self.a + (self.b - self.a) * t
    }

    pub fn length(self) -> f64 {
        self.a.distance(self.b)
    }
}

/// A stationary obstacle in the work space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Obstacle {
    Polygon { vertices: Vec<Point2> },
    Circle { center: Point2, radius: f64 },
}

impl Obstacle {
    pub fn polygon(vertices: Vec<Point2>) -> Result<Self, GeometryError> {
        let o = Obstacle::Polygon { vertices };
        o.validate()?;
        Ok(o)
    }

    pub fn circle(center: Point2, radius: f64) -> Result<Self, GeometryError> {
        let o = Obstacle::Circle { center, radius };
        o.validate()?;
        Ok(o)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            Obstacle::Circle { center, radius } => {
                if !center.is_finite() {
                    return Err(GeometryError::NonFiniteCenter);
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(GeometryError::BadRadius(*radius));
                }
                Ok(())
            }
            Obstacle::Polygon { vertices } => validate_polygon(vertices),
        }
    }

    /// Closed-set membership: boundary points count as inside.
    pub fn contains_point(&self, p: Point2) -> bool {
        match self {
            Obstacle::Circle { center, radius } => (p - *center).norm_squared() <= radius * radius,
            Obstacle::Polygon { vertices } => point_in_polygon(p, vertices),
        }
    }

    /// Smallest disk enclosing the obstacle, as `(center, radius)`.
    pub fn bounding_circle(&self) -> (Point2, f64) {
        match self {
            Obstacle::Circle { center, radius } => (*center, *radius),
            Obstacle::Polygon { vertices } => {
                let n = vertices.len() as f64;
                let c = vertices
                    .iter()
                    .fold(Point2::ORIGIN, |acc, v| acc + *v)
                    * (1.0 / n);
                let r = vertices.iter().map(|v| v.distance(c)).fold(0.0, f64::max);
                (c, r)
            }
        }
    }

    fn edges(vertices: &[Point2]) -> impl Iterator<Item = Segment> + '_ {
        let n = vertices.len();
        (0..n).map(move |i| Segment::new(vertices[i], vertices[(i + 1) % n]))
    }
}

fn validate_polygon(vertices: &[Point2]) -> Result<(), GeometryError> {
    let n = vertices.len();
    if n < 3 {
        return Err(GeometryError::TooFewVertices(n));
    }
    if let Some(i) = vertices.iter().position(|v| !v.is_finite()) {
        return Err(GeometryError::NonFiniteVertex(i));
    }
    let edges: Vec<Segment> = Obstacle::edges(vertices).collect();
    for (i, e) in edges.iter().enumerate() {
        if e.a == e.b {
            return Err(GeometryError::DegenerateEdge(i));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Neighbors share exactly one vertex; anything more is a fold-back.
                let shared = if j == i + 1 { edges[i].b } else { edges[i].a };
                let (far_i, far_j) = if j == i + 1 {
                    (edges[i].a, edges[j].b)
                } else {
                    (edges[i].b, edges[j].a)
                };
                let di = far_i - shared;
                let dj = far_j - shared;
                if di.cross(dj) == 0.0 && di.dot(dj) > 0.0 {
                    return Err(GeometryError::SelfIntersecting(i, j));
                }
            } else if segments_intersect(edges[i], edges[j]) {
                return Err(GeometryError::SelfIntersecting(i, j));
            }
        }
    }
    Ok(())
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b - a).cross(c - a)
}

fn on_segment_collinear(p: Point2, s: Segment) -> bool {
    p.x >= s.a.x.min(s.b.x)
        && p.x <= s.a.x.max(s.b.x)
        && p.y >= s.a.y.min(s.b.y)
        && p.y <= s.a.y.max(s.b.y)
}

/// Closed segment/segment intersection, including touching and collinear overlap.
pub fn segments_intersect(s: Segment, t: Segment) -> bool {
    let d1 = orient(t.a, t.b, s.a);
    let d2 = orient(t.a, t.b, s.b);
    let d3 = orient(s.a, s.b, t.a);
    let d4 = orient(s.a, s.b, t.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_collinear(s.a, t))
        || (d2 == 0.0 && on_segment_collinear(s.b, t))
        || (d3 == 0.0 && on_segment_collinear(t.a, s))
        || (d4 == 0.0 && on_segment_collinear(t.b, s))
}

pub fn point_segment_distance(p: Point2, s: Segment) -> f64 {
    let d = s.b - s.a;
    let len2 = d.norm_squared();
    if len2 == 0.0 {
        return p.distance(s.a);
    }
    let t = ((p - s.a).dot(d) / len2).clamp(0.0, 1.0);
    p.distance(s.point_at(t))
}

pub fn segment_segment_distance(s: Segment, t: Segment) -> f64 {
    if segments_intersect(s, t) {
        return 0.0;
    }
    point_segment_distance(s.a, t)
        .min(point_segment_distance(s.b, t))
        .min(point_segment_distance(t.a, s))
        .min(point_segment_distance(t.b, s))
}

fn point_in_polygon(p: Point2, vertices: &[Point2]) -> bool {
    let mut inside = false;
    for e in Obstacle::edges(vertices) {
        if orient(e.a, e.b, p) == 0.0 && on_segment_collinear(p, e) {
            return true;
        }
        let (a, b) = (e.a, e.b);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// True iff the closed segment touches the obstacle boundary or interior.
pub fn segment_intersects_obstacle(s: Segment, o: &Obstacle) -> bool {
    match o {
        Obstacle::Circle { center, radius } => point_segment_distance(*center, s) <= *radius,
        Obstacle::Polygon { vertices } => {
            point_in_polygon(s.a, vertices)
                || point_in_polygon(s.b, vertices)
                || Obstacle::edges(vertices).any(|e| segments_intersect(s, e))
        }
    }
}

/// Euclidean distance from the segment to the obstacle; zero on contact.
pub fn segment_obstacle_distance(s: Segment, o: &Obstacle) -> f64 {
    match o {
        Obstacle::Circle { center, radius } => {
            (point_segment_distance(*center, s) - radius).max(0.0)
        }
        Obstacle::Polygon { vertices } => {
            if segment_intersects_obstacle(s, o) {
                return 0.0;
            }
            Obstacle::edges(vertices)
                .map(|e| segment_segment_distance(s, e))
                .fold(f64::INFINITY, f64::min)
        }
    }
}
