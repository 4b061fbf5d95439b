//! Room geometry: bounds, rectangular obstacles, external support points,
//! named goals and named initial poses.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A position in the room plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_sq(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn lerp(&self, other: &Point2, s: f64) -> Point2 {
        Point2::new(
            self.x + (other.x - self.x) * s,
            self.y + (other.y - self.y) * s,
        )
    }

    /// Moves from `self` toward `target` by at most `max_len`.
    pub fn step_toward(&self, target: &Point2, max_len: f64) -> Point2 {
        let d = self.distance(target);
        if d <= max_len || d == 0.0 {
            *target
        } else {
            self.lerp(target, max_len / d)
        }
    }
}

impl From<[f64; 2]> for Point2 {
    fn from(v: [f64; 2]) -> Self {
        Point2::new(v[0], v[1])
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl std::ops::Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Point2) -> Point2 {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl std::ops::Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Point2) -> Point2 {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl std::ops::Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.3}, {:.3})", self.x, self.y)
    }
}

/// Axis-aligned rectangle, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub min: Point2,
    pub max: Point2,
}

impl Rect {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn center(&self) -> Point2 {
        self.min.lerp(&self.max, 0.5)
    }

    /// True for points in the closed rectangle.
    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn clamp(&self, p: &Point2) -> Point2 {
        Point2::new(
            p.x.clamp(self.min.x, self.max.x),
            p.y.clamp(self.min.y, self.max.y),
        )
    }

    pub fn inflate(&self, margin: f64) -> Rect {
        Rect::new(
            Point2::new(self.min.x - margin, self.min.y - margin),
            Point2::new(self.max.x + margin, self.max.y + margin),
        )
    }

    /// Slab test of the closed segment `a -> b` against the closed rectangle.
    pub fn intersects_segment(&self, a: &Point2, b: &Point2) -> bool {
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for (p, d, min, max) in [(a.x, b.x - a.x, self.min.x, self.max.x), (a.y, b.y - a.y, self.min.y, self.max.y)] {
            if d == 0.0 {
                if p < min || p > max {
                    return false;
                }
            } else {
                let (t0, t1) = ((min - p) / d, (max - p) / d);
                lo = lo.max(t0.min(t1));
                hi = hi.min(t0.max(t1));
                if lo > hi {
                    return false;
                }
            }
        }
        true
    }

    pub fn corners(&self) -> [Point2; 4] {
        [
            self.min,
            Point2::new(self.max.x, self.min.y),
            self.max,
            Point2::new(self.min.x, self.max.y),
        ]
    }

    fn is_valid(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min.x < self.max.x && self.min.y < self.max.y
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Goal {
    pub id: String,
    pub at: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedPose {
    pub name: String,
    pub at: Point2,
}

/// Rectangular room with obstacles, support points, goals and start poses.
///
/// Construct through [`RoomLayout::new`] (or deserialization, which calls it)
/// so the placement invariants hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLayout", into = "RawLayout")]
pub struct RoomLayout {
    bounds: Rect,
    obstacles: Vec<Rect>,
    supports: Vec<Point2>,
    goals: Vec<Goal>,
    initial_poses: Vec<NamedPose>,
    robot_dock: Option<Point2>,
}

#[derive(Serialize, Deserialize)]
struct RawLayout {
    bounds: Rect,
    #[serde(default)]
    obstacles: Vec<Rect>,
    #[serde(default)]
    supports: Vec<Point2>,
    goals: Vec<Goal>,
    #[serde(default)]
    initial_poses: Vec<NamedPose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    robot_dock: Option<Point2>,
}

impl TryFrom<RawLayout> for RoomLayout {
    type Error = Error;

    fn try_from(raw: RawLayout) -> Result<Self> {
        RoomLayout::new(
            raw.bounds,
            raw.obstacles,
            raw.supports,
            raw.goals,
            raw.initial_poses,
            raw.robot_dock,
        )
    }
}

impl From<RoomLayout> for RawLayout {
    fn from(l: RoomLayout) -> Self {
        RawLayout {
            bounds: l.bounds,
            obstacles: l.obstacles,
            supports: l.supports,
            goals: l.goals,
            initial_poses: l.initial_poses,
            robot_dock: l.robot_dock,
        }
    }
}

impl RoomLayout {
    pub fn new(
        bounds: Rect,
        obstacles: Vec<Rect>,
        supports: Vec<Point2>,
        goals: Vec<Goal>,
        initial_poses: Vec<NamedPose>,
        robot_dock: Option<Point2>,
    ) -> Result<Self> {
        if !bounds.is_valid() {
            return Err(Error::Layout(format!("degenerate bounds {bounds:?}")));
        }
        if let Some(r) = obstacles.iter().find(|r| !r.is_valid()) {
            return Err(Error::Layout(format!("degenerate obstacle {r:?}")));
        }
        if goals.is_empty() {
            return Err(Error::Layout("at least one goal is required".into()));
        }
        let mut seen = HashSet::new();
        for g in &goals {
            if !seen.insert(g.id.as_str()) {
                return Err(Error::Layout(format!("duplicate goal id `{}`", g.id)));
            }
        }
        let layout = RoomLayout {
            bounds,
            obstacles,
            supports,
            goals,
            initial_poses,
            robot_dock,
        };
        let named = layout
            .supports
            .iter()
            .map(|p| ("support".to_string(), *p))
            .chain(layout.goals.iter().map(|g| (format!("goal `{}`", g.id), g.at)))
            .chain(
                layout
                    .initial_poses
                    .iter()
                    .map(|n| (format!("initial pose `{}`", n.name), n.at)),
            )
            .chain(layout.robot_dock.map(|p| ("robot dock".to_string(), p)));
        for (what, p) in named {
            if !p.is_finite() || !layout.is_free(&p) {
                return Err(Error::Layout(format!(
                    "{what} at {p} is outside the room or inside an obstacle"
                )));
            }
        }
        Ok(layout)
    }

    pub fn bounds(&self) -> &Rect {
        &self.bounds
    }

    pub fn obstacles(&self) -> &[Rect] {
        &self.obstacles
    }

    pub fn supports(&self) -> &[Point2] {
        &self.supports
    }

    pub fn goals(&self) -> &[Goal] {
        &self.goals
    }

    pub fn goal_ids(&self) -> impl Iterator<Item = &str> {
        self.goals.iter().map(|g| g.id.as_str())
    }

    pub fn goal(&self, id: &str) -> Option<&Goal> {
        self.goals.iter().find(|g| g.id == id)
    }

    pub fn initial_poses(&self) -> &[NamedPose] {
        &self.initial_poses
    }

    pub fn initial_pose(&self, name: &str) -> Option<Point2> {
        self.initial_poses.iter().find(|n| n.name == name).map(|n| n.at)
    }

    /// Where the robot waits with the walker; defaults to the room center.
    pub fn robot_dock(&self) -> Point2 {
        self.robot_dock.unwrap_or_else(|| self.bounds.center())
    }

    /// Euclidean distance to the closest support point, or `d_max` when the
    /// room has none.
    pub fn distance_to_nearest_support(&self, p: &Point2, d_max: f64) -> f64 {
        self.nearest_support(p).map_or(d_max, |(_, d)| d)
    }

    /// Closest support point and its distance.
    pub fn nearest_support(&self, p: &Point2) -> Option<(Point2, f64)> {
        self.supports
            .iter()
            .map(|s| (*s, s.distance(p)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }

    /// Inside the (closed) bounds and strictly outside every obstacle.
    pub fn is_free(&self, p: &Point2) -> bool {
        self.bounds.contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    /// Whether the closed segment `a -> b` stays in the bounds and touches no
    /// obstacle.
    pub fn segment_free(&self, a: &Point2, b: &Point2) -> bool {
        self.bounds.contains(a) && self.bounds.contains(b) && !self.obstacles.iter().any(|o| o.intersects_segment(a, b))
    }

    pub fn clamp_to_bounds(&self, p: &Point2) -> Point2 {
        self.bounds.clamp(p)
    }

    /// Moves `p` out of any obstacle it lies in (plus `margin`) along the
    /// shortest axis direction, then clamps into the bounds.
    pub fn push_out(&self, p: &Point2, margin: f64) -> Point2 {
        let mut q = self.clamp_to_bounds(p);
        for _ in 0..4 {
            let Some(o) = self.obstacles.iter().find(|o| o.inflate(margin * 0.5).contains(&q)) else {
                break;
            };
            let r = o.inflate(margin);
            let candidates = [
                Point2::new(r.min.x, q.y),
                Point2::new(r.max.x, q.y),
                Point2::new(q.x, r.min.y),
                Point2::new(q.x, r.max.y),
            ];
            q = candidates
                .into_iter()
                .filter(|c| self.bounds.contains(c))
                .min_by(|a, b| a.distance_sq(&q).total_cmp(&b.distance_sq(&q)))
                .unwrap_or(q);
        }
        q
    }
}

/// Time-ordered patient or robot states at a fixed step `dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Point2>,
    pub dt: f64,
}

impl Trajectory {
    pub fn new(states: Vec<Point2>, dt: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::Config("trajectory needs at least one state".into()));
        }
        if !(dt > 0.0) {
            return Err(Error::Config(format!("trajectory dt must be positive, got {dt}")));
        }
        Ok(Self { states, dt })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> Point2 {
        self.states[0]
    }

    pub fn last(&self) -> Point2 {
        self.states[self.states.len() - 1]
    }

    /// One-step displacements `states[t + 1] - states[t]`.
    pub fn deltas(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        self.states.windows(2).map(|w| (w[0], w[1] - w[0]))
    }
}
