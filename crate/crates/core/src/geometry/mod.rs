//! Planar windows, point patterns and the dependent thinnings used as test cases.

mod neighbours;
mod poisson;
mod thinning;

pub use neighbours::{
    all_neighbour_features, distance_matrix, nearest_distance_to, nearest_neighbour_distance,
    neighbour_features, NeighbourFeatures,
};
pub use poisson::{sample_poisson, PoissonModel};
pub use thinning::{matern2_retained, matern2_thin, triangle_retained, triangle_thin};

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::SubsetIndex;

/// Slack used when testing whether one window contains another.
const CONTAINMENT_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid window: {0}")]
    InvalidWindow(String),
    #[error("point {index} lies outside the window")]
    PointOutsideWindow { index: usize },
    #[error("point {index} duplicates an earlier point")]
    DuplicatePoint { index: usize },
    #[error("point {index} is not finite")]
    NonFinitePoint { index: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point index {index} out of range for pattern of {len} points")]
    IndexOutOfRange { index: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance_squared(&self, other: &Point) -> f64 {
        let (dx, dy) = (self.x - other.x, self.y - other.y);
        dx * dx + dy * dy
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    fn key(&self) -> (u64, u64) {
        // -0.0 and 0.0 are the same location.
        ((self.x + 0.0).to_bits(), (self.y + 0.0).to_bits())
    }
}

impl From<[f64; 2]> for Point {
    fn from(p: [f64; 2]) -> Self {
        Self::new(p[0], p[1])
    }
}

impl From<Point> for [f64; 2] {
    fn from(p: Point) -> Self {
        [p.x, p.y]
    }
}

/// Bounded observation or simulation region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum Window {
    Disk { center: [f64; 2], radius: f64 },
    Rectangle { x: [f64; 2], y: [f64; 2] },
}

impl Window {
    pub fn disk(center: Point, radius: f64) -> Result<Self, GeometryError> {
        Window::Disk { center: center.into(), radius }.validated()
    }

    pub fn unit_disk() -> Self {
        Window::Disk { center: [0.0, 0.0], radius: 1.0 }
    }

    pub fn rectangle(x: [f64; 2], y: [f64; 2]) -> Result<Self, GeometryError> {
        Window::Rectangle { x, y }.validated()
    }

    /// Checks the invariants (positive radius, non-degenerate ranges).
    pub fn validated(self) -> Result<Self, GeometryError> {
        match self {
            Window::Disk { center, radius } => {
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(GeometryError::InvalidWindow(format!("disk radius {radius} must be positive")));
                }
                if !center.iter().all(|c| c.is_finite()) {
                    return Err(GeometryError::InvalidWindow("disk center must be finite".into()));
                }
            }
            Window::Rectangle { x, y } => {
                for (name, r) in [("x", x), ("y", y)] {
                    if !(r[0].is_finite() && r[1].is_finite() && r[0] < r[1]) {
                        return Err(GeometryError::InvalidWindow(format!(
                            "{name}-range [{}, {}] is degenerate",
                            r[0], r[1]
                        )));
                    }
                }
            }
        }
        Ok(self)
    }

    pub fn center(&self) -> Point {
        match *self {
            Window::Disk { center, .. } => center.into(),
            Window::Rectangle { x, y } => Point::new(0.5 * (x[0] + x[1]), 0.5 * (y[0] + y[1])),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            Window::Disk { radius, .. } => std::f64::consts::PI * radius * radius,
            Window::Rectangle { x, y } => (x[1] - x[0]) * (y[1] - y[0]),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Window::Disk { radius, .. } => 2.0 * radius,
            Window::Rectangle { x, y } => (x[1] - x[0]).hypot(y[1] - y[0]),
        }
    }

    /// Closed-set membership.
    pub fn contains(&self, p: &Point) -> bool {
        match *self {
            Window::Disk { center, radius } => p.distance_squared(&center.into()) <= radius * radius,
            Window::Rectangle { x, y } => p.x >= x[0] && p.x <= x[1] && p.y >= y[0] && p.y <= y[1],
        }
    }

    /// Distance from an interior point to the boundary (0 outside).
    pub fn distance_to_boundary(&self, p: &Point) -> f64 {
        if !self.contains(p) {
            return 0.0;
        }
        match *self {
            Window::Disk { center, radius } => radius - p.distance(&center.into()),
            Window::Rectangle { x, y } => (p.x - x[0]).min(x[1] - p.x).min(p.y - y[0]).min(y[1] - p.y),
        }
    }

    /// Whether the closed disk `B_c(r)` lies inside this window.
    pub fn contains_disk(&self, c: &Point, r: f64) -> bool {
        self.contains(c) && self.distance_to_boundary(c) + CONTAINMENT_EPS >= r
    }

    pub fn contains_window(&self, other: &Window) -> bool {
        match *other {
            Window::Disk { center, radius } => self.contains_disk(&center.into(), radius),
            Window::Rectangle { x, y } => [[x[0], y[0]], [x[0], y[1]], [x[1], y[0]], [x[1], y[1]]]
                .iter()
                .all(|&c| self.grown(CONTAINMENT_EPS).contains(&c.into())),
        }
    }

    fn grown(&self, margin: f64) -> Window {
        match *self {
            Window::Disk { center, radius } => Window::Disk { center, radius: radius + margin },
            Window::Rectangle { x, y } => Window::Rectangle {
                x: [x[0] - margin, x[1] + margin],
                y: [y[0] - margin, y[1] + margin],
            },
        }
    }

    /// Same shape grown by `margin` on every side.
    pub fn extend(&self, margin: f64) -> Result<Window, GeometryError> {
        if !(margin >= 0.0 && margin.is_finite()) {
            return Err(GeometryError::InvalidArgument(format!("margin {margin} must be non-negative")));
        }
        Ok(self.grown(margin))
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match *self {
            Window::Disk { center, radius } => {
                let r = radius * rng.random::<f64>().sqrt();
                let angle = std::f64::consts::TAU * rng.random::<f64>();
                Point::new(center[0] + r * angle.cos(), center[1] + r * angle.sin())
            }
            Window::Rectangle { x, y } => Point::new(
                x[0] + (x[1] - x[0]) * rng.random::<f64>(),
                y[0] + (y[1] - y[0]) * rng.random::<f64>(),
            ),
        }
    }
}

/// Finite simple point pattern inside a window; the point order is the ground-set order.
#[derive(Debug, Clone, PartialEq)]
pub struct PointPattern {
    points: Vec<Point>,
    window: Window,
}

impl PointPattern {
    /// Rejects points outside the window, non-finite coordinates and exact duplicates.
    pub fn new(points: Vec<Point>, window: Window) -> Result<Self, GeometryError> {
        let window = window.validated()?;
        let mut seen = HashSet::with_capacity(points.len());
        for (index, p) in points.iter().enumerate() {
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(GeometryError::NonFinitePoint { index });
            }
            if !window.contains(p) {
                return Err(GeometryError::PointOutsideWindow { index });
            }
            if !seen.insert(p.key()) {
                return Err(GeometryError::DuplicatePoint { index });
            }
        }
        Ok(Self { points, window })
    }

    pub fn empty(window: Window) -> Self {
        Self { points: Vec::new(), window }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> Point {
        self.points[i]
    }

    /// Exact-coordinate lookup.
    pub fn index_of(&self, p: &Point) -> Option<usize> {
        let key = p.key();
        self.points.iter().position(|q| q.key() == key)
    }

    /// The points selected by `s`, in pattern order.
    pub fn subset(&self, s: &SubsetIndex) -> Result<PointPattern, GeometryError> {
        if let Some(&index) = s.indices().iter().find(|&&i| i >= self.len()) {
            return Err(GeometryError::IndexOutOfRange { index, len: self.len() });
        }
        Ok(Self { points: s.indices().iter().map(|&i| self.points[i]).collect(), window: self.window })
    }

    /// A copy with `extra` appended at the end (indices `len..len + extra.len()`).
    pub fn with_appended(&self, extra: &[Point]) -> Result<PointPattern, GeometryError> {
        let mut points = self.points.clone();
        points.extend_from_slice(extra);
        PointPattern::new(points, self.window)
    }

    /// The points inside `w`, keeping their order; `w` must lie inside this pattern's window.
    pub fn crop(&self, w: &Window) -> Result<PointPattern, GeometryError> {
        Ok(self.subset(&self.crop_indices(w)?).expect("indices in range").with_window(*w))
    }

    /// Indices of the points inside `w`.
    pub fn crop_indices(&self, w: &Window) -> Result<SubsetIndex, GeometryError> {
        let w = w.validated()?;
        if !self.window.contains_window(&w) {
            return Err(GeometryError::InvalidArgument("crop window is not inside the pattern window".into()));
        }
        Ok(self.points.iter().enumerate().filter(|(_, p)| w.contains(p)).map(|(i, _)| i).collect())
    }

    fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }
}

/// Disk extension for a pattern window, as used for edge-effect protection.
pub fn extend_window(w: &Window, margin: f64) -> Result<Window, GeometryError> {
    w.extend(margin)
}

/// Free-function form of [`PointPattern::crop`].
pub fn crop(p: &PointPattern, w: &Window) -> Result<PointPattern, GeometryError> {
    p.crop(w)
}
