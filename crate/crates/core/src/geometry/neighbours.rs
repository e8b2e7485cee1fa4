use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{GeometryError, Point, PointPattern};

/// Distances to the first and second nearest neighbours and between those two neighbours.
///
/// Missing neighbours (patterns with fewer than three points) are replaced by
/// the window diameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeighbourFeatures {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

impl NeighbourFeatures {
    /// Feature vector `(1, d1, d2, d3)`.
    pub fn vector(&self) -> [f64; 4] {
        [1.0, self.d1, self.d2, self.d3]
    }

    pub fn perimeter(&self) -> f64 {
        self.d1 + self.d2 + self.d3
    }
}

/// Two nearest other points of `i`, ties broken by index.
fn two_nearest(p: &PointPattern, i: usize) -> (Option<(f64, usize)>, Option<(f64, usize)>) {
    let x = p.point(i);
    let mut first: Option<(f64, usize)> = None;
    let mut second: Option<(f64, usize)> = None;
    for (j, q) in p.points().iter().enumerate() {
        if j == i {
            continue;
        }
        let d = x.distance_squared(q);
        // Strict comparisons keep the lower index on ties because j increases.
        match first {
            Some((fd, _)) if d >= fd => match second {
                Some((sd, _)) if d >= sd => {}
                _ => second = Some((d, j)),
            },
            _ => {
                second = first;
                first = Some((d, j));
            }
        }
    }
    (first, second)
}

pub fn neighbour_features(p: &PointPattern, i: usize) -> Result<NeighbourFeatures, GeometryError> {
    if i >= p.len() {
        return Err(GeometryError::IndexOutOfRange { index: i, len: p.len() });
    }
    let cap = p.window().diameter();
    let (first, second) = two_nearest(p, i);
    let x = p.point(i);
    let d1 = first.map_or(cap, |(_, a)| x.distance(&p.point(a)));
    let d2 = second.map_or(cap, |(_, b)| x.distance(&p.point(b)));
    let d3 = match (first, second) {
        (Some((_, a)), Some((_, b))) => p.point(a).distance(&p.point(b)),
        _ => cap,
    };
    Ok(NeighbourFeatures { d1, d2, d3 })
}

pub fn all_neighbour_features(p: &PointPattern) -> Vec<NeighbourFeatures> {
    (0..p.len()).map(|i| neighbour_features(p, i).expect("index in range")).collect()
}

/// Distance from point `i` to its nearest other point; `None` for a lone point.
pub fn nearest_neighbour_distance(p: &PointPattern, i: usize) -> Option<f64> {
    two_nearest(p, i).0.map(|(_, j)| p.point(i).distance(&p.point(j)))
}

/// Distance from an arbitrary location to the nearest point of the pattern.
pub fn nearest_distance_to(p: &PointPattern, x: &Point) -> Option<f64> {
    p.points().iter().map(|q| q.distance(x)).min_by(f64::total_cmp)
}

pub fn distance_matrix(p: &PointPattern) -> DMatrix<f64> {
    let pts = p.points();
    DMatrix::from_fn(pts.len(), pts.len(), |i, j| if i == j { 0.0 } else { pts[i].distance(&pts[j]) })
}
