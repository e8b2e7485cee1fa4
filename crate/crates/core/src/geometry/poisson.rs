use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{GeometryError, PointPattern, Window};

/// Homogeneous Poisson process restricted to a bounded window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonModel {
    pub intensity: f64,
    pub window: Window,
}

impl PoissonModel {
    pub fn new(intensity: f64, window: Window) -> Result<Self, GeometryError> {
        if !(intensity > 0.0 && intensity.is_finite()) {
            return Err(GeometryError::InvalidArgument(format!("intensity {intensity} must be positive")));
        }
        Ok(Self { intensity, window: window.validated()? })
    }

    pub fn mean_count(&self) -> f64 {
        self.intensity * self.window.area()
    }

    /// The same intensity on another window.
    pub fn on_window(&self, window: Window) -> Self {
        Self { intensity: self.intensity, window }
    }
}

/// Poisson count, then i.i.d. uniform locations.
pub fn sample_poisson<R: Rng + ?Sized>(model: &PoissonModel, rng: &mut R) -> PointPattern {
    let mean = model.mean_count();
    let count = Poisson::new(mean).map(|d| d.sample(rng) as usize).unwrap_or(0);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let p = model.window.sample_uniform(rng);
        // Exact coincidences have probability zero; redraw if one ever happens.
        if !points.contains(&p) {
            points.push(p);
        }
    }
    PointPattern::new(points, model.window).expect("uniform points lie inside the window")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_count_and_radius_on_unit_disk() {
        let model = PoissonModel::new(10.0, Window::unit_disk()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let runs = 10_000;
        let mut total = 0usize;
        let mut radius_sum = 0.0;
        for _ in 0..runs {
            let p = sample_poisson(&model, &mut rng);
            total += p.len();
            radius_sum += p.points().iter().map(Point::norm).sum::<f64>();
        }
        let mean = total as f64 / runs as f64;
        let expected = 10.0 * std::f64::consts::PI;
        assert!((mean - expected).abs() <= 4.0 * (expected / runs as f64).sqrt(), "mean {mean}");
        // E|X| = 2/3 for uniform X in the unit disk; Var|X| = 1/2 - 4/9.
        let mean_radius = radius_sum / total as f64;
        let se = ((0.5 - 4.0 / 9.0) / total as f64).sqrt();
        assert!((mean_radius - 2.0 / 3.0).abs() <= 4.0 * se, "mean radius {mean_radius}");
    }

    #[test]
    fn empty_pattern_frequency() {
        let model = PoissonModel::new(0.5, Window::unit_disk()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let runs = 20_000;
        let empties = (0..runs).filter(|_| sample_poisson(&model, &mut rng).is_empty()).count();
        let p = (-0.5 * std::f64::consts::PI).exp();
        let freq = empties as f64 / runs as f64;
        assert!((freq - p).abs() <= 4.0 * (p * (1.0 - p) / runs as f64).sqrt());
    }

    #[test]
    fn cropped_extended_poisson_keeps_intensity() {
        let model = PoissonModel::new(10.0, Window::disk(Point::ORIGIN, 1.253).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let runs = 5_000;
        let total: usize = (0..runs)
            .map(|_| sample_poisson(&model, &mut rng).crop(&Window::unit_disk()).unwrap().len())
            .sum();
        let expected = 10.0 * std::f64::consts::PI;
        let mean = total as f64 / runs as f64;
        assert!((mean - expected).abs() <= 4.0 * (expected / runs as f64).sqrt());
    }

    #[test]
    fn rejects_non_positive_intensity() {
        assert!(PoissonModel::new(0.0, Window::unit_disk()).is_err());
    }
}
