//! Reference thinnings used to produce training data and validation samples.
//!
//! The Poisson process is drawn on the observation window grown by the rule's
//! dependence range, thinned there, and both patterns are cropped back, so
//! retained points near the boundary see their true neighbours.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::fitting::TrainingPair;
use crate::geometry::{
    matern2_retained, nearest_neighbour_distance, sample_poisson, triangle_retained, GeometryError, Point,
    PointPattern, PoissonModel, Window,
};
use crate::kernels::SubsetIndex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ThinningRule {
    /// Matérn II with inhibition radius `r_m`.
    Matern2 { r_m: f64 },
    /// Keep points whose `d1 + d2 + d3` is at most `r_t`.
    Triangle { r_t: f64 },
    /// Keep every point independently with probability `retain`.
    Independent { retain: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub rule: ThinningRule,
    pub poisson: PoissonModel,
}

impl TestCase {
    pub fn new(rule: ThinningRule, poisson: PoissonModel) -> Result<Self, GeometryError> {
        let ok = match rule {
            ThinningRule::Matern2 { r_m } => r_m > 0.0 && r_m.is_finite(),
            ThinningRule::Triangle { r_t } => r_t > 0.0 && r_t.is_finite(),
            ThinningRule::Independent { retain } => (0.0..=1.0).contains(&retain),
        };
        if !ok {
            return Err(GeometryError::InvalidArgument(format!("invalid thinning parameters {rule:?}")));
        }
        Ok(Self { rule, poisson })
    }

    pub fn matern2(intensity: f64, r_m: f64, window: Window) -> Result<Self, GeometryError> {
        Self::new(ThinningRule::Matern2 { r_m }, PoissonModel::new(intensity, window)?)
    }

    pub fn triangle(intensity: f64, r_t: f64, window: Window) -> Result<Self, GeometryError> {
        Self::new(ThinningRule::Triangle { r_t }, PoissonModel::new(intensity, window)?)
    }

    pub fn independent(intensity: f64, retain: f64, window: Window) -> Result<Self, GeometryError> {
        Self::new(ThinningRule::Independent { retain }, PoissonModel::new(intensity, window)?)
    }

    /// Window growth for edge protection: `r_M` for Matérn II, `2 r_T` for the
    /// triangle rule (the reach of a point's two nearest neighbours).
    pub fn margin(&self) -> f64 {
        match self.rule {
            ThinningRule::Matern2 { r_m } => r_m,
            ThinningRule::Triangle { r_t } => 2.0 * r_t,
            ThinningRule::Independent { .. } => 0.0,
        }
    }

    pub fn window(&self) -> Window {
        self.poisson.window
    }

    fn retained<R: Rng + ?Sized>(&self, p: &PointPattern, rng: &mut R) -> SubsetIndex {
        match self.rule {
            ThinningRule::Matern2 { r_m } => matern2_retained(p, r_m, rng),
            ThinningRule::Triangle { r_t } => triangle_retained(p, r_t),
            ThinningRule::Independent { retain } => {
                (0..p.len()).filter(|_| rng.random::<f64>() < retain).collect()
            }
        }
    }

    /// Thins `extended` (a pattern on the grown window) and crops both patterns
    /// to the observation window.
    fn thin_and_crop<R: Rng + ?Sized>(
        &self,
        extended: &PointPattern,
        rng: &mut R,
    ) -> Result<(PointPattern, SubsetIndex), GeometryError> {
        let kept = self.retained(extended, rng);
        let inside = extended.crop_indices(&self.window())?;
        let full = extended.crop(&self.window())?;
        let retained = inside
            .indices()
            .iter()
            .enumerate()
            .filter(|(_, &i)| kept.contains(i))
            .map(|(j, _)| j)
            .collect();
        Ok((full, retained))
    }

    fn extended_poisson<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PointPattern, GeometryError> {
        let grown = self.poisson.on_window(self.window().extend(self.margin())?);
        Ok(sample_poisson(&grown, rng))
    }

    /// One cropped realization and its retained subset.
    pub fn sample_pair<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TrainingPair, GeometryError> {
        let extended = self.extended_poisson(rng)?;
        let (full, retained) = self.thin_and_crop(&extended, rng)?;
        Ok(TrainingPair::new(full, retained).expect("indices come from the cropped pattern"))
    }

    /// The retained pattern only.
    pub fn sample_thinned<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PointPattern, GeometryError> {
        Ok(self.sample_pair(rng)?.retained_pattern())
    }

    /// Plants a point at `u` and thins. `None` if `u` was removed, otherwise
    /// the distance from `u` to its nearest retained neighbour inside the
    /// window (`Some(None)` when it has none).
    pub fn sample_planted_nn<R: Rng + ?Sized>(
        &self,
        u: Point,
        rng: &mut R,
    ) -> Result<Option<Option<f64>>, GeometryError> {
        if !self.window().contains(&u) {
            return Err(GeometryError::InvalidArgument("planted point lies outside the window".into()));
        }
        let extended = self.extended_poisson(rng)?.with_appended(&[u])?;
        let (full, retained) = self.thin_and_crop(&extended, rng)?;
        let psi = full.subset(&retained)?;
        Ok(psi.index_of(&u).map(|i| nearest_neighbour_distance(&psi, i)))
    }
}

/// `(1 - exp(-λπr²)) / (πr²)`, the intensity of Matérn II thinning in the plane.
pub fn matern2_intensity(intensity: f64, r_m: f64) -> f64 {
    let area = std::f64::consts::PI * r_m * r_m;
    (1.0 - (-intensity * area).exp()) / area
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn margins() {
        let w = Window::unit_disk();
        assert_eq!(TestCase::matern2(10.0, 0.253, w).unwrap().margin(), 0.253);
        assert_eq!(TestCase::triangle(10.0, 0.6325, w).unwrap().margin(), 1.265);
        assert!(TestCase::matern2(10.0, 0.0, w).is_err());
        assert!(TestCase::independent(10.0, 1.5, w).is_err());
    }

    #[test]
    fn pairs_live_on_the_observation_window() {
        let case = TestCase::matern2(10.0, 0.253, Window::unit_disk()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let pair = case.sample_pair(&mut rng).unwrap();
            assert_eq!(*pair.full().window(), Window::unit_disk());
            let psi = pair.retained_pattern();
            for i in 0..psi.len() {
                for j in 0..i {
                    assert!(psi.point(i).distance(&psi.point(j)) > 0.253);
                }
            }
        }
    }

    #[test]
    fn matern_intensity_formula() {
        assert!((matern2_intensity(10.0, 0.2530) - 4.30718).abs() < 1e-5);
    }

    #[test]
    fn independent_planted_point_survives_at_rate() {
        let case = TestCase::independent(5.0, 0.3, Window::unit_disk()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20_000;
        let kept = (0..n).filter(|_| case.sample_planted_nn(Point::ORIGIN, &mut rng).unwrap().is_some()).count();
        let p = kept as f64 / n as f64;
        assert!((p - 0.3).abs() < 4.0 * (0.21f64 / n as f64).sqrt());
    }
}
