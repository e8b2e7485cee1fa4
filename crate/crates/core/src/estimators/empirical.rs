//! Estimators that simulate the thinning and count, used to validate the
//! determinant-based estimators. No edge correction is applied.

use super::{
    grid_or_default, require_inside, run_replicates, truncate_grid, underlying_pattern, Estimate, EstimateCurve,
    EstimatorError, MCConfig,
};
use crate::geometry::{nearest_distance_to, nearest_neighbour_distance, Point, PointPattern, Window};
use crate::model::{thin, ThinningModel};

/// Empirical CDF of distance samples on a grid; `None` samples (no neighbour)
/// count as larger than every radius.
pub fn nearest_neighbour_curve(distances: &[Option<f64>], grid: &[f64]) -> EstimateCurve {
    let mut sorted: Vec<f64> = distances.iter().flatten().copied().collect();
    sorted.sort_by(f64::total_cmp);
    let estimates: Vec<Estimate> = grid
        .iter()
        .map(|r| Estimate::proportion(sorted.partition_point(|d| d <= r), distances.len()))
        .collect();
    EstimateCurve::from_estimates(grid.to_vec(), &estimates, distances.len())
}

/// Empirical contact distribution at `o` from a list of patterns.
pub fn contact_curve(patterns: &[PointPattern], o: &Point, grid: &[f64]) -> EstimateCurve {
    let distances: Vec<Option<f64>> = patterns.iter().map(|p| nearest_distance_to(p, o)).collect();
    nearest_neighbour_curve(&distances, grid)
}

/// Pooled `G`, `H` at the window centre, and `J = (1 - G) / (1 - H)` of
/// observed patterns. Points near the boundary bias `G` upwards in distance.
pub fn empirical_summaries(
    samples: &[PointPattern],
    grid: &[f64],
) -> Result<(EstimateCurve, EstimateCurve, EstimateCurve), EstimatorError> {
    let first = samples.first().ok_or_else(|| EstimatorError::InvalidArgument("no samples".into()))?;
    let window = *first.window();
    if samples.iter().any(|p| *p.window() != window) {
        return Err(EstimatorError::InvalidArgument("samples must share one window".into()));
    }
    super::validate_grid(grid)?;
    let nn: Vec<Option<f64>> =
        samples.iter().flat_map(|p| (0..p.len()).map(move |i| nearest_neighbour_distance(p, i))).collect();
    let mut g = nearest_neighbour_curve(&nn, grid);
    g.n_samples = samples.len();
    let h = contact_curve(samples, &window.center(), grid);
    let j = EstimateCurve::j_function(&g, &h)?;
    Ok((g, h, j))
}

/// Frequency with which a point planted at `x` survives the thinning.
pub fn empirical_retention(m: &ThinningModel, x: Point, cfg: &MCConfig) -> Result<Estimate, EstimatorError> {
    require_inside(&m.poisson.window, &x, "x")?;
    let kept = run_replicates(cfg, "empirical-retention", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?.with_appended(&[x])?;
        Ok(thin(m, &phi, rng)?.contains(phi.len() - 1))
    })?;
    Ok(Estimate::proportion(kept.iter().filter(|k| **k).count(), kept.len()))
}

fn thinned<R: rand::Rng + ?Sized>(m: &ThinningModel, margin: f64, rng: &mut R) -> Result<PointPattern, EstimatorError> {
    let phi = underlying_pattern(m, margin, rng)?;
    let kept = thin(m, &phi, rng)?;
    Ok(phi.subset(&kept)?)
}

/// Mean number of thinned points in `b`.
pub fn empirical_intensity(m: &ThinningModel, b: &Window, cfg: &MCConfig) -> Result<Estimate, EstimatorError> {
    let counts = run_replicates(cfg, "empirical-intensity", |rng| {
        let psi = thinned(m, cfg.margin, rng)?;
        Ok(psi.points().iter().filter(|p| b.contains(p)).count() as f64)
    })?;
    Ok(Estimate::from_samples(&counts))
}

/// Frequency of thinned patterns with no point in `b`.
pub fn empirical_void(m: &ThinningModel, b: &Window, cfg: &MCConfig) -> Result<Estimate, EstimatorError> {
    let empty = run_replicates(cfg, "empirical-void", |rng| {
        let psi = thinned(m, cfg.margin, rng)?;
        Ok(!psi.points().iter().any(|p| b.contains(p)))
    })?;
    Ok(Estimate::proportion(empty.iter().filter(|e| **e).count(), empty.len()))
}

/// Mean of `exp(-Σ_{x∈ψ} f(x))` over thinned patterns.
pub fn empirical_laplace(
    m: &ThinningModel,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    cfg: &MCConfig,
) -> Result<Estimate, EstimatorError> {
    let values = run_replicates(cfg, "empirical-laplace", |rng| {
        let psi = thinned(m, cfg.margin, rng)?;
        let total: f64 = psi.points().iter().map(f).sum();
        if total < 0.0 {
            return Err(EstimatorError::InvalidArgument("f must be non-negative".into()));
        }
        Ok((-total).exp())
    })?;
    Ok(Estimate::from_samples(&values))
}

/// Contact distribution at `o` from simulated thinned patterns.
pub fn empirical_contact(m: &ThinningModel, o: Point, cfg: &MCConfig) -> Result<EstimateCurve, EstimatorError> {
    let window = m.poisson.window;
    require_inside(&window, &o, "o")?;
    let reach = window.distance_to_boundary(&o);
    let radii = truncate_grid(grid_or_default(cfg, reach), reach, "contact distribution");
    let distances = run_replicates(cfg, "empirical-contact", |rng| {
        Ok(nearest_distance_to(&thinned(m, cfg.margin, rng)?, &o))
    })?;
    Ok(nearest_neighbour_curve(&distances, &radii))
}

/// `G^u` from simulation: plant `u`, thin, and record the nearest-neighbour
/// distance of `u` whenever it is retained.
pub fn empirical_nearest_neighbour(
    m: &ThinningModel,
    u: Point,
    cfg: &MCConfig,
) -> Result<EstimateCurve, EstimatorError> {
    let window = m.poisson.window;
    require_inside(&window, &u, "u")?;
    let reach = window.distance_to_boundary(&u);
    let radii = truncate_grid(grid_or_default(cfg, reach), reach, "nearest-neighbour distribution");
    let outcomes = run_replicates(cfg, "empirical-nearest-neighbour", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?.with_appended(&[u])?;
        let planted = phi.len() - 1;
        let kept = thin(m, &phi, rng)?;
        if !kept.contains(planted) {
            return Ok(None);
        }
        let psi = phi.subset(&kept)?;
        let idx = psi.index_of(&u).expect("planted point is retained");
        Ok(Some(nearest_neighbour_distance(&psi, idx)))
    })?;
    let distances: Vec<Option<f64>> = outcomes.into_iter().flatten().collect();
    if distances.is_empty() {
        return Err(EstimatorError::UnstableConditioning { mean: 0.0, std_error: 0.0 });
    }
    Ok(nearest_neighbour_curve(&distances, &radii))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::{contact_dist, nearest_neighbour_dist, uniform_grid, void_probability};
    use crate::geometry::{sample_poisson, PoissonModel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn pattern(points: &[(f64, f64)]) -> PointPattern {
        PointPattern::new(points.iter().map(|&(x, y)| Point::new(x, y)).collect(), Window::unit_disk()).unwrap()
    }

    #[test]
    fn two_point_pattern_jumps_at_distance() {
        let p = pattern(&[(0.1, 0.0), (0.4, 0.0)]);
        let (g, _, _) = empirical_summaries(&[p], &[0.0, 0.29, 0.31, 0.5]).unwrap();
        assert_eq!(g.values, vec![0.0, 0.0, 1.0, 1.0]);
        assert!(empirical_summaries(&[], &[0.0]).is_err());
    }

    #[test]
    fn centre_point_gives_full_contact() {
        let p = pattern(&[(0.0, 0.0), (0.5, 0.5)]);
        let (_, h, j) = empirical_summaries(&[p.clone(), p], &[0.0, 0.1, 0.2]).unwrap();
        assert_eq!(h.values, vec![1.0, 1.0, 1.0]);
        assert!(j.is_empty());
    }

    #[test]
    fn poisson_g_matches_closed_form_in_interior() {
        let model = PoissonModel::new(50.0, Window::unit_disk()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let samples: Vec<PointPattern> = (0..400).map(|_| sample_poisson(&model, &mut rng)).collect();
        let grid = uniform_grid(0.1, 11);
        let (g, _, _) = empirical_summaries(&samples, &grid).unwrap();
        for (r, v) in grid.iter().zip(&g.values) {
            let truth = 1.0 - (-50.0 * PI * r * r).exp();
            // Boundary points have fewer neighbours, so allow a small bias band.
            assert!((v - truth).abs() < 0.03, "r={r}: {v} vs {truth}");
        }
    }

    #[test]
    fn empirical_and_semi_analytic_agree_for_repulsive_model() {
        let m = ThinningModel::gaussian([0.3, 0.6, 0.0, 0.0], 0.5, PoissonModel::new(10.0, Window::unit_disk()).unwrap())
            .unwrap();
        let cfg = MCConfig::new(1500, 22).with_grid(uniform_grid(0.9, 10));
        let o = Point::ORIGIN;
        let h_emp = empirical_contact(&m, o, &cfg).unwrap();
        let h_sa = contact_dist(&m, o, &cfg).unwrap();
        assert!(h_emp.max_z_score(&h_sa).unwrap() <= 3.5);
        let g_emp = empirical_nearest_neighbour(&m, o, &cfg).unwrap();
        let g_sa = nearest_neighbour_dist(&m, o, &cfg).unwrap();
        assert!(g_emp.max_z_score(&g_sa).unwrap() <= 3.5);
        let b = Window::disk(Point::new(0.2, 0.2), 0.3).unwrap();
        let v_emp = empirical_void(&m, &b, &cfg).unwrap();
        let v_sa = void_probability(&m, &b, &cfg).unwrap();
        assert!(v_emp.z_score(&v_sa) <= 3.5);
        // Rao–Blackwellization: the determinant estimator is less noisy.
        assert!(v_sa.std_error < v_emp.std_error);
    }
}
