//! Estimators that average determinant formulas over the underlying Poisson
//! process; the thinning itself is never simulated (except for sampled Palm
//! functionals).

use nalgebra::DMatrix;

use super::{
    grid_or_default, mean_curve, ratio_curve, require_inside, run_replicates, truncate_grid, underlying_pattern,
    Estimate, EstimateCurve, EstimatorError, MCConfig,
};
use crate::geometry::{Point, PointPattern, Window};
use crate::kernels::{conditional_laplace, palm_kernel_schur, sample_dpp, SubsetIndex, SymmetricKernel, SCHUR_TOL};
use crate::linalg;
use crate::model::{build_k, ThinningModel};

/// Largest number of points in a joint retention probability.
pub const MAX_JOINT_ORDER: usize = 4;
/// Largest number of conditioning points in a Palm expectation.
pub const MAX_PALM_POINTS: usize = 2;

/// Functional `h` of the reduced Palm pattern.
pub enum PalmFunctional<'a> {
    /// Indicator that no point falls in the region; evaluated in closed form.
    Void(Window),
    /// Arbitrary functional, evaluated on one draw of the Palm pattern per replicate.
    Sampled(&'a (dyn Fn(&PointPattern) -> f64 + Sync)),
}

/// `K(φ ∪ extra)`; the extra points take the last indices.
fn kernel_with(m: &ThinningModel, phi: &PointPattern, extra: &[Point]) -> Result<SymmetricKernel, EstimatorError> {
    Ok(build_k(m, &phi.with_appended(extra)?)?)
}

/// Indices of `points` sorted by distance to `x`, with the sorted distances.
fn by_distance(points: &[Point], x: &Point) -> (Vec<usize>, Vec<f64>) {
    let mut order: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (p.distance(x), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    order.into_iter().map(|(d, i)| (i, d)).unzip()
}

/// `[1 - det((I - K)_{points within r})]` for every radius, using one factorization
/// of `I - K` permuted into distance order.
fn hit_probabilities(k: &DMatrix<f64>, order: &[usize], dists: &[f64], radii: &[f64]) -> Vec<f64> {
    let n = order.len();
    let complement = DMatrix::from_fn(n, n, |i, j| {
        let v = -k[(order[i], order[j])];
        if i == j {
            1.0 + v
        } else {
            v
        }
    });
    let minors = linalg::leading_principal_minors(&complement);
    radii
        .iter()
        .map(|r| {
            let count = dists.partition_point(|d| d <= r);
            1.0 - minors[count]
        })
        .collect()
}

/// `π(x) = E[K_xx(Φ ∪ x)]`.
pub fn retention_probability(m: &ThinningModel, x: Point, cfg: &MCConfig) -> Result<Estimate, EstimatorError> {
    require_inside(&m.poisson.window, &x, "x")?;
    let samples = run_replicates(cfg, "retention", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        let n = phi.len();
        Ok(kernel_with(m, &phi, &[x])?.get(n, n))
    })?;
    Ok(Estimate::from_samples(&samples))
}

/// `π(x_1, …, x_n) = E[det K_{x_1..x_n}(Φ ∪ {x_i})]`; zero when two points coincide.
pub fn joint_retention_probability(
    m: &ThinningModel,
    xs: &[Point],
    cfg: &MCConfig,
) -> Result<Estimate, EstimatorError> {
    cfg.validate()?;
    if xs.len() > MAX_JOINT_ORDER {
        return Err(EstimatorError::InvalidArgument(format!(
            "at most {MAX_JOINT_ORDER} points, got {}",
            xs.len()
        )));
    }
    for x in xs {
        require_inside(&m.poisson.window, x, "point")?;
    }
    let coincident = (0..xs.len()).any(|i| (0..i).any(|j| xs[i] == xs[j]));
    if coincident {
        return Ok(Estimate { value: 0.0, std_error: 0.0, n_samples: cfg.n_samples });
    }
    let samples = run_replicates(cfg, "joint-retention", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        let k = kernel_with(m, &phi, xs)?;
        let last = SubsetIndex::new((phi.len()..phi.len() + xs.len()).collect())?;
        Ok(k.restrict(&last)?.determinant())
    })?;
    Ok(Estimate::from_samples(&samples))
}

fn check_region(m: &ThinningModel, b: &Window) -> Result<Window, EstimatorError> {
    let b = b.validated()?;
    if !m.poisson.window.contains_window(&b) {
        return Err(EstimatorError::InvalidArgument("region must lie inside the window".into()));
    }
    Ok(b)
}

fn scaled(e: Estimate, c: f64) -> Estimate {
    Estimate { value: c * e.value, std_error: c * e.std_error, n_samples: e.n_samples }
}

/// First moment measure `M(B) = λ|B| E[K_UU(Φ ∪ U)]`, `U` uniform in `B`.
pub fn intensity_measure(m: &ThinningModel, b: &Window, cfg: &MCConfig) -> Result<Estimate, EstimatorError> {
    let b = check_region(m, b)?;
    let samples = run_replicates(cfg, "intensity", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        let u = b.sample_uniform(rng);
        let n = phi.len();
        Ok(kernel_with(m, &phi, &[u])?.get(n, n))
    })?;
    Ok(scaled(Estimate::from_samples(&samples), m.poisson.intensity * b.area()))
}

/// Second factorial moment measure `λ²|B1||B2| E[det K_{U,V}(Φ ∪ {U, V})]`.
pub fn second_moment(m: &ThinningModel, b1: &Window, b2: &Window, cfg: &MCConfig) -> Result<Estimate, EstimatorError> {
    let b1 = check_region(m, b1)?;
    let b2 = check_region(m, b2)?;
    let samples = run_replicates(cfg, "second-moment", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        let u = b1.sample_uniform(rng);
        let v = b2.sample_uniform(rng);
        let n = phi.len();
        let k = kernel_with(m, &phi, &[u, v])?;
        Ok(k.restrict(&SubsetIndex::new(vec![n, n + 1])?)?.determinant())
    })?;
    let lambda = m.poisson.intensity;
    Ok(scaled(Estimate::from_samples(&samples), lambda * lambda * b1.area() * b2.area()))
}

/// `ν(B) = E[det((I - K(Φ))_{Φ ∩ B})]`.
pub fn void_probability(m: &ThinningModel, b: &Window, cfg: &MCConfig) -> Result<Estimate, EstimatorError> {
    let b = check_region(m, b)?;
    let samples = run_replicates(cfg, "void", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        let inside: Vec<usize> = (0..phi.len()).filter(|&i| b.contains(&phi.point(i))).collect();
        if inside.is_empty() {
            return Ok(1.0);
        }
        let k = build_k(m, &phi)?;
        let block = linalg::principal_submatrix(k.entries(), &inside);
        Ok(linalg::determinant(&(DMatrix::identity(inside.len(), inside.len()) - block)))
    })?;
    Ok(Estimate::from_samples(&samples))
}

/// `L(f) = E[det(I - K'(Φ))]` with the Laplace-modified kernel `K'`.
pub fn laplace_functional(
    m: &ThinningModel,
    f: &(dyn Fn(&Point) -> f64 + Sync),
    cfg: &MCConfig,
) -> Result<Estimate, EstimatorError> {
    let samples = run_replicates(cfg, "laplace", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        if phi.is_empty() {
            return Ok(1.0);
        }
        let fvals: Vec<f64> = phi.points().iter().map(f).collect();
        Ok(conditional_laplace(&build_k(m, &phi)?, &fvals)?)
    })?;
    Ok(Estimate::from_samples(&samples))
}

/// `E[h(Ψ^T)] = E[E[h | Φ] det K_T(Φ ∪ T)] / π(T)`, with the reduced Palm
/// kernel given by the Schur complement.
pub fn palm_expectation(
    m: &ThinningModel,
    t: &[Point],
    h: &PalmFunctional<'_>,
    cfg: &MCConfig,
) -> Result<Estimate, EstimatorError> {
    cfg.validate()?;
    if t.is_empty() || t.len() > MAX_PALM_POINTS {
        return Err(EstimatorError::InvalidArgument(format!(
            "between 1 and {MAX_PALM_POINTS} conditioning points, got {}",
            t.len()
        )));
    }
    for x in t {
        require_inside(&m.poisson.window, x, "conditioning point")?;
    }
    if t.len() == 2 && t[0] == t[1] {
        return Err(EstimatorError::InvalidArgument("conditioning points must be distinct".into()));
    }
    let pairs = run_replicates(cfg, "palm", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        let n = phi.len();
        let k = kernel_with(m, &phi, t)?;
        let cond = SubsetIndex::new((n..n + t.len()).collect())?;
        let w = k.restrict(&cond)?.determinant();
        // Negligible weight is dropped, so an everywhere-vanishing one fails the denominator check.
        if !(w > SCHUR_TOL) {
            return Ok((0.0, 0.0));
        }
        let palm = palm_kernel_schur(&k, &cond)?;
        let inner = match h {
            PalmFunctional::Void(b) => {
                let inside: Vec<usize> = (0..n).filter(|&i| b.contains(&phi.point(i))).collect();
                let block = linalg::principal_submatrix(palm.entries(), &inside);
                linalg::determinant(&(DMatrix::identity(inside.len(), inside.len()) - block))
            }
            PalmFunctional::Sampled(func) => {
                let kept = sample_dpp(&palm, rng)?;
                func(&phi.subset(&kept)?)
            }
        };
        Ok((w * inner, w))
    })?;
    let (y, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Estimate::ratio(&y, &w)
}

/// Numerator row and weight of the `G^u` ratio for one realization.
fn nearest_neighbour_row(
    m: &ThinningModel,
    phi: &PointPattern,
    u: Point,
    radii: &[f64],
) -> Result<(Vec<f64>, f64), EstimatorError> {
    let n = phi.len();
    let k = kernel_with(m, phi, &[u])?;
    let w = k.get(n, n);
    if !(w > SCHUR_TOL) {
        return Ok((vec![0.0; radii.len()], 0.0));
    }
    let palm = palm_kernel_schur(&k, &SubsetIndex::singleton(n))?;
    let (order, dists) = by_distance(phi.points(), &u);
    let hits = hit_probabilities(palm.entries(), &order, &dists, radii);
    Ok((hits.into_iter().map(|g| g * w).collect(), w))
}

/// Nearest-neighbour distance distribution `G^u(r)` of a point of the thinned
/// process located at `u`.
pub fn nearest_neighbour_dist(m: &ThinningModel, u: Point, cfg: &MCConfig) -> Result<EstimateCurve, EstimatorError> {
    let window = m.poisson.window;
    require_inside(&window, &u, "u")?;
    let reach = window.distance_to_boundary(&u);
    let radii = truncate_grid(grid_or_default(cfg, reach), reach, "nearest-neighbour distribution");
    let results = run_replicates(cfg, "nearest-neighbour", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        nearest_neighbour_row(m, &phi, u, &radii)
    })?;
    let (rows, w): (Vec<Vec<f64>>, Vec<f64>) = results.into_iter().unzip();
    ratio_curve(radii, &rows, &w)
}

/// `G^U` averaged over the mean measure: `U` is uniform in the window and
/// weighted by its retention probability. Disks are not required to stay
/// inside the window, so this is the quantity a pooled empirical `G` of
/// window-restricted samples estimates.
pub fn mean_nearest_neighbour_dist(m: &ThinningModel, cfg: &MCConfig) -> Result<EstimateCurve, EstimatorError> {
    let window = m.poisson.window;
    let radii = grid_or_default(cfg, window.distance_to_boundary(&window.center()));
    let results = run_replicates(cfg, "mean-nearest-neighbour", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        let u = window.sample_uniform(rng);
        nearest_neighbour_row(m, &phi, u, &radii)
    })?;
    let (rows, w): (Vec<Vec<f64>>, Vec<f64>) = results.into_iter().unzip();
    ratio_curve(radii, &rows, &w)
}

/// Contact distribution `H_o(r) = 1 - ν(B_o(r))`, all radii from shared replicates.
pub fn contact_dist(m: &ThinningModel, o: Point, cfg: &MCConfig) -> Result<EstimateCurve, EstimatorError> {
    let window = m.poisson.window;
    require_inside(&window, &o, "o")?;
    let reach = window.distance_to_boundary(&o);
    let radii = truncate_grid(grid_or_default(cfg, reach), reach, "contact distribution");
    let rows = run_replicates(cfg, "contact", |rng| {
        let phi = underlying_pattern(m, cfg.margin, rng)?;
        if phi.is_empty() {
            return Ok(vec![0.0; radii.len()]);
        }
        let k = build_k(m, &phi)?;
        let (order, dists) = by_distance(phi.points(), &o);
        Ok(hit_probabilities(k.entries(), &order, &dists, &radii))
    })?;
    Ok(mean_curve(radii, &rows))
}
