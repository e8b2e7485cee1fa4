//! Maximum-likelihood fitting of the quality exponents `θ` and the Gaussian
//! bandwidth `σ` from (realization, retained subset) training pairs.
//!
//! For fixed `σ` the log-likelihood is concave in `θ`. With `f_x` the feature
//! vector, `L = diag(q) S diag(q)`, `A = (I + L)^{-1}` and `K = I - A`:
//!
//! * `ℓ = Σ_t [2 Σ_{x∈ψ} θ·f_x + log det S_ψ - log det(I + L)]`
//! * `∂ℓ/∂θ = Σ_t [2 Σ_{x∈ψ} f_x - 2 Σ_x K_xx f_x]`
//! * `∂²ℓ/∂θ² = -4 Σ_t Fᵀ (A ∘ K) F`, negative semidefinite.
//!
//! `σ` is chosen by an outer grid search; `θ` by BFGS ascent with Armijo
//! backtracking inside each grid cell.

mod optimizer;

use nalgebra::{DMatrix, Matrix4, Vector4};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{all_neighbour_features, nearest_neighbour_distance, PointPattern};
use crate::kernels::SubsetIndex;
use crate::linalg;
use crate::model::{
    build_l, gaussian_similarity, squared_distances, ModelError, SimilarityParams, ThinningModel, DEFAULT_AMPLITUDE,
    FEATURE_DIM, MAX_QUALITY_EXPONENT,
};

pub use optimizer::AscentTrace;
use optimizer::BfgsSettings;

/// Pairs whose `det L_ψ` falls at or below this value contribute `-∞`.
pub const DET_FLOOR: f64 = 1e-300;

/// Number of log-spaced values in the default σ grid (besides σ = 0).
pub const DEFAULT_SIGMA_COUNT: usize = 16;
/// Default σ grid span, in units of the mean nearest-neighbour distance.
pub const DEFAULT_SIGMA_SPAN: [f64; 2] = [0.1, 5.0];

#[derive(Debug, Error)]
pub enum FitError {
    #[error("training pair {index}: {reason}")]
    InvalidTrainingPair { index: usize, reason: String },
    #[error("no training data")]
    EmptyData,
    #[error("invalid fit configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no σ candidate gave a finite optimum ({tried} tried)")]
    OptimizationFailure { tried: usize, per_sigma: Vec<SigmaFit> },
}

/// An observed realization `φ_t` and the indices of its retained points `ψ_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingPair {
    full: PointPattern,
    retained: SubsetIndex,
}

impl TrainingPair {
    pub fn new(full: PointPattern, retained: SubsetIndex) -> Result<Self, FitError> {
        retained
            .validate(full.len())
            .map_err(|e| FitError::InvalidTrainingPair { index: 0, reason: e.to_string() })?;
        Ok(Self { full, retained })
    }

    /// Locates every retained point in `full` by exact coordinates.
    pub fn from_patterns(full: PointPattern, retained: &PointPattern) -> Result<Self, FitError> {
        if full.window() != retained.window() {
            return Err(FitError::InvalidTrainingPair { index: 0, reason: "windows differ".into() });
        }
        let idx = retained
            .points()
            .iter()
            .enumerate()
            .map(|(j, p)| {
                full.index_of(p).ok_or_else(|| FitError::InvalidTrainingPair {
                    index: 0,
                    reason: format!("retained point {j} ({}, {}) is not in the full pattern", p.x, p.y),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let retained = SubsetIndex::new(idx)
            .map_err(|e| FitError::InvalidTrainingPair { index: 0, reason: e.to_string() })?;
        Ok(Self { full, retained })
    }

    pub fn full(&self) -> &PointPattern {
        &self.full
    }

    pub fn retained(&self) -> &SubsetIndex {
        &self.retained
    }

    pub fn retained_pattern(&self) -> PointPattern {
        self.full.subset(&self.retained).expect("validated indices")
    }
}

/// Mean number of points per unit area over the full patterns.
pub fn estimate_intensity(data: &[TrainingPair]) -> Result<f64, FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    let area: f64 = data.iter().map(|p| p.full.window().area()).sum();
    Ok(data.iter().map(|p| p.full.len()).sum::<usize>() as f64 / area)
}

/// Mean nearest-neighbour distance pooled over the full patterns.
pub fn mean_nearest_neighbour_distance(data: &[TrainingPair]) -> Option<f64> {
    let d: Vec<f64> = data
        .iter()
        .flat_map(|p| (0..p.full.len()).filter_map(move |i| nearest_neighbour_distance(&p.full, i)))
        .collect();
    (!d.is_empty()).then(|| d.iter().sum::<f64>() / d.len() as f64)
}

/// `0` followed by log-spaced values over `DEFAULT_SIGMA_SPAN` times the mean
/// nearest-neighbour distance of the full patterns.
pub fn default_sigma_grid(data: &[TrainingPair]) -> Vec<f64> {
    let mut grid = vec![0.0];
    if let Some(scale) = mean_nearest_neighbour_distance(data) {
        let (lo, hi) = (DEFAULT_SIGMA_SPAN[0].ln(), DEFAULT_SIGMA_SPAN[1].ln());
        let n = DEFAULT_SIGMA_COUNT;
        grid.extend((0..n).map(|i| scale * (lo + (hi - lo) * i as f64 / (n - 1) as f64).exp()));
    }
    grid
}

/// Fit settings; `theta_mask[k]` marks `θ_k` as free, fixed components stay at `init_theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Candidate σ values; `None` uses [`default_sigma_grid`].
    pub sigma_grid: Option<Vec<f64>>,
    pub theta_mask: [bool; FEATURE_DIM],
    pub init_theta: [f64; FEATURE_DIM],
    pub max_iters: usize,
    /// Convergence when the largest free gradient component, divided by the
    /// number of pairs, is at most this.
    pub grad_tol: f64,
    pub armijo_c: f64,
    pub backtrack_factor: f64,
    pub max_backtracks: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            sigma_grid: None,
            theta_mask: [true; FEATURE_DIM],
            init_theta: [0.0; FEATURE_DIM],
            max_iters: 200,
            grad_tol: 1e-7,
            armijo_c: 1e-4,
            backtrack_factor: 0.5,
            max_backtracks: 60,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if let Some(grid) = &self.sigma_grid {
            if grid.is_empty() {
                return Err(FitError::InvalidConfig("sigma grid is empty".into()));
            }
            if grid.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
                return Err(FitError::InvalidConfig("sigma values must be finite and non-negative".into()));
            }
        }
        if !self.theta_mask.iter().any(|&b| b) {
            return Err(FitError::InvalidConfig("no free θ component".into()));
        }
        if self.init_theta.iter().any(|t| !t.is_finite()) {
            return Err(FitError::InvalidConfig("initial θ must be finite".into()));
        }
        if !(self.grad_tol > 0.0) || !(self.armijo_c > 0.0 && self.armijo_c < 1.0) {
            return Err(FitError::InvalidConfig("tolerances must be positive, armijo_c in (0, 1)".into()));
        }
        if !(self.backtrack_factor > 0.0 && self.backtrack_factor < 1.0) || self.max_iters == 0 {
            return Err(FitError::InvalidConfig("backtrack factor in (0, 1) and max_iters ≥ 1 required".into()));
        }
        Ok(())
    }

    fn bfgs(&self) -> BfgsSettings {
        BfgsSettings {
            max_iters: self.max_iters,
            grad_tol: self.grad_tol,
            armijo_c: self.armijo_c,
            backtrack_factor: self.backtrack_factor,
            max_backtracks: self.max_backtracks,
        }
    }
}

/// Outcome of the θ ascent at one σ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaFit {
    pub sigma: f64,
    pub theta: [f64; FEATURE_DIM],
    /// `None` when the objective is `-∞` for every θ at this σ.
    pub loglik: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub theta_star: [f64; FEATURE_DIM],
    pub sigma_star: f64,
    pub loglik_star: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Log-likelihood after every accepted step at the winning σ.
    pub trace: Vec<f64>,
    /// Observed-information standard errors of the free θ components.
    pub std_errors: [Option<f64>; FEATURE_DIM],
    pub theta_mask: [bool; FEATURE_DIM],
    pub per_sigma: Vec<SigmaFit>,
}

/// Features and geometry of one pair, independent of the parameters.
struct Prepared {
    features: DMatrix<f64>,
    sq_dist: DMatrix<f64>,
    retained: Vec<usize>,
    retained_feature_sum: Vector4<f64>,
}

impl Prepared {
    fn new(pair: &TrainingPair) -> Self {
        let feats = all_neighbour_features(&pair.full);
        let n = feats.len();
        let features = DMatrix::from_fn(n, FEATURE_DIM, |i, k| feats[i].vector()[k]);
        let retained = pair.retained.indices().to_vec();
        let mut sum = Vector4::zeros();
        for &i in &retained {
            for k in 0..FEATURE_DIM {
                sum[k] += features[(i, k)];
            }
        }
        Self { features, sq_dist: squared_distances(&pair.full), retained, retained_feature_sum: sum }
    }
}

/// Log-likelihood with value, gradient and Hessian at fixed σ.
pub(crate) struct Objective {
    pairs: Vec<Prepared>,
    similarity: Vec<DMatrix<f64>>,
    log_det_s_retained: Vec<f64>,
}

/// Value, gradient and Hessian with respect to the full θ vector.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub value: f64,
    pub gradient: Vector4<f64>,
    pub hessian: Matrix4<f64>,
}

impl Objective {
    fn new(data: &[TrainingPair], sigma: f64, amplitude: f64) -> Self {
        let pairs: Vec<Prepared> = data.iter().map(Prepared::new).collect();
        let similarity: Vec<DMatrix<f64>> =
            pairs.iter().map(|p| gaussian_similarity(&p.sq_dist, sigma, amplitude)).collect();
        let log_det_s_retained = pairs
            .iter()
            .zip(&similarity)
            .map(|(p, s)| linalg::log_determinant(&linalg::principal_submatrix(s, &p.retained)))
            .collect();
        Self { pairs, similarity, log_det_s_retained }
    }

    /// `None` (read as `-∞`) when some pair is infeasible or a quality overflows.
    pub(crate) fn evaluate(&self, theta: &Vector4<f64>, with_hessian: bool) -> Option<Evaluation> {
        let terms: Vec<Option<Evaluation>> = (0..self.pairs.len())
            .into_par_iter()
            .map(|t| self.pair_term(t, theta, with_hessian))
            .collect();
        let mut total = Evaluation { value: 0.0, gradient: Vector4::zeros(), hessian: Matrix4::zeros() };
        for term in terms {
            let term = term?;
            total.value += term.value;
            total.gradient += term.gradient;
            total.hessian += term.hessian;
        }
        Some(total)
    }

    fn pair_term(&self, t: usize, theta: &Vector4<f64>, with_hessian: bool) -> Option<Evaluation> {
        let p = &self.pairs[t];
        let s = &self.similarity[t];
        let n = p.features.nrows();
        let exponents = &p.features * theta;
        if exponents.iter().any(|e| !(e.abs() <= MAX_QUALITY_EXPONENT)) {
            return None;
        }
        let log_det_l_retained =
            2.0 * p.retained.iter().map(|&i| exponents[i]).sum::<f64>() + self.log_det_s_retained[t];
        if !(log_det_l_retained > DET_FLOOR.ln()) {
            return None;
        }
        let q = exponents.map(f64::exp);
        let m = DMatrix::from_fn(n, n, |i, j| q[i] * s[(i, j)] * q[j] + if i == j { 1.0 } else { 0.0 });
        let chol = m.cholesky()?;
        let log_det_m = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let a = chol.inverse();
        let mut gradient = 2.0 * p.retained_feature_sum;
        for i in 0..n {
            let kxx = 1.0 - a[(i, i)];
            for k in 0..FEATURE_DIM {
                gradient[k] -= 2.0 * kxx * p.features[(i, k)];
            }
        }
        let hessian = if with_hessian {
            // A ∘ K with K = I - A.
            let ak = DMatrix::from_fn(n, n, |i, j| a[(i, j)] * (if i == j { 1.0 } else { 0.0 } - a[(i, j)]));
            let h = p.features.transpose() * ak * &p.features * -4.0;
            Matrix4::from_fn(|i, j| h[(i, j)])
        } else {
            Matrix4::zeros()
        };
        Some(Evaluation { value: log_det_l_retained - log_det_m, gradient, hessian })
    }
}

fn check_data(data: &[TrainingPair]) -> Result<(), FitError> {
    if data.is_empty() {
        return Err(FitError::EmptyData);
    }
    for (index, pair) in data.iter().enumerate() {
        pair.retained
            .validate(pair.full.len())
            .map_err(|e| FitError::InvalidTrainingPair { index, reason: e.to_string() })?;
    }
    Ok(())
}

/// `Σ_t log(det L_{ψ_t}(φ_t) / det(I + L(φ_t)))`; `-∞` when some `det L_ψ ≤ DET_FLOOR`.
pub fn log_likelihood(m: &ThinningModel, data: &[TrainingPair]) -> Result<f64, FitError> {
    check_data(data)?;
    let terms = data
        .par_iter()
        .map(|pair| {
            let l = build_l(m, &pair.full)?;
            let log_det_retained = linalg::log_determinant(&linalg::principal_submatrix(l.entries(), pair.retained.indices()));
            if !(log_det_retained > DET_FLOOR.ln()) {
                return Ok(f64::NEG_INFINITY);
            }
            let n = l.order();
            let normalizer = linalg::log_determinant(&(DMatrix::identity(n, n) + l.entries()));
            Ok(log_det_retained - normalizer)
        })
        .collect::<Result<Vec<f64>, ModelError>>()?;
    Ok(terms.iter().sum())
}

/// `(σ, C)` of a Gaussian or identity similarity.
fn gaussian_parameters(m: &ThinningModel) -> Result<(f64, f64), FitError> {
    match m.similarity {
        SimilarityParams::Gaussian { sigma, amplitude } => Ok((sigma, amplitude)),
        SimilarityParams::Identity => Ok((0.0, 1.0)),
        SimilarityParams::Gram { .. } => {
            Err(FitError::InvalidConfig("derivatives need a Gaussian or identity similarity".into()))
        }
    }
}

fn evaluate_model(m: &ThinningModel, data: &[TrainingPair], with_hessian: bool) -> Result<Evaluation, FitError> {
    check_data(data)?;
    let (sigma, amplitude) = gaussian_parameters(m)?;
    let objective = Objective::new(data, sigma, amplitude);
    objective
        .evaluate(&Vector4::from(m.quality.theta), with_hessian)
        .ok_or_else(|| FitError::InvalidConfig("log-likelihood is -∞ at this θ".into()))
}

/// Gradient of [`log_likelihood`] with respect to all four θ components.
pub fn grad_theta(m: &ThinningModel, data: &[TrainingPair]) -> Result<[f64; FEATURE_DIM], FitError> {
    Ok(evaluate_model(m, data, false)?.gradient.into())
}

/// Hessian of [`log_likelihood`] in θ (row-major).
pub fn hessian_theta(m: &ThinningModel, data: &[TrainingPair]) -> Result<[[f64; FEATURE_DIM]; FEATURE_DIM], FitError> {
    let h = evaluate_model(m, data, true)?.hessian;
    Ok(std::array::from_fn(|i| std::array::from_fn(|j| h[(i, j)])))
}

/// Inverse observed information restricted to the free components.
fn standard_errors(h: &Matrix4<f64>, mask: &[bool; FEATURE_DIM]) -> [Option<f64>; FEATURE_DIM] {
    let free: Vec<usize> = (0..FEATURE_DIM).filter(|&k| mask[k]).collect();
    let info = DMatrix::from_fn(free.len(), free.len(), |i, j| -h[(free[i], free[j])]);
    let mut out = [None; FEATURE_DIM];
    if let Some(cov) = info.cholesky().map(|c| c.inverse()) {
        for (i, &k) in free.iter().enumerate() {
            out[k] = Some(cov[(i, i)].sqrt());
        }
    }
    out
}

/// Grid search over σ with a concave BFGS ascent in θ at each grid value.
pub fn fit(data: &[TrainingPair], cfg: &FitConfig) -> Result<FitResult, FitError> {
    check_data(data)?;
    cfg.validate()?;
    let grid = cfg.sigma_grid.clone().unwrap_or_else(|| default_sigma_grid(data));
    let settings = cfg.bfgs();
    let mut per_sigma = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, Evaluation)> = None;
    for &sigma in &grid {
        let objective = Objective::new(data, sigma, DEFAULT_AMPLITUDE);
        let run = optimizer::maximize(&objective, Vector4::from(cfg.init_theta), &cfg.theta_mask, &settings, data.len());
        log::info!(
            "σ = {sigma:.6}: loglik {:?} after {} iterations (converged: {})",
            run.value, run.iterations, run.converged
        );
        let theta: [f64; FEATURE_DIM] = run.theta.into();
        if run.value.is_some() {
            let eval = objective.evaluate(&run.theta, true).expect("finite at the optimum");
            if best.as_ref().is_none_or(|(_, b)| eval.value > b.value) {
                best = Some((per_sigma.len(), eval));
            }
        }
        per_sigma.push(SigmaFit {
            sigma,
            theta,
            loglik: run.value,
            iterations: run.iterations,
            converged: run.converged,
            trace: run.trace.values,
        });
    }
    let Some((index, eval)) = best else {
        return Err(FitError::OptimizationFailure { tried: grid.len(), per_sigma });
    };
    let winner = per_sigma[index].clone();
    Ok(FitResult {
        theta_star: winner.theta,
        sigma_star: winner.sigma,
        loglik_star: eval.value,
        iterations: winner.iterations,
        converged: winner.converged,
        trace: winner.trace,
        std_errors: standard_errors(&eval.hessian, &cfg.theta_mask),
        theta_mask: cfg.theta_mask,
        per_sigma,
    })
}

/// A chord on which the concavity inequality failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChordViolation {
    pub theta_a: [f64; FEATURE_DIM],
    pub theta_b: [f64; FEATURE_DIM],
    pub weight: f64,
    pub chord_value: f64,
    pub interpolated: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityReport {
    pub trials: usize,
    /// Chords skipped because an endpoint had a `-∞` log-likelihood.
    pub skipped: usize,
    pub violations: Vec<ChordViolation>,
}

/// Absolute slack allowed in the chord inequality.
pub const CONCAVITY_SLACK: f64 = 1e-8;

/// Random-chord test of `ℓ(wθ_a + (1-w)θ_b) ≥ wℓ(θ_a) + (1-w)ℓ(θ_b)` at fixed σ,
/// with θ components drawn uniformly from `[-scale, scale]`.
pub fn concavity_diagnostic<R: Rng + ?Sized>(
    data: &[TrainingPair],
    sigma: f64,
    trials: usize,
    scale: f64,
    rng: &mut R,
) -> Result<ConcavityReport, FitError> {
    check_data(data)?;
    let objective = Objective::new(data, sigma, DEFAULT_AMPLITUDE);
    let value = |th: &Vector4<f64>| objective.evaluate(th, false).map(|e| e.value);
    let mut report = ConcavityReport { trials, skipped: 0, violations: Vec::new() };
    for _ in 0..trials {
        let a = Vector4::from_fn(|_, _| rng.random_range(-scale..=scale));
        let b = Vector4::from_fn(|_, _| rng.random_range(-scale..=scale));
        let w: f64 = rng.random_range(0.0..1.0);
        let mid = a * w + b * (1.0 - w);
        let (Some(fa), Some(fb), Some(fm)) = (value(&a), value(&b), value(&mid)) else {
            report.skipped += 1;
            continue;
        };
        let interpolated = w * fa + (1.0 - w) * fb;
        if fm < interpolated - CONCAVITY_SLACK {
            report.violations.push(ChordViolation {
                theta_a: a.into(),
                theta_b: b.into(),
                weight: w,
                chord_value: fm,
                interpolated,
            });
        }
    }
    Ok(report)
}
