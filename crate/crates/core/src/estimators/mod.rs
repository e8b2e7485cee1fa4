//! Monte Carlo estimators of functionals of a determinantal thinning.
//!
//! The semi-analytic estimators average determinant expressions over
//! realizations of the underlying Poisson process only. The empirical
//! estimators simulate the thinning itself and serve as a cross-check.
//!
//! Ratio estimators (Palm expectations, `G^u`) share replicates between the
//! numerator and the denominator. Their standard error is the delta-method
//! value `sqrt(Σ (y_i - R w_i)² / (n (n - 1))) / mean(w)`.

mod empirical;
mod semi_analytic;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{sample_poisson, GeometryError, Point, PointPattern, Window};
use crate::model::{ModelError, ThinningModel};
use crate::seeds::replicate_rng;

pub use empirical::{
    contact_curve, empirical_contact, empirical_intensity, empirical_laplace, empirical_nearest_neighbour,
    empirical_retention, empirical_summaries, empirical_void, nearest_neighbour_curve,
};
pub use semi_analytic::{
    contact_dist, intensity_measure, joint_retention_probability, laplace_functional, mean_nearest_neighbour_dist,
    nearest_neighbour_dist, palm_expectation, retention_probability, second_moment, void_probability,
    PalmFunctional, MAX_JOINT_ORDER, MAX_PALM_POINTS,
};

/// Number of radii in the default grid.
pub const DEFAULT_GRID_POINTS: usize = 64;

/// A ratio estimator is rejected when its denominator is below this many standard errors.
pub const UNSTABLE_RATIO: f64 = 10.0;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("conditioning probability {mean} is below {UNSTABLE_RATIO} standard errors ({std_error})")]
    UnstableConditioning { mean: f64, std_error: f64 },
}

impl From<GeometryError> for EstimatorError {
    fn from(e: GeometryError) -> Self {
        EstimatorError::Model(e.into())
    }
}

impl From<crate::kernels::KernelError> for EstimatorError {
    fn from(e: crate::kernels::KernelError) -> Self {
        EstimatorError::Model(e.into())
    }
}

/// Monte Carlo settings shared by all estimators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Radius grid for curves; empty means the default grid.
    #[serde(default)]
    pub grid: Vec<f64>,
    /// The Poisson process is drawn on the window grown by this margin and
    /// then cropped back before kernels are evaluated.
    #[serde(default)]
    pub margin: f64,
}

impl MCConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        Self { n_samples, seed, grid: Vec::new(), margin: 0.0 }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        if self.n_samples == 0 {
            return Err(EstimatorError::InvalidArgument("n_samples must be at least 1".into()));
        }
        if !(self.margin >= 0.0 && self.margin.is_finite()) {
            return Err(EstimatorError::InvalidArgument(format!("margin {} must be non-negative", self.margin)));
        }
        validate_grid(&self.grid)
    }
}

fn validate_grid(grid: &[f64]) -> Result<(), EstimatorError> {
    if grid.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(EstimatorError::InvalidArgument("grid radii must be finite and non-negative".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EstimatorError::InvalidArgument("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// `n` equally spaced radii from 0 to `r_max`.
pub fn uniform_grid(r_max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect(),
    }
}

/// A scalar Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

impl Estimate {
    /// Sample mean and its standard error.
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let ss: f64 = samples.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / ((n - 1) as f64 * n as f64)).sqrt()
        } else {
            0.0
        };
        Self { value: mean, std_error: se, n_samples: n }
    }

    /// Ratio `Σy / Σw` with the delta-method standard error.
    pub fn ratio(y: &[f64], w: &[f64]) -> Result<Self, EstimatorError> {
        check_denominator(w)?;
        Ok(ratio_unchecked(y, w))
    }

    /// Proportion `k / n` with an Agresti–Coull standard error, which stays
    /// positive when no (or every) trial succeeds.
    pub fn proportion(successes: usize, trials: usize) -> Self {
        if trials == 0 {
            return Self { value: f64::NAN, std_error: f64::NAN, n_samples: 0 };
        }
        let n = trials as f64;
        let adjusted = (successes as f64 + 2.0) / (n + 4.0);
        Self {
            value: successes as f64 / n,
            std_error: (adjusted * (1.0 - adjusted) / (n + 4.0)).sqrt(),
            n_samples: trials,
        }
    }

    /// `|a - b| / sqrt(se_a² + se_b²)`; zero when both agree exactly.
    pub fn z_score(&self, other: &Estimate) -> f64 {
        let diff = (self.value - other.value).abs();
        if diff == 0.0 {
            return 0.0;
        }
        diff / self.std_error.hypot(other.std_error)
    }
}

fn check_denominator(w: &[f64]) -> Result<(), EstimatorError> {
    let den = Estimate::from_samples(w);
    if den.value > 0.0 && den.value >= UNSTABLE_RATIO * den.std_error {
        Ok(())
    } else {
        Err(EstimatorError::UnstableConditioning { mean: den.value, std_error: den.std_error })
    }
}

fn ratio_unchecked(y: &[f64], w: &[f64]) -> Estimate {
    let n = y.len();
    let sw: f64 = w.iter().sum();
    let r = if sw > 0.0 { y.iter().sum::<f64>() / sw } else { 0.0 };
    let se = if n > 1 && sw > 0.0 {
        let wbar = sw / n as f64;
        let ss: f64 = y.iter().zip(w).map(|(yi, wi)| (yi - r * wi).powi(2)).sum();
        (ss / (n as f64 * (n - 1) as f64)).sqrt() / wbar
    } else {
        0.0
    };
    Estimate { value: r, std_error: se, n_samples: n }
}

/// A function of the radius on a grid, with pointwise standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateCurve {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub n_samples: usize,
}

impl EstimateCurve {
    pub fn from_estimates(radii: Vec<f64>, estimates: &[Estimate], n_samples: usize) -> Self {
        Self {
            radii,
            values: estimates.iter().map(|e| e.value).collect(),
            std_errors: estimates.iter().map(|e| e.std_error).collect(),
            n_samples,
        }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn estimate(&self, i: usize) -> Estimate {
        Estimate { value: self.values[i], std_error: self.std_errors[i], n_samples: self.n_samples }
    }

    /// Linear interpolation of the values at `r`, clamped to the grid ends.
    pub fn value_at(&self, r: f64) -> f64 {
        let k = self.radii.partition_point(|&x| x <= r);
        if k == 0 {
            return self.values[0];
        }
        if k == self.radii.len() {
            return self.values[k - 1];
        }
        let (r0, r1) = (self.radii[k - 1], self.radii[k]);
        let t = (r - r0) / (r1 - r0);
        self.values[k - 1] + t * (self.values[k] - self.values[k - 1])
    }

    /// Largest pointwise difference to a curve on the same grid.
    pub fn sup_distance(&self, other: &EstimateCurve) -> Result<f64, EstimatorError> {
        if self.radii != other.radii {
            return Err(EstimatorError::InvalidArgument("curves are on different grids".into()));
        }
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
    }

    /// Largest pointwise `|a - b| / sqrt(se_a² + se_b²)` against a curve on the same grid.
    pub fn max_z_score(&self, other: &EstimateCurve) -> Result<f64, EstimatorError> {
        if self.radii != other.radii {
            return Err(EstimatorError::InvalidArgument("curves are on different grids".into()));
        }
        Ok((0..self.len()).map(|i| self.estimate(i).z_score(&other.estimate(i))).fold(0.0, f64::max))
    }

    /// Non-decreasing fit by pooled adjacent violators, weighted by `1/se²`
    /// (equal weights where a standard error is zero).
    pub fn isotonized(&self) -> EstimateCurve {
        let weights: Vec<f64> = if self.std_errors.iter().all(|s| *s > 0.0) {
            self.std_errors.iter().map(|s| 1.0 / (s * s)).collect()
        } else {
            vec![1.0; self.len()]
        };
        // Blocks of (mean, weight, length).
        let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(self.len());
        for (v, w) in self.values.iter().zip(&weights) {
            blocks.push((*v, *w, 1));
            while blocks.len() > 1 && blocks[blocks.len() - 2].0 > blocks[blocks.len() - 1].0 {
                let (v2, w2, n2) = blocks.pop().expect("two blocks");
                let (v1, w1, n1) = blocks.pop().expect("two blocks");
                blocks.push(((v1 * w1 + v2 * w2) / (w1 + w2), w1 + w2, n1 + n2));
            }
        }
        let values = blocks.iter().flat_map(|(v, _, n)| std::iter::repeat_n(*v, *n)).collect();
        EstimateCurve { values, ..self.clone() }
    }

    /// `J = (1 - G) / (1 - H)`, truncated before the first radius with `H >= 1`.
    /// The standard error treats `G` and `H` as independent.
    pub fn j_function(g: &EstimateCurve, h: &EstimateCurve) -> Result<EstimateCurve, EstimatorError> {
        if g.radii != h.radii {
            return Err(EstimatorError::InvalidArgument("G and H are on different grids".into()));
        }
        let mut out = EstimateCurve { radii: vec![], values: vec![], std_errors: vec![], n_samples: g.n_samples.min(h.n_samples) };
        for i in 0..g.len() {
            let (one_g, one_h) = (1.0 - g.values[i], 1.0 - h.values[i]);
            if !(one_h > 0.0) {
                break;
            }
            let j = one_g / one_h;
            let rel = (g.std_errors[i] / one_h).hypot(j * h.std_errors[i] / one_h);
            out.radii.push(g.radii[i]);
            out.values.push(j);
            out.std_errors.push(rel);
        }
        Ok(out)
    }
}

/// The underlying Poisson realization on the model window, drawn on the
/// window grown by `margin` and cropped back.
pub fn underlying_pattern<R: Rng + ?Sized>(
    m: &ThinningModel,
    margin: f64,
    rng: &mut R,
) -> Result<PointPattern, EstimatorError> {
    let window = m.poisson.window;
    if margin == 0.0 {
        return Ok(sample_poisson(&m.poisson, rng));
    }
    let grown = m.poisson.on_window(window.extend(margin)?);
    Ok(sample_poisson(&grown, rng).crop(&window)?)
}

/// Runs `f` once per replicate in parallel; results come back in replicate order.
pub(crate) fn run_replicates<T, F>(cfg: &MCConfig, component: &str, f: F) -> Result<Vec<T>, EstimatorError>
where
    T: Send,
    F: Fn(&mut ChaCha8Rng) -> Result<T, EstimatorError> + Sync,
{
    cfg.validate()?;
    (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| f(&mut replicate_rng(cfg.seed, component, i)))
        .collect()
}

/// Requested grid, or the default grid up to `r_max`.
pub(crate) fn grid_or_default(cfg: &MCConfig, r_max: f64) -> Vec<f64> {
    if cfg.grid.is_empty() {
        uniform_grid(r_max, DEFAULT_GRID_POINTS)
    } else {
        cfg.grid.clone()
    }
}

/// Drops radii beyond `r_max`, logging when anything was cut.
pub(crate) fn truncate_grid(mut grid: Vec<f64>, r_max: f64, what: &str) -> Vec<f64> {
    let before = grid.len();
    grid.retain(|r| *r <= r_max * (1.0 + 1e-12));
    if grid.len() < before {
        log::warn!("{what}: grid truncated at r = {r_max} so that the disk stays inside the window");
    }
    grid
}

pub(crate) fn require_inside(w: &Window, x: &Point, what: &str) -> Result<(), EstimatorError> {
    if w.contains(x) {
        Ok(())
    } else {
        Err(EstimatorError::InvalidArgument(format!("{what} ({}, {}) lies outside the window", x.x, x.y)))
    }
}

/// Per-radius ratio estimates from rows of numerators sharing the weights `w`.
pub(crate) fn ratio_curve(
    radii: Vec<f64>,
    rows: &[Vec<f64>],
    w: &[f64],
) -> Result<EstimateCurve, EstimatorError> {
    check_denominator(w)?;
    let estimates: Vec<Estimate> = (0..radii.len())
        .map(|k| {
            let y: Vec<f64> = rows.iter().map(|row| row[k]).collect();
            ratio_unchecked(&y, w)
        })
        .collect();
    Ok(EstimateCurve::from_estimates(radii, &estimates, w.len()))
}

/// Per-radius sample means of the rows.
pub(crate) fn mean_curve(radii: Vec<f64>, rows: &[Vec<f64>]) -> EstimateCurve {
    let estimates: Vec<Estimate> = (0..radii.len())
        .map(|k| Estimate::from_samples(&rows.iter().map(|row| row[k]).collect::<Vec<_>>()))
        .collect();
    EstimateCurve::from_estimates(radii, &estimates, rows.len())
}
