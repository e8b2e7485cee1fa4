//! Determinantal thinning kernels built from a quality model and a similarity matrix.
//!
//! For a realization `φ`, the L-ensemble is `L = diag(q) S diag(q)` with
//! qualities `q_x = exp(θ · (1, d1, d2, d3))` computed from nearest-neighbour
//! distances inside `φ`, and `S` a Gaussian, Gram or identity similarity.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{all_neighbour_features, sample_poisson, GeometryError, PointPattern, PoissonModel};
use crate::kernels::{l_to_k, sample_dpp, KernelError, SubsetIndex, SymmetricKernel};

/// Number of quality features: constant, d1, d2, d3.
pub const FEATURE_DIM: usize = 4;
/// Feature layout tag written to model files.
pub const FEATURE_SPEC: &str = "const,d1,d2,d3";
/// Similarity amplitude `C`; fixed during fitting.
pub const DEFAULT_AMPLITUDE: f64 = 1.0;
/// Largest admissible `|θᵀf|` before `exp` is treated as overflowing.
pub const MAX_QUALITY_EXPONENT: f64 = 700.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("quality exponent {exponent} at point {index} exceeds ±{MAX_QUALITY_EXPONENT}")]
    QualityOverflow { index: usize, exponent: f64 },
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("expected {expected} similarity vectors, pattern has {got} points")]
    DimensionMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityParams {
    pub theta: [f64; FEATURE_DIM],
}

impl QualityParams {
    pub fn new(theta: [f64; FEATURE_DIM]) -> Self {
        Self { theta }
    }

    /// `θᵀf` for a feature vector.
    pub fn exponent(&self, features: &[f64; FEATURE_DIM]) -> f64 {
        self.theta.iter().zip(features).map(|(t, f)| t * f).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SimilarityParams {
    /// `C exp(-|x - y|² / σ²)`; `σ = 0` selects the identity exactly.
    Gaussian { sigma: f64, amplitude: f64 },
    /// `S = VᵀV` with one column per pattern point.
    Gram { vectors: Vec<Vec<f64>> },
    Identity,
}

impl SimilarityParams {
    pub fn gaussian(sigma: f64) -> Self {
        SimilarityParams::Gaussian { sigma, amplitude: DEFAULT_AMPLITUDE }
    }

    /// Gaussian length scale, with the identity reported as `σ = 0`.
    pub fn sigma(&self) -> Option<f64> {
        match *self {
            SimilarityParams::Gaussian { sigma, .. } => Some(sigma),
            SimilarityParams::Identity => Some(0.0),
            SimilarityParams::Gram { .. } => None,
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        match self {
            SimilarityParams::Gaussian { sigma, amplitude } => {
                if !(sigma.is_finite() && *sigma >= 0.0) {
                    return Err(ModelError::InvalidParameter(format!("sigma {sigma} must be >= 0")));
                }
                if !(amplitude.is_finite() && *amplitude > 0.0) {
                    return Err(ModelError::InvalidParameter(format!("amplitude {amplitude} must be > 0")));
                }
            }
            SimilarityParams::Gram { vectors } => {
                let dim = vectors.first().map_or(0, Vec::len);
                if vectors.iter().any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite())) {
                    return Err(ModelError::InvalidParameter("Gram vectors must be finite with equal length".into()));
                }
            }
            SimilarityParams::Identity => {}
        }
        Ok(())
    }
}

/// Underlying Poisson process plus the map from realizations to L-ensembles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinningModel {
    pub quality: QualityParams,
    pub similarity: SimilarityParams,
    pub poisson: PoissonModel,
}

impl ThinningModel {
    pub fn new(
        quality: QualityParams,
        similarity: SimilarityParams,
        poisson: PoissonModel,
    ) -> Result<Self, ModelError> {
        if quality.theta.iter().any(|t| !t.is_finite()) {
            return Err(ModelError::InvalidParameter("theta must be finite".into()));
        }
        similarity.validate()?;
        let poisson = PoissonModel::new(poisson.intensity, poisson.window)?;
        Ok(Self { quality, similarity, poisson })
    }

    /// Gaussian similarity with `C = 1` (identity when `sigma == 0`).
    pub fn gaussian(theta: [f64; FEATURE_DIM], sigma: f64, poisson: PoissonModel) -> Result<Self, ModelError> {
        Self::new(QualityParams::new(theta), SimilarityParams::gaussian(sigma), poisson)
    }

    pub fn quality_scores(&self, p: &PointPattern) -> Result<Vec<f64>, ModelError> {
        quality_scores(self, p)
    }

    pub fn similarity_matrix(&self, p: &PointPattern) -> Result<SymmetricKernel, ModelError> {
        similarity_matrix(self, p)
    }

    pub fn build_l(&self, p: &PointPattern) -> Result<SymmetricKernel, ModelError> {
        build_l(self, p)
    }

    pub fn build_k(&self, p: &PointPattern) -> Result<SymmetricKernel, ModelError> {
        build_k(self, p)
    }
}

/// `q_x = exp(θ · (1, d1, d2, d3))` for every point of `p`.
pub fn quality_scores(m: &ThinningModel, p: &PointPattern) -> Result<Vec<f64>, ModelError> {
    all_neighbour_features(p)
        .iter()
        .enumerate()
        .map(|(index, f)| {
            let exponent = m.quality.exponent(&f.vector());
            if !(exponent.abs() <= MAX_QUALITY_EXPONENT) {
                Err(ModelError::QualityOverflow { index, exponent })
            } else {
                Ok(exponent.exp())
            }
        })
        .collect()
}

/// Gaussian kernel on squared distances, `C exp(-d² / σ²)`.
pub(crate) fn gaussian_similarity(sq_dist: &DMatrix<f64>, sigma: f64, amplitude: f64) -> DMatrix<f64> {
    let n = sq_dist.nrows();
    if sigma == 0.0 {
        return DMatrix::identity(n, n) * amplitude;
    }
    let inv = 1.0 / (sigma * sigma);
    sq_dist.map(|d2| amplitude * (-d2 * inv).exp())
}

pub(crate) fn squared_distances(p: &PointPattern) -> DMatrix<f64> {
    let pts = p.points();
    DMatrix::from_fn(pts.len(), pts.len(), |i, j| pts[i].distance_squared(&pts[j]))
}

pub fn similarity_matrix(m: &ThinningModel, p: &PointPattern) -> Result<SymmetricKernel, ModelError> {
    let n = p.len();
    let s = match &m.similarity {
        SimilarityParams::Gaussian { sigma, amplitude } => {
            gaussian_similarity(&squared_distances(p), *sigma, *amplitude)
        }
        SimilarityParams::Identity => DMatrix::identity(n, n),
        SimilarityParams::Gram { vectors } => {
            if vectors.len() != n {
                return Err(ModelError::DimensionMismatch { expected: vectors.len(), got: n });
            }
            DMatrix::from_fn(n, n, |i, j| vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum())
        }
    };
    Ok(SymmetricKernel::new(s)?)
}

/// `L = diag(q) S diag(q)`.
pub fn build_l(m: &ThinningModel, p: &PointPattern) -> Result<SymmetricKernel, ModelError> {
    let q = quality_scores(m, p)?;
    let s = similarity_matrix(m, p)?;
    let n = p.len();
    let l = DMatrix::from_fn(n, n, |i, j| q[i] * s.get(i, j) * q[j]);
    Ok(SymmetricKernel::new(l)?)
}

/// Marginal kernel `K = L (I + L)^{-1}` of the thinning of `p`.
pub fn build_k(m: &ThinningModel, p: &PointPattern) -> Result<SymmetricKernel, ModelError> {
    Ok(l_to_k(&build_l(m, p)?)?)
}

/// Draws the retained subset of a given realization.
pub fn thin<R: Rng + ?Sized>(m: &ThinningModel, p: &PointPattern, rng: &mut R) -> Result<SubsetIndex, ModelError> {
    Ok(sample_dpp(&build_k(m, p)?, rng)?)
}

/// `(φ, ψ)`: a Poisson realization on the model window and its determinantal thinning.
pub fn sample_thinned<R: Rng + ?Sized>(
    m: &ThinningModel,
    rng: &mut R,
) -> Result<(PointPattern, PointPattern), ModelError> {
    let full = sample_poisson(&m.poisson, rng);
    let kept = thin(m, &full, rng)?;
    let retained = full.subset(&kept)?;
    Ok((full, retained))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Window};
    use crate::kernels::{brute_force_enumerate, k_to_l};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn poisson() -> PoissonModel {
        PoissonModel::new(10.0, Window::unit_disk()).unwrap()
    }

    fn pattern(points: &[(f64, f64)]) -> PointPattern {
        PointPattern::new(points.iter().map(|&(x, y)| Point::new(x, y)).collect(), Window::unit_disk()).unwrap()
    }

    fn random_pattern(seed: u64) -> PointPattern {
        sample_poisson(&poisson(), &mut ChaCha8Rng::seed_from_u64(seed))
    }

    #[test]
    fn quality_examples() {
        let p = pattern(&[(0.0, 0.0), (0.3, 0.1), (-0.2, 0.4)]);
        let m = ThinningModel::gaussian([0.0; 4], 0.0, poisson()).unwrap();
        assert_eq!(quality_scores(&m, &p).unwrap(), vec![1.0; 3]);
        let m = ThinningModel::gaussian([1.0, 0.0, 0.0, 0.0], 0.0, poisson()).unwrap();
        assert!(quality_scores(&m, &p).unwrap().iter().all(|&q| q == std::f64::consts::E));
    }

    #[test]
    fn quality_with_reported_triangle_parameters() {
        let q = QualityParams::new([-4.0779, 2.7934, 1.2445, 2.1173]);
        let exponent = q.exponent(&[1.0, 0.1, 0.2, 0.25]);
        // -4.0779 + 0.27934 + 0.2489 + 0.529325
        assert!((exponent - -3.020335).abs() < 1e-12);
    }

    #[test]
    fn quality_overflow_guard() {
        let p = pattern(&[(0.0, 0.0), (0.5, 0.0)]);
        let m = ThinningModel::gaussian([701.0, 0.0, 0.0, 0.0], 0.0, poisson()).unwrap();
        assert!(matches!(quality_scores(&m, &p), Err(ModelError::QualityOverflow { index: 0, .. })));
    }

    #[test]
    fn gaussian_similarity_examples() {
        let p = pattern(&[(0.0, 0.0), (1.0, 0.0), (-0.9, 0.0)]);
        let m = ThinningModel::gaussian([0.0; 4], 1.5679, poisson()).unwrap();
        let s = similarity_matrix(&m, &p).unwrap();
        assert_eq!(s.get(0, 0), 1.0);
        let expected = (-1.0 / (1.5679f64 * 1.5679)).exp();
        assert!((s.get(0, 1) - expected).abs() < 1e-15);
        assert!((expected - 0.665788).abs() < 5e-7);
        // 1.9 apart with a small length scale: effectively zero.
        let m = ThinningModel::gaussian([0.0; 4], 0.1, poisson()).unwrap();
        assert!(similarity_matrix(&m, &p).unwrap().get(1, 2) < 1e-100);
    }

    #[test]
    fn sigma_zero_is_identity() {
        let p = random_pattern(1);
        let m = ThinningModel::gaussian([0.0; 4], 0.0, poisson()).unwrap();
        assert_eq!(similarity_matrix(&m, &p).unwrap(), SymmetricKernel::identity(p.len()));
    }

    #[test]
    fn gram_similarity() {
        let p = pattern(&[(0.0, 0.0), (0.5, 0.0)]);
        let sim = SimilarityParams::Gram { vectors: vec![vec![1.0, 0.0], vec![0.6, 0.8]] };
        let m = ThinningModel::new(QualityParams::new([0.0; 4]), sim, poisson()).unwrap();
        let s = similarity_matrix(&m, &p).unwrap();
        assert!((s.get(0, 1) - 0.6).abs() < 1e-15);
        assert!((s.get(1, 1) - 1.0).abs() < 1e-15);
        let three = pattern(&[(0.0, 0.0), (0.5, 0.0), (0.0, 0.5)]);
        assert!(matches!(similarity_matrix(&m, &three), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn build_l_examples() {
        let p = random_pattern(2);
        let m = ThinningModel::gaussian([0.0; 4], 0.3, poisson()).unwrap();
        assert_eq!(build_l(&m, &p).unwrap(), similarity_matrix(&m, &p).unwrap());

        let m = ThinningModel::gaussian([0.2, -1.0, 0.5, 0.3], 0.0, poisson()).unwrap();
        let q = quality_scores(&m, &p).unwrap();
        let l = build_l(&m, &p).unwrap();
        for i in 0..p.len() {
            for j in 0..p.len() {
                let expected = if i == j { q[i] * q[i] } else { 0.0 };
                assert!((l.get(i, j) - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn build_l_is_psd() {
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
            let p = sample_poisson(&poisson(), &mut rng);
            let theta = [rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let m = ThinningModel::gaussian(theta, rng.random_range(0.0..1.0), poisson()).unwrap();
            build_l(&m, &p).unwrap().check_psd().unwrap();
        }
    }

    #[test]
    fn build_k_examples() {
        let m = ThinningModel::gaussian([0.0; 4], 0.0, poisson()).unwrap();
        assert_eq!(build_k(&m, &PointPattern::empty(Window::unit_disk())).unwrap().order(), 0);
        let p = random_pattern(3);
        let k = build_k(&m, &p).unwrap();
        for i in 0..p.len() {
            for j in 0..p.len() {
                let expected = if i == j { 0.5 } else { 0.0 };
                assert!((k.get(i, j) - expected).abs() < 1e-12);
            }
        }

        let m = ThinningModel::gaussian([0.3, 0.5, -0.2, 0.1], 0.25, poisson()).unwrap();
        let l = build_l(&m, &p).unwrap();
        let back = k_to_l(&build_k(&m, &p).unwrap()).unwrap();
        let scale = l.max_abs();
        for i in 0..p.len() {
            for j in 0..p.len() {
                assert!((back.get(i, j) - l.get(i, j)).abs() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn retention_increases_with_theta0() {
        for seed in 0..20 {
            let p = random_pattern(100 + seed);
            let low = ThinningModel::gaussian([0.0, 0.4, -0.3, 0.2], 0.3, poisson()).unwrap();
            let high = ThinningModel::gaussian([0.5, 0.4, -0.3, 0.2], 0.3, poisson()).unwrap();
            let (kl, kh) = (build_k(&low, &p).unwrap(), build_k(&high, &p).unwrap());
            for i in 0..p.len() {
                assert!(kh.get(i, i) > kl.get(i, i));
            }
        }
    }

    #[test]
    fn identity_similarity_is_independent_thinning() {
        // q_x <= 1 with S = I: the L-ensemble law is independent thinning with q²/(1+q²).
        let p = pattern(&[(0.0, 0.0), (0.3, 0.1), (-0.2, 0.4), (0.5, -0.5), (-0.6, -0.2), (0.1, 0.8)]);
        let m = ThinningModel::gaussian([-0.5, -0.3, -0.2, -0.1], 0.0, poisson()).unwrap();
        let q = quality_scores(&m, &p).unwrap();
        assert!(q.iter().all(|&v| v <= 1.0));
        let dist = brute_force_enumerate(&build_l(&m, &p).unwrap()).unwrap();
        let probs: Vec<f64> = q.iter().map(|v| v * v / (1.0 + v * v)).collect();
        let tv: f64 = dist
            .iter()
            .map(|(s, pr)| {
                let indep: f64 = (0..p.len()).map(|i| if s.contains(i) { probs[i] } else { 1.0 - probs[i] }).product();
                (pr - indep).abs()
            })
            .sum::<f64>()
            * 0.5;
        assert!(tv <= 1e-10);
    }

    #[test]
    fn very_low_quality_retains_nothing() {
        let m = ThinningModel::gaussian([-20.0, 0.0, 0.0, 0.0], 0.2, poisson()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let (full, kept) = sample_thinned(&m, &mut rng).unwrap();
            assert!(kept.is_empty(), "{} of {}", kept.len(), full.len());
        }
    }

    #[test]
    fn identity_half_retention_is_binomial() {
        let m = ThinningModel::gaussian([0.0; 4], 0.0, poisson()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (mut total, mut kept) = (0usize, 0usize);
        for _ in 0..2000 {
            let (full, retained) = sample_thinned(&m, &mut rng).unwrap();
            total += full.len();
            kept += retained.len();
            assert!(retained.points().iter().all(|x| full.index_of(x).is_some()));
        }
        let freq = kept as f64 / total as f64;
        assert!((freq - 0.5).abs() <= 4.0 * (0.25 / total as f64).sqrt(), "freq {freq}");
    }
}
