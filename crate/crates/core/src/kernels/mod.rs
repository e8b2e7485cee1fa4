//! Discrete determinantal point processes on a finite ground set.
//!
//! A [`SymmetricKernel`] plays three roles in this crate: the marginal kernel
//! `K` (inclusion probabilities are principal minors of `K`), the L-ensemble
//! `L` (subset probabilities are `det(L_s) / det(I + L)`), and the similarity
//! matrix `S` used to build `L`. The functions in this module are the exact
//! finite-state algebra everything else is built on.

mod eigen;
mod enumerate;
mod palm;
mod sampler;

pub use eigen::EigenDecomposition;
pub use enumerate::{brute_force_enumerate, SubsetDistribution, MAX_ENUMERATION_ORDER};
pub use palm::{palm_borodin_rains, palm_kernel_schur};
pub use sampler::sample_dpp;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg;

/// Relative PSD slack: eigenvalues in `[-PSD_RTOL * |M|_max, 0)` are clipped to zero.
pub const PSD_RTOL: f64 = 1e-9;
/// Absolute floor on the PSD slack so that tiny kernels are not rejected for round-off.
pub const PSD_ATOL: f64 = 1e-15;
/// Reconstruction tolerance for eigendecompositions (relative to `|M|_max`).
pub const EIG_TOL: f64 = 1e-8;
/// Distance from 1 below which `K` is considered to have no L-ensemble.
pub const INV_TOL: f64 = 1e-12;
/// Conditioning events with `det(K_cond)` at or below this are rejected.
pub const SCHUR_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("subset index {index} out of range for kernel of order {order}")]
    InvalidSubset { index: usize, order: usize },
    #[error("subset contains duplicate index {index}")]
    DuplicateIndex { index: usize },
    #[error("kernel is not positive semi-definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },
    #[error("kernel is not a marginal kernel (largest eigenvalue {max_eigenvalue})")]
    NotMarginal { max_eigenvalue: f64 },
    #[error("kernel has no L-ensemble representation (largest eigenvalue {max_eigenvalue})")]
    NoLRepresentation { max_eigenvalue: f64 },
    #[error("function value {value} at element {index} must be finite-or-infinite and non-negative")]
    InvalidFunction { index: usize, value: f64 },
    #[error("expected {expected} function values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("conditioning event has probability {det:e} (at or below the Schur tolerance)")]
    ZeroProbabilityConditioning { det: f64 },
    #[error("cannot condition on the full ground set")]
    ConditionOnFullSet,
    #[error("numeric failure: {context} (residual {residual:e})")]
    Numeric { context: &'static str, residual: f64 },
    #[error("order {order} exceeds enumeration limit {max}")]
    TooLarge { order: usize, max: usize },
}

/// Strictly increasing positions into a kernel's ground set.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct SubsetIndex(Vec<usize>);

impl SubsetIndex {
    /// Sorts the indices; duplicates are rejected.
    pub fn new(mut indices: Vec<usize>) -> Result<Self, KernelError> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(KernelError::DuplicateIndex { index: w[0] });
        }
        Ok(Self(indices))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn full(order: usize) -> Self {
        Self((0..order).collect())
    }

    pub fn singleton(i: usize) -> Self {
        Self(vec![i])
    }

    /// Subset encoded by the set bits of `mask` (bit `i` = element `i`).
    pub fn from_mask(mask: u64, order: usize) -> Self {
        Self((0..order).filter(|&i| mask >> i & 1 == 1).collect())
    }

    pub fn to_mask(&self) -> u64 {
        self.0.iter().fold(0, |m, &i| m | 1 << i)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    /// Elements of `0..order` not in this subset.
    pub fn complement(&self, order: usize) -> Self {
        Self((0..order).filter(|&i| !self.contains(i)).collect())
    }

    pub fn validate(&self, order: usize) -> Result<(), KernelError> {
        match self.0.iter().find(|&&i| i >= order) {
            Some(&index) => Err(KernelError::InvalidSubset { index, order }),
            None => Ok(()),
        }
    }
}

impl FromIterator<usize> for SubsetIndex {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }
}

/// Real symmetric matrix indexed by a labelled finite ground set.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricKernel {
    entries: DMatrix<f64>,
    labels: Vec<usize>,
}

impl SymmetricKernel {
    /// Wraps a square matrix, storing it exactly symmetrized as `(M + Mᵀ)/2`.
    ///
    /// Asymmetry beyond round-off (`1e-9` relative) is an error.
    pub fn new(entries: DMatrix<f64>) -> Result<Self, KernelError> {
        let (rows, cols) = entries.shape();
        if rows != cols {
            return Err(KernelError::NotSquare { rows, cols });
        }
        for j in 0..cols {
            for i in 0..rows {
                if !entries[(i, j)].is_finite() {
                    return Err(KernelError::NonFinite { row: i, col: j });
                }
            }
        }
        let scale = linalg::max_abs(&entries).max(1.0);
        let mut asymmetry = 0.0_f64;
        for i in 0..rows {
            for j in (i + 1)..rows {
                asymmetry = asymmetry.max((entries[(i, j)] - entries[(j, i)]).abs());
            }
        }
        if asymmetry > 1e-9 * scale {
            return Err(KernelError::NotSymmetric { asymmetry });
        }
        Ok(Self::from_symmetric(linalg::symmetrize(entries)))
    }

    /// Row-major constructor, mostly for tests and small examples.
    pub fn from_row_slice(order: usize, data: &[f64]) -> Result<Self, KernelError> {
        Self::new(DMatrix::from_row_slice(order, order, data))
    }

    pub(crate) fn from_symmetric(entries: DMatrix<f64>) -> Self {
        let labels = (0..entries.nrows()).collect();
        Self { entries, labels }
    }

    pub(crate) fn from_parts(entries: DMatrix<f64>, labels: Vec<usize>) -> Self {
        debug_assert_eq!(entries.nrows(), labels.len());
        Self { entries, labels }
    }

    pub fn zeros(order: usize) -> Self {
        Self::from_symmetric(DMatrix::zeros(order, order))
    }

    pub fn identity(order: usize) -> Self {
        Self::from_symmetric(DMatrix::identity(order, order))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_symmetric(DMatrix::from_diagonal(&DVector::from_row_slice(values)))
    }

    /// Replaces the ground-set labels (defaults to `0..order`).
    pub fn with_labels(mut self, labels: Vec<usize>) -> Self {
        assert_eq!(labels.len(), self.order(), "one label per ground-set element");
        self.labels = labels;
        self
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.order()).map(|i| self.entries[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.entries.trace()
    }

    pub fn max_abs(&self) -> f64 {
        linalg::max_abs(&self.entries)
    }

    /// Eigenvalue slack used for PSD and marginal checks.
    pub fn psd_tol(&self) -> f64 {
        (PSD_RTOL * self.max_abs()).max(PSD_ATOL)
    }

    pub fn determinant(&self) -> f64 {
        linalg::determinant(&self.entries)
    }

    pub fn log_determinant(&self) -> f64 {
        linalg::log_determinant(&self.entries)
    }

    pub fn eigen(&self) -> Result<EigenDecomposition, KernelError> {
        EigenDecomposition::new(self)
    }

    pub fn check_psd(&self) -> Result<(), KernelError> {
        let eig = self.eigen()?;
        let min = eig.eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if self.order() > 0 && min < -self.psd_tol() {
            return Err(KernelError::NotPsd { min_eigenvalue: min });
        }
        Ok(())
    }

    /// PSD with all eigenvalues at most `1 + psd_tol`.
    pub fn check_marginal(&self) -> Result<(), KernelError> {
        let eig = self.eigen()?;
        marginal_spectrum(self, &eig).map(|_| ())
    }

    /// Principal submatrix on `s`, keeping the matching labels.
    pub fn restrict(&self, s: &SubsetIndex) -> Result<SymmetricKernel, KernelError> {
        s.validate(self.order())?;
        let idx = s.indices();
        Ok(Self::from_parts(
            linalg::principal_submatrix(&self.entries, idx),
            idx.iter().map(|&i| self.labels[i]).collect(),
        ))
    }
}

/// Eigenvalues of a marginal kernel clipped into `[0, 1]`, or the violation.
pub(crate) fn marginal_spectrum(
    k: &SymmetricKernel,
    eig: &EigenDecomposition,
) -> Result<Vec<f64>, KernelError> {
    let tol = k.psd_tol();
    let values = eig.eigenvalues();
    if let Some(&min) = values.iter().find(|&&v| v < -tol) {
        return Err(KernelError::NotPsd { min_eigenvalue: min });
    }
    if let Some(&max) = values.iter().find(|&&v| v > 1.0 + tol) {
        return Err(KernelError::NotMarginal { max_eigenvalue: max });
    }
    Ok(values.iter().map(|v| v.clamp(0.0, 1.0)).collect())
}

/// `K = L (I + L)^{-1}`: same eigenvectors, eigenvalues mapped by `x / (1 + x)`.
pub fn l_to_k(l: &SymmetricKernel) -> Result<SymmetricKernel, KernelError> {
    let eig = l.eigen()?;
    let tol = l.psd_tol();
    let mapped = eig
        .eigenvalues()
        .iter()
        .map(|&v| {
            if v < -tol {
                Err(KernelError::NotPsd { min_eigenvalue: v })
            } else {
                let v = v.max(0.0);
                Ok(v / (1.0 + v))
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(eig.recompose(&mapped).with_labels(l.labels.clone()))
}

/// `L = K (I - K)^{-1}`, defined when every eigenvalue of `K` is below `1 - INV_TOL`.
pub fn k_to_l(k: &SymmetricKernel) -> Result<SymmetricKernel, KernelError> {
    let eig = k.eigen()?;
    let spectrum = match marginal_spectrum(k, &eig) {
        Err(KernelError::NotMarginal { max_eigenvalue }) => {
            return Err(KernelError::NoLRepresentation { max_eigenvalue })
        }
        other => other?,
    };
    if let Some(&max) = eig.eigenvalues().iter().find(|&&v| v >= 1.0 - INV_TOL) {
        return Err(KernelError::NoLRepresentation { max_eigenvalue: max });
    }
    let mapped: Vec<f64> = spectrum.iter().map(|&v| v / (1.0 - v)).collect();
    Ok(eig.recompose(&mapped).with_labels(k.labels.clone()))
}

/// `P(Ψ = s) = det(L_s) / det(I + L)`.
pub fn subset_probability(l: &SymmetricKernel, s: &SubsetIndex) -> Result<f64, KernelError> {
    let numerator = l.restrict(s)?.determinant();
    Ok(numerator / normalizer(l))
}

/// `det(I + L)`.
pub fn normalizer(l: &SymmetricKernel) -> f64 {
    let n = l.order();
    linalg::determinant(&(DMatrix::identity(n, n) + &l.entries))
}

/// `P(Ψ ⊇ s) = det(K_s)`.
pub fn inclusion_probability(k: &SymmetricKernel, s: &SubsetIndex) -> Result<f64, KernelError> {
    Ok(k.restrict(s)?.determinant())
}

/// `I - K`, the marginal kernel of the removed points.
pub fn complement_kernel(k: &SymmetricKernel) -> SymmetricKernel {
    let n = k.order();
    SymmetricKernel::from_parts(DMatrix::identity(n, n) - &k.entries, k.labels.clone())
}

/// `P(Ψ ∩ s = ∅) = det((I - K)_s)`.
pub fn void_probability_discrete(
    k: &SymmetricKernel,
    s: &SubsetIndex,
) -> Result<f64, KernelError> {
    s.validate(k.order())?;
    let idx = s.indices();
    let sub = DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - k.entries[(idx[i], idx[j])]
    });
    Ok(linalg::determinant(&sub))
}

/// `K' = D K D` with `D = diag(sqrt(1 - exp(-f)))`.
///
/// `f = +inf` is accepted and gives a weight of one. `det(I - K')` is the
/// conditional Laplace functional `E[exp(-Σ_{x∈Ψ} f(x))]`.
pub fn laplace_modified_kernel(
    k: &SymmetricKernel,
    fvals: &[f64],
) -> Result<SymmetricKernel, KernelError> {
    if fvals.len() != k.order() {
        return Err(KernelError::LengthMismatch { expected: k.order(), got: fvals.len() });
    }
    let weights = fvals
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            if value.is_nan() || value < 0.0 {
                Err(KernelError::InvalidFunction { index, value })
            } else {
                Ok((-(-value).exp_m1()).sqrt())
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let n = k.order();
    let m = DMatrix::from_fn(n, n, |i, j| weights[i] * k.entries[(i, j)] * weights[j]);
    Ok(SymmetricKernel::from_parts(m, k.labels.clone()))
}

/// `det(I - K')` for the Laplace-modified kernel of `fvals`.
pub fn conditional_laplace(k: &SymmetricKernel, fvals: &[f64]) -> Result<f64, KernelError> {
    let modified = laplace_modified_kernel(k, fvals)?;
    Ok(void_probability_discrete(&modified, &SubsetIndex::full(modified.order()))?)
}

/// Law of `|Ψ|`: a sum of independent Bernoulli variables with the eigenvalues of `K`.
pub fn count_distribution(k: &SymmetricKernel) -> Result<Vec<f64>, KernelError> {
    let eig = k.eigen()?;
    let spectrum = marginal_spectrum(k, &eig)?;
    let mut dist = vec![0.0; k.order() + 1];
    dist[0] = 1.0;
    for (seen, &p) in spectrum.iter().enumerate() {
        for c in (0..=seen + 1).rev() {
            let stay = dist[c] * (1.0 - p);
            let step = if c > 0 { dist[c - 1] * p } else { 0.0 };
            dist[c] = stay + step;
        }
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l2() -> SymmetricKernel {
        SymmetricKernel::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap()
    }

    fn k2() -> SymmetricKernel {
        SymmetricKernel::from_row_slice(2, &[0.625, 0.125, 0.125, 0.625]).unwrap()
    }

    fn assert_close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn assert_matrix_close(a: &SymmetricKernel, b: &[f64], tol: f64) {
        let n = a.order();
        assert_eq!(n * n, b.len());
        for i in 0..n {
            for j in 0..n {
                assert_close(a.get(i, j), b[i * n + j], tol);
            }
        }
    }

    #[test]
    fn construction_symmetrizes_and_rejects_asymmetry() {
        let k = SymmetricKernel::from_row_slice(2, &[1.0, 0.5, 0.5 + 1e-12, 1.0]).unwrap();
        assert_eq!(k.get(0, 1), k.get(1, 0));
        assert!(matches!(
            SymmetricKernel::from_row_slice(2, &[1.0, 0.5, 0.4, 1.0]),
            Err(KernelError::NotSymmetric { .. })
        ));
        assert!(matches!(
            SymmetricKernel::new(DMatrix::zeros(2, 3)),
            Err(KernelError::NotSquare { .. })
        ));
    }

    #[test]
    fn restrict_examples() {
        let m = l2();
        let empty = m.restrict(&SubsetIndex::empty()).unwrap();
        assert_eq!(empty.order(), 0);
        assert_eq!(empty.determinant(), 1.0);
        let first = m.restrict(&SubsetIndex::singleton(0)).unwrap();
        assert_eq!(first.entries().as_slice(), &[2.0]);
        assert_eq!(m.restrict(&SubsetIndex::full(2)).unwrap(), m);
        assert_eq!(
            m.restrict(&SubsetIndex::singleton(2)),
            Err(KernelError::InvalidSubset { index: 2, order: 2 })
        );
    }

    #[test]
    fn restrict_keeps_labels() {
        let m = SymmetricKernel::identity(3).with_labels(vec![10, 20, 30]);
        let r = m.restrict(&SubsetIndex::new(vec![2, 0]).unwrap()).unwrap();
        assert_eq!(r.labels(), &[10, 30]);
    }

    #[test]
    fn subset_index_rejects_duplicates() {
        assert_eq!(SubsetIndex::new(vec![1, 1]), Err(KernelError::DuplicateIndex { index: 1 }));
        let s = SubsetIndex::new(vec![3, 1]).unwrap();
        assert_eq!(s.indices(), &[1, 3]);
        assert_eq!(SubsetIndex::from_mask(s.to_mask(), 4), s);
        assert_eq!(s.complement(4).indices(), &[0, 2]);
    }

    #[test]
    fn l_to_k_examples() {
        let k = l_to_k(&SymmetricKernel::from_row_slice(1, &[1.0]).unwrap()).unwrap();
        assert_close(k.get(0, 0), 0.5, 1e-15);
        let z = l_to_k(&SymmetricKernel::zeros(2)).unwrap();
        assert_matrix_close(&z, &[0.0; 4], 1e-15);
        let k = l_to_k(&l2()).unwrap();
        assert_matrix_close(&k, &[0.625, 0.125, 0.125, 0.625], 1e-12);
    }

    #[test]
    fn l_to_k_matches_direct_inverse() {
        // K = L (I + L)^{-1}, with (I + L)^{-1} = [[3,-1],[-1,3]] / 8.
        let inv = [3.0 / 8.0, -1.0 / 8.0, -1.0 / 8.0, 3.0 / 8.0];
        let l = [2.0, 1.0, 1.0, 2.0];
        let mut direct = [0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                direct[i * 2 + j] = (0..2).map(|m| l[i * 2 + m] * inv[m * 2 + j]).sum();
            }
        }
        assert_matrix_close(&l_to_k(&l2()).unwrap(), &direct, 1e-12);
    }

    #[test]
    fn l_to_k_rejects_non_psd() {
        let bad = SymmetricKernel::from_row_slice(2, &[1.0, 2.0, 2.0, 1.0]).unwrap();
        assert!(matches!(l_to_k(&bad), Err(KernelError::NotPsd { .. })));
    }

    #[test]
    fn k_to_l_examples() {
        let l = k_to_l(&SymmetricKernel::from_row_slice(1, &[0.5]).unwrap()).unwrap();
        assert_close(l.get(0, 0), 1.0, 1e-12);
        let l = k_to_l(&k2()).unwrap();
        assert_matrix_close(&l, &[2.0, 1.0, 1.0, 2.0], 1e-10);
        assert!(matches!(
            k_to_l(&SymmetricKernel::from_row_slice(1, &[1.0]).unwrap()),
            Err(KernelError::NoLRepresentation { .. })
        ));
    }

    #[test]
    fn subset_probability_examples() {
        let l = l2();
        assert_close(subset_probability(&l, &SubsetIndex::empty()).unwrap(), 1.0 / 8.0, 1e-14);
        assert_close(subset_probability(&l, &SubsetIndex::singleton(0)).unwrap(), 0.25, 1e-14);
        assert_close(subset_probability(&l, &SubsetIndex::full(2)).unwrap(), 3.0 / 8.0, 1e-14);
    }

    #[test]
    fn inclusion_probability_examples() {
        let k = k2();
        assert_eq!(inclusion_probability(&k, &SubsetIndex::empty()).unwrap(), 1.0);
        assert_close(inclusion_probability(&k, &SubsetIndex::singleton(0)).unwrap(), 0.625, 1e-15);
        assert_close(inclusion_probability(&k, &SubsetIndex::full(2)).unwrap(), 0.375, 1e-14);
    }

    #[test]
    fn complement_and_void_examples() {
        let c = complement_kernel(&SymmetricKernel::identity(3));
        assert_matrix_close(&c, &[0.0; 9], 0.0);
        let c = complement_kernel(&k2());
        assert_matrix_close(&c, &[0.375, -0.125, -0.125, 0.375], 1e-15);
        assert_close(c.determinant(), 0.125, 1e-14);

        let k = k2();
        assert_eq!(void_probability_discrete(&k, &SubsetIndex::empty()).unwrap(), 1.0);
        assert_close(void_probability_discrete(&k, &SubsetIndex::full(2)).unwrap(), 0.125, 1e-14);
        let (p, q) = (0.3, 0.8);
        let d = SymmetricKernel::diagonal(&[p, q]);
        assert_close(
            void_probability_discrete(&d, &SubsetIndex::full(2)).unwrap(),
            (1.0 - p) * (1.0 - q),
            1e-15,
        );
    }

    #[test]
    fn laplace_examples() {
        let k = k2();
        let zero = laplace_modified_kernel(&k, &[0.0, 0.0]).unwrap();
        assert_matrix_close(&zero, &[0.0; 4], 0.0);
        assert_eq!(conditional_laplace(&k, &[0.0, 0.0]).unwrap(), 1.0);

        let inf = laplace_modified_kernel(&k, &[f64::INFINITY, f64::INFINITY]).unwrap();
        assert_matrix_close(&inf, &[0.625, 0.125, 0.125, 0.625], 0.0);
        assert_close(
            conditional_laplace(&k, &[f64::INFINITY; 2]).unwrap(),
            void_probability_discrete(&k, &SubsetIndex::full(2)).unwrap(),
            1e-15,
        );

        let ln2 = std::f64::consts::LN_2;
        let half = laplace_modified_kernel(&k, &[ln2, ln2]).unwrap();
        assert_matrix_close(&half, &[0.3125, 0.0625, 0.0625, 0.3125], 1e-15);
        // Enumeration: (1/8)*1 + (4/8)*0.5 + (3/8)*0.25.
        assert_close(conditional_laplace(&k, &[ln2, ln2]).unwrap(), 0.46875, 1e-14);

        assert_eq!(
            laplace_modified_kernel(&k, &[0.0, -1.0]),
            Err(KernelError::InvalidFunction { index: 1, value: -1.0 })
        );
        assert!(matches!(
            laplace_modified_kernel(&k, &[0.0]),
            Err(KernelError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn count_distribution_examples() {
        assert_eq!(count_distribution(&SymmetricKernel::zeros(3)).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let dist = count_distribution(&k2()).unwrap();
        assert_close(dist[0], 0.125, 1e-14);
        assert_close(dist[1], 0.5, 1e-14);
        assert_close(dist[2], 0.375, 1e-14);
        let mean: f64 = dist.iter().enumerate().map(|(c, p)| c as f64 * p).sum();
        assert_close(mean, k2().trace(), 1e-14);
        assert_close(k2().trace(), 1.25, 0.0);
    }

    #[test]
    fn marginal_check_clips_round_off() {
        let k = SymmetricKernel::diagonal(&[1.0 + 1e-12, -1e-12]);
        k.check_marginal().unwrap();
        let bad = SymmetricKernel::diagonal(&[1.1, 0.0]);
        assert!(matches!(bad.check_marginal(), Err(KernelError::NotMarginal { .. })));
    }
}
