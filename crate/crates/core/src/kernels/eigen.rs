use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{KernelError, SymmetricKernel, EIG_TOL};
use crate::linalg;

/// Symmetric eigendecomposition `M = V Λ Vᵀ`, eigenvalues in descending order.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    eigenvalues: DVector<f64>,
    eigenvectors: DMatrix<f64>,
}

impl EigenDecomposition {
    /// Householder tridiagonalization followed by implicit QR sweeps.
    ///
    /// The reconstruction `‖VΛVᵀ − M‖_max` is checked against
    /// `EIG_TOL · ‖M‖_max`; a failure reports the residual.
    pub fn new(m: &SymmetricKernel) -> Result<Self, KernelError> {
        let n = m.order();
        if n == 0 {
            return Ok(Self { eigenvalues: DVector::zeros(0), eigenvectors: DMatrix::zeros(0, 0) });
        }
        let raw = SymmetricEigen::new(m.entries().clone());
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| raw.eigenvalues[b].total_cmp(&raw.eigenvalues[a]));
        let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| raw.eigenvalues[i]));
        let eigenvectors = DMatrix::from_fn(n, n, |r, c| raw.eigenvectors[(r, order[c])]);
        let decomposition = Self { eigenvalues, eigenvectors };

        let scale = m.max_abs();
        let residual = linalg::max_abs(&(decomposition.reconstruct() - m.entries()));
        let orthogonality = linalg::max_abs(
            &(decomposition.eigenvectors.transpose() * &decomposition.eigenvectors
                - DMatrix::identity(n, n)),
        );
        if !(residual <= EIG_TOL * scale.max(f64::MIN_POSITIVE) || residual == 0.0)
            || !(orthogonality <= EIG_TOL)
        {
            return Err(KernelError::Numeric {
                context: "symmetric eigendecomposition",
                residual: residual.max(orthogonality),
            });
        }
        Ok(decomposition)
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Orthonormal eigenvectors stored as columns.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        self.scaled_outer(self.eigenvalues.as_slice())
    }

    /// `V diag(values) Vᵀ`, the kernel with the same eigenvectors and a new spectrum.
    pub fn recompose(&self, values: &[f64]) -> SymmetricKernel {
        SymmetricKernel::from_symmetric(linalg::symmetrize(self.scaled_outer(values)))
    }

    fn scaled_outer(&self, values: &[f64]) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &v) in scaled.column_iter_mut().zip(values) {
            col *= v;
        }
        scaled * self.eigenvectors.transpose()
    }
}
