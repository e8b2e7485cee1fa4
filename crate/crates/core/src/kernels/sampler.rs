//! Spectral sampler for marginal kernels.
//!
//! Phase one keeps eigenvector `j` with probability `λ_j`. Phase two places
//! the points one at a time: element `i` is drawn with probability
//! proportional to the squared norm of row `i` of the kept eigenvectors, then
//! the basis is projected onto the subspace orthogonal to `e_i` and
//! re-orthonormalized.

use nalgebra::DMatrix;
use rand::Rng;

use super::{marginal_spectrum, KernelError, SubsetIndex, SymmetricKernel};

/// Below this total squared row norm the remaining basis is considered degenerate.
const RESIDUAL_FLOOR: f64 = 1e-12;

pub fn sample_dpp<R: Rng + ?Sized>(
    k: &SymmetricKernel,
    rng: &mut R,
) -> Result<SubsetIndex, KernelError> {
    let n = k.order();
    if n == 0 {
        return Ok(SubsetIndex::empty());
    }
    let eig = k.eigen()?;
    let spectrum = marginal_spectrum(k, &eig)?;
    let kept: Vec<usize> = spectrum
        .iter()
        .enumerate()
        .filter(|&(_, &p)| rng.random::<f64>() < p)
        .map(|(j, _)| j)
        .collect();
    if kept.is_empty() {
        return Ok(SubsetIndex::empty());
    }

    let vectors = eig.eigenvectors();
    let mut basis = DMatrix::from_fn(n, kept.len(), |r, c| vectors[(r, kept[c])]);
    let mut picked = Vec::with_capacity(kept.len());
    while basis.ncols() > 0 {
        let weights: Vec<f64> = basis.row_iter().map(|row| row.norm_squared()).collect();
        let total: f64 = weights.iter().sum();
        if !(total > RESIDUAL_FLOOR) {
            return Err(KernelError::Numeric { context: "spectral sampler basis collapsed", residual: total });
        }
        let mut target = rng.random::<f64>() * total;
        let mut chosen = n - 1;
        for (i, &w) in weights.iter().enumerate() {
            if target < w {
                chosen = i;
                break;
            }
            target -= w;
        }
        // Round-off can leave `target` past the end; fall back to the last positive weight.
        if weights[chosen] <= 0.0 {
            chosen = weights.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
        }
        picked.push(chosen);

        // Pivot column with the largest entry in the chosen row.
        let pivot = (0..basis.ncols())
            .max_by(|&a, &b| basis[(chosen, a)].abs().total_cmp(&basis[(chosen, b)].abs()))
            .expect("non-empty basis");
        let pivot_col = basis.column(pivot).clone_owned();
        let pivot_val = pivot_col[chosen];
        let mut reduced = basis.clone().remove_column(pivot);
        for mut col in reduced.column_iter_mut() {
            let factor = col[chosen] / pivot_val;
            col.axpy(-factor, &pivot_col, 1.0);
        }
        basis = orthonormalize(reduced)?;
    }
    SubsetIndex::new(picked)
}

/// Modified Gram–Schmidt on the columns.
fn orthonormalize(mut m: DMatrix<f64>) -> Result<DMatrix<f64>, KernelError> {
    for j in 0..m.ncols() {
        for i in 0..j {
            let qi = m.column(i).clone_owned();
            let proj = qi.dot(&m.column(j));
            m.column_mut(j).axpy(-proj, &qi, 1.0);
        }
        let norm = m.column(j).norm();
        if !(norm > RESIDUAL_FLOOR) {
            return Err(KernelError::Numeric { context: "Gram-Schmidt lost rank", residual: norm });
        }
        m.column_mut(j).unscale_mut(norm);
    }
    Ok(m)
}
