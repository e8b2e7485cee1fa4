//! Dense helpers shared by the kernel and fitting code.
//!
//! Determinants go through Cholesky when the matrix is numerically positive
//! definite and fall back to partial-pivot LU otherwise, so singular PSD
//! matrices still produce a (near) zero determinant instead of an error.

use nalgebra::DMatrix;

/// Determinant with the 0×0 convention `det = 1`.
pub(crate) fn determinant(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    if m.nrows() == 1 {
        return m[(0, 0)];
    }
    match m.clone().cholesky() {
        Some(chol) => {
            let l = chol.l_dirty();
            (0..m.nrows()).map(|i| l[(i, i)] * l[(i, i)]).product()
        }
        None => m.clone().lu().determinant(),
    }
}

/// Natural log of the determinant; `-inf` when the determinant is not positive.
pub(crate) fn log_determinant(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    match m.clone().cholesky() {
        Some(chol) => {
            let l = chol.l_dirty();
            2.0 * (0..m.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
        }
        None => {
            let d = m.clone().lu().determinant();
            if d > 0.0 {
                d.ln()
            } else {
                f64::NEG_INFINITY
            }
        }
    }
}

/// Inverse of a symmetric matrix, Cholesky first and LU as fallback.
pub(crate) fn symmetric_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Some(DMatrix::zeros(0, 0));
    }
    let inv = match m.clone().cholesky() {
        Some(chol) => chol.inverse(),
        None => m.clone().lu().try_inverse()?,
    };
    if inv.iter().all(|v| v.is_finite()) {
        Some(symmetrize(inv))
    } else {
        None
    }
}

pub(crate) fn symmetrize(mut m: DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

pub(crate) fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn principal_submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

pub(crate) fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

/// Determinants of all leading principal submatrices, `[1, det M_1, …, det M_n]`.
///
/// One unpivoted LDLᵀ sweep; intended for PSD input, where a vanishing pivot
/// forces every larger leading minor to vanish as well.
pub(crate) fn leading_principal_minors(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut minors = Vec::with_capacity(n + 1);
    minors.push(1.0);
    let scale = (0..n).fold(0.0_f64, |acc, i| acc.max(m[(i, i)].abs()));
    let floor = 1e-14 * scale;
    let mut work = m.clone();
    let mut prod = 1.0;
    for k in 0..n {
        let pivot = work[(k, k)];
        if !(pivot > floor) {
            minors.resize(n + 1, 0.0);
            return minors;
        }
        prod *= pivot;
        minors.push(prod);
        for i in (k + 1)..n {
            let factor = work[(i, k)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for j in (k + 1)..=i {
                work[(i, j)] -= factor * work[(j, k)];
            }
        }
        for i in (k + 1)..n {
            for j in (k + 1)..i {
                work[(j, i)] = work[(i, j)];
            }
        }
    }
    minors
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_determinant_is_one() {
        assert_eq!(determinant(&DMatrix::zeros(0, 0)), 1.0);
        assert_eq!(log_determinant(&DMatrix::zeros(0, 0)), 0.0);
    }

    #[test]
    fn singular_psd_falls_back_to_lu() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(determinant(&m).abs() < 1e-15);
        assert_eq!(log_determinant(&DMatrix::zeros(2, 2)), f64::NEG_INFINITY);
    }

    #[test]
    fn leading_minors_match_determinants() {
        let a = DMatrix::from_fn(6, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7);
        let m = &a * a.transpose() + DMatrix::identity(6, 6) * 0.3;
        let minors = leading_principal_minors(&m);
        assert_eq!(minors.len(), 7);
        for k in 0..=6 {
            let sub = m.view((0, 0), (k, k)).clone_owned();
            assert!((minors[k] - determinant(&sub)).abs() <= 1e-10 * determinant(&sub).abs().max(1.0));
        }
        let singular = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        assert_eq!(leading_principal_minors(&singular), vec![1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn indefinite_determinant_keeps_sign() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!((determinant(&m) + 1.0).abs() < 1e-15);
    }
}
