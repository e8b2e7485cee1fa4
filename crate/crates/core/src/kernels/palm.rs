//! Reduced Palm kernels: the DPP conditioned to contain a set, with that set removed.

use nalgebra::DMatrix;

use super::{KernelError, SubsetIndex, SymmetricKernel, SCHUR_TOL};
use crate::linalg;

/// Schur complement of the `cond` block of `K`:
/// `K_rest − K_{rest,cond} K_cond⁻¹ K_{cond,rest}`.
pub fn palm_kernel_schur(
    k: &SymmetricKernel,
    cond: &SubsetIndex,
) -> Result<SymmetricKernel, KernelError> {
    cond.validate(k.order())?;
    if cond.is_empty() {
        return Ok(k.clone());
    }
    let k_cond = linalg::principal_submatrix(k.entries(), cond.indices());
    let det = linalg::determinant(&k_cond);
    if !(det > SCHUR_TOL) {
        return Err(KernelError::ZeroProbabilityConditioning { det });
    }
    let rest = cond.complement(k.order());
    let cross = linalg::submatrix(k.entries(), rest.indices(), cond.indices());
    let inv = linalg::symmetric_inverse(&k_cond)
        .ok_or(KernelError::Numeric { context: "inverting conditioning block", residual: det })?;
    let k_rest = linalg::principal_submatrix(k.entries(), rest.indices());
    let schur = k_rest - &cross * inv * cross.transpose();
    let labels = rest.indices().iter().map(|&i| k.labels()[i]).collect();
    Ok(SymmetricKernel::from_parts(linalg::symmetrize(schur), labels))
}

/// L-ensemble and marginal kernel of the reduced Palm version, computed from `L`:
/// with `B = [(I_{T'} + L)⁻¹]_{T'}`, `L^T = B⁻¹ − I` and `K^T = I − B`,
/// where `T'` is the complement of `cond`.
pub fn palm_borodin_rains(
    l: &SymmetricKernel,
    cond: &SubsetIndex,
) -> Result<(SymmetricKernel, SymmetricKernel), KernelError> {
    let n = l.order();
    cond.validate(n)?;
    let rest = cond.complement(n);
    if rest.is_empty() {
        return Err(KernelError::ConditionOnFullSet);
    }
    let mut shifted = l.entries().clone();
    for &i in rest.indices() {
        shifted[(i, i)] += 1.0;
    }
    let inv = shifted
        .clone()
        .lu()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or(KernelError::Numeric {
            context: "inverting I_T' + L",
            residual: linalg::determinant(&shifted).abs(),
        })?;
    let block = linalg::symmetrize(linalg::principal_submatrix(&inv, rest.indices()));
    let m = rest.len();
    let block_inv = block.clone().lu().try_inverse().ok_or(KernelError::Numeric {
        context: "inverting Palm block",
        residual: linalg::determinant(&block).abs(),
    })?;
    let identity = DMatrix::<f64>::identity(m, m);
    let labels: Vec<usize> = rest.indices().iter().map(|&i| l.labels()[i]).collect();
    let palm_l = SymmetricKernel::from_parts(linalg::symmetrize(block_inv - &identity), labels.clone());
    let palm_k = SymmetricKernel::from_parts(identity - block, labels);
    Ok((palm_l, palm_k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{brute_force_enumerate, l_to_k};

    #[test]
    fn schur_single_point() {
        let k = SymmetricKernel::from_row_slice(2, &[0.625, 0.125, 0.125, 0.625]).unwrap();
        let palm = palm_kernel_schur(&k, &SubsetIndex::singleton(0)).unwrap();
        assert_eq!(palm.order(), 1);
        assert!((palm.get(0, 0) - 0.6).abs() < 1e-14);
        assert_eq!(palm.labels(), &[1]);

        // Brute force: P(1 ∈ Ψ | 0 ∈ Ψ) = (3/8) / (5/8).
        let l = SymmetricKernel::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let d = brute_force_enumerate(&l).unwrap();
        let ratio = d.inclusion(&SubsetIndex::full(2)) / d.inclusion(&SubsetIndex::singleton(0));
        assert!((ratio - 0.6).abs() < 1e-14);
    }

    #[test]
    fn schur_diagonal_and_empty() {
        let k = SymmetricKernel::diagonal(&[0.2, 0.5, 0.7]);
        let palm = palm_kernel_schur(&k, &SubsetIndex::singleton(1)).unwrap();
        assert_eq!(palm.diagonal_entries(), vec![0.2, 0.7]);
        assert_eq!(palm.get(0, 1), 0.0);
        assert_eq!(palm_kernel_schur(&k, &SubsetIndex::empty()).unwrap(), k);
    }

    #[test]
    fn schur_rejects_null_event() {
        let k = SymmetricKernel::diagonal(&[0.0, 0.5]);
        assert!(matches!(
            palm_kernel_schur(&k, &SubsetIndex::singleton(0)),
            Err(KernelError::ZeroProbabilityConditioning { .. })
        ));
    }

    #[test]
    fn borodin_rains_examples() {
        let l = SymmetricKernel::from_row_slice(2, &[2.0, 1.0, 1.0, 2.0]).unwrap();
        let (palm_l, palm_k) = palm_borodin_rains(&l, &SubsetIndex::singleton(0)).unwrap();
        assert!((palm_k.get(0, 0) - 0.6).abs() < 1e-14);
        // L^T = 0.6 / 0.4.
        assert!((palm_l.get(0, 0) - 1.5).abs() < 1e-12);
        let back = l_to_k(&palm_l).unwrap();
        assert!((back.get(0, 0) - 0.6).abs() < 1e-12);

        let d = SymmetricKernel::diagonal(&[1.0, 2.0, 3.0]);
        let (palm_l, _) = palm_borodin_rains(&d, &SubsetIndex::singleton(0)).unwrap();
        assert!((palm_l.get(0, 0) - 2.0).abs() < 1e-12);
        assert!((palm_l.get(1, 1) - 3.0).abs() < 1e-12);
        assert!(palm_l.get(0, 1).abs() < 1e-14);

        let (palm_l, _) = palm_borodin_rains(&l, &SubsetIndex::empty()).unwrap();
        assert!(linalg::max_abs(&(palm_l.entries() - l.entries())) < 1e-12);

        assert_eq!(
            palm_borodin_rains(&l, &SubsetIndex::full(2)),
            Err(KernelError::ConditionOnFullSet)
        );
    }
}
