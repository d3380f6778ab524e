//! Linear-algebra plumbing on truncated registers: tensor products, partial
//! traces, Hermitian spectra, mode permutations and single-mode contractions.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{ModeIndexer, TruncatedOperator, C_ONE, C_ZERO, OPERATOR_HERMITICITY_TOL};
use crate::error::{GchanError, Result};
use crate::fock::DensityMatrix;

/// Kronecker product of a list of operators; the leftmost factor is the
/// slowest index. All factors must share the per-mode cutoff.
pub fn tensor_product(ops: &[TruncatedOperator]) -> Result<TruncatedOperator> {
    let first = ops
        .first()
        .ok_or_else(|| GchanError::InvalidParameter("empty tensor product".into()))?;
    let d = first.dim_per_mode;
    let mut matrix = first.matrix.clone();
    let mut modes = first.num_modes;
    let mut leakage = first.leakage;
    for op in &ops[1..] {
        if op.dim_per_mode != d {
            return Err(GchanError::IncompatibleOperands(
                "tensor product of operators with different cutoffs".into(),
            ));
        }
        matrix = matrix.kronecker(&op.matrix);
        modes += op.num_modes;
        leakage += op.leakage;
    }
    let mut out = TruncatedOperator::from_matrix(d, modes, matrix);
    out.leakage = leakage;
    Ok(out)
}

/// Traces out every mode not in `keep`. Kept modes stay in their original
/// relative order.
pub fn partial_trace(op: &TruncatedOperator, keep: &[usize]) -> Result<TruncatedOperator> {
    let modes = op.num_modes;
    if keep.is_empty() {
        return Err(GchanError::InvalidModes("keep set is empty".into()));
    }
    let mut keep = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.iter().any(|&m| m >= modes) {
        return Err(GchanError::InvalidModes(format!(
            "mode index out of range (num_modes = {modes})"
        )));
    }
    let traced: Vec<usize> = (0..modes).filter(|m| !keep.contains(m)).collect();
    if traced.is_empty() {
        return Ok(op.clone());
    }
    let d = op.dim_per_mode;
    let idx_in = op.indexer();
    let idx_keep = ModeIndexer::new(d, keep.len());
    let idx_tr = ModeIndexer::new(d, traced.len());
    let mut out = DMatrix::from_element(idx_keep.total_dim(), idx_keep.total_dim(), C_ZERO);

    let mut occ_row = vec![0usize; modes];
    let mut occ_col = vec![0usize; modes];
    for pk in 0..idx_keep.total_dim() {
        let okk = idx_keep.occupations(pk);
        for qk in 0..idx_keep.total_dim() {
            let oqq = idx_keep.occupations(qk);
            let mut acc = C_ZERO;
            for r in 0..idx_tr.total_dim() {
                let orr = idx_tr.occupations(r);
                for (slot, &m) in keep.iter().enumerate() {
                    occ_row[m] = okk[slot];
                    occ_col[m] = oqq[slot];
                }
                for (slot, &m) in traced.iter().enumerate() {
                    occ_row[m] = orr[slot];
                    occ_col[m] = orr[slot];
                }
                acc += op.matrix[(idx_in.flat_index(&occ_row), idx_in.flat_index(&occ_col))];
            }
            out[(pk, qk)] = acc;
        }
    }
    let mut res = TruncatedOperator::from_matrix(d, keep.len(), out);
    res.leakage = op.leakage;
    Ok(res)
}

/// Tr[ρ^k] over the clipped eigenvalues of a positive-semidefinite state.
pub fn trace_power(rho: &DensityMatrix, k: u32) -> Result<f64> {
    if k == 0 {
        return Err(GchanError::InvalidParameter("trace power needs k >= 1".into()));
    }
    let eigs = hermitian_spectrum(&rho.op)?;
    Ok(eigs.iter().map(|l| l.max(0.0).powi(k as i32)).sum())
}

/// Eigenvalues of a Hermitian operator, sorted descending.
pub fn hermitian_spectrum(op: &TruncatedOperator) -> Result<Vec<f64>> {
    let dev = op.hermiticity_deviation();
    if dev > OPERATOR_HERMITICITY_TOL {
        return Err(GchanError::NonHermitian {
            deviation: dev,
            tolerance: OPERATOR_HERMITICITY_TOL,
        });
    }
    let se = op.matrix.clone().symmetric_eigen();
    let mut eigs: Vec<f64> = se.eigenvalues.iter().copied().collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(eigs)
}

/// Eigenvalues (descending) together with the matching eigenvector columns.
pub fn hermitian_eigen(op: &TruncatedOperator) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let dev = op.hermiticity_deviation();
    if dev > OPERATOR_HERMITICITY_TOL {
        return Err(GchanError::NonHermitian {
            deviation: dev,
            tolerance: OPERATOR_HERMITICITY_TOL,
        });
    }
    let se = op.matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..se.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| se.eigenvalues[b].partial_cmp(&se.eigenvalues[a]).unwrap());
    let eigs: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(se.eigenvectors.nrows(), order.len(), |r, c| {
        se.eigenvectors[(r, order[c])]
    });
    Ok((eigs, vecs))
}

/// exp(i·H) for Hermitian H, through the eigendecomposition. The result is
/// exactly unitary up to roundoff.
pub(crate) fn exp_i_hermitian(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    debug_assert!(h.is_square());
    let se = h.clone().symmetric_eigen();
    let phases = DVector::from_iterator(
        se.eigenvalues.len(),
        se.eigenvalues.iter().map(|l| Complex64::new(0.0, *l).exp()),
    );
    let mut scaled = se.eigenvectors.clone();
    for (j, col) in scaled.column_iter_mut().enumerate() {
        let mut col = col;
        col *= phases[j];
    }
    scaled * se.eigenvectors.adjoint()
}

/// Hermitian H with e^{iH} = U for a (small) unitary U. Works by
/// simultaneously diagonalizing the commuting Hermitian pair
/// (U + U†)/2 and (U − U†)/(2i).
pub(crate) fn unitary_log(u: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let n = u.nrows();
    let re = (u + u.adjoint()).scale(0.5);
    let im = (u - u.adjoint()) * Complex64::new(0.0, -0.5);
    let se = re.clone().symmetric_eigen();

    // Order eigenpairs of the Hermitian part, then resolve each degenerate
    // cluster with the anti-Hermitian part.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let mut basis = DMatrix::from_fn(n, n, |r, c| se.eigenvectors[(r, order[c])]);
    let vals: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();

    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (vals[end] - vals[start]).abs() < 1e-8 {
            end += 1;
        }
        if end - start > 1 {
            let block = basis.columns(start, end - start).into_owned();
            let proj = block.adjoint() * &im * &block;
            let sub = proj.symmetric_eigen();
            let rotated = &block * sub.eigenvectors;
            basis.columns_mut(start, end - start).copy_from(&rotated);
        }
        start = end;
    }

    let diag = basis.adjoint() * u * &basis;
    let mut h = DMatrix::from_element(n, n, C_ZERO);
    for j in 0..n {
        let lambda = diag[(j, j)];
        if (lambda.norm() - 1.0).abs() > 1e-8 {
            return Err(GchanError::InternalConsistency(format!(
                "unitary log: eigenvalue magnitude {} far from 1",
                lambda.norm()
            )));
        }
        h[(j, j)] = Complex64::new(lambda.arg(), 0.0);
    }
    let h = &basis * h * basis.adjoint();
    let h = (&h + h.adjoint()).scale(0.5);

    // Round-trip check: rebuilding U from the log must reproduce it.
    let back = exp_i_hermitian(&h);
    let err = max_abs_diff(&back, u);
    if err > 1e-10 {
        return Err(GchanError::InternalConsistency(format!(
            "unitary log round-trip error {err:.3e}"
        )));
    }
    Ok(h)
}

/// Applies A (d×d) to one mode from the left and B (d×d) to the same mode
/// from the right: result = (1⊗..⊗A⊗..⊗1) · M · (1⊗..⊗B⊗..⊗1).
pub(crate) fn apply_mode_sandwich(
    a: &DMatrix<Complex64>,
    m: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    indexer: ModeIndexer,
    mode: usize,
) -> DMatrix<Complex64> {
    let left = apply_mode_left(a, m, indexer, mode);
    apply_mode_right(&left, b, indexer, mode)
}

/// (1⊗..⊗A⊗..⊗1) · M with A acting on `mode`. Data is walked column-major in
/// contiguous stride-runs.
pub(crate) fn apply_mode_left(
    a: &DMatrix<Complex64>,
    m: &DMatrix<Complex64>,
    indexer: ModeIndexer,
    mode: usize,
) -> DMatrix<Complex64> {
    let d = indexer.dim_per_mode;
    let total = indexer.total_dim();
    let stride = indexer.stride(mode);
    let outer = total / (d * stride);
    let mut out = DMatrix::from_element(total, total, C_ZERO);
    let src = m.as_slice();
    let dst = out.as_mut_slice();
    for col in 0..total {
        let cbase = col * total;
        for o in 0..outer {
            let obase = o * d * stride;
            for inew in 0..d {
                let rn = cbase + obase + inew * stride;
                for p in 0..d {
                    let coeff = a[(inew, p)];
                    if coeff == C_ZERO {
                        continue;
                    }
                    let ro = cbase + obase + p * stride;
                    for s in 0..stride {
                        dst[rn + s] += coeff * src[ro + s];
                    }
                }
            }
        }
    }
    out
}

/// M · (1⊗..⊗B⊗..⊗1) with B acting on `mode`; whole-column updates.
pub(crate) fn apply_mode_right(
    m: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
    indexer: ModeIndexer,
    mode: usize,
) -> DMatrix<Complex64> {
    let d = indexer.dim_per_mode;
    let total = indexer.total_dim();
    let stride = indexer.stride(mode);
    let outer = total / (d * stride);
    let mut out = DMatrix::from_element(total, total, C_ZERO);
    let src = m.as_slice();
    let dst = out.as_mut_slice();
    for o in 0..outer {
        let obase = o * d * stride;
        for s in 0..stride {
            for jnew in 0..d {
                let col_new = obase + jnew * stride + s;
                let cn = col_new * total;
                for p in 0..d {
                    let coeff = b[(p, jnew)];
                    if coeff == C_ZERO {
                        continue;
                    }
                    let co = (obase + p * stride + s) * total;
                    for row in 0..total {
                        dst[cn + row] += src[co + row] * coeff;
                    }
                }
            }
        }
    }
    out
}

/// Unitary permutation matrix reordering modes: new mode slot `t` carries what
/// old slot `perm[t]` carried.
pub fn mode_permutation(
    dim_per_mode: usize,
    perm: &[usize],
) -> Result<DMatrix<Complex64>> {
    let modes = perm.len();
    let mut seen = vec![false; modes];
    for &p in perm {
        if p >= modes || seen[p] {
            return Err(GchanError::InvalidModes("not a permutation".into()));
        }
        seen[p] = true;
    }
    let idx = ModeIndexer::new(dim_per_mode, modes);
    let total = idx.total_dim();
    let mut mat = DMatrix::from_element(total, total, C_ZERO);
    for old in 0..total {
        let occ = idx.occupations(old);
        let new_occ: Vec<usize> = perm.iter().map(|&src| occ[src]).collect();
        mat[(idx.flat_index(&new_occ), old)] = C_ONE;
    }
    Ok(mat)
}

pub(crate) fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{annihilation_op, thermal_state};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn tensor_identity_and_mixed_product() {
        let one = TruncatedOperator::identity(3, 1);
        let both = tensor_product(&[one.clone(), one.clone()]).unwrap();
        assert_eq!(both.dim(), 9);
        assert!(max_abs_diff(&both.matrix, &DMatrix::identity(9, 9)) < 1e-15);

        // (a⊗1)(1⊗a) = a⊗a
        let a = annihilation_op(3).unwrap();
        let a1 = tensor_product(&[a.clone(), one.clone()]).unwrap();
        let one_a = tensor_product(&[one, a.clone()]).unwrap();
        let lhs = &a1.matrix * &one_a.matrix;
        let rhs = tensor_product(&[a.clone(), a]).unwrap();
        assert!(max_abs_diff(&lhs, &rhs.matrix) < 1e-15);
    }

    #[test]
    fn trace_multiplicative_over_tensor() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let rand_op = |rng: &mut rand_chacha::ChaCha8Rng| {
            let m = DMatrix::from_fn(3, 3, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            TruncatedOperator::from_matrix(3, 1, m)
        };
        let a = rand_op(&mut rng);
        let b = rand_op(&mut rng);
        let t = tensor_product(&[a.clone(), b.clone()]).unwrap();
        let lhs = t.trace();
        let rhs = a.trace() * b.trace();
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn partial_trace_recovers_factor() {
        // partial_trace(A⊗B, keep first) = A·Tr[B]
        let a = annihilation_op(3).unwrap();
        let tau = thermal_state(0.4, 3).unwrap();
        let prod = tensor_product(&[a.clone(), tau.op.clone()]).unwrap();
        let reduced = partial_trace(&prod, &[0]).unwrap();
        let expected = a.matrix.clone() * tau.op.trace();
        assert!(max_abs_diff(&reduced.matrix, &expected) < 1e-13);
    }

    #[test]
    fn partial_trace_of_bell_pair_is_maximally_mixed() {
        let inv = c(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut v = DVector::from_element(4, C_ZERO);
        v[0] = inv;
        v[3] = inv;
        let psi = PureState::new(2, 2, v).unwrap();
        let rho = psi.to_density();
        let red = partial_trace(&rho.op, &[0]).unwrap();
        let expected = DMatrix::from_diagonal_element(2, 2, c(0.5, 0.0));
        assert!(max_abs_diff(&red.matrix, &expected) < 1e-15);
    }

    use super::super::PureState;

    #[test]
    fn trace_preserved_by_partial_trace() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = DMatrix::from_fn(9, 9, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let pos = &g * g.adjoint();
        let tr = pos.trace().re;
        let rho = pos / c(tr, 0.0);
        let op = TruncatedOperator::from_matrix(3, 2, rho);
        let red = partial_trace(&op, &[1]).unwrap();
        assert!((red.trace().re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_power_of_pure_state_is_one() {
        let mut v = DVector::from_element(4, C_ZERO);
        v[1] = C_ONE;
        let rho = PureState::new(4, 1, v).unwrap().to_density();
        for k in 1..5 {
            assert!((trace_power(&rho, k).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn trace_power_thermal_closed_form() {
        // Tr[τ(n)^k] = 1/((n+1)^k − n^k); n=1, k=3 gives 1/7.
        let tau = thermal_state_checked_for_test(1.0, 48);
        let t3 = trace_power(&tau, 3).unwrap();
        assert!((t3 - 1.0 / 7.0).abs() < 1e-12, "got {t3}");
    }

    fn thermal_state_checked_for_test(n: f64, d: usize) -> DensityMatrix {
        crate::fock::thermal_state_with_tolerance(n, d, 1e-9).unwrap()
    }

    #[test]
    fn trace_power_maximally_mixed() {
        let m = DMatrix::from_diagonal_element(4, 4, c(0.25, 0.0));
        let rho = DensityMatrix::try_new(TruncatedOperator::from_matrix(4, 1, m)).unwrap();
        assert!((trace_power(&rho, 2).unwrap() - 0.25).abs() < 1e-14);
    }

    #[test]
    fn hermitian_spectrum_examples() {
        let id = TruncatedOperator::identity(3, 1);
        assert_eq!(hermitian_spectrum(&id).unwrap(), vec![1.0, 1.0, 1.0]);

        // a†a at d=5 has spectrum (4,3,2,1,0)
        let a = annihilation_op(5).unwrap();
        let n = TruncatedOperator::from_matrix(5, 1, a.matrix.adjoint() * &a.matrix);
        let spec = hermitian_spectrum(&n).unwrap();
        for (i, expect) in [4.0, 3.0, 2.0, 1.0, 0.0].iter().enumerate() {
            assert!((spec[i] - expect).abs() < 1e-12);
        }

        // top eigenvalue of τ(0.5) is 1/1.5
        let tau = thermal_state(0.5, 20).unwrap();
        let spec = hermitian_spectrum(&tau.op).unwrap();
        assert!((spec[0] - 1.0 / 1.5).abs() < 1e-12);
    }

    #[test]
    fn hermitian_spectrum_rejects_non_hermitian() {
        let a = annihilation_op(4).unwrap();
        assert!(hermitian_spectrum(&a).is_err());
    }

    #[test]
    fn mode_permutation_swaps() {
        let idx = ModeIndexer::new(2, 2);
        let p = mode_permutation(2, &[1, 0]).unwrap();
        let a = annihilation_op(2).unwrap();
        let one = TruncatedOperator::identity(2, 1);
        let a1 = tensor_product(&[a.clone(), one.clone()]).unwrap();
        let one_a = tensor_product(&[one, a]).unwrap();
        let moved = &p * &a1.matrix * p.adjoint();
        assert!(max_abs_diff(&moved, &one_a.matrix) < 1e-15);
        assert_eq!(idx.total_dim(), 4);
    }

    #[test]
    fn unitary_log_round_trips_dft() {
        for k in 1..=6usize {
            let omega = 2.0 * std::f64::consts::PI / k as f64;
            let y = DMatrix::from_fn(k, k, |j, l| {
                Complex64::new(0.0, -omega * (j as f64) * (l as f64)).exp()
                    / c((k as f64).sqrt(), 0.0)
            });
            let h = unitary_log(&y.transpose()).unwrap();
            assert!(h.iter().zip(h.adjoint().iter()).all(|(a, b)| (a - b).norm() < 1e-12));
        }
    }

    #[test]
    fn mode_sandwich_matches_dense_kron() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let d = 3;
        let idx = ModeIndexer::new(d, 2);
        let small = DMatrix::from_fn(d, d, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let big = DMatrix::from_fn(9, 9, |_, _| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        for mode in 0..2 {
            let dense = if mode == 0 {
                small.kronecker(&DMatrix::identity(d, d))
            } else {
                DMatrix::identity(d, d).kronecker(&small)
            };
            let expected = &dense * &big * dense.adjoint();
            let got = apply_mode_sandwich(&small, &big, &small.adjoint(), idx, mode);
            assert!(max_abs_diff(&expected, &got) < 1e-12);
        }
    }
}
