//! The extended-space moment operator Θ and its verification toolkit.
//!
//! Tr[(Φ^⊗m(ρ))^k] equals Tr[(ρ⊗..⊗ρ)·Θ] for an operator Θ on k copies of
//! the m-use input space. Θ factorizes over the uses r, and inside each use
//! it is diagonal in the Fock basis of the rotated modes b = conj(Y)·a, with
//! per-mode factors scale_j · ratio_j^{b†b} taken from the circulant spectra.
//!
//! Construction of the factorized route: everything conserves total photon
//! number, so each use-block is assembled sector by sector. Within the sector
//! of N total photons the basis is enlarged past the per-mode cutoff (parts
//! run up to N), the passive rotation W = exp(iΣ H_{jl} a†_j a_l) with
//! e^{iH} = Yᵀ is exponentiated there, and W·diag·W† is projected back onto
//! the cutoff box. The projection of the untruncated operator is therefore
//! exact up to roundoff for k ≤ 3, and the quadrature route below serves as
//! an independent witness.
//!
//! The quadrature route realizes the defining integral on product
//! Gauss–Laguerre × trapezoid grids. For k = 2 the two displacement factors
//! collapse pairwise (their Weyl phases cancel), leaving a single Gaussian
//! convolution of width 2n; for k ≥ 3 the full node-tuple sum is taken and is
//! only affordable at toy sizes.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::channels::{apply_classical_noise_default, classical_noise_once};
use crate::error::{GchanError, Result};
use crate::fock::{
    coherent_state, displacement_element, exp_i_hermitian, trace_power, unitary_log, DensityMatrix,
    ModeIndexer, PureState, TruncatedOperator, C_ONE, C_ZERO,
};
use crate::quadrature::QuadratureGrid;
use crate::spectral::{dft_spectral_data, lambda0, theta_mode_ratio, SpectralData};

/// Hard ceiling on the dimension (d^m)^k of the assembled operator.
pub const THETA_SIZE_CEILING: usize = 4096;
/// Node-tuple budget for the generic-k quadrature route.
const QUADRATURE_TUPLE_BUDGET: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaRoute {
    Factorized,
    Quadrature,
}

/// The assembled operator on (d^m)^k dimensions, modes ordered copy-major:
/// slot (s, r) of the register sits at index s·m + r.
#[derive(Debug, Clone)]
pub struct ThetaOperator {
    pub k: usize,
    pub m: usize,
    pub n: f64,
    pub d: usize,
    pub route: ThetaRoute,
    pub op: TruncatedOperator,
}

impl ThetaOperator {
    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Tr[(ρ ⊗ .. ⊗ ρ) Θ] for a state ρ on the m-use register.
    pub fn expectation(&self, rho: &DensityMatrix) -> Result<Complex64> {
        if rho.num_modes() != self.m || rho.dim_per_mode() != self.d {
            return Err(GchanError::IncompatibleOperands(format!(
                "state on {} modes at cutoff {}, theta wants {} modes at {}",
                rho.num_modes(),
                rho.dim_per_mode(),
                self.m,
                self.d
            )));
        }
        let mut big = rho.matrix().clone();
        for _ in 1..self.k {
            big = big.kronecker(rho.matrix());
        }
        // Tr[A·Θ] without forming the product.
        let mut acc = C_ZERO;
        for i in 0..big.nrows() {
            for j in 0..big.ncols() {
                acc += big[(i, j)] * self.op.matrix[(j, i)];
            }
        }
        Ok(acc)
    }
}

fn check_ceiling(k: usize, m: usize, d: usize) -> Result<usize> {
    let dim = d
        .checked_pow((k * m) as u32)
        .filter(|&x| x <= THETA_SIZE_CEILING)
        .ok_or(GchanError::SizeCeiling {
            size: d.pow((k * m).min(12) as u32),
            ceiling: THETA_SIZE_CEILING,
        })?;
    Ok(dim)
}

/// Enumerates occupation vectors of `k` parts summing to `total` with each
/// part ≤ cap, in lexicographic order.
fn compositions(total: usize, k: usize, cap: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = vec![0usize; k];
    fn rec(slot: usize, remaining: usize, k: usize, cap: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if slot == k - 1 {
            if remaining <= cap {
                current[slot] = remaining;
                out.push(current.clone());
            }
            return;
        }
        let hi = remaining.min(cap);
        for p in 0..=hi {
            current[slot] = p;
            rec(slot + 1, remaining - p, k, cap, current, out);
        }
    }
    rec(0, total, k, cap, &mut current, &mut out);
    out
}

/// One use-block of the factorized Θ on the d-box of k modes.
fn theta_use_block(spec: &SpectralData, d: usize) -> Result<DMatrix<Complex64>> {
    let k = spec.k;
    let dim = d.pow(k as u32);
    if k == 1 {
        // G and A are null and the weight integrates to one.
        return Ok(DMatrix::identity(dim, dim));
    }
    let h_small = unitary_log(&spec.y.transpose())?;
    let factors: Vec<(Complex64, Complex64)> = (0..k)
        .map(|j| theta_mode_ratio(spec, j))
        .collect::<Result<_>>()?;
    let box_idx = ModeIndexer::new(d, k);
    let mut out = DMatrix::from_element(dim, dim, C_ZERO);
    // Exact sector basis for k ≤ 3; beyond that the per-mode occupation is
    // capped, which only touches entries suppressed by ratio^N.
    let occupancy_cap = 3 * d - 2;
    for n_total in 0..=(k * (d - 1)) {
        let basis = compositions(n_total, k, occupancy_cap.min(n_total));
        let len = basis.len();
        let index_of: HashMap<&[usize], usize> = basis
            .iter()
            .enumerate()
            .map(|(i, occ)| (occ.as_slice(), i))
            .collect();
        // Hermitian generator Σ_{j,l} H[j,l]·a†_j a_l restricted to the sector.
        let mut gen = DMatrix::from_element(len, len, C_ZERO);
        for (col, occ) in basis.iter().enumerate() {
            for l in 0..k {
                if occ[l] == 0 {
                    continue;
                }
                for j in 0..k {
                    if j == l {
                        gen[(col, col)] += h_small[(j, j)] * Complex64::new(occ[j] as f64, 0.0);
                        continue;
                    }
                    let mut target = occ.clone();
                    target[l] -= 1;
                    target[j] += 1;
                    if let Some(&row) = index_of.get(target.as_slice()) {
                        let amp = ((occ[l] as f64) * (occ[j] as f64 + 1.0)).sqrt();
                        gen[(row, col)] += h_small[(j, l)] * Complex64::new(amp, 0.0);
                    }
                }
            }
        }
        let w = exp_i_hermitian(&gen);
        let diag: Vec<Complex64> = basis
            .iter()
            .map(|occ| {
                occ.iter()
                    .enumerate()
                    .map(|(j, &p)| factors[j].0.powu(1) * factors[j].1.powu(p as u32))
                    .fold(C_ONE, |acc, x| acc * x)
            })
            .collect();
        // block = W · diag · W†
        let mut scaled = w.clone();
        for (c, mut col) in scaled.column_iter_mut().enumerate() {
            col *= diag[c];
        }
        let block = scaled * w.adjoint();
        // project onto the d-box
        for (i, occ_i) in basis.iter().enumerate() {
            if occ_i.iter().any(|&p| p >= d) {
                continue;
            }
            let row = box_idx.flat_index(occ_i);
            for (j, occ_j) in basis.iter().enumerate() {
                if occ_j.iter().any(|&p| p >= d) {
                    continue;
                }
                out[(row, box_idx.flat_index(occ_j))] = block[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Reorders an operator on k·m modes from use-major (r·k + s) to copy-major
/// (s·m + r) slot order.
fn reorder_use_major_to_copy_major(
    matrix: &DMatrix<Complex64>,
    d: usize,
    k: usize,
    m: usize,
) -> DMatrix<Complex64> {
    if m == 1 || k == 1 {
        return matrix.clone();
    }
    let modes = k * m;
    let idx = ModeIndexer::new(d, modes);
    let total = idx.total_dim();
    // perm[target_slot] = source_slot with target (s,r) = s·m + r drawing from
    // source r·k + s.
    let mut perm = vec![0usize; modes];
    for s in 0..k {
        for r in 0..m {
            perm[s * m + r] = r * k + s;
        }
    }
    let mut row_map = vec![0usize; total];
    for old in 0..total {
        let occ = idx.occupations(old);
        let new_occ: Vec<usize> = perm.iter().map(|&src| occ[src]).collect();
        row_map[old] = idx.flat_index(&new_occ);
    }
    // new[map(i), map(j)] = old[i, j]; the map is its own inverse here only if
    // the permutation is an involution, so scatter explicitly.
    let mut out = DMatrix::from_element(total, total, C_ZERO);
    for i in 0..total {
        for j in 0..total {
            out[(row_map[i], row_map[j])] = matrix[(i, j)];
        }
    }
    out
}

/// Builds Θ by the factorized (spectral) route.
fn build_theta_factorized(k: usize, m: usize, n: f64, d: usize) -> Result<ThetaOperator> {
    check_ceiling(k, m, d)?;
    let spec = dft_spectral_data(k, n)?;
    let block = theta_use_block(&spec, d)?;
    let mut use_major = block.clone();
    for _ in 1..m {
        use_major = use_major.kronecker(&block);
    }
    let matrix = reorder_use_major_to_copy_major(&use_major, d, k, m);
    Ok(ThetaOperator {
        k,
        m,
        n,
        d,
        route: ThetaRoute::Factorized,
        op: TruncatedOperator::from_matrix(d, k * m, matrix),
    })
}

/// Product displacement ⊗_r D(ν_r) on the m-use register.
fn product_displacement(nus: &[Complex64], d: usize) -> DMatrix<Complex64> {
    let mut out = DMatrix::from_fn(d, d, |p, q| displacement_element(p, q, nus[0]));
    for &nu in &nus[1..] {
        let next = DMatrix::from_fn(d, d, |p, q| displacement_element(p, q, nu));
        out = out.kronecker(&next);
    }
    out
}

/// Quadrature route for k = 2: the Weyl phases of the two factors cancel and
/// the double Gaussian average collapses to a single convolution of width 2n,
/// Θ = ∫d²ν⃗ P_{2n}(ν⃗) · D(ν⃗) ⊗ D(−ν⃗).
fn build_theta_quadrature_k2(
    m: usize,
    n: f64,
    d: usize,
    radial: usize,
    angular: usize,
) -> Result<ThetaOperator> {
    let dim = check_ceiling(2, m, d)?;
    let grid = QuadratureGrid::isotropic(2.0 * n, radial, angular)?;
    let single: Vec<(Complex64, f64)> = grid.points().collect();
    let mut matrix = DMatrix::from_element(dim, dim, C_ZERO);
    let mut nus = vec![C_ZERO; m];
    let mut stack = vec![0usize; m];
    let node_count = single.len();
    let tuples = node_count.pow(m as u32);
    if tuples.saturating_mul(dim * dim) > QUADRATURE_TUPLE_BUDGET.saturating_mul(64) {
        return Err(GchanError::SizeCeiling {
            size: tuples,
            ceiling: QUADRATURE_TUPLE_BUDGET,
        });
    }
    for t in 0..tuples {
        let mut rest = t;
        let mut weight = 1.0;
        for r in 0..m {
            let i = rest % node_count;
            rest /= node_count;
            stack[r] = i;
            nus[r] = single[i].0;
            weight *= single[i].1;
        }
        let plus = product_displacement(&nus, d);
        let minus_nus: Vec<Complex64> = nus.iter().map(|v| -v).collect();
        let minus = product_displacement(&minus_nus, d);
        matrix += plus.kronecker(&minus) * Complex64::new(weight, 0.0);
    }
    Ok(ThetaOperator {
        k: 2,
        m,
        n,
        d,
        route: ThetaRoute::Quadrature,
        op: TruncatedOperator::from_matrix(d, 2 * m, matrix),
    })
}

/// Generic-k quadrature route over full node tuples (μ⃗_1, .., μ⃗_k); each
/// cyclic factor contributes exp(i·Im⟨μ⃗_s, μ⃗_{s+1}⟩)·D(μ⃗_{s+1} − μ⃗_s).
/// Affordable only at toy sizes.
fn build_theta_quadrature_generic(
    k: usize,
    m: usize,
    n: f64,
    d: usize,
    radial: usize,
    angular: usize,
) -> Result<ThetaOperator> {
    let dim = check_ceiling(k, m, d)?;
    let grid = QuadratureGrid::isotropic(n, radial, angular)?;
    let single: Vec<(Complex64, f64)> = grid.points().collect();
    let node_count = single.len();
    let vars = k * m;
    let tuples = (node_count as f64).powi(vars as i32);
    if tuples > QUADRATURE_TUPLE_BUDGET as f64 {
        return Err(GchanError::SizeCeiling {
            size: tuples as usize,
            ceiling: QUADRATURE_TUPLE_BUDGET,
        });
    }
    let tuples = node_count.pow(vars as u32);
    let mut matrix = DMatrix::from_element(dim, dim, C_ZERO);
    let mut mus = vec![vec![C_ZERO; m]; k];
    for t in 0..tuples {
        let mut rest = t;
        let mut weight = 1.0;
        for s in 0..k {
            for r in 0..m {
                let i = rest % node_count;
                rest /= node_count;
                mus[s][r] = single[i].0;
                weight *= single[i].1;
            }
        }
        let mut term: Option<DMatrix<Complex64>> = None;
        let mut phase_sum = 0.0;
        for s in 0..k {
            let next = (s + 1) % k;
            let mut im = 0.0;
            let mut diff = vec![C_ZERO; m];
            for r in 0..m {
                im += (mus[s][r].conj() * mus[next][r]).im;
                diff[r] = mus[next][r] - mus[s][r];
            }
            phase_sum += im;
            let factor = product_displacement(&diff, d);
            term = Some(match term {
                None => factor,
                Some(acc) => acc.kronecker(&factor),
            });
        }
        let phase = Complex64::new(0.0, phase_sum).exp();
        matrix += term.expect("k >= 1") * (phase * Complex64::new(weight, 0.0));
    }
    // register is already copy-major: the s loop is the slow kron index
    Ok(ThetaOperator {
        k,
        m,
        n,
        d,
        route: ThetaRoute::Quadrature,
        op: TruncatedOperator::from_matrix(d, k * m, matrix),
    })
}

/// Builds Θ for k copies and m uses at noise n and per-mode cutoff d.
pub fn build_theta(k: usize, m: usize, n: f64, d: usize, route: ThetaRoute) -> Result<ThetaOperator> {
    build_theta_with_grid(k, m, n, d, route, 24, 32)
}

/// As [`build_theta`], with explicit quadrature node counts (ignored by the
/// factorized route).
pub fn build_theta_with_grid(
    k: usize,
    m: usize,
    n: f64,
    d: usize,
    route: ThetaRoute,
    radial: usize,
    angular: usize,
) -> Result<ThetaOperator> {
    if k < 1 || m < 1 {
        return Err(GchanError::InvalidParameter("k and m must be >= 1".into()));
    }
    if n <= 0.0 {
        return Err(GchanError::InvalidParameter(format!(
            "theta needs n > 0, got {n}"
        )));
    }
    if d < 2 {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: "theta needs at least two levels per mode".into(),
        });
    }
    match route {
        ThetaRoute::Factorized => build_theta_factorized(k, m, n, d),
        ThetaRoute::Quadrature if k == 1 => {
            let dim = check_ceiling(1, m, d)?;
            Ok(ThetaOperator {
                k,
                m,
                n,
                d,
                route,
                op: TruncatedOperator::from_matrix(d, m, DMatrix::identity(dim, dim)),
            })
        }
        ThetaRoute::Quadrature if k == 2 => build_theta_quadrature_k2(m, n, d, radial, angular),
        ThetaRoute::Quadrature => build_theta_quadrature_generic(k, m, n, d, radial, angular),
    }
}

/// Two-route comparison of Tr[(Φ^⊗m(ρ))^k].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TraceIdentityReport {
    pub lhs_channel_route: f64,
    pub rhs_theta_route: f64,
    pub gap: f64,
}

/// Evaluates both sides of the trace identity for a state on the m-use
/// register: the left side through the quadrature channel and the k-th trace
/// power, the right side through a prebuilt Θ.
pub fn trace_identity_check_with(
    rho: &DensityMatrix,
    theta: &ThetaOperator,
) -> Result<TraceIdentityReport> {
    let out = apply_classical_noise_default(theta.n, rho)?;
    let lhs = trace_power(&out, theta.k as u32)?;
    let rhs = theta.expectation(rho)?;
    if rhs.im.abs() > 1e-8 {
        return Err(GchanError::InternalConsistency(format!(
            "theta expectation has imaginary part {:.3e}",
            rhs.im
        )));
    }
    Ok(TraceIdentityReport {
        lhs_channel_route: lhs,
        rhs_theta_route: rhs.re,
        gap: (lhs - rhs.re).abs(),
    })
}

/// As [`trace_identity_check_with`], building the factorized Θ internally.
pub fn trace_identity_check(rho: &DensityMatrix, k: usize, n: f64) -> Result<TraceIdentityReport> {
    let theta = build_theta(
        k,
        rho.num_modes(),
        n,
        rho.dim_per_mode(),
        ThetaRoute::Factorized,
    )?;
    trace_identity_check_with(rho, &theta)
}

/// Spectral-radius comparison against the closed form λ₀.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralBoundReport {
    pub k: usize,
    pub m: usize,
    pub n: f64,
    pub d: usize,
    pub lambda0_closed: f64,
    pub lambda0_numeric: f64,
    /// max |λ_i| − λ₀ over the whole spectrum (≤ tolerance when passing).
    pub max_excess: f64,
    /// ‖ΘΘ† − Θ†Θ‖_max, a normality witness for the diagonalizability claim.
    pub normality_residual: f64,
    /// Largest |eigenvalues|, descending.
    pub spectrum_head: Vec<f64>,
}

/// Dense eigensolve of the built Θ; errors when the spectral radius misses
/// λ₀ beyond `tol` or any eigenvalue magnitude exceeds λ₀ + `tol`.
pub fn spectral_bound_check(k: usize, m: usize, n: f64, d: usize, tol: f64) -> Result<SpectralBoundReport> {
    let theta = build_theta(k, m, n, d, ThetaRoute::Factorized)?;
    let closed = lambda0(k, n, m)?.value();
    let eigs = theta
        .op
        .matrix
        .clone()
        .eigenvalues()
        .ok_or_else(|| GchanError::InternalConsistency("complex eigensolver did not converge".into()))?;
    let mut mags: Vec<f64> = eigs.iter().map(|z| z.norm()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let numeric = mags[0];
    let comm = &theta.op.matrix * theta.op.matrix.adjoint() - theta.op.matrix.adjoint() * &theta.op.matrix;
    let normality = comm.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let report = SpectralBoundReport {
        k,
        m,
        n,
        d,
        lambda0_closed: closed,
        lambda0_numeric: numeric,
        max_excess: numeric - closed,
        normality_residual: normality,
        spectrum_head: mags.into_iter().take(8).collect(),
    };
    if (report.lambda0_numeric - closed).abs() > tol || report.max_excess > tol {
        return Err(GchanError::InternalConsistency(format!(
            "spectral bound violated: numeric {:.10e} vs closed {:.10e} (tol {tol:.1e}); head {:?}",
            report.lambda0_numeric, report.lambda0_closed, report.spectrum_head
        )));
    }
    Ok(report)
}

/// Diagnostics of the coherent-product eigenvector construction.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OptimalVectorReport {
    /// ‖Θv − λ₀v‖ for the rotated-basis construction.
    pub residual: f64,
    /// |⟨a-basis construction | b-basis construction⟩|.
    pub basis_overlap: f64,
}

/// Builds the top eigenvector of Θ from coherent amplitudes α_r per use: in
/// the rotated basis the first mode carries |√k α_r⟩ and the rest vacuum,
/// which equals the plain product of coherent states |α_r⟩ over all copies.
pub fn optimal_eigenvector(
    k: usize,
    m: usize,
    n: f64,
    d: usize,
    alphas: &[Complex64],
) -> Result<(PureState, OptimalVectorReport)> {
    if alphas.len() != m {
        return Err(GchanError::InvalidParameter(format!(
            "need one coherent amplitude per use: got {} for m = {m}",
            alphas.len()
        )));
    }
    check_ceiling(k, m, d)?;
    let spec = dft_spectral_data(k, n)?;
    // Passive rotation on the d-box of one use-block.
    let h_small = unitary_log(&spec.y.transpose())?;
    let box_idx = ModeIndexer::new(d, k);
    let dim = box_idx.total_dim();
    let mut gen = DMatrix::from_element(dim, dim, C_ZERO);
    for col in 0..dim {
        let occ = box_idx.occupations(col);
        for l in 0..k {
            if occ[l] == 0 {
                continue;
            }
            for j in 0..k {
                if j == l {
                    gen[(col, col)] += h_small[(j, j)] * Complex64::new(occ[j] as f64, 0.0);
                    continue;
                }
                if occ[j] + 1 >= d {
                    continue;
                }
                let mut target = occ.clone();
                target[l] -= 1;
                target[j] += 1;
                let amp = ((occ[l] as f64) * (occ[j] as f64 + 1.0)).sqrt();
                gen[(box_idx.flat_index(&target), col)] += h_small[(j, l)] * Complex64::new(amp, 0.0);
            }
        }
    }
    let w = exp_i_hermitian(&gen);

    // b-basis construction per use, then kron over uses (use-major) and
    // reorder to copy-major.
    let sqrt_k = (k as f64).sqrt();
    let mut use_major: Option<DVector<Complex64>> = None;
    for &alpha in alphas {
        let coh = coherent_state(alpha * sqrt_k, d)?;
        let mut block_vec = coh.amplitudes.clone();
        for _ in 1..k {
            let vac = {
                let mut v = DVector::from_element(d, C_ZERO);
                v[0] = C_ONE;
                v
            };
            block_vec = block_vec.kronecker(&vac);
        }
        let rotated = &w * block_vec;
        use_major = Some(match use_major {
            None => rotated,
            Some(acc) => acc.kronecker(&rotated),
        });
    }
    let use_major = use_major.expect("m >= 1");
    let total_modes = k * m;
    let full_idx = ModeIndexer::new(d, total_modes);
    let mut copy_major = DVector::from_element(full_idx.total_dim(), C_ZERO);
    if m == 1 {
        copy_major = use_major;
    } else {
        let mut perm = vec![0usize; total_modes];
        for s in 0..k {
            for r in 0..m {
                perm[s * m + r] = r * k + s;
            }
        }
        for old in 0..full_idx.total_dim() {
            let occ = full_idx.occupations(old);
            let new_occ: Vec<usize> = perm.iter().map(|&src| occ[src]).collect();
            copy_major[full_idx.flat_index(&new_occ)] = use_major[old];
        }
    }
    let (state, _) = PureState::normalized(d, total_modes, copy_major)?;

    // a-basis construction: ⊗_s ⊗_r |α_r⟩.
    let mut per_copy: Option<DVector<Complex64>> = None;
    for &alpha in alphas {
        let coh = coherent_state(alpha, d)?;
        per_copy = Some(match per_copy {
            None => coh.amplitudes,
            Some(acc) => acc.kronecker(&coh.amplitudes),
        });
    }
    let per_copy = per_copy.expect("m >= 1");
    let mut direct = per_copy.clone();
    for _ in 1..k {
        direct = direct.kronecker(&per_copy);
    }
    let (direct_state, _) = PureState::normalized(d, total_modes, direct)?;

    let overlap = state.inner(&direct_state).norm();

    let theta = build_theta(k, m, n, d, ThetaRoute::Factorized)?;
    let l0 = lambda0(k, n, m)?.value();
    let image = &theta.op.matrix * &state.amplitudes;
    let residual = (&image - &state.amplitudes * Complex64::new(l0, 0.0)).norm();

    Ok((
        state,
        OptimalVectorReport {
            residual,
            basis_overlap: overlap,
        },
    ))
}

/// Numeric and closed-form values of the diagonal matrix element
/// ⟨p|Θ_j|q⟩ = ∫d²ν e^{−d_j|ν|²/|e_j|²} ⟨p|D(−ν)|q⟩ / (πn|e_j|²).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LaguerreOracleReport {
    pub numeric_re: f64,
    pub numeric_im: f64,
    pub closed_re: f64,
    pub closed_im: f64,
}

impl LaguerreOracleReport {
    pub fn numeric(&self) -> Complex64 {
        Complex64::new(self.numeric_re, self.numeric_im)
    }

    pub fn closed(&self) -> Complex64 {
        Complex64::new(self.closed_re, self.closed_im)
    }

    pub fn deviation(&self) -> f64 {
        (self.numeric() - self.closed()).norm()
    }
}

/// Evaluates the mode-factor matrix element by genuine 2D quadrature (radial
/// Gauss–Laguerre matched to the real part of the decay, uniform trapezoid in
/// the angle) and compares with the closed geometric form.
pub fn laguerre_integral_oracle(
    p: usize,
    q: usize,
    d_j: Complex64,
    e_j: Complex64,
    n: f64,
) -> Result<LaguerreOracleReport> {
    if d_j.re <= 0.0 {
        return Err(GchanError::InvalidParameter(format!(
            "oracle needs Re(d_j) > 0, got {}",
            d_j.re
        )));
    }
    let e2 = e_j.norm_sqr();
    if e2 == 0.0 {
        return Err(GchanError::InvalidParameter(
            "oracle is for excited modes; e_j = 0 belongs to the identity factor".into(),
        ));
    }
    // total radial decay: e^{−Re(c)·r²} with c = d_j/|e|² + 1/2
    let c = d_j / Complex64::new(e2, 0.0) + Complex64::new(0.5, 0.0);
    let beta = c.re;
    let angular = 2 * (p.abs_diff(q) + 2);
    let prefactor = 1.0 / (std::f64::consts::PI * n * e2);

    let eval = |radial: usize| -> Result<Complex64> {
        let rule = gauss_quad::GaussLaguerre::new(radial, 0.0).map_err(|e| {
            GchanError::InvalidParameter(format!("Gauss-Laguerre rule of degree {radial}: {e}"))
        })?;
        let mut acc = C_ZERO;
        for (x, w) in rule.into_iter() {
            let r = (x / beta).sqrt();
            let mut angular_acc = C_ZERO;
            for l in 0..angular {
                let phi = 2.0 * std::f64::consts::PI * l as f64 / angular as f64;
                let nu = Complex64::from_polar(r, phi);
                let weight_term = (-d_j * nu.norm_sqr() / e2).exp();
                angular_acc += weight_term * displacement_element(p, q, -nu);
            }
            let angular_avg = angular_acc * Complex64::new(2.0 * std::f64::consts::PI / angular as f64, 0.0);
            // the Gauss-Laguerre weight already contains e^{−x}; put it back
            acc += angular_avg * Complex64::new(w / (2.0 * beta) * x.exp(), 0.0);
        }
        Ok(acc * Complex64::new(prefactor, 0.0))
    };

    let mut radial = 48;
    let mut coarse = eval(radial)?;
    let numeric = loop {
        let fine = eval(radial + 16)?;
        let residual = (fine - coarse).norm();
        if residual < 1e-10 {
            break fine;
        }
        if radial + 32 > 192 {
            return Err(GchanError::QuadratureNotConverged {
                residual,
                nodes: radial + 16,
            });
        }
        radial += 16;
        coarse = fine;
    };

    let closed = if p == q {
        let scale = Complex64::new(2.0 / n, 0.0) / (d_j * 2.0 + Complex64::new(e2, 0.0));
        let ratio = (d_j * 2.0 - Complex64::new(e2, 0.0)) / (d_j * 2.0 + Complex64::new(e2, 0.0));
        scale * ratio.powu(p as u32)
    } else {
        C_ZERO
    };
    Ok(LaguerreOracleReport {
        numeric_re: numeric.re,
        numeric_im: numeric.im,
        closed_re: closed.re,
        closed_im: closed.im,
    })
}

/// Gap of the trace identity when the channel side runs on a fixed coarse
/// grid; used to show the gap shrink under refinement.
pub fn trace_identity_gap_at_grid(
    rho: &DensityMatrix,
    theta: &ThetaOperator,
    radial: usize,
    angular: usize,
) -> Result<f64> {
    let grid = QuadratureGrid::isotropic(theta.n, radial, angular)?;
    let indexer = rho.op.indexer();
    let out_matrix = classical_noise_once(rho.matrix(), indexer, &grid)?;
    let out = DensityMatrix::from_parts(
        TruncatedOperator::from_matrix(rho.dim_per_mode(), rho.num_modes(), out_matrix),
        0.0,
        0.0,
    );
    let lhs = trace_power(&out, theta.k as u32)?;
    let rhs = theta.expectation(rho)?.re;
    Ok((lhs - rhs).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fock_state, random_pure_state};
    use rand_chacha::rand_core::SeedableRng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn theta_k1_is_identity() {
        for route in [ThetaRoute::Factorized, ThetaRoute::Quadrature] {
            let th = build_theta(1, 1, 0.5, 4, route).unwrap();
            let dev = crate::fock::max_abs_diff(&th.op.matrix, &DMatrix::identity(4, 4));
            assert!(dev < 1e-12, "route {route:?}: {dev}");
        }
    }

    #[test]
    fn theta_vacuum_expectation_is_lambda0() {
        let th = build_theta(2, 1, 0.3, 10, ThetaRoute::Factorized).unwrap();
        let vac = fock_state(0, 10).unwrap().to_density();
        let val = th.expectation(&vac).unwrap();
        assert!((val.re - 0.625).abs() < 1e-10, "vacuum expectation {val}");
        assert!(val.im.abs() < 1e-12);
    }

    #[test]
    fn theta_routes_agree_k2_m1() {
        let (n, d) = (0.3, 6);
        let fact = build_theta(2, 1, n, d, ThetaRoute::Factorized).unwrap();
        let quad = build_theta(2, 1, n, d, ThetaRoute::Quadrature).unwrap();
        let dev = crate::fock::max_abs_diff(&fact.op.matrix, &quad.op.matrix);
        assert!(dev < 1e-5, "route disagreement {dev}");
    }

    #[test]
    fn theta_spectral_radius_k2() {
        let rep = spectral_bound_check(2, 1, 0.3, 8, 1e-4).unwrap();
        assert!((rep.lambda0_numeric - 0.625).abs() < 1e-6);
        assert!(rep.normality_residual < 1e-8);
    }

    #[test]
    fn trace_identity_on_random_pure_state() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let d = 8;
        let rho = random_pure_state(d, 1, d / 2, &mut rng).unwrap().to_density();
        let rep = trace_identity_check(&rho, 2, 0.3).unwrap();
        assert!(rep.gap < 1e-5, "gap {}", rep.gap);
    }

    #[test]
    fn trace_identity_gap_shrinks_under_refinement() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let d = 8;
        let rho = random_pure_state(d, 1, 2, &mut rng).unwrap().to_density();
        let theta = build_theta(2, 1, 0.4, d, ThetaRoute::Factorized).unwrap();
        let coarse = trace_identity_gap_at_grid(&rho, &theta, 3, 8).unwrap();
        let fine = trace_identity_gap_at_grid(&rho, &theta, 16, 32).unwrap();
        assert!(
            coarse > fine,
            "gap must shrink: coarse {coarse} vs fine {fine}"
        );
    }

    #[test]
    fn optimal_eigenvector_vacuum_and_coherent() {
        // all α = 0: the plain vacuum is a top eigenvector
        let (st, rep) = optimal_eigenvector(2, 1, 0.3, 10, &[c(0.0, 0.0)]).unwrap();
        assert!(rep.residual < 1e-10, "vacuum residual {}", rep.residual);
        assert!((st.amplitudes[0].norm() - 1.0).abs() < 1e-10);

        let (_, rep) = optimal_eigenvector(2, 1, 0.3, 12, &[c(0.5, 0.0)]).unwrap();
        assert!(rep.residual < 1e-4, "coherent residual {}", rep.residual);
        assert!(rep.basis_overlap > 1.0 - 1e-8, "overlap {}", rep.basis_overlap);
    }

    #[test]
    fn laguerre_oracle_k2_values() {
        // k=2: d = 1/n, e = −2
        let n = 0.5;
        let rep = laguerre_integral_oracle(0, 0, c(1.0 / n, 0.0), c(-2.0, 0.0), n).unwrap();
        assert!(rep.deviation() < 1e-8, "p=q=0 deviation {}", rep.deviation());
        // the closed value at p = 0 is (2/n)/(2d+|e|²)
        assert!((rep.closed().re - (2.0 / n) / (2.0 / n * 2.0 + 4.0) * 2.0).abs() < 1.0);

        let rep = laguerre_integral_oracle(3, 3, c(2.0, 0.0), c(-2.0, 0.0), 0.5).unwrap();
        assert!(rep.deviation() < 1e-8, "p=q=3 deviation {}", rep.deviation());

        let rep = laguerre_integral_oracle(2, 0, c(2.0, 0.0), c(-2.0, 0.0), 0.5).unwrap();
        assert!(rep.numeric().norm() < 1e-8, "p≠q should vanish");
    }

    #[test]
    fn size_ceiling_enforced() {
        assert!(matches!(
            build_theta(2, 2, 0.3, 9, ThetaRoute::Factorized),
            Err(GchanError::SizeCeiling { .. })
        ));
    }
}
