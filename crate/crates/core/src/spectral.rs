//! Exact finite-dimensional structure behind the channel moments: the
//! circulant pair (G, A), the weight matrix C = 1/n + A/2, their common DFT
//! diagonalization, the λ₀ determinant identity, and the 2×2 B-matrix that
//! splits an anisotropic Gaussian weight into squeezing plus isotropic noise.
//!
//! Conventions. Matrices are indexed 0-based; the paper-facing "first"
//! eigenvector (all entries 1/√k) sits at j = 0. The DFT row is
//! Y[j][l] = ω^{−jl}/√k with ω = e^{2πi/k}, so that Y M Y† = diag(λ_j) and
//! λ_j = Σ_s c_s ω^{js} for a circulant with first row c. The diagonal d_j of
//! Y C Y† is taken operationally from the product, which pins the ξ_j
//! normalization ambiguity.

use nalgebra::{DMatrix, DVector, Matrix2};
use num_complex::Complex64;

use crate::error::{GchanError, Result};

const DIAG_TOL: f64 = 1e-12;

/// The circulant pair (G, A) together with C = 1/n + A/2 for k channel copies.
#[derive(Debug, Clone)]
pub struct CirculantTriple {
    pub k: usize,
    pub n: f64,
    pub g: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub c: DMatrix<f64>,
}

fn circulant(first_row: &[f64]) -> DMatrix<f64> {
    let k = first_row.len();
    DMatrix::from_fn(k, k, |i, j| first_row[(j + k - i) % k])
}

/// Builds (G, A, C) for k copies at noise n, including the k = 1, 2
/// degeneracies (A = 0 for k ≤ 2, G = 0 for k = 1).
pub fn build_circulant_triple(k: usize, n: f64) -> Result<CirculantTriple> {
    if k < 1 {
        return Err(GchanError::InvalidParameter("k must be at least 1".into()));
    }
    if n <= 0.0 {
        return Err(GchanError::InvalidParameter(format!(
            "noise n = {n} must be positive for the weight matrix C"
        )));
    }
    let g = if k == 1 {
        DMatrix::zeros(1, 1)
    } else {
        let mut row = vec![0.0; k];
        row[0] = -1.0;
        row[1] = 1.0;
        circulant(&row)
    };
    let a = if k <= 2 {
        DMatrix::zeros(k, k)
    } else {
        let mut row = vec![0.0; k];
        row[1] = -1.0;
        row[k - 1] = 1.0;
        circulant(&row)
    };
    let c = DMatrix::identity(k, k) / n + &a * 0.5;
    Ok(CirculantTriple { k, n, g, a, c })
}

/// DFT diagonalization of the circulant triple: the unitary Y, the
/// eigenvalues e_j of G and the diagonal d_j of Y C Y†.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub k: usize,
    pub n: f64,
    pub y: DMatrix<Complex64>,
    pub e: DVector<Complex64>,
    pub d: DVector<Complex64>,
}

/// Diagonalizes (G, C) with the unitary DFT matrix and verifies that the
/// off-diagonal residue is at the roundoff level.
pub fn dft_spectral_data(k: usize, n: f64) -> Result<SpectralData> {
    let triple = build_circulant_triple(k, n)?;
    spectral_data_from_triple(&triple)
}

/// Same as [`dft_spectral_data`] but starting from an explicit triple. Used
/// by consistency tests that inject corrupted matrices.
pub fn spectral_data_from_triple(triple: &CirculantTriple) -> Result<SpectralData> {
    let k = triple.k;
    let omega = 2.0 * std::f64::consts::PI / k as f64;
    let scale = 1.0 / (k as f64).sqrt();
    let y = DMatrix::from_fn(k, k, |j, l| {
        Complex64::from_polar(scale, -omega * (j as f64) * (l as f64))
    });
    let gc = triple.g.map(|x| Complex64::new(x, 0.0));
    let cc = triple.c.map(|x| Complex64::new(x, 0.0));
    let eg = &y * gc * y.adjoint();
    let dc = &y * cc * y.adjoint();
    for (name, m) in [("YGY\u{2020}", &eg), ("YCY\u{2020}", &dc)] {
        let mut off = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    off = off.max(m[(i, j)].norm());
                }
            }
        }
        if off > DIAG_TOL {
            return Err(GchanError::InternalConsistency(format!(
                "{name} has off-diagonal residue {off:.3e}; G/A are not circulant as expected"
            )));
        }
    }
    let e = DVector::from_iterator(k, (0..k).map(|j| eg[(j, j)]));
    let d = DVector::from_iterator(k, (0..k).map(|j| dc[(j, j)]));
    for j in 0..k {
        if d[j].re <= 0.0 {
            return Err(GchanError::InternalConsistency(format!(
                "d_{j} = {} has non-positive real part",
                d[j]
            )));
        }
    }
    Ok(SpectralData {
        k,
        n: triple.n,
        y,
        e,
        d,
    })
}

/// The three evaluation routes of λ₀ for k copies, m uses at noise n.
#[derive(Debug, Clone, Copy)]
pub struct Lambda0 {
    /// ∏_{r,j} 2/(n(2d_j + |e_j|²)) over the spectral data.
    pub product_route: f64,
    /// {n^{−k} / det[C + GᵀG/2]}^m.
    pub determinant_route: f64,
    /// [1/((n+1)^k − n^k)]^m.
    pub closed_form: f64,
}

impl Lambda0 {
    pub fn value(&self) -> f64 {
        self.closed_form
    }

    pub fn max_relative_spread(&self) -> f64 {
        let vals = [self.product_route, self.determinant_route, self.closed_form];
        let mut spread = 0.0f64;
        for i in 0..3 {
            for j in (i + 1)..3 {
                let denom = vals[i].abs().max(vals[j].abs()).max(f64::MIN_POSITIVE);
                spread = spread.max((vals[i] - vals[j]).abs() / denom);
            }
        }
        spread
    }
}

/// Evaluates λ₀ along all three routes and enforces their mutual agreement
/// within 1e−12 relative.
pub fn lambda0(k: usize, n: f64, m: usize) -> Result<Lambda0> {
    let triple = build_circulant_triple(k, n)?;
    let spec = spectral_data_from_triple(&triple)?;
    lambda0_routes(&triple, &spec, m)
}

/// λ₀ routes from explicit structure matrices; exposed so a corrupted triple
/// can be shown to fail the consistency gate.
pub fn lambda0_routes(triple: &CirculantTriple, spec: &SpectralData, m: usize) -> Result<Lambda0> {
    if m < 1 {
        return Err(GchanError::InvalidParameter("m must be at least 1".into()));
    }
    let k = triple.k;
    let n = triple.n;

    let mut prod = Complex64::new(1.0, 0.0);
    for j in 0..k {
        let denom = spec.d[j] * 2.0 + Complex64::new(spec.e[j].norm_sqr(), 0.0);
        prod *= Complex64::new(2.0 / n, 0.0) / denom;
    }
    if prod.im.abs() > 1e-12 * prod.re.abs().max(1.0) {
        return Err(GchanError::InternalConsistency(format!(
            "spectral product for lambda0 has imaginary residue {:.3e}",
            prod.im
        )));
    }
    let product_route = prod.re.powi(m as i32);

    let det_matrix = &triple.c + triple.g.transpose() * &triple.g * 0.5;
    let det = det_matrix.determinant();
    let determinant_route = (n.powi(-(k as i32)) / det).powi(m as i32);

    let closed_form = (1.0 / ((n + 1.0).powi(k as i32) - n.powi(k as i32))).powi(m as i32);

    let out = Lambda0 {
        product_route,
        determinant_route,
        closed_form,
    };
    if out.max_relative_spread() > 1e-12 {
        return Err(GchanError::InternalConsistency(format!(
            "lambda0 routes disagree: product {:.16e}, determinant {:.16e}, closed {:.16e}",
            out.product_route, out.determinant_route, out.closed_form
        )));
    }
    Ok(out)
}

/// Scalar prefactor and geometric ratio of the j-th diagonal factor of the
/// moment operator: Θ_j = scale · ratio^{b†b}. For j = 0 both are exactly 1.
pub fn theta_mode_ratio(spec: &SpectralData, j: usize) -> Result<(Complex64, Complex64)> {
    if j >= spec.k {
        return Err(GchanError::InvalidModes(format!(
            "mode index {j} out of range for k = {}",
            spec.k
        )));
    }
    if j == 0 {
        return Ok((Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)));
    }
    let two_d = spec.d[j] * 2.0;
    let e2 = Complex64::new(spec.e[j].norm_sqr(), 0.0);
    let scale = Complex64::new(2.0 / spec.n, 0.0) / (two_d + e2);
    let ratio = (two_d - e2) / (two_d + e2);
    Ok((scale, ratio))
}

/// Splitting of the anisotropic Gaussian weight Γ = [[u, v*], [v, u]] into a
/// squeezing conjugation and an isotropic channel: B⁻¹ Γ B⁻¹ = √(u²−|v|²)·1,
/// effective noise n = 1/(2√(u²−|v|²)) and squeeze parameter ξ.
#[derive(Debug, Clone)]
pub struct SqueezeDecomposition {
    pub u: f64,
    pub v: Complex64,
    pub b: Matrix2<Complex64>,
    pub n_eff: f64,
    pub xi: Complex64,
}

impl SqueezeDecomposition {
    pub fn alpha(&self) -> f64 {
        self.b[(0, 0)].re
    }

    pub fn beta(&self) -> Complex64 {
        self.b[(1, 0)]
    }
}

pub fn squeeze_decomposition(u: f64, v: Complex64) -> Result<SqueezeDecomposition> {
    if u <= 0.0 {
        return Err(GchanError::InvalidParameter(format!(
            "Gaussian weight needs u > 0, got {u}"
        )));
    }
    let vn = v.norm();
    if vn == 0.0 {
        return Ok(SqueezeDecomposition {
            u,
            v,
            b: Matrix2::identity(),
            n_eff: 1.0 / (2.0 * u),
            xi: Complex64::new(0.0, 0.0),
        });
    }
    if u < vn {
        return Err(GchanError::InvalidParameter(format!(
            "Gamma not positive: u = {u} < |v| = {vn}"
        )));
    }
    let w = (u * u - vn * vn).sqrt();
    if w == 0.0 {
        return Err(GchanError::InvalidParameter(
            "u = |v| makes Gamma singular; the effective noise diverges".into(),
        ));
    }
    let phase = v / Complex64::new(vn, 0.0);
    let alpha = ((u + w) / (2.0 * w)).sqrt();
    let beta = phase * Complex64::new(((u - w) / (2.0 * w)).sqrt(), 0.0);
    let b = Matrix2::new(
        Complex64::new(alpha, 0.0),
        beta.conj(),
        beta,
        Complex64::new(alpha, 0.0),
    );
    let det = (b[(0, 0)] * b[(1, 1)] - b[(0, 1)] * b[(1, 0)]).re;
    if (det - 1.0).abs() > 1e-12 {
        return Err(GchanError::InternalConsistency(format!(
            "B determinant {det} deviates from 1"
        )));
    }
    let xi = phase * Complex64::new(((u - w) / (u + w)).sqrt().atanh(), 0.0);
    Ok(SqueezeDecomposition {
        u,
        v,
        b,
        n_eff: 1.0 / (2.0 * w),
        xi,
    })
}

/// Block lifts 𝔾 = G ⊗ 1_m and 𝔸 = A ⊗ 1_m of the circulant pair for m
/// channel uses.
pub fn block_matrices(k: usize, m: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if m < 1 {
        return Err(GchanError::InvalidParameter("m must be at least 1".into()));
    }
    let triple = build_circulant_triple(k, 1.0)?;
    let id = DMatrix::<f64>::identity(m, m);
    Ok((triple.g.kronecker(&id), triple.a.kronecker(&id)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn triple_k2_matches_printed_form() {
        let t = build_circulant_triple(2, 0.7).unwrap();
        assert_eq!(t.g, DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
        assert!(t.a.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn triple_k1_degenerate() {
        let t = build_circulant_triple(1, 0.5).unwrap();
        assert!(t.g[(0, 0)] == 0.0 && t.a[(0, 0)] == 0.0);
        assert!((t.c[(0, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn triple_row_sums_vanish() {
        let t = build_circulant_triple(4, 1.0).unwrap();
        for i in 0..4 {
            assert!(t.g.row(i).sum().abs() < 1e-15);
            assert!(t.a.row(i).sum().abs() < 1e-15);
        }
    }

    #[test]
    fn triple_structure_invariants() {
        for k in 1..=8 {
            let t = build_circulant_triple(k, 0.3).unwrap();
            // A antisymmetric, [G, A] = 0
            assert!((t.a.transpose() + &t.a).iter().all(|x| x.abs() < 1e-15));
            let comm = &t.g * &t.a - &t.a * &t.g;
            assert!(comm.iter().all(|x| x.abs() < 1e-14));
            // C = 1/n + A/2
            let c_expected = DMatrix::identity(k, k) / 0.3 + &t.a * 0.5;
            assert!((&t.c - c_expected).iter().all(|x| x.abs() < 1e-15));
        }
    }

    #[test]
    fn triple_rejects_bad_parameters() {
        assert!(build_circulant_triple(0, 1.0).is_err());
        assert!(build_circulant_triple(3, 0.0).is_err());
        assert!(build_circulant_triple(3, -1.0).is_err());
    }

    #[test]
    fn spectral_k2() {
        let s = dft_spectral_data(2, 0.4).unwrap();
        assert!((s.e[0]).norm() < 1e-15);
        assert!((s.e[1] - c(-2.0, 0.0)).norm() < 1e-14);
        for j in 0..2 {
            assert!((s.d[j] - c(2.5, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn spectral_k3_eigenvalues() {
        let s = dft_spectral_data(3, 1.0).unwrap();
        let sqrt3_half = 3f64.sqrt() / 2.0;
        assert!((s.e[0]).norm() < 1e-14);
        assert!((s.e[1] - c(-1.5, sqrt3_half)).norm() < 1e-13);
        assert!((s.e[2] - c(-1.5, -sqrt3_half)).norm() < 1e-13);
        for j in 1..3 {
            assert!((s.e[j].norm_sqr() - 3.0).abs() < 1e-13);
        }
    }

    #[test]
    fn spectral_first_row_and_unitarity() {
        for k in 1..=8 {
            let s = dft_spectral_data(k, 0.7).unwrap();
            let inv_sqrt = 1.0 / (k as f64).sqrt();
            for l in 0..k {
                assert!((s.y[(0, l)] - c(inv_sqrt, 0.0)).norm() < 1e-14);
            }
            let gram = &s.y * s.y.adjoint();
            let id = DMatrix::<Complex64>::identity(k, k);
            let dev = gram
                .iter()
                .zip(id.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(dev < 1e-12);
            assert!(s.e[0].norm() < 1e-13);
            assert!((s.d[0] - c(1.0 / 0.7, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn lambda0_examples() {
        // k=2: λ₀ = 1/(2n+1)
        for n in [0.1, 0.3, 1.0] {
            let l = lambda0(2, n, 1).unwrap();
            assert!((l.value() - 1.0 / (2.0 * n + 1.0)).abs() < 1e-14);
        }
        // k=3, n=1: λ₀ = 1/7
        let l = lambda0(3, 1.0, 1).unwrap();
        assert!((l.value() - 1.0 / 7.0).abs() < 1e-15);
        // k=1 is the degenerate identity case
        for n in [0.2, 2.0] {
            for m in [1, 2, 3] {
                assert!((lambda0(1, n, m).unwrap().value() - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn lambda0_three_routes_agree_on_grid() {
        for k in 2..=8 {
            for n in [0.1, 0.3, 1.0, 5.0] {
                for m in [1, 2] {
                    let l = lambda0(k, n, m).unwrap();
                    assert!(
                        l.max_relative_spread() < 1e-12,
                        "k={k} n={n} m={m}: spread {}",
                        l.max_relative_spread()
                    );
                }
            }
        }
    }

    #[test]
    fn lambda0_rejects_corrupted_structure() {
        // Flipping the sign of A breaks C and the determinant identity.
        let mut triple = build_circulant_triple(3, 0.5).unwrap();
        triple.a = -triple.a.clone();
        triple.c = DMatrix::identity(3, 3) / 0.5 + &triple.a * 0.5;
        // Corrupt only C, not the A used to rebuild spectra, so the routes
        // genuinely disagree.
        triple.c[(0, 1)] += 0.3;
        let spec = spectral_data_from_triple(&build_circulant_triple(3, 0.5).unwrap()).unwrap();
        assert!(lambda0_routes(&triple, &spec, 1).is_err());
    }

    #[test]
    fn theta_ratio_k2() {
        let s = dft_spectral_data(2, 0.3).unwrap();
        let (scale, ratio) = theta_mode_ratio(&s, 1).unwrap();
        assert!((scale - c(0.625, 0.0)).norm() < 1e-13);
        assert!((ratio - c(0.25, 0.0)).norm() < 1e-13);
        let (s0, r0) = theta_mode_ratio(&s, 0).unwrap();
        assert_eq!(s0, c(1.0, 0.0));
        assert_eq!(r0, c(1.0, 0.0));
    }

    #[test]
    fn theta_ratio_contracts_for_excited_modes() {
        for k in 2..=6 {
            for n in [0.1, 1.0, 10.0] {
                let s = dft_spectral_data(k, n).unwrap();
                for j in 1..k {
                    let (_, ratio) = theta_mode_ratio(&s, j).unwrap();
                    assert!(ratio.norm() < 1.0, "k={k} n={n} j={j}: |ratio| = {}", ratio.norm());
                }
            }
        }
    }

    #[test]
    fn squeeze_decomposition_trivial_and_generic() {
        let sd = squeeze_decomposition(0.8, c(0.0, 0.0)).unwrap();
        assert_eq!(sd.xi, c(0.0, 0.0));
        assert!((sd.n_eff - 1.0 / 1.6).abs() < 1e-15);

        let sd = squeeze_decomposition(0.6, c(0.3, 0.0)).unwrap();
        assert!((sd.n_eff - 1.0 / (2.0 * 0.27f64.sqrt())).abs() < 1e-14);
        assert!((sd.n_eff - 0.96225).abs() < 1e-5);
    }

    #[test]
    fn squeeze_decomposition_diagonalizes_gamma() {
        let u = 0.6;
        let v = c(0.0, 0.3);
        let sd = squeeze_decomposition(u, v).unwrap();
        let gamma = Matrix2::new(c(u, 0.0), v.conj(), v, c(u, 0.0));
        let b_inv = Matrix2::new(sd.b[(0, 0)], -sd.b[(0, 1)], -sd.b[(1, 0)], sd.b[(1, 1)]);
        let diag = b_inv * gamma * b_inv;
        let w = (u * u - v.norm_sqr()).sqrt();
        assert!((diag[(0, 0)] - c(w, 0.0)).norm() < 1e-12);
        assert!((diag[(1, 1)] - c(w, 0.0)).norm() < 1e-12);
        assert!(diag[(0, 1)].norm() < 1e-12 && diag[(1, 0)].norm() < 1e-12);
    }

    #[test]
    fn squeeze_decomposition_rejects_indefinite_gamma() {
        assert!(squeeze_decomposition(0.2, c(0.3, 0.0)).is_err());
        assert!(squeeze_decomposition(0.3, c(0.3, 0.0)).is_err());
    }

    #[test]
    fn block_lifts() {
        let (g1, a1) = block_matrices(3, 1).unwrap();
        let t = build_circulant_triple(3, 1.0).unwrap();
        assert_eq!(g1, t.g);
        assert_eq!(a1, t.a);

        let (g, _) = block_matrices(2, 2).unwrap();
        assert_eq!(g.nrows(), 4);
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                -1.0, 0.0, 1.0, 0.0, //
                0.0, -1.0, 0.0, 1.0, //
                1.0, 0.0, -1.0, 0.0, //
                0.0, 1.0, 0.0, -1.0,
            ],
        );
        assert_eq!(g, expected);

        let (_, a) = block_matrices(3, 2).unwrap();
        assert!((a.transpose() + &a).iter().all(|x| x.abs() < 1e-15));
    }

    #[test]
    fn block_lift_spectrum_has_multiplicity_m() {
        for k in 2..=4 {
            for m in 1..=3 {
                let (g, _) = block_matrices(k, m).unwrap();
                let gc = g.map(|x| Complex64::new(x, 0.0));
                let mut lifted: Vec<Complex64> = gc.eigenvalues().unwrap().iter().copied().collect();
                let t = build_circulant_triple(k, 1.0).unwrap();
                let base = t.g.map(|x| Complex64::new(x, 0.0));
                let small: Vec<Complex64> = base.eigenvalues().unwrap().iter().copied().collect();
                let mut expected: Vec<Complex64> = small
                    .iter()
                    .flat_map(|&e| std::iter::repeat(e).take(m))
                    .collect();
                let key = |z: &Complex64| (z.re, z.im);
                lifted.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
                expected.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
                for (l, e) in lifted.iter().zip(expected.iter()) {
                    assert!((l - e).norm() < 1e-10, "k={k} m={m}");
                }
            }
        }
    }

    #[test]
    fn circulant_a_eigenvalues_imaginary() {
        for k in 3..=8 {
            let t = build_circulant_triple(k, 1.0).unwrap();
            let ac = t.a.map(|x| Complex64::new(x, 0.0));
            let eigs = ac.eigenvalues().unwrap();
            for e in eigs.iter() {
                assert!(e.re.abs() < 1e-14, "k={k}: Re eig = {}", e.re);
            }
        }
    }
}
