//! State constructors: Fock, coherent, thermal and squeezed-thermal states.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{squeeze_op, DensityMatrix, PureState, TruncatedOperator, C_ZERO, DEFAULT_TAIL_TOL};
use crate::error::{GchanError, Result};

/// Tagged request for one of the standard input states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StateKind {
    Fock { p: usize },
    Coherent { alpha: Complex64 },
    Thermal { n: f64 },
    SqueezedThermal { n: f64, xi: Complex64 },
}

/// Photon-number eigenstate |p⟩.
pub fn fock_state(p: usize, d: usize) -> Result<PureState> {
    if p >= d {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: format!("Fock level {p} not below cutoff"),
        });
    }
    let mut v = DVector::from_element(d, C_ZERO);
    v[p] = Complex64::new(1.0, 0.0);
    PureState::new(d, 1, v)
}

/// Coherent state |α⟩ with amplitudes e^{−|α|²/2} α^p/√p!. Errors when the
/// truncated tail is not negligible at this cutoff.
pub fn coherent_state(alpha: Complex64, d: usize) -> Result<PureState> {
    if d < 2 {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: "coherent state needs at least two levels".into(),
        });
    }
    let mut v = DVector::from_element(d, C_ZERO);
    let mut amp = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
    v[0] = amp;
    for p in 1..d {
        amp *= alpha / Complex64::new((p as f64).sqrt(), 0.0);
        v[p] = amp;
    }
    let tail = (1.0 - v.norm_squared()).max(0.0);
    if tail > DEFAULT_TAIL_TOL {
        let required = required_levels_for_coherent(alpha);
        return Err(GchanError::CutoffTooSmall {
            given: d,
            required,
            tail,
            tolerance: DEFAULT_TAIL_TOL,
        });
    }
    // The remaining deficit is far below the norm tolerance; absorb it.
    Ok(PureState::normalized(d, 1, v)?.0)
}

fn required_levels_for_coherent(alpha: Complex64) -> usize {
    // Poisson tail: mean |α|² plus a growing number of standard deviations.
    let mean = alpha.norm_sqr();
    (mean + 12.0 * mean.sqrt() + 24.0).ceil() as usize
}

/// Thermal state τ(n) with diagonal (1/(n+1))(n/(n+1))^p and the default
/// tail tolerance.
pub fn thermal_state(n: f64, d: usize) -> Result<DensityMatrix> {
    thermal_state_with_tolerance(n, d, DEFAULT_TAIL_TOL)
}

/// Thermal state with an explicit tail tolerance; the truncated geometric
/// tail (n/(n+1))^d must fall below it.
pub fn thermal_state_with_tolerance(n: f64, d: usize, tail_tolerance: f64) -> Result<DensityMatrix> {
    if n < 0.0 {
        return Err(GchanError::InvalidParameter(format!(
            "thermal occupation n = {n} must be nonnegative"
        )));
    }
    if d < 1 {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: "thermal state needs at least one level".into(),
        });
    }
    let mut m = DMatrix::from_element(d, d, C_ZERO);
    let tail;
    if n == 0.0 {
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        tail = 0.0;
    } else {
        let ratio = n / (n + 1.0);
        let mut w = 1.0 / (n + 1.0);
        for p in 0..d {
            m[(p, p)] = Complex64::new(w, 0.0);
            w *= ratio;
        }
        tail = ratio.powi(d as i32);
        if tail > tail_tolerance {
            let required = (tail_tolerance.ln() / ratio.ln()).ceil() as usize + 1;
            return Err(GchanError::CutoffTooSmall {
                given: d,
                required,
                tail,
                tolerance: tail_tolerance,
            });
        }
    }
    Ok(DensityMatrix::from_parts(
        TruncatedOperator::from_matrix(d, 1, m),
        tail,
        0.0,
    ))
}

/// Squeezed thermal state Σ†(ξ) τ(n) Σ(ξ).
pub fn squeezed_thermal_state(n: f64, xi: Complex64, d: usize) -> Result<DensityMatrix> {
    squeezed_thermal_state_with_tolerance(n, xi, d, DEFAULT_TAIL_TOL)
}

pub(crate) fn squeezed_thermal_state_with_tolerance(
    n: f64,
    xi: Complex64,
    d: usize,
    tail_tolerance: f64,
) -> Result<DensityMatrix> {
    let tau = thermal_state_with_tolerance(n, d, tail_tolerance)?;
    if xi.norm() == 0.0 {
        return Ok(tau);
    }
    let s = squeeze_op(xi, d)?;
    let m = s.matrix.adjoint() * &tau.op.matrix * &s.matrix;
    Ok(DensityMatrix::from_parts(
        TruncatedOperator::from_matrix(d, 1, m),
        tau.tail_mass,
        0.0,
    ))
}

/// Haar-like random pure state on a register: i.i.d. complex Gaussian
/// amplitudes restricted to levels 0..=max_level per mode, normalized.
pub fn random_pure_state<R: Rng + ?Sized>(
    d: usize,
    num_modes: usize,
    max_level: usize,
    rng: &mut R,
) -> Result<PureState> {
    if max_level >= d {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: format!("support level {max_level} not below cutoff"),
        });
    }
    let idx = super::ModeIndexer::new(d, num_modes);
    let total = idx.total_dim();
    let mut v = DVector::from_element(total, C_ZERO);
    for i in 0..total {
        if idx.occupations(i).iter().all(|&p| p <= max_level) {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            v[i] = Complex64::new(re, im);
        }
    }
    Ok(PureState::normalized(d, num_modes, v)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::trace_power;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn thermal_zero_is_vacuum_projector() {
        let tau = thermal_state(0.0, 6).unwrap();
        assert!((tau.matrix()[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((tau.trace() - 1.0).abs() < 1e-15);
        assert!(tau.matrix().iter().skip(1).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn thermal_purity_closed_form() {
        // Tr[τ(n)²] = 1/(2n+1) at n = 0.3, d = 40.
        let tau = thermal_state(0.3, 40).unwrap();
        let purity = trace_power(&tau, 2).unwrap();
        assert!((purity - 0.625).abs() < 1e-10, "purity {purity}");
    }

    #[test]
    fn thermal_cutoff_error_names_requirement() {
        let err = thermal_state(5.0, 20).unwrap_err();
        match err {
            GchanError::CutoffTooSmall { required, .. } => assert!(required > 20),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn coherent_zero_is_vacuum() {
        let v = coherent_state(C_ZERO, 5).unwrap();
        assert!((v.amplitudes[0].re - 1.0).abs() < 1e-15);
        assert!(v.amplitudes.iter().skip(1).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn coherent_is_annihilation_eigenstate() {
        let alpha = c(0.7, -0.2);
        let d = 40;
        let st = coherent_state(alpha, d).unwrap();
        let a = crate::fock::annihilation_op(d).unwrap();
        let av = &a.matrix * &st.amplitudes;
        let expect = &st.amplitudes * alpha;
        let dev = av
            .iter()
            .take(d - 1)
            .zip(expect.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        assert!(dev < 1e-12);
    }

    #[test]
    fn squeezed_thermal_reduces_to_thermal() {
        let st = squeezed_thermal_state(0.2, C_ZERO, 25).unwrap();
        let tau = thermal_state(0.2, 25).unwrap();
        let dev = crate::fock::max_abs_diff(st.matrix(), tau.matrix());
        assert!(dev < 1e-15);
    }

    #[test]
    fn squeezed_thermal_keeps_trace() {
        let st = squeezed_thermal_state(0.2, c(0.3, 0.1), 30).unwrap();
        assert!((st.trace() - (1.0 - st.tail_mass)).abs() < 1e-12);
        assert!(st.op.hermiticity_deviation() < 1e-12);
    }

    #[test]
    fn random_state_respects_support() {
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let st = random_pure_state(6, 2, 2, &mut rng).unwrap();
        let idx = crate::fock::ModeIndexer::new(6, 2);
        for i in 0..st.dim() {
            if idx.occupations(i).iter().any(|&p| p > 2) {
                assert_eq!(st.amplitudes[i], C_ZERO);
            }
        }
        assert!((st.amplitudes.norm() - 1.0).abs() < 1e-12);
    }
}
