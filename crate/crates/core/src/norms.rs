//! Output norms and Rényi entropies, their closed forms for the four channel
//! families, and the staircase bounds at non-integer order.

use serde::{Deserialize, Serialize};

use crate::channels::{ChannelConfig, ChannelSpec};
use crate::error::{GchanError, Result};
use crate::fock::{hermitian_spectrum, DensityMatrix};

/// Eigenvalues below this are dropped from entropy sums.
const ENTROPY_EIG_FLOOR: f64 = 1e-14;

/// How a reported norm value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormRoute {
    Numeric,
    ClosedForm,
    BoundUpper,
    BoundLower,
}

/// One tagged norm value, ready for JSON rows or CSV columns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormReport {
    pub z: f64,
    pub value: f64,
    pub route: NormRoute,
    pub channel: ChannelConfig,
    pub m: usize,
    pub error_estimate: f64,
}

impl NormReport {
    pub fn csv_header() -> &'static str {
        "z,value,route,channel,m,error_estimate"
    }

    pub fn csv_row(&self) -> String {
        let route = match self.route {
            NormRoute::Numeric => "numeric",
            NormRoute::ClosedForm => "closed_form",
            NormRoute::BoundUpper => "bound_upper",
            NormRoute::BoundLower => "bound_lower",
        };
        format!(
            "{},{},{},{},{},{}",
            self.z, self.value, route, self.channel.variant, self.m, self.error_estimate
        )
    }
}

/// Schatten z-norm (Σ λ^z)^{1/z} over the clipped spectrum of a state.
pub fn z_norm(rho: &DensityMatrix, z: f64) -> Result<f64> {
    if z < 1.0 {
        return Err(GchanError::InvalidParameter(format!(
            "z-norm needs z >= 1, got {z}"
        )));
    }
    let eigs = hermitian_spectrum(&rho.op)?;
    let sum: f64 = eigs.iter().map(|l| l.max(0.0).powf(z)).sum();
    Ok(sum.powf(1.0 / z))
}

/// Rényi entropy S_z = −ln Tr[ρ^z]/(z−1); z = 1 dispatches to the von
/// Neumann limit −Tr[ρ ln ρ] with 0·ln 0 = 0.
pub fn renyi_entropy(rho: &DensityMatrix, z: f64) -> Result<f64> {
    if z <= 0.0 {
        return Err(GchanError::InvalidParameter(format!(
            "Renyi entropy needs z > 0, got {z}"
        )));
    }
    let eigs = hermitian_spectrum(&rho.op)?;
    if (z - 1.0).abs() < 1e-12 {
        let s = -eigs
            .iter()
            .filter(|&&l| l > ENTROPY_EIG_FLOOR)
            .map(|&l| l * l.ln())
            .sum::<f64>();
        return Ok(s.max(0.0));
    }
    let sum: f64 = eigs
        .iter()
        .filter(|&&l| l > ENTROPY_EIG_FLOOR)
        .map(|&l| l.powf(z))
        .sum();
    Ok(-sum.ln() / (z - 1.0))
}

/// Maximal output z-norm of one isotropic-noise channel use at integer order:
/// [1/((n+1)^k − n^k)]^{1/k}, extended over m uses by the m/k power.
fn closed_form_isotropic(n: f64, k: u32, m: usize) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let base = 1.0 / ((n + 1.0).powi(k as i32) - n.powi(k as i32));
    base.powf(m as f64 / k as f64)
}

/// Closed-form maximal output k-norm ν_k(Φ^⊗m) for any of the four channel
/// families, through the effective isotropic noise of the family.
pub fn closed_form_nu(spec: &ChannelSpec, k: u32, m: usize) -> Result<f64> {
    if k == 0 {
        return Err(GchanError::InvalidParameter("k must be >= 1".into()));
    }
    if m == 0 {
        return Err(GchanError::InvalidParameter("m must be >= 1".into()));
    }
    let n_eff = spec.effective_noise()?;
    Ok(closed_form_isotropic(n_eff, k, m))
}

/// Staircase upper bound (closed form at k = ⌊z⌋) and coherent-input lower
/// bound [1/((n+1)^z − n^z)]^{m/z} for the isotropic channel at real z ≥ 1.
pub fn bounds_nu(n: f64, z: f64, m: usize) -> Result<(f64, f64)> {
    if z < 1.0 {
        return Err(GchanError::InvalidParameter(format!(
            "bounds need z >= 1, got {z}"
        )));
    }
    if n < 0.0 {
        return Err(GchanError::InvalidParameter(format!(
            "noise n = {n} must be nonnegative"
        )));
    }
    if m == 0 {
        return Err(GchanError::InvalidParameter("m must be >= 1".into()));
    }
    let k = z.floor() as u32;
    let upper = closed_form_isotropic(n, k, m);
    let lower = if n == 0.0 {
        1.0
    } else {
        (1.0 / ((n + 1.0).powf(z) - n.powf(z))).powf(m as f64 / z)
    };
    Ok((upper, lower))
}

/// Output z-norm of the isotropic channel on any coherent input:
/// [1/((n+1)^z − n^z)]^{1/z}.
pub fn coherent_output_norm(n: f64, z: f64) -> Result<f64> {
    if z < 1.0 {
        return Err(GchanError::InvalidParameter(format!(
            "norm order z must be >= 1, got {z}"
        )));
    }
    if n < 0.0 {
        return Err(GchanError::InvalidParameter(format!(
            "noise n = {n} must be nonnegative"
        )));
    }
    if n == 0.0 {
        return Ok(1.0);
    }
    Ok((1.0 / ((n + 1.0).powf(z) - n.powf(z))).powf(1.0 / z))
}

/// Margins of the Rényi monotonicity inequality for z ≥ z′:
/// ((z−1)/z)·S_z ≥ ((z′−1)/z′)·S_{z′} and ‖ρ‖_z ≤ ‖ρ‖_{z′}.
#[derive(Debug, Clone, Copy)]
pub struct MonotonicityReport {
    pub entropy_margin: f64,
    pub norm_margin: f64,
}

impl MonotonicityReport {
    pub fn holds(&self) -> bool {
        self.entropy_margin >= -1e-12 && self.norm_margin >= -1e-12
    }
}

/// Checks both monotonicity inequalities and returns the margins
/// (nonnegative short of a violation).
pub fn renyi_monotonicity_check(rho: &DensityMatrix, z: f64, z_prime: f64) -> Result<MonotonicityReport> {
    if !(z >= z_prime && z_prime >= 1.0) {
        return Err(GchanError::InvalidParameter(format!(
            "monotonicity check needs z >= z' >= 1, got z = {z}, z' = {z_prime}"
        )));
    }
    let sz = renyi_entropy(rho, z)?;
    let szp = renyi_entropy(rho, z_prime)?;
    let entropy_margin = (z - 1.0) / z * sz - (z_prime - 1.0) / z_prime * szp;
    let norm_margin = z_norm(rho, z_prime)? - z_norm(rho, z)?;
    Ok(MonotonicityReport {
        entropy_margin,
        norm_margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{fock_state, random_pure_state, thermal_state};
    use num_complex::Complex64;
    use rand_chacha::rand_core::SeedableRng;

    #[test]
    fn z_norm_of_pure_state_is_one() {
        let rho = fock_state(2, 6).unwrap().to_density();
        for z in [1.0, 1.5, 2.0, 3.7] {
            assert!((z_norm(&rho, z).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn z_norm_examples() {
        let tau = thermal_state(0.3, 40).unwrap();
        let n2 = z_norm(&tau, 2.0).unwrap();
        assert!((n2 - 0.625f64.sqrt()).abs() < 1e-10);
        assert!((n2 - 0.79057).abs() < 1e-5);
        // z = 1 returns the trace
        assert!((z_norm(&tau, 1.0).unwrap() - tau.trace()).abs() < 1e-12);
        assert!(z_norm(&tau, 0.5).is_err());
    }

    #[test]
    fn renyi_entropy_examples() {
        let pure = fock_state(0, 5).unwrap().to_density();
        for z in [0.5, 1.0, 2.0, 3.0] {
            assert!(renyi_entropy(&pure, z).unwrap().abs() < 1e-12);
        }
        let tau = thermal_state(1.0, 60).unwrap();
        let s2 = renyi_entropy(&tau, 2.0).unwrap();
        assert!((s2 - 3f64.ln()).abs() < 1e-10, "S2 = {s2}");
        // z → 1 limit approaches the analytic von Neumann entropy
        // S_vN(τ(n)) = (n+1)ln(n+1) − n ln n.
        let svn = 2.0 * 2f64.ln();
        let s_near = renyi_entropy(&tau, 1.001).unwrap();
        assert!((s_near - svn).abs() < 1e-2);
        let s_exact = renyi_entropy(&tau, 1.0).unwrap();
        assert!((s_exact - svn).abs() < 1e-9, "S_vN = {s_exact}");
    }

    #[test]
    fn closed_form_examples() {
        let noise = ChannelSpec::ClassicalNoise { n: 1.0 };
        let v = closed_form_nu(&noise, 2, 1).unwrap();
        assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-12);

        let noise = ChannelSpec::ClassicalNoise { n: 0.3 };
        let v = closed_form_nu(&noise, 2, 2).unwrap();
        assert!((v - 0.625).abs() < 1e-12);

        // identity channel: pure outputs, norm 1
        let loss = ChannelSpec::ThermalLoss { eta: 1.0, n: 0.8 };
        for k in [1, 2, 5] {
            for m in [1, 3] {
                assert!((closed_form_nu(&loss, k, m).unwrap() - 1.0).abs() < 1e-12);
            }
        }

        // k = 1 is the trace norm of a state
        assert!((closed_form_nu(&noise, 1, 4).unwrap() - 1.0).abs() < 1e-15);

        // Gaussian family goes through the effective noise
        let gauss = ChannelSpec::GaussianDisplacement {
            u: 0.6,
            v: Complex64::new(0.3, 0.0),
        };
        let n_eff = gauss.effective_noise().unwrap();
        let expect = (1.0 / ((n_eff + 1.0).powi(2) - n_eff * n_eff)).sqrt();
        assert!((closed_form_nu(&gauss, 2, 1).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn bounds_meet_at_integer_order() {
        let (u, l) = bounds_nu(0.3, 2.0, 2).unwrap();
        assert!((u - 0.625).abs() < 1e-12);
        assert!((u - l).abs() < 1e-12);

        let (u, l) = bounds_nu(0.3, 1.0, 5).unwrap();
        assert!((u - 1.0).abs() < 1e-15);
        assert!((l - 1.0).abs() < 1e-15);
    }

    #[test]
    fn bounds_ordered_at_fractional_order() {
        let (u, l) = bounds_nu(0.3, 2.5, 2).unwrap();
        assert!((u - 0.625).abs() < 1e-12, "staircase upper is the k=2 value");
        assert!(u > l, "upper {u} must exceed lower {l}");
        let expect_l = (1.0 / (1.3f64.powf(2.5) - 0.3f64.powf(2.5))).powf(2.0 / 2.5);
        assert!((l - expect_l).abs() < 1e-12);
        for z in [1.0, 1.3, 2.0, 3.9, 5.0] {
            let (u, l) = bounds_nu(0.3, z, 2).unwrap();
            assert!(u >= l - 1e-12, "z = {z}");
        }
    }

    #[test]
    fn coherent_norm_examples() {
        for z in [1.0, 2.0, 3.5] {
            assert!((coherent_output_norm(0.0, z).unwrap() - 1.0).abs() < 1e-15);
        }
        let v = coherent_output_norm(0.3, 2.0).unwrap();
        assert!((v - (1.0f64 / 1.6).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn monotonicity_thermal_example() {
        // τ(1): (2/3)S₃ = ln(7)/3 ≥ (1/2)S₂ = ln(3)/2.
        let tau = thermal_state(1.0, 60).unwrap();
        let rep = renyi_monotonicity_check(&tau, 3.0, 2.0).unwrap();
        assert!(rep.holds());
        let expect = 7f64.ln() / 3.0 - 3f64.ln() / 2.0;
        assert!((rep.entropy_margin - expect).abs() < 1e-9);
    }

    #[test]
    fn monotonicity_sweep_random_states() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let d = 8;
        for _ in 0..100 {
            let psi = random_pure_state(d, 1, d - 1, &mut rng).unwrap();
            // mix two pure states to get full-rank-ish inputs
            let psi2 = random_pure_state(d, 1, d - 1, &mut rng).unwrap();
            let m = psi.to_density().matrix() * Complex64::new(0.6, 0.0)
                + psi2.to_density().matrix() * Complex64::new(0.4, 0.0);
            let rho = DensityMatrix::from_parts(
                crate::fock::TruncatedOperator::from_matrix(d, 1, m),
                0.0,
                0.0,
            );
            for (z, zp) in [(1.5, 1.0), (2.0, 1.5), (3.0, 2.0)] {
                let rep = renyi_monotonicity_check(&rho, z, zp).unwrap();
                assert!(rep.holds(), "violated at z={z}, z'={zp}");
            }
        }
    }

    #[test]
    fn monotonicity_pure_state_edges() {
        let rho = fock_state(1, 4).unwrap().to_density();
        let rep = renyi_monotonicity_check(&rho, 3.0, 2.0).unwrap();
        assert!(rep.entropy_margin.abs() < 1e-12);
        assert!(rep.norm_margin.abs() < 1e-12);
    }

    #[test]
    fn norm_report_serialization() {
        let report = NormReport {
            z: 2.0,
            value: 0.625,
            route: NormRoute::ClosedForm,
            channel: ChannelSpec::ClassicalNoise { n: 0.3 }.into(),
            m: 2,
            error_estimate: 0.0,
        };
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"route\":\"closed_form\""));
        assert!(json.contains("\"variant\":\"noise\""));
        let row = report.csv_row();
        assert!(row.starts_with("2,0.625,closed_form,noise,2,"));
    }
}
