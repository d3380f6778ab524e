//! Projected gradient ascent of the output trace power over pure inputs.
//!
//! The objective is f(ψ) = Tr[(Φ^⊗m(|ψ⟩⟨ψ|))^k] on the unit sphere of the
//! m-use register; the Euclidean gradient is 2k·Φ*(σ^{k−1})ψ with σ the
//! channel output, projected onto the tangent space and renormalized after
//! each step, with backtracking halving on non-increase. Restarts run
//! independently (one is always seeded at the vacuum) and merge
//! deterministically by value with the restart index as tie-break.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::channels::{NoiseNodes, ChannelSpec, ThermalKraus};
use crate::error::{GchanError, Result};
use crate::fock::{
    partial_trace, random_pure_state, squeeze_op, DensityMatrix, ModeIndexer, PureState,
    TruncatedOperator, C_ZERO,
};
use crate::quadrature::QuadratureGrid;

/// Ascent configuration; `new` fills in the defaults.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizerConfig {
    pub cutoff: usize,
    pub uses: usize,
    pub order: u32,
    pub restarts: usize,
    pub max_iterations: usize,
    pub initial_step: f64,
    /// Convergence threshold on the objective change.
    pub convergence_tol: f64,
    pub seed: u64,
    /// Radial × angular grid used during ascent (the final value is
    /// re-evaluated on the full-accuracy grid).
    pub ascent_radial: usize,
    pub ascent_angular: usize,
}

impl OptimizerConfig {
    pub fn new(cutoff: usize, uses: usize, order: u32, seed: u64) -> Self {
        Self {
            cutoff,
            uses,
            order,
            restarts: 16,
            max_iterations: 2000,
            initial_step: 0.1,
            convergence_tol: 1e-10,
            seed,
            ascent_radial: 12,
            ascent_angular: 16,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.cutoff < 2 || self.uses < 1 || self.order < 1 || self.restarts < 1 {
            return Err(GchanError::InvalidParameter(
                "optimizer config fields must be positive (cutoff >= 2)".into(),
            ));
        }
        Ok(())
    }
}

fn serialize_state<S: Serializer>(state: &PureState, ser: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = ser.serialize_seq(Some(state.amplitudes.len()))?;
    for z in state.amplitudes.iter() {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

/// Outcome of one maximization run.
#[derive(Debug, Clone, Serialize)]
pub struct OptimizationResult {
    /// Best objective Tr[(Φ^⊗m(ρ))^k], re-evaluated on the accurate grid.
    pub best_value: f64,
    #[serde(serialize_with = "serialize_state")]
    pub best_state: PureState,
    /// Final objective of every restart, in restart order.
    pub restart_values: Vec<f64>,
    /// Objective trace of the winning restart (accepted steps only).
    pub best_trace: Vec<f64>,
    pub gradient_norm_at_exit: f64,
    /// Worst per-mode coherent fidelity of the winning state.
    pub coherent_fidelity: f64,
    /// Husimi peak location per mode, as (re, im) pairs.
    pub husimi_peaks: Vec<(f64, f64)>,
    /// False when some restart hit the iteration cap before converging.
    pub all_restarts_converged: bool,
}

/// Channel action used inside the ascent loop: fixed-grid classical noise or
/// the exact thermal-loss Kraus family, both precomputed once and applied
/// mode by mode.
enum LoopChannel {
    Identity,
    Noise { nodes: NoiseNodes },
    Loss { kraus: ThermalKraus },
}

impl LoopChannel {
    fn new(spec: &ChannelSpec, cfg: &OptimizerConfig) -> Result<Self> {
        spec.validate()?;
        match *spec {
            ChannelSpec::ClassicalNoise { n } => {
                if n < 1e-14 {
                    Ok(LoopChannel::Identity)
                } else {
                    let grid = QuadratureGrid::isotropic(n, cfg.ascent_radial, cfg.ascent_angular)?;
                    Ok(LoopChannel::Noise {
                        nodes: NoiseNodes::build(&grid, cfg.cutoff)?,
                    })
                }
            }
            ChannelSpec::ThermalLoss { eta, n } => {
                if eta == 1.0 {
                    Ok(LoopChannel::Identity)
                } else {
                    Ok(LoopChannel::Loss {
                        kraus: ThermalKraus::new(eta, n, cfg.cutoff)?,
                    })
                }
            }
            ChannelSpec::GaussianDisplacement { .. } | ChannelSpec::SqueezedEnvLoss { .. } => {
                Err(GchanError::UnsupportedChannel {
                    variant: if matches!(spec, ChannelSpec::GaussianDisplacement { .. }) {
                        "gauss"
                    } else {
                        "sqloss"
                    },
                    operation: "maximize_output_norm (optimize the underlying isotropic family instead)",
                })
            }
        }
    }

    fn apply(&self, matrix: &DMatrix<Complex64>, indexer: ModeIndexer) -> Result<DMatrix<Complex64>> {
        match self {
            LoopChannel::Identity => Ok(matrix.clone()),
            LoopChannel::Noise { nodes } => Ok(nodes.apply(matrix, indexer)),
            LoopChannel::Loss { kraus } => Ok(kraus.apply(matrix, indexer)),
        }
    }

    fn adjoint(&self, matrix: &DMatrix<Complex64>, indexer: ModeIndexer) -> Result<DMatrix<Complex64>> {
        match self {
            LoopChannel::Identity => Ok(matrix.clone()),
            // P_n is even in μ, making the map self-adjoint.
            LoopChannel::Noise { nodes } => Ok(nodes.apply(matrix, indexer)),
            LoopChannel::Loss { kraus } => Ok(kraus.adjoint_apply(matrix, indexer)),
        }
    }
}

fn trace_power_of_matrix(sigma: &DMatrix<Complex64>, k: u32) -> (f64, DMatrix<Complex64>) {
    // Returns (Tr σ^k, σ^{k−1}).
    let mut power = DMatrix::identity(sigma.nrows(), sigma.ncols());
    for _ in 0..(k - 1) {
        power = &power * sigma;
    }
    let mut tr = C_ZERO;
    for i in 0..sigma.nrows() {
        for j in 0..sigma.ncols() {
            tr += power[(i, j)] * sigma[(j, i)];
        }
    }
    (tr.re, power)
}

struct RestartOutcome {
    value: f64,
    state: DVector<Complex64>,
    trace: Vec<f64>,
    gradient_norm: f64,
    converged: bool,
}

fn run_restart(
    channel: &LoopChannel,
    cfg: &OptimizerConfig,
    indexer: ModeIndexer,
    psi0: DVector<Complex64>,
) -> Result<RestartOutcome> {
    let k = cfg.order;
    let objective = |psi: &DVector<Complex64>| -> Result<(f64, DMatrix<Complex64>)> {
        let rho = psi * psi.adjoint();
        let sigma = channel.apply(&rho, indexer)?;
        let (f, power) = trace_power_of_matrix(&sigma, k);
        Ok((f, power))
    };

    let mut psi = psi0;
    let mut step = cfg.initial_step;
    let (mut f, mut power) = objective(&psi)?;
    let mut trace = vec![f];
    let mut gradient_norm = f64::INFINITY;
    let mut converged = false;

    for _ in 0..cfg.max_iterations {
        let adj = channel.adjoint(&power, indexer)?;
        let grad = (&adj * &psi) * Complex64::new(2.0 * k as f64, 0.0);
        let overlap = psi.dotc(&grad);
        let tangent = &grad - &psi * overlap;
        gradient_norm = tangent.norm();
        if gradient_norm < 1e-9 {
            converged = true;
            break;
        }
        // backtracking: halve on non-increase
        let mut accepted = false;
        while step > 1e-12 {
            let mut candidate = &psi + &tangent * Complex64::new(step, 0.0);
            let norm = candidate.norm();
            candidate /= Complex64::new(norm, 0.0);
            let (f_new, power_new) = objective(&candidate)?;
            if f_new > f {
                let delta = f_new - f;
                psi = candidate;
                f = f_new;
                power = power_new;
                trace.push(f);
                step *= 1.5;
                accepted = true;
                if delta < cfg.convergence_tol {
                    converged = true;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    Ok(RestartOutcome {
        value: f,
        state: psi,
        trace,
        gradient_norm,
        converged,
    })
}

/// Maximizes Tr[(Φ^⊗m(|ψ⟩⟨ψ|))^k] over pure inputs by multi-start projected
/// gradient ascent. Supported for the isotropic-noise and thermal-loss
/// families; the squeezed families reduce to these by unitary conjugation.
pub fn maximize_output_norm(spec: &ChannelSpec, cfg: &OptimizerConfig) -> Result<OptimizationResult> {
    cfg.validate()?;
    let d = cfg.cutoff;
    let m = cfg.uses;
    let indexer = ModeIndexer::new(d, m);
    let channel = LoopChannel::new(spec, cfg)?;

    if cfg.order == 1 {
        // the trace norm of a state is identically 1
        let vac = vacuum_state(d, m);
        return finalize(spec, cfg, vec![make_outcome(1.0, vac)], 0);
    }

    let outcomes: Vec<Result<RestartOutcome>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|restart| {
            let psi0 = if restart == 0 {
                vacuum_state(d, m).amplitudes
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    cfg.seed.wrapping_add((restart as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
                );
                random_pure_state(d, m, d - 1, &mut rng)?.amplitudes
            };
            run_restart(&channel, cfg, indexer, psi0)
        })
        .collect();
    let outcomes: Vec<RestartOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

    // deterministic merge: best value, earliest restart on ties
    let mut best = 0usize;
    for (i, o) in outcomes.iter().enumerate() {
        if o.value > outcomes[best].value {
            best = i;
        }
    }
    finalize(spec, cfg, outcomes, best)
}

fn vacuum_state(d: usize, m: usize) -> PureState {
    let idx = ModeIndexer::new(d, m);
    let mut v = DVector::from_element(idx.total_dim(), C_ZERO);
    v[0] = Complex64::new(1.0, 0.0);
    PureState::new(d, m, v).expect("vacuum is normalized")
}

fn make_outcome(value: f64, state: PureState) -> RestartOutcome {
    RestartOutcome {
        value,
        state: state.amplitudes,
        trace: vec![value],
        gradient_norm: 0.0,
        converged: true,
    }
}

fn finalize(
    spec: &ChannelSpec,
    cfg: &OptimizerConfig,
    outcomes: Vec<RestartOutcome>,
    best: usize,
) -> Result<OptimizationResult> {
    let d = cfg.cutoff;
    let m = cfg.uses;
    let state = PureState::normalized(d, m, outcomes[best].state.clone())?.0;

    // accurate re-evaluation of the winner
    let rho = state.to_density();
    let sigma = crate::channels::apply_channel(spec, &rho)?;
    let (value, _) = trace_power_of_matrix(sigma.matrix(), cfg.order);

    let diag = coherent_diagnostic(&state, spec)?;
    let worst_fidelity = diag
        .per_mode_fidelity
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    Ok(OptimizationResult {
        best_value: value,
        best_state: state,
        restart_values: outcomes.iter().map(|o| o.value).collect(),
        best_trace: outcomes[best].trace.clone(),
        gradient_norm_at_exit: outcomes[best].gradient_norm,
        coherent_fidelity: worst_fidelity,
        husimi_peaks: diag.husimi_peaks.iter().map(|z| (z.re, z.im)).collect(),
        all_restarts_converged: outcomes.iter().all(|o| o.converged),
    })
}

/// Multiplicativity defect maximize(m uses) − maximize(1 use)^m.
#[derive(Debug, Clone, Serialize)]
pub struct AdditivityReport {
    pub multi_use_value: f64,
    pub single_use_value: f64,
    pub gap: f64,
}

pub fn additivity_gap(spec: &ChannelSpec, cfg: &OptimizerConfig) -> Result<AdditivityReport> {
    if cfg.order == 1 {
        return Ok(AdditivityReport {
            multi_use_value: 1.0,
            single_use_value: 1.0,
            gap: 0.0,
        });
    }
    let multi = maximize_output_norm(spec, cfg)?;
    let mut single_cfg = cfg.clone();
    single_cfg.uses = 1;
    let single = maximize_output_norm(spec, &single_cfg)?;
    Ok(AdditivityReport {
        multi_use_value: multi.best_value,
        single_use_value: single.best_value,
        gap: multi.best_value - single.best_value.powi(cfg.uses as i32),
    })
}

/// How close a state is to a coherent product: the Husimi maximum
/// max_α ⟨α|ρ_r|α⟩ of every single-mode reduction, after removing the
/// squeezing for the anisotropic families.
#[derive(Debug, Clone, Serialize)]
pub struct CoherentDiagnostic {
    pub per_mode_fidelity: Vec<f64>,
    #[serde(serialize_with = "serialize_peaks")]
    pub husimi_peaks: Vec<Complex64>,
}

fn serialize_peaks<S: Serializer>(peaks: &[Complex64], ser: S) -> std::result::Result<S::Ok, S::Error> {
    let mut seq = ser.serialize_seq(Some(peaks.len()))?;
    for z in peaks {
        seq.serialize_element(&[z.re, z.im])?;
    }
    seq.end()
}

pub fn coherent_diagnostic(state: &PureState, spec: &ChannelSpec) -> Result<CoherentDiagnostic> {
    let d = state.dim_per_mode;
    let mut rho = state.to_density();
    // For the anisotropic families the optimal inputs are anti-squeezed
    // coherent states; undo the squeeze before measuring coherence.
    let xi = match *spec {
        ChannelSpec::GaussianDisplacement { u, v } => {
            crate::spectral::squeeze_decomposition(u, v)?.xi
        }
        ChannelSpec::SqueezedEnvLoss { xi, .. } => xi,
        _ => C_ZERO,
    };
    if xi.norm() > 0.0 {
        let s = squeeze_op(xi, d)?;
        let indexer = rho.op.indexer();
        let mut current = rho.matrix().clone();
        for mode in 0..indexer.num_modes {
            current = crate::fock::apply_mode_sandwich(
                &s.matrix,
                &current,
                &s.matrix.adjoint(),
                indexer,
                mode,
            );
        }
        rho = DensityMatrix::from_parts(
            TruncatedOperator::from_matrix(d, indexer.num_modes, current),
            rho.tail_mass,
            rho.quad_error,
        );
    }
    let mut fidelities = Vec::with_capacity(state.num_modes);
    let mut peaks = Vec::with_capacity(state.num_modes);
    for mode in 0..state.num_modes {
        let reduced = partial_trace(&rho.op, &[mode])?;
        let (fid, peak) = husimi_maximum(&reduced.matrix, d);
        fidelities.push(fid);
        peaks.push(peak);
    }
    Ok(CoherentDiagnostic {
        per_mode_fidelity: fidelities,
        husimi_peaks: peaks,
    })
}

/// Maximizes Q(α) = ⟨α|ρ|α⟩ by compass search from the field centroid.
fn husimi_maximum(rho: &DMatrix<Complex64>, d: usize) -> (f64, Complex64) {
    let q = |alpha: Complex64| -> f64 {
        // coherent amplitudes without the cutoff-tail guard: the tail only
        // biases Q downward, which the search tolerates
        let mut v = DVector::from_element(d, C_ZERO);
        let mut amp = Complex64::new((-0.5 * alpha.norm_sqr()).exp(), 0.0);
        v[0] = amp;
        for p in 1..d {
            amp *= alpha / Complex64::new((p as f64).sqrt(), 0.0);
            v[p] = amp;
        }
        (v.adjoint() * rho * &v)[(0, 0)].re
    };
    // centroid ⟨a⟩ as the start
    let mut center = C_ZERO;
    for p in 1..d {
        center += rho[(p - 1, p)] * Complex64::new((p as f64).sqrt(), 0.0);
    }
    let mut best = q(center);
    let mut step = 0.5;
    while step > 1e-7 {
        let mut improved = false;
        for dir in [
            Complex64::new(step, 0.0),
            Complex64::new(-step, 0.0),
            Complex64::new(0.0, step),
            Complex64::new(0.0, -step),
        ] {
            let cand = center + dir;
            let val = q(cand);
            if val > best {
                best = val;
                center = cand;
                improved = true;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, center)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::fock_state;
    use crate::norms::closed_form_nu;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn small_cfg(d: usize, m: usize, k: u32) -> OptimizerConfig {
        let mut cfg = OptimizerConfig::new(d, m, k, 7);
        cfg.restarts = 4;
        cfg.max_iterations = 400;
        cfg
    }

    #[test]
    fn identity_channel_value_is_one() {
        let spec = ChannelSpec::ThermalLoss { eta: 1.0, n: 0.4 };
        let cfg = small_cfg(6, 1, 2);
        let res = maximize_output_norm(&spec, &cfg).unwrap();
        assert!((res.best_value - 1.0).abs() < 1e-9, "value {}", res.best_value);
    }

    #[test]
    fn order_one_returns_unity_exactly() {
        let spec = ChannelSpec::ClassicalNoise { n: 0.3 };
        let cfg = small_cfg(6, 1, 1);
        let res = maximize_output_norm(&spec, &cfg).unwrap();
        assert_eq!(res.best_value, 1.0);
        let rep = additivity_gap(&spec, &small_cfg(6, 2, 1)).unwrap();
        assert_eq!(rep.gap, 0.0);
    }

    #[test]
    fn unsupported_variants_are_rejected() {
        let spec = ChannelSpec::GaussianDisplacement { u: 0.6, v: c(0.2, 0.0) };
        assert!(matches!(
            maximize_output_norm(&spec, &small_cfg(6, 1, 2)),
            Err(GchanError::UnsupportedChannel { .. })
        ));
    }

    #[test]
    fn noise_single_use_reaches_closed_form() {
        let spec = ChannelSpec::ClassicalNoise { n: 0.3 };
        let mut cfg = small_cfg(16, 1, 2);
        cfg.restarts = 3;
        let res = maximize_output_norm(&spec, &cfg).unwrap();
        let oracle = closed_form_nu(&spec, 2, 1).unwrap().powi(2);
        assert!(
            res.best_value > oracle - 1e-4 && res.best_value < oracle + 1e-6,
            "value {} vs oracle {oracle}",
            res.best_value
        );
        assert!(res.coherent_fidelity > 0.999, "fidelity {}", res.coherent_fidelity);
    }

    #[test]
    fn ascent_traces_are_monotone() {
        let spec = ChannelSpec::ClassicalNoise { n: 0.5 };
        let cfg = small_cfg(10, 1, 3);
        let res = maximize_output_norm(&spec, &cfg).unwrap();
        for pair in res.best_trace.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-15, "trace not monotone: {pair:?}");
        }
    }

    #[test]
    fn phase_invariance_of_objective() {
        let spec = ChannelSpec::ClassicalNoise { n: 0.4 };
        let cfg = small_cfg(8, 1, 2);
        let channel = LoopChannel::new(&spec, &cfg).unwrap();
        let indexer = ModeIndexer::new(8, 1);
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let psi = random_pure_state(8, 1, 7, &mut rng).unwrap().amplitudes;
        let rho = &psi * psi.adjoint();
        let (f0, _) = trace_power_of_matrix(&channel.apply(&rho, indexer).unwrap(), 2);
        let rotated = &psi * Complex64::from_polar(1.0, 1.234);
        let rho_rot = &rotated * rotated.adjoint();
        let (f1, _) = trace_power_of_matrix(&channel.apply(&rho_rot, indexer).unwrap(), 2);
        assert!((f0 - f1).abs() < 1e-14);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let spec = ChannelSpec::ClassicalNoise { n: 0.5 };
        let cfg = small_cfg(6, 1, 2);
        let channel = LoopChannel::new(&spec, &cfg).unwrap();
        let indexer = ModeIndexer::new(6, 1);
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let psi = random_pure_state(6, 1, 5, &mut rng).unwrap().amplitudes;

        let f = |v: &DVector<Complex64>| -> f64 {
            let rho = v * v.adjoint();
            trace_power_of_matrix(&channel.apply(&rho, indexer).unwrap(), 2).0
        };
        let rho = &psi * psi.adjoint();
        let sigma = channel.apply(&rho, indexer).unwrap();
        let (_, power) = trace_power_of_matrix(&sigma, 2);
        let adj = channel.adjoint(&power, indexer).unwrap();
        let grad = (&adj * &psi) * Complex64::new(4.0, 0.0);

        let h = 1e-5;
        for i in 0..psi.len() {
            for comp in 0..2 {
                let mut plus = psi.clone();
                let mut minus = psi.clone();
                let delta = if comp == 0 {
                    Complex64::new(h, 0.0)
                } else {
                    Complex64::new(0.0, h)
                };
                plus[i] += delta;
                minus[i] -= delta;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                let analytic = if comp == 0 { grad[i].re } else { grad[i].im };
                let denom = analytic.abs().max(1e-6);
                assert!(
                    (fd - analytic).abs() / denom < 1e-6,
                    "component ({i},{comp}): fd {fd} vs analytic {analytic}"
                );
            }
        }
    }

    #[test]
    fn coherent_diagnostic_examples() {
        let spec = ChannelSpec::ClassicalNoise { n: 0.3 };
        // exact coherent input: fidelity 1
        let coh = crate::fock::coherent_state(c(0.4, 0.2), 20).unwrap();
        let diag = coherent_diagnostic(&coh, &spec).unwrap();
        assert!(diag.per_mode_fidelity[0] > 1.0 - 1e-9);
        assert!((diag.husimi_peaks[0] - c(0.4, 0.2)).norm() < 1e-3);

        // Fock |1⟩: max_α e^{−|α|²}|α|² = e^{−1}
        let one = fock_state(1, 20).unwrap();
        let diag = coherent_diagnostic(&one, &spec).unwrap();
        assert!(
            (diag.per_mode_fidelity[0] - (-1.0f64).exp()).abs() < 1e-6,
            "fidelity {}",
            diag.per_mode_fidelity[0]
        );
    }
}
