//! The four CP maps acting on truncated density matrices.
//!
//! * classical noise: ρ ↦ ∫d²μ P_n(μ) D(μ)ρD†(μ), evaluated on a polar
//!   Gauss–Laguerre × trapezoid grid, refined until the self-reported error
//!   estimate (difference between consecutive radial rules) is small;
//! * displaced Gaussian with anisotropic weight Γ: squeeze → classical noise
//!   at the effective occupation → anti-squeeze, with a direct Gauss–Hermite
//!   integral available as a cross-check;
//! * thermal loss: beam-splitter coupling to a thermal environment, applied
//!   through number-sector Kraus operators (shifted diagonals), so the
//!   environment output is never truncated;
//! * loss into a squeezed thermal environment, by the analogous squeeze
//!   conjugation of the thermal-loss map, with a direct Kraus route for
//!   cross-validation.
//!
//! Multi-mode product applications run mode by mode; that is algebraically
//! identical to the m-fold product grid and exponentially cheaper.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{GchanError, Result};
use crate::fock::{
    apply_mode_sandwich, displacement_op_raw, max_abs_diff, squeeze_op, thermal_state_with_tolerance,
    BeamSplitterSectors, DensityMatrix, ModeIndexer, TruncatedOperator, C_ZERO,
};
use crate::quadrature::{AnisotropicGrid, QuadratureGrid, MAX_RADIAL, QUAD_ERROR_TARGET};
use crate::spectral::{squeeze_decomposition, SqueezeDecomposition};

/// Environment thermal tail kept below this when picking the env cutoff.
pub const ENV_TAIL_TOL: f64 = 1e-12;
/// Default node count per axis for the direct anisotropic route.
pub const DEFAULT_HERMITE_NODES: usize = 32;

/// Tagged description of one of the four channel families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelSpec {
    /// Random displacement with circularly symmetric Gaussian noise n.
    ClassicalNoise { n: f64 },
    /// Random displacement with anisotropic Gaussian weight Γ = [[u, v*],[v, u]].
    GaussianDisplacement { u: f64, v: Complex64 },
    /// Beam-splitter coupling (transmissivity η) to a thermal environment.
    ThermalLoss { eta: f64, n: f64 },
    /// Beam-splitter coupling to a squeezed thermal environment.
    SqueezedEnvLoss { eta: f64, n: f64, xi: Complex64 },
}

impl ChannelSpec {
    pub fn variant_name(&self) -> &'static str {
        match self {
            ChannelSpec::ClassicalNoise { .. } => "noise",
            ChannelSpec::GaussianDisplacement { .. } => "gauss",
            ChannelSpec::ThermalLoss { .. } => "loss",
            ChannelSpec::SqueezedEnvLoss { .. } => "sqloss",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ChannelSpec::ClassicalNoise { n } => {
                if n < 0.0 {
                    return Err(GchanError::InvalidParameter(format!(
                        "noise n = {n} must be nonnegative"
                    )));
                }
            }
            ChannelSpec::GaussianDisplacement { u, v } => {
                if u <= 0.0 || (u < v.norm()) || (u == v.norm() && v.norm() > 0.0) {
                    return Err(GchanError::InvalidParameter(format!(
                        "Gaussian weight needs u > |v| (or v = 0), got u = {u}, |v| = {}",
                        v.norm()
                    )));
                }
            }
            ChannelSpec::ThermalLoss { eta, n } => {
                if !(0.0..=1.0).contains(&eta) {
                    return Err(GchanError::InvalidParameter(format!(
                        "transmissivity eta = {eta} outside [0, 1]"
                    )));
                }
                if n < 0.0 {
                    return Err(GchanError::InvalidParameter(format!(
                        "environment occupation n = {n} must be nonnegative"
                    )));
                }
            }
            ChannelSpec::SqueezedEnvLoss { eta, n, .. } => {
                ChannelSpec::ThermalLoss { eta, n }.validate()?;
            }
        }
        Ok(())
    }

    /// Effective isotropic noise entering the closed-form output norms:
    /// n itself, 1/(2√(u²−|v|²)), or (1−η)n for the loss families.
    pub fn effective_noise(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            ChannelSpec::ClassicalNoise { n } => n,
            ChannelSpec::GaussianDisplacement { u, v } => {
                1.0 / (2.0 * (u * u - v.norm_sqr()).sqrt())
            }
            ChannelSpec::ThermalLoss { eta, n } => (1.0 - eta) * n,
            ChannelSpec::SqueezedEnvLoss { eta, n, .. } => (1.0 - eta) * n,
        })
    }
}

/// Flat key-value form of [`ChannelSpec`] used by config files and reports.
/// Unknown keys are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub variant: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub u: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub v_im: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_re: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub xi_im: Option<f64>,
}

impl From<ChannelSpec> for ChannelConfig {
    fn from(spec: ChannelSpec) -> Self {
        let mut cfg = ChannelConfig {
            variant: spec.variant_name().to_string(),
            ..Default::default()
        };
        match spec {
            ChannelSpec::ClassicalNoise { n } => cfg.n = Some(n),
            ChannelSpec::GaussianDisplacement { u, v } => {
                cfg.u = Some(u);
                cfg.v_re = Some(v.re);
                cfg.v_im = Some(v.im);
            }
            ChannelSpec::ThermalLoss { eta, n } => {
                cfg.eta = Some(eta);
                cfg.n = Some(n);
            }
            ChannelSpec::SqueezedEnvLoss { eta, n, xi } => {
                cfg.eta = Some(eta);
                cfg.n = Some(n);
                cfg.xi_re = Some(xi.re);
                cfg.xi_im = Some(xi.im);
            }
        }
        cfg
    }
}

impl TryFrom<&ChannelConfig> for ChannelSpec {
    type Error = GchanError;

    fn try_from(cfg: &ChannelConfig) -> Result<ChannelSpec> {
        let need = |field: Option<f64>, name: &str| {
            field.ok_or_else(|| {
                GchanError::InvalidParameter(format!(
                    "channel variant '{}' needs key '{name}'",
                    cfg.variant
                ))
            })
        };
        let spec = match cfg.variant.as_str() {
            "noise" => ChannelSpec::ClassicalNoise {
                n: need(cfg.n, "n")?,
            },
            "gauss" => ChannelSpec::GaussianDisplacement {
                u: need(cfg.u, "u")?,
                v: Complex64::new(cfg.v_re.unwrap_or(0.0), cfg.v_im.unwrap_or(0.0)),
            },
            "loss" => ChannelSpec::ThermalLoss {
                eta: need(cfg.eta, "eta")?,
                n: need(cfg.n, "n")?,
            },
            "sqloss" => ChannelSpec::SqueezedEnvLoss {
                eta: need(cfg.eta, "eta")?,
                n: need(cfg.n, "n")?,
                xi: Complex64::new(cfg.xi_re.unwrap_or(0.0), cfg.xi_im.unwrap_or(0.0)),
            },
            other => {
                return Err(GchanError::InvalidParameter(format!(
                    "unknown channel variant '{other}' (expected noise|gauss|loss|sqloss)"
                )))
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Displacement matrices of every grid node, built once and reused across
/// channel applications.
pub(crate) struct NoiseNodes {
    nodes: Vec<(DMatrix<Complex64>, DMatrix<Complex64>, f64)>,
}

impl NoiseNodes {
    pub(crate) fn build(grid: &QuadratureGrid, d: usize) -> Result<Self> {
        let nodes = grid
            .points()
            .map(|(mu, w)| {
                displacement_op_raw(mu, d).map(|op| {
                    let adj = op.matrix.adjoint();
                    (op.matrix, adj, w)
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { nodes })
    }

    /// Mode-by-mode application Σ w·D ρ D† over the node set.
    pub(crate) fn apply(&self, matrix: &DMatrix<Complex64>, indexer: ModeIndexer) -> DMatrix<Complex64> {
        let mut current = matrix.clone();
        for mode in 0..indexer.num_modes {
            let mut acc = DMatrix::from_element(current.nrows(), current.ncols(), C_ZERO);
            for (disp, disp_adj, w) in &self.nodes {
                let term = apply_mode_sandwich(disp, &current, disp_adj, indexer, mode);
                acc += term * Complex64::new(*w, 0.0);
            }
            current = acc;
        }
        current
    }
}

/// One unrefined pass of the classical-noise map on a raw matrix.
pub(crate) fn classical_noise_once(
    matrix: &DMatrix<Complex64>,
    indexer: ModeIndexer,
    grid: &QuadratureGrid,
) -> Result<DMatrix<Complex64>> {
    let nodes = NoiseNodes::build(grid, indexer.dim_per_mode)?;
    Ok(nodes.apply(matrix, indexer))
}

/// Classical-noise channel with automatic radial refinement. The returned
/// state carries the quadrature error estimate (difference between the last
/// two radial rules) and the measured truncation tail.
pub fn apply_classical_noise(
    n: f64,
    rho: &DensityMatrix,
    grid: &QuadratureGrid,
) -> Result<DensityMatrix> {
    if n < 0.0 {
        return Err(GchanError::InvalidParameter(format!(
            "noise n = {n} must be nonnegative"
        )));
    }
    if n < 1e-14 {
        // The weight degenerates to a point mass at μ = 0.
        return Ok(rho.clone());
    }
    if (grid.noise - n).abs() > 1e-12 * n.max(1.0) {
        return Err(GchanError::InvalidParameter(format!(
            "grid was built for noise {} but the channel has n = {n}",
            grid.noise
        )));
    }
    let sum = grid.weight_sum();
    if (sum - 1.0).abs() > 1e-10 {
        return Err(GchanError::UnnormalizedGrid {
            sum,
            tolerance: 1e-10,
        });
    }
    let indexer = rho.op.indexer();
    let mut radial = grid.radial();
    let mut coarse = classical_noise_once(rho.matrix(), indexer, &QuadratureGrid::isotropic(n, radial, grid.angular)?)?;
    loop {
        let fine_grid = QuadratureGrid::isotropic(n, radial + 4, grid.angular)?;
        let fine = classical_noise_once(rho.matrix(), indexer, &fine_grid)?;
        let err = max_abs_diff(&coarse, &fine);
        if err <= QUAD_ERROR_TARGET || radial + 8 > MAX_RADIAL {
            let trace = fine.trace().re;
            let op = TruncatedOperator::from_matrix(indexer.dim_per_mode, indexer.num_modes, fine);
            return Ok(DensityMatrix::from_parts(op, (1.0 - trace).max(0.0), err));
        }
        radial += 8;
        coarse = classical_noise_once(rho.matrix(), indexer, &QuadratureGrid::isotropic(n, radial, grid.angular)?)?;
    }
}

/// Classical-noise channel on the default grid for noise n.
pub fn apply_classical_noise_default(n: f64, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if n < 1e-14 {
        return Ok(rho.clone());
    }
    apply_classical_noise(n, rho, &QuadratureGrid::with_defaults(n)?)
}

/// Displaced-Gaussian channel via the squeeze / classical-noise / anti-squeeze
/// decomposition.
pub fn apply_gaussian_displacement(u: f64, v: Complex64, rho: &DensityMatrix) -> Result<DensityMatrix> {
    ChannelSpec::GaussianDisplacement { u, v }.validate()?;
    if v.norm() == 0.0 {
        return apply_classical_noise_default(1.0 / (2.0 * u), rho);
    }
    let sd = squeeze_decomposition(u, v)?;
    apply_gaussian_via_decomposition(&sd, rho)
}

fn apply_gaussian_via_decomposition(
    sd: &SqueezeDecomposition,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    let d = rho.dim_per_mode();
    let s = squeeze_op(sd.xi, d)?;
    let indexer = rho.op.indexer();
    let mut current = rho.matrix().clone();
    for mode in 0..indexer.num_modes {
        current = apply_mode_sandwich(&s.matrix, &current, &s.matrix.adjoint(), indexer, mode);
    }
    let squeezed = DensityMatrix::from_parts(
        TruncatedOperator::from_matrix(d, indexer.num_modes, current),
        rho.tail_mass,
        rho.quad_error,
    );
    let noisy = apply_classical_noise_default(sd.n_eff, &squeezed)?;
    let sa = s.matrix.adjoint();
    let mut back = noisy.matrix().clone();
    for mode in 0..indexer.num_modes {
        back = apply_mode_sandwich(&sa, &back, &s.matrix, indexer, mode);
    }
    let trace = back.trace().re;
    Ok(DensityMatrix::from_parts(
        TruncatedOperator::from_matrix(d, indexer.num_modes, back),
        (1.0 - trace).max(0.0),
        noisy.quad_error,
    ))
}

/// Direct integral route for the displaced-Gaussian channel on a rotated
/// Gauss–Hermite grid; single mode, used to cross-validate the decomposition.
pub fn gaussian_displacement_direct(
    u: f64,
    v: Complex64,
    rho: &DensityMatrix,
    nodes_per_axis: usize,
) -> Result<DensityMatrix> {
    ChannelSpec::GaussianDisplacement { u, v }.validate()?;
    if rho.num_modes() != 1 {
        return Err(GchanError::InvalidModes(
            "direct anisotropic route is implemented for a single mode".into(),
        ));
    }
    let d = rho.dim_per_mode();
    let grid = AnisotropicGrid::new(u, v, nodes_per_axis)?;
    let mut acc = DMatrix::from_element(d, d, C_ZERO);
    for &(mu, w) in grid.points() {
        let disp = displacement_op_raw(mu, d)?;
        acc += (&disp.matrix * rho.matrix() * disp.matrix.adjoint()) * Complex64::new(w, 0.0);
    }
    let trace = acc.trace().re;
    Ok(DensityMatrix::from_parts(
        TruncatedOperator::from_matrix(d, 1, acc),
        (1.0 - trace).max(0.0),
        0.0,
    ))
}

/// Environment cutoff holding the thermal tail below [`ENV_TAIL_TOL`].
pub(crate) fn env_cutoff(n: f64) -> usize {
    if n <= 0.0 {
        return 1;
    }
    let ratio = n / (n + 1.0);
    let de = (ENV_TAIL_TOL.ln() / ratio.ln()).ceil() as usize + 1;
    de.max(2)
}

/// Kraus family of the thermal-loss channel: for environment levels t (weight
/// p_t) and output level q, the operator shifts the signal level by t − q
/// with coefficients taken from the number-sector beam-splitter blocks. All
/// coefficient vectors are precomputed so repeated applications (the
/// optimizer loop) pay nothing per call.
pub(crate) struct ThermalKraus {
    /// (κ[p_out], shift) per surviving (t, q) pair, with κ absorbing √p_t.
    terms: Vec<(Vec<Complex64>, isize)>,
}

impl ThermalKraus {
    pub(crate) fn new(eta: f64, n: f64, signal_dim: usize) -> Result<Self> {
        if !(0.0 < eta && eta < 1.0) {
            return Err(GchanError::InvalidParameter(format!(
                "Kraus construction needs 0 < eta < 1, got {eta}"
            )));
        }
        let de = env_cutoff(n);
        let theta = ((1.0 - eta) / eta).sqrt().atan();
        let max_total = (signal_dim - 1) + (de - 1);
        let sectors = BeamSplitterSectors::new(theta, signal_dim, max_total);
        let weights: Vec<f64> = if n == 0.0 {
            vec![1.0]
        } else {
            let ratio = n / (n + 1.0);
            let mut w = 1.0 / (n + 1.0);
            (0..de)
                .map(|_| {
                    let out = w;
                    w *= ratio;
                    out
                })
                .collect()
        };
        let mut terms = Vec::new();
        for (t, &wt) in weights.iter().enumerate() {
            let sqrt_w = wt.sqrt();
            for q in 0..=max_total {
                let shift = t as isize - q as isize;
                let mut kappa = vec![C_ZERO; signal_dim];
                let mut any = false;
                for p_out in 0..signal_dim {
                    let p_in = p_out as isize - shift;
                    if p_in < 0 || p_in >= signal_dim as isize {
                        continue;
                    }
                    let n_total = p_in as usize + t;
                    if n_total > sectors.max_total {
                        continue;
                    }
                    let c = sectors.element(n_total, p_out, p_in as usize);
                    if c != C_ZERO {
                        kappa[p_out] = c * sqrt_w;
                        any = true;
                    }
                }
                if any {
                    terms.push((kappa, shift));
                }
            }
        }
        Ok(Self { terms })
    }

    pub(crate) fn apply(&self, matrix: &DMatrix<Complex64>, indexer: ModeIndexer) -> DMatrix<Complex64> {
        let mut current = matrix.clone();
        for mode in 0..indexer.num_modes {
            let mut acc = DMatrix::from_element(current.nrows(), current.ncols(), C_ZERO);
            for (kappa, shift) in &self.terms {
                accumulate_shifted_sandwich(&mut acc, &current, kappa, *shift, indexer, mode);
            }
            current = acc;
        }
        current
    }

    pub(crate) fn adjoint_apply(
        &self,
        matrix: &DMatrix<Complex64>,
        indexer: ModeIndexer,
    ) -> DMatrix<Complex64> {
        let mut current = matrix.clone();
        for mode in 0..indexer.num_modes {
            let mut acc = DMatrix::from_element(current.nrows(), current.ncols(), C_ZERO);
            for (kappa, shift) in &self.terms {
                accumulate_shifted_adjoint(&mut acc, &current, kappa, *shift, indexer, mode);
            }
            current = acc;
        }
        current
    }
}

/// out += K ρ K† for a shifted-diagonal Kraus acting on `mode`: the signal
/// level maps p_in = p_out − shift with coefficient κ[p_out].
fn accumulate_shifted_sandwich(
    out: &mut DMatrix<Complex64>,
    rho: &DMatrix<Complex64>,
    kappa: &[Complex64],
    shift: isize,
    indexer: ModeIndexer,
    mode: usize,
) {
    let d = indexer.dim_per_mode;
    let total = indexer.total_dim();
    let stride = indexer.stride(mode);
    let outer = total / (d * stride);
    let valid = |p: usize| -> Option<usize> {
        (p as isize - shift >= 0 && p as isize - shift < d as isize)
            .then(|| (p as isize - shift) as usize)
    };
    let src = rho.as_slice();
    let dst = out.as_mut_slice();
    for p2 in 0..d {
        let Some(src2) = valid(p2) else { continue };
        if kappa[p2] == C_ZERO {
            continue;
        }
        for o2 in 0..outer {
            for s2 in 0..stride {
                let cn = (o2 * d * stride + p2 * stride + s2) * total;
                let co = (o2 * d * stride + src2 * stride + s2) * total;
                for p1 in 0..d {
                    let Some(src1) = valid(p1) else { continue };
                    let coeff = kappa[p1] * kappa[p2].conj();
                    if coeff == C_ZERO {
                        continue;
                    }
                    for o1 in 0..outer {
                        let rn = cn + o1 * d * stride + p1 * stride;
                        let ro = co + o1 * d * stride + src1 * stride;
                        for s1 in 0..stride {
                            dst[rn + s1] += coeff * src[ro + s1];
                        }
                    }
                }
            }
        }
    }
}

/// out += K† X K for the same shifted-diagonal Kraus.
fn accumulate_shifted_adjoint(
    out: &mut DMatrix<Complex64>,
    x: &DMatrix<Complex64>,
    kappa: &[Complex64],
    shift: isize,
    indexer: ModeIndexer,
    mode: usize,
) {
    let d = indexer.dim_per_mode;
    let total = indexer.total_dim();
    let stride = indexer.stride(mode);
    let outer = total / (d * stride);
    let valid = |p: usize| -> Option<usize> {
        let dst = p as isize + shift;
        (dst >= 0 && dst < d as isize).then(|| dst as usize)
    };
    let src = x.as_slice();
    let dst_slice = out.as_mut_slice();
    for p2 in 0..d {
        let Some(dst2) = valid(p2) else { continue };
        if kappa[dst2] == C_ZERO {
            continue;
        }
        for o2 in 0..outer {
            for s2 in 0..stride {
                let cn = (o2 * d * stride + p2 * stride + s2) * total;
                let co = (o2 * d * stride + dst2 * stride + s2) * total;
                for p1 in 0..d {
                    let Some(dst1) = valid(p1) else { continue };
                    let coeff = kappa[dst1].conj() * kappa[dst2];
                    if coeff == C_ZERO {
                        continue;
                    }
                    for o1 in 0..outer {
                        let rn = cn + o1 * d * stride + p1 * stride;
                        let ro = co + o1 * d * stride + dst1 * stride;
                        for s1 in 0..stride {
                            dst_slice[rn + s1] += coeff * src[ro + s1];
                        }
                    }
                }
            }
        }
    }
}

/// Thermal-loss channel ℰ applied independently to every mode of ρ.
pub fn apply_thermal_loss(eta: f64, n: f64, rho: &DensityMatrix) -> Result<DensityMatrix> {
    ChannelSpec::ThermalLoss { eta, n }.validate()?;
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let d = rho.dim_per_mode();
    let indexer = rho.op.indexer();
    if eta == 0.0 {
        // Swap with the environment, then trace the signal away: the output
        // is the environment state in every mode, regardless of the input.
        let tau = thermal_state_with_tolerance(n, d, 1.0)?;
        let mut out = tau.clone();
        for _ in 1..indexer.num_modes {
            let m = out.matrix().kronecker(tau.matrix());
            out = DensityMatrix::from_parts(
                TruncatedOperator::from_matrix(d, out.num_modes() + 1, m),
                0.0,
                0.0,
            );
        }
        let trace = out.trace();
        let tail = (1.0 - trace).max(0.0);
        return Ok(DensityMatrix::from_parts(out.op, tail, 0.0));
    }
    let current = ThermalKraus::new(eta, n, d)?.apply(rho.matrix(), indexer);
    let trace = current.trace().re;
    Ok(DensityMatrix::from_parts(
        TruncatedOperator::from_matrix(d, indexer.num_modes, current),
        (1.0 - trace).max(0.0),
        rho.quad_error,
    ))
}

/// Loss into a squeezed thermal environment, via the decomposition
/// Σ†(ξ) ∘ ℰ_n ∘ Σ(ξ).
pub fn apply_squeezed_env_loss(
    eta: f64,
    n: f64,
    xi: Complex64,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    ChannelSpec::SqueezedEnvLoss { eta, n, xi }.validate()?;
    if xi.norm() == 0.0 {
        return apply_thermal_loss(eta, n, rho);
    }
    if eta == 1.0 {
        // Σ†Σ ρ Σ†Σ = ρ.
        return Ok(rho.clone());
    }
    let d = rho.dim_per_mode();
    let indexer = rho.op.indexer();
    let s = squeeze_op(xi, d)?;
    let sa = s.matrix.adjoint();
    let mut current = rho.matrix().clone();
    for mode in 0..indexer.num_modes {
        current = apply_mode_sandwich(&s.matrix, &current, &sa, indexer, mode);
    }
    let mid = apply_thermal_loss(
        eta,
        n,
        &DensityMatrix::from_parts(
            TruncatedOperator::from_matrix(d, indexer.num_modes, current),
            rho.tail_mass,
            rho.quad_error,
        ),
    )?;
    let mut back = mid.matrix().clone();
    for mode in 0..indexer.num_modes {
        back = apply_mode_sandwich(&sa, &back, &s.matrix, indexer, mode);
    }
    let trace = back.trace().re;
    Ok(DensityMatrix::from_parts(
        TruncatedOperator::from_matrix(d, indexer.num_modes, back),
        (1.0 - trace).max(0.0),
        mid.quad_error,
    ))
}

/// Direct route for the squeezed-environment loss: Kraus operators taken from
/// the beam-splitter sectors contracted with the squeezed environment
/// eigenvectors Σ†|t⟩. Single mode; exists to cross-validate the
/// decomposition rule.
pub fn squeezed_env_loss_direct(
    eta: f64,
    n: f64,
    xi: Complex64,
    rho: &DensityMatrix,
) -> Result<DensityMatrix> {
    ChannelSpec::SqueezedEnvLoss { eta, n, xi }.validate()?;
    if rho.num_modes() != 1 {
        return Err(GchanError::InvalidModes(
            "direct squeezed-environment route is implemented for a single mode".into(),
        ));
    }
    if eta == 1.0 {
        return Ok(rho.clone());
    }
    let d = rho.dim_per_mode();
    // Environment cutoff with room for the squeezing-induced spread.
    let r = xi.norm();
    let n_spread = n * (2.0 * r).cosh() + r.sinh().powi(2);
    let de = env_cutoff(n_spread) + 8;
    let theta = ((1.0 - eta) / eta).sqrt().atan();
    let max_total = (d - 1) + (de - 1);
    let sectors = BeamSplitterSectors::new(theta, d, max_total);
    let s_env = squeeze_op(xi, de)?;
    let s_adj = s_env.matrix.adjoint();
    let ratio = if n > 0.0 { n / (n + 1.0) } else { 0.0 };
    let mut weights = Vec::with_capacity(de);
    let mut w = 1.0 / (n + 1.0);
    for _ in 0..de {
        weights.push(w);
        w *= ratio;
    }
    let mut acc = DMatrix::from_element(d, d, C_ZERO);
    for (t, &wt) in weights.iter().enumerate() {
        if wt < 1e-18 {
            continue;
        }
        let chi = s_adj.column(t);
        let sqrt_w = Complex64::new(wt.sqrt(), 0.0);
        for q in 0..=max_total {
            // K[p_out, p_in] = √p_t Σ_τ ⟨p_out, q|U|p_in, τ⟩ χ_t[τ] with
            // τ = p_out + q − p_in fixed by photon-number conservation.
            let mut k = DMatrix::from_element(d, d, C_ZERO);
            let mut nonzero = false;
            for p_out in 0..d {
                for p_in in 0..d {
                    let tau = p_out as isize + q as isize - p_in as isize;
                    if tau < 0 || tau >= de as isize {
                        continue;
                    }
                    let n_total = p_in + tau as usize;
                    if n_total > max_total {
                        continue;
                    }
                    let u = sectors.element(n_total, p_out, p_in);
                    if u == C_ZERO {
                        continue;
                    }
                    k[(p_out, p_in)] = sqrt_w * u * chi[tau as usize];
                    nonzero = true;
                }
            }
            if nonzero {
                acc += &k * rho.matrix() * k.adjoint();
            }
        }
    }
    let trace = acc.trace().re;
    Ok(DensityMatrix::from_parts(
        TruncatedOperator::from_matrix(d, 1, acc),
        (1.0 - trace).max(0.0),
        0.0,
    ))
}

/// Dispatch a channel application by spec.
pub fn apply_channel(spec: &ChannelSpec, rho: &DensityMatrix) -> Result<DensityMatrix> {
    match *spec {
        ChannelSpec::ClassicalNoise { n } => apply_classical_noise_default(n, rho),
        ChannelSpec::GaussianDisplacement { u, v } => apply_gaussian_displacement(u, v, rho),
        ChannelSpec::ThermalLoss { eta, n } => apply_thermal_loss(eta, n, rho),
        ChannelSpec::SqueezedEnvLoss { eta, n, xi } => apply_squeezed_env_loss(eta, n, xi, rho),
    }
}

/// Heisenberg-picture action Φ*(X), defined by Tr[Φ(ρ)X] = Tr[ρ·Φ*(X)].
/// Implemented for the classical-noise map (self-adjoint: the Kraus family
/// {√P_n(μ)·D(μ)} is closed under daggering with an even weight) and the
/// thermal-loss map. The remaining variants decompose into these plus
/// explicit unitaries and are not needed here.
pub fn channel_adjoint_apply(spec: &ChannelSpec, x: &TruncatedOperator) -> Result<TruncatedOperator> {
    match *spec {
        ChannelSpec::ClassicalNoise { n } => {
            if n < 1e-14 {
                return Ok(x.clone());
            }
            let indexer = x.indexer();
            let grid = QuadratureGrid::with_defaults(n)?;
            let m = classical_noise_once(&x.matrix, indexer, &grid)?;
            Ok(TruncatedOperator::from_matrix(x.dim_per_mode, x.num_modes, m))
        }
        ChannelSpec::ThermalLoss { eta, n } => {
            ChannelSpec::ThermalLoss { eta, n }.validate()?;
            if eta == 1.0 {
                return Ok(x.clone());
            }
            let indexer = x.indexer();
            if eta == 0.0 {
                // ℰ*(X) = Tr[τ(n) X]·1 mode by mode; only the full-register
                // form is needed, and only for a single mode here.
                if x.num_modes != 1 {
                    return Err(GchanError::UnsupportedChannel {
                        variant: "loss",
                        operation: "adjoint at eta = 0 on multiple modes",
                    });
                }
                let tau = thermal_state_with_tolerance(n, x.dim_per_mode, 1.0)?;
                let c = (tau.matrix().adjoint() * &x.matrix).trace();
                return Ok(TruncatedOperator::from_matrix(
                    x.dim_per_mode,
                    x.num_modes,
                    DMatrix::from_diagonal_element(x.dim(), x.dim(), c),
                ));
            }
            let current = ThermalKraus::new(eta, n, x.dim_per_mode)?.adjoint_apply(&x.matrix, indexer);
            Ok(TruncatedOperator::from_matrix(
                x.dim_per_mode,
                x.num_modes,
                current,
            ))
        }
        ChannelSpec::GaussianDisplacement { .. } => Err(GchanError::UnsupportedChannel {
            variant: "gauss",
            operation: "channel_adjoint_apply",
        }),
        ChannelSpec::SqueezedEnvLoss { .. } => Err(GchanError::UnsupportedChannel {
            variant: "sqloss",
            operation: "channel_adjoint_apply",
        }),
    }
}
