//! Quadrature grids for complex-plane Gaussian averages.
//!
//! The isotropic weight e^{−|μ|²/n}/(πn) is integrated in polar form: with
//! μ = √(n·t)·e^{iφ} the measure becomes e^{−t} dt · dφ/(2π), handled by
//! Gauss–Laguerre nodes radially and a uniform trapezoid in the angle (exact
//! for every harmonic below the node count). The anisotropic weight of the
//! displaced-Gaussian channel is integrated on a Gauss–Hermite product grid
//! rotated onto the principal axes of Γ.

use gauss_quad::{GaussHermite, GaussLaguerre};
use num_complex::Complex64;

use crate::error::{GchanError, Result};

/// Default radial node count.
pub const DEFAULT_RADIAL: usize = 24;
/// Default angular node count.
pub const DEFAULT_ANGULAR: usize = 32;
/// Channel applications refine the radial rule until the self-reported error
/// estimate drops below this target.
pub const QUAD_ERROR_TARGET: f64 = 1e-7;
/// Largest radial rule tried during automatic refinement.
pub const MAX_RADIAL: usize = 64;

const WEIGHT_SUM_TOL: f64 = 1e-10;

/// Discretization of a circularly symmetric Gaussian distribution on ℂ.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    /// Gauss–Laguerre nodes in t = |μ|²/n.
    radial_nodes: Vec<f64>,
    radial_weights: Vec<f64>,
    /// Number of uniform angular nodes.
    pub angular: usize,
    /// Noise scale n of the weight e^{−|μ|²/n}/(πn).
    pub noise: f64,
}

impl QuadratureGrid {
    /// Grid for the weight e^{−|μ|²/n}/(πn) with `radial`×`angular` nodes.
    pub fn isotropic(noise: f64, radial: usize, angular: usize) -> Result<Self> {
        if noise < 0.0 {
            return Err(GchanError::InvalidParameter(format!(
                "noise n = {noise} must be nonnegative"
            )));
        }
        if radial == 0 || angular == 0 {
            return Err(GchanError::InvalidParameter(
                "quadrature grid needs at least one node per direction".into(),
            ));
        }
        let rule = GaussLaguerre::new(radial, 0.0).map_err(|e| {
            GchanError::InvalidParameter(format!("Gauss-Laguerre rule of degree {radial}: {e}"))
        })?;
        let (radial_nodes, radial_weights): (Vec<f64>, Vec<f64>) =
            rule.into_iter().map(|(x, w)| (x, w)).unzip();
        let grid = Self {
            radial_nodes,
            radial_weights,
            angular,
            noise,
        };
        let sum = grid.weight_sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(GchanError::UnnormalizedGrid {
                sum,
                tolerance: WEIGHT_SUM_TOL,
            });
        }
        Ok(grid)
    }

    pub fn with_defaults(noise: f64) -> Result<Self> {
        Self::isotropic(noise, DEFAULT_RADIAL, DEFAULT_ANGULAR)
    }

    pub fn radial(&self) -> usize {
        self.radial_nodes.len()
    }

    /// Total weight of the discretized probability distribution.
    pub fn weight_sum(&self) -> f64 {
        self.radial_weights.iter().sum::<f64>()
    }

    /// Nodes μ with weights; Σ w ≈ 1.
    pub fn points(&self) -> impl Iterator<Item = (Complex64, f64)> + '_ {
        let angular = self.angular;
        let noise = self.noise;
        self.radial_nodes
            .iter()
            .zip(self.radial_weights.iter())
            .flat_map(move |(&t, &wt)| {
                (0..angular).map(move |l| {
                    let phi = 2.0 * std::f64::consts::PI * l as f64 / angular as f64;
                    let mu = Complex64::from_polar((noise * t).sqrt(), phi);
                    (mu, wt / angular as f64)
                })
            })
    }

    /// Same grid with a finer radial rule (angular count kept).
    pub fn refined(&self, extra_radial: usize) -> Result<Self> {
        Self::isotropic(self.noise, self.radial() + extra_radial, self.angular)
    }
}

/// Gauss–Hermite product grid for the anisotropic weight
/// (2√(u²−|v|²)/π)·exp(−2u|μ|² + 2Re(v̄μ²)), rotated onto the principal axes.
#[derive(Debug, Clone)]
pub struct AnisotropicGrid {
    points: Vec<(Complex64, f64)>,
}

impl AnisotropicGrid {
    pub fn new(u: f64, v: Complex64, nodes_per_axis: usize) -> Result<Self> {
        let vn = v.norm();
        if u <= 0.0 || u < vn {
            return Err(GchanError::InvalidParameter(format!(
                "anisotropic weight needs u >= |v| > 0 or v = 0, got u = {u}, |v| = {vn}"
            )));
        }
        if u == vn {
            return Err(GchanError::InvalidParameter(
                "u = |v| makes the weight non-normalizable".into(),
            ));
        }
        let rule = GaussHermite::new(nodes_per_axis).map_err(|e| {
            GchanError::InvalidParameter(format!("Gauss-Hermite rule of degree {nodes_per_axis}: {e}"))
        })?;
        let gh: Vec<(f64, f64)> = rule.into_iter().collect();
        // In coordinates w = e^{−iθ_v/2} μ the exponent separates into
        // −2(u−|v|)·Re(w)² − 2(u+|v|)·Im(w)².
        let half_phase = if vn == 0.0 { 0.0 } else { v.arg() / 2.0 };
        let rot = Complex64::from_polar(1.0, half_phase);
        let sx = 1.0 / (2.0 * (u - vn)).sqrt();
        let sy = 1.0 / (2.0 * (u + vn)).sqrt();
        let norm = 1.0 / std::f64::consts::PI;
        let mut points = Vec::with_capacity(gh.len() * gh.len());
        for &(x, wx) in &gh {
            for &(y, wy) in &gh {
                let w = Complex64::new(x * sx, y * sy);
                points.push((rot * w, wx * wy * norm));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(Complex64, f64)] {
        &self.points
    }

    pub fn weight_sum(&self) -> f64 {
        self.points.iter().map(|(_, w)| w).sum()
    }
}
