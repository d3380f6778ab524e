//! Single- and two-mode operator constructors.
//!
//! Displacement matrix elements use the closed Laguerre form
//! ⟨p|D(ν)|q⟩ = √(q!/p!) ν^{p−q} e^{−|ν|²/2} L_q^{(p−q)}(|ν|²)   (p ≥ q),
//! extended to p < q through D(ν)† = D(−ν). The associated Laguerre
//! polynomials are evaluated by the three-term recurrence in the degree, so
//! no factorial ratio ever overflows.
//!
//! Squeezing and beam-splitter unitaries are exponentials of the truncated
//! anti-Hermitian generator, which keeps them exactly unitary on the retained
//! space; the distance to the untruncated operator is tracked as leakage.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::{exp_i_hermitian, ModeIndexer, TruncatedOperator, C_ONE, C_ZERO};
use crate::error::{GchanError, Result};

/// Default ceiling on the displacement row-tail leakage before a hard error.
pub const DISPLACEMENT_LEAKAGE_CEILING: f64 = 1e-6;
/// Default ceiling on |ξ| for the squeezing operator.
pub const SQUEEZE_PARAM_CEILING: f64 = 2.0;
/// Default ceiling on the squeeze leakage diagnostic.
pub const SQUEEZE_LEAKAGE_CEILING: f64 = 1e-6;

/// Annihilation operator a: ⟨p−1|a|p⟩ = √p.
pub fn annihilation_op(d: usize) -> Result<TruncatedOperator> {
    if d < 2 {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: "ladder operators need at least two levels".into(),
        });
    }
    let mut m = DMatrix::from_element(d, d, C_ZERO);
    for p in 1..d {
        m[(p - 1, p)] = Complex64::new((p as f64).sqrt(), 0.0);
    }
    Ok(TruncatedOperator::from_matrix(d, 1, m))
}

/// Creation operator a†.
pub fn creation_op(d: usize) -> Result<TruncatedOperator> {
    Ok(annihilation_op(d)?.adjoint())
}

/// Number operator a†a (diagonal 0..d−1).
pub fn number_op(d: usize) -> Result<TruncatedOperator> {
    if d < 2 {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: "ladder operators need at least two levels".into(),
        });
    }
    let m = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            Complex64::new(i as f64, 0.0)
        } else {
            C_ZERO
        }
    });
    Ok(TruncatedOperator::from_matrix(d, 1, m))
}

/// Associated Laguerre polynomial L_q^{(α)}(x) by the degree recurrence.
fn laguerre(q: usize, alpha: f64, x: f64) -> f64 {
    if q == 0 {
        return 1.0;
    }
    let mut lm1 = 1.0;
    let mut l = 1.0 + alpha - x;
    for i in 1..q {
        let i = i as f64;
        let next = ((2.0 * i + 1.0 + alpha - x) * l - (i + alpha) * lm1) / (i + 1.0);
        lm1 = l;
        l = next;
    }
    l
}

/// Single matrix element ⟨p|D(ν)|q⟩ of the displacement operator.
pub fn displacement_element(p: usize, q: usize, nu: Complex64) -> Complex64 {
    let x = nu.norm_sqr();
    let envelope = (-0.5 * x).exp();
    if p >= q {
        // √(q!/p!)·ν^{p−q} accumulated as a product of ν/√i factors.
        let mut pref = Complex64::new(envelope, 0.0);
        for i in (q + 1)..=p {
            pref *= nu / Complex64::new((i as f64).sqrt(), 0.0);
        }
        pref * Complex64::new(laguerre(q, (p - q) as f64, x), 0.0)
    } else {
        let minus_nu_conj = -nu.conj();
        let mut pref = Complex64::new(envelope, 0.0);
        for i in (p + 1)..=q {
            pref *= minus_nu_conj / Complex64::new((i as f64).sqrt(), 0.0);
        }
        pref * Complex64::new(laguerre(p, (q - p) as f64, x), 0.0)
    }
}

/// Displacement operator D(ν) with row-tail leakage recorded but never
/// rejected. Channel quadratures use this variant: far-tail nodes carry
/// negligible weight, so their leakage is harmless.
pub fn displacement_op_raw(nu: Complex64, d: usize) -> Result<TruncatedOperator> {
    if d < 2 {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: "displacement needs at least two levels".into(),
        });
    }
    let m = DMatrix::from_fn(d, d, |p, q| displacement_element(p, q, nu));
    let trusted = d / 2;
    let mut leakage = 0.0f64;
    for p in 0..=trusted {
        let deficit = 1.0 - m.row(p).iter().map(|z| z.norm_sqr()).sum::<f64>();
        leakage = leakage.max(deficit.max(0.0));
    }
    let mut op = TruncatedOperator::from_matrix(d, 1, m);
    op.leakage = leakage;
    Ok(op)
}

/// Displacement operator D(ν), rejecting truncation leakage above the ceiling.
pub fn displacement_op(nu: Complex64, d: usize) -> Result<TruncatedOperator> {
    let op = displacement_op_raw(nu, d)?;
    if op.leakage > DISPLACEMENT_LEAKAGE_CEILING {
        // Displacing the trusted block by ν needs roughly |ν|² extra levels
        // plus slack for the super-exponential tail.
        let suggested = d + (4.0 * nu.norm_sqr()).ceil() as usize + 8;
        return Err(GchanError::TruncationLeakage {
            leakage: op.leakage,
            ceiling: DISPLACEMENT_LEAKAGE_CEILING,
            suggested_cutoff: suggested,
        });
    }
    Ok(op)
}

/// Squeezing operator Σ(ξ) = exp[(ξ* a² − ξ a†²)/2], with the default |ξ|
/// ceiling of 2.
pub fn squeeze_op(xi: Complex64, d: usize) -> Result<TruncatedOperator> {
    squeeze_op_with_ceiling(xi, d, SQUEEZE_PARAM_CEILING)
}

/// Squeezing operator with an explicit |ξ| ceiling.
pub fn squeeze_op_with_ceiling(xi: Complex64, d: usize, ceiling: f64) -> Result<TruncatedOperator> {
    if d < 2 {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: "squeezing needs at least two levels".into(),
        });
    }
    if xi.norm() > ceiling {
        return Err(GchanError::InvalidParameter(format!(
            "|xi| = {} exceeds squeeze ceiling {}",
            xi.norm(),
            ceiling
        )));
    }
    if xi.norm() == 0.0 {
        return Ok(TruncatedOperator::identity(d, 1));
    }
    // K = (ξ* a² − ξ a†²)/2 is anti-Hermitian; exp(K) = exp(i·(−iK)).
    let a = annihilation_op(d)?.matrix;
    let a2 = &a * &a;
    let k = a2.scale(1.0) * (xi.conj() * Complex64::new(0.5, 0.0))
        - a2.adjoint() * (xi * Complex64::new(0.5, 0.0));
    let h = &k * Complex64::new(0.0, -1.0);
    let u = exp_i_hermitian(&h);

    // Leakage diagnostic: photon weight the built operator pushes from the
    // lower quarter of levels into the top quarter. A clean cutoff leaves
    // essentially nothing there.
    let mut leakage = 0.0f64;
    for p in 0..=(d / 4) {
        let w: f64 = (3 * d / 4..d).map(|j| u[(j, p)].norm_sqr()).sum();
        leakage = leakage.max(w);
    }
    if leakage > SQUEEZE_LEAKAGE_CEILING {
        return Err(GchanError::TruncationLeakage {
            leakage,
            ceiling: SQUEEZE_LEAKAGE_CEILING,
            suggested_cutoff: 2 * d,
        });
    }
    let mut op = TruncatedOperator::from_matrix(d, 1, u);
    op.leakage = leakage;
    Ok(op)
}

/// Two-mode beam splitter blocked by total photon number.
///
/// The generator θ(a†b − ab†) conserves p + q, so the unitary decomposes into
/// sector blocks that are exponentiated independently. Within sector N the
/// basis runs over (p, N−p) with p capped by the signal cutoff; the
/// environment side is left unconstrained, so the block is the exact
/// restriction of the untruncated unitary whenever N fits below the cap.
#[derive(Debug, Clone)]
pub struct BeamSplitterSectors {
    pub theta: f64,
    /// Signal-mode cutoff (p < signal_dim).
    pub signal_dim: usize,
    /// Largest total photon number represented.
    pub max_total: usize,
    /// blocks[n] is the unitary on sector n over p = p_min(n)..=p_max(n).
    blocks: Vec<DMatrix<Complex64>>,
}

impl BeamSplitterSectors {
    pub fn new(theta: f64, signal_dim: usize, max_total: usize) -> Self {
        let mut blocks = Vec::with_capacity(max_total + 1);
        for n in 0..=max_total {
            let p_max = n.min(signal_dim - 1);
            let len = p_max + 1;
            // K[(p+1, q−1), (p, q)] = √((p+1)q), antisymmetric counterpart below.
            let mut k = DMatrix::from_element(len, len, C_ZERO);
            for p in 0..p_max {
                let q = n - p;
                let amp = (((p + 1) as f64) * q as f64).sqrt();
                k[(p + 1, p)] = Complex64::new(amp, 0.0);
                k[(p, p + 1)] = Complex64::new(-amp, 0.0);
            }
            let h = k * Complex64::new(0.0, -theta);
            blocks.push(exp_i_hermitian(&h));
        }
        Self {
            theta,
            signal_dim,
            max_total,
            blocks,
        }
    }

    /// U entry ⟨p_out, q_out = n − p_out | U | p_in, q_in = n − p_in⟩ within
    /// sector n. Zero when either index leaves the sector.
    pub fn element(&self, n: usize, p_out: usize, p_in: usize) -> Complex64 {
        if n > self.max_total {
            return C_ZERO;
        }
        let p_cap = n.min(self.signal_dim - 1);
        if p_out > p_cap || p_in > p_cap {
            return C_ZERO;
        }
        self.blocks[n][(p_out, p_in)]
    }
}

/// Dense two-mode beam splitter U(η) = exp[(a†b − ab†)·arctan√((1−η)/η)] on a
/// common cutoff d for both modes. η = 0 is handled as the explicit swap
/// U|p,q⟩ = (−1)^p |q,p⟩ and η = 1 as the identity.
pub fn beam_splitter_op(eta: f64, d: usize) -> Result<TruncatedOperator> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(GchanError::InvalidParameter(format!(
            "transmissivity eta = {eta} outside [0, 1]"
        )));
    }
    if d < 2 {
        return Err(GchanError::InvalidCutoff {
            given: d,
            reason: "beam splitter needs at least two levels".into(),
        });
    }
    let idx = ModeIndexer::new(d, 2);
    let total = idx.total_dim();
    if eta == 1.0 {
        return Ok(TruncatedOperator::from_matrix(d, 2, DMatrix::identity(total, total)));
    }
    let mut m = DMatrix::from_element(total, total, C_ZERO);
    if eta == 0.0 {
        for p in 0..d {
            for q in 0..d {
                let sign = if p % 2 == 0 { C_ONE } else { -C_ONE };
                m[(idx.flat_index(&[q, p]), idx.flat_index(&[p, q]))] = sign;
            }
        }
        return Ok(TruncatedOperator::from_matrix(d, 2, m));
    }
    let theta = ((1.0 - eta) / eta).sqrt().atan();
    // Common cutoff on both modes: cap the sector basis on both sides. The
    // generator stays anti-Hermitian, so each block is still exactly unitary.
    for n in 0..=(2 * (d - 1)) {
        let p_min = n.saturating_sub(d - 1);
        let p_max = n.min(d - 1);
        let len = p_max - p_min + 1;
        let mut k = DMatrix::from_element(len, len, C_ZERO);
        for i in 0..len.saturating_sub(1) {
            let p = p_min + i;
            let q = n - p;
            let amp = (((p + 1) as f64) * q as f64).sqrt();
            k[(i + 1, i)] = Complex64::new(amp, 0.0);
            k[(i, i + 1)] = Complex64::new(-amp, 0.0);
        }
        let block = exp_i_hermitian(&(k * Complex64::new(0.0, -theta)));
        for i in 0..len {
            let row = idx.flat_index(&[p_min + i, n - (p_min + i)]);
            for j in 0..len {
                let col = idx.flat_index(&[p_min + j, n - (p_min + j)]);
                m[(row, col)] = block[(i, j)];
            }
        }
    }
    Ok(TruncatedOperator::from_matrix(d, 2, m))
}
