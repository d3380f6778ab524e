//! Fock-truncated operators and states for a register of bosonic modes.
//!
//! Everything is dense and explicit in the photon-number basis |0⟩..|d−1⟩ of
//! each mode. Multi-mode objects are Kronecker products with the leftmost
//! factor as the slowest index: the basis state |p_0, .., p_{M−1}⟩ of M modes
//! with per-mode cutoff d sits at row p_0·d^{M−1} + .. + p_{M−1}.
//!
//! Truncation policy: operators are built on the retained levels with no
//! renormalization. Constructors record a leakage/tail-mass diagnostic and
//! comparisons are made on the trusted block, levels 0..⌊d/2⌋ per mode.

mod algebra;
mod ops;
mod states;

pub use algebra::{
    hermitian_eigen, hermitian_spectrum, mode_permutation, partial_trace, tensor_product,
    trace_power,
};
pub(crate) use algebra::{apply_mode_sandwich, exp_i_hermitian, max_abs_diff, unitary_log};
pub use ops::{
    annihilation_op, beam_splitter_op, creation_op, displacement_element, displacement_op,
    displacement_op_raw, number_op, squeeze_op, squeeze_op_with_ceiling, BeamSplitterSectors,
};
pub use states::{
    coherent_state, fock_state, random_pure_state, squeezed_thermal_state, thermal_state,
    thermal_state_with_tolerance, StateKind,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{GchanError, Result};

/// Tolerance for Hermiticity of validated density matrices.
pub const DENSITY_HERMITICITY_TOL: f64 = 1e-12;
/// Hermiticity tolerance for generic spectral routines.
pub const OPERATOR_HERMITICITY_TOL: f64 = 1e-9;
/// Eigenvalues above this threshold are treated as roundoff and clipped to 0;
/// anything below is a construction bug.
pub const NEGATIVITY_THRESHOLD: f64 = -1e-10;
/// Norm tolerance for pure states.
pub const PURE_NORM_TOL: f64 = 1e-12;
/// Default trace-deficit tolerance for constructed (non-channel-output) states.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// Unitarity tolerance on the trusted block for operators advertised as unitary.
pub const UNITARITY_TOL: f64 = 1e-8;

pub(crate) const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const C_ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense complex operator on a Fock-truncated register of modes.
#[derive(Debug, Clone)]
pub struct TruncatedOperator {
    /// Fock cutoff d: retained levels are 0..d−1 in every mode.
    pub dim_per_mode: usize,
    /// Number of modes in the register.
    pub num_modes: usize,
    /// Dense matrix of side `dim_per_mode^num_modes`.
    pub matrix: DMatrix<Complex64>,
    /// Truncation-leakage diagnostic recorded by the constructor (0 when exact).
    pub leakage: f64,
}

impl TruncatedOperator {
    /// Wraps a matrix after checking that its side is d^num_modes.
    pub fn new(dim_per_mode: usize, num_modes: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let side = dim_per_mode
            .checked_pow(num_modes as u32)
            .ok_or_else(|| GchanError::InvalidParameter("d^num_modes overflows".into()))?;
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(GchanError::IncompatibleOperands(format!(
                "matrix is {}x{}, expected side {}",
                matrix.nrows(),
                matrix.ncols(),
                side
            )));
        }
        Ok(Self {
            dim_per_mode,
            num_modes,
            matrix,
            leakage: 0.0,
        })
    }

    pub(crate) fn from_matrix(
        dim_per_mode: usize,
        num_modes: usize,
        matrix: DMatrix<Complex64>,
    ) -> Self {
        Self {
            dim_per_mode,
            num_modes,
            matrix,
            leakage: 0.0,
        }
    }

    pub fn identity(dim_per_mode: usize, num_modes: usize) -> Self {
        let side = dim_per_mode.pow(num_modes as u32);
        Self::from_matrix(dim_per_mode, num_modes, DMatrix::identity(side, side))
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn indexer(&self) -> ModeIndexer {
        ModeIndexer::new(self.dim_per_mode, self.num_modes)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            dim_per_mode: self.dim_per_mode,
            num_modes: self.num_modes,
            matrix: self.matrix.adjoint(),
            leakage: self.leakage,
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.matrix.trace()
    }

    /// Max absolute deviation from Hermiticity.
    pub fn hermiticity_deviation(&self) -> f64 {
        let mut dev = 0.0f64;
        for i in 0..self.dim() {
            for j in i..self.dim() {
                let d = (self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm();
                dev = dev.max(d);
            }
        }
        dev
    }

    /// Highest retained level of the trusted block (⌊d/2⌋).
    pub fn trusted_level(&self) -> usize {
        self.dim_per_mode / 2
    }

    /// ‖U†U − 1‖_max restricted to the trusted block.
    pub fn unitarity_deviation_on_trusted_block(&self) -> f64 {
        let gram = self.matrix.adjoint() * &self.matrix;
        let idx = self.indexer();
        let top = self.trusted_level();
        let mut dev = 0.0f64;
        for i in 0..self.dim() {
            if idx.occupations(i).iter().any(|&p| p > top) {
                continue;
            }
            for j in 0..self.dim() {
                if idx.occupations(j).iter().any(|&p| p > top) {
                    continue;
                }
                let target = if i == j { C_ONE } else { C_ZERO };
                dev = dev.max((gram[(i, j)] - target).norm());
            }
        }
        dev
    }

    /// Whether the operator passes the unitarity contract on the trusted block.
    pub fn is_unitary_on_trusted_block(&self) -> bool {
        self.unitarity_deviation_on_trusted_block() < UNITARITY_TOL
    }
}

/// Pure state on a Fock-truncated register.
#[derive(Debug, Clone)]
pub struct PureState {
    pub dim_per_mode: usize,
    pub num_modes: usize,
    pub amplitudes: DVector<Complex64>,
}

impl PureState {
    /// Wraps an amplitude vector, enforcing unit norm within [`PURE_NORM_TOL`].
    pub fn new(dim_per_mode: usize, num_modes: usize, amplitudes: DVector<Complex64>) -> Result<Self> {
        let side = dim_per_mode.pow(num_modes as u32);
        if amplitudes.len() != side {
            return Err(GchanError::IncompatibleOperands(format!(
                "amplitude vector has length {}, expected {}",
                amplitudes.len(),
                side
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > PURE_NORM_TOL {
            return Err(GchanError::NotNormalized {
                norm,
                tolerance: PURE_NORM_TOL,
            });
        }
        Ok(Self {
            dim_per_mode,
            num_modes,
            amplitudes,
        })
    }

    /// Normalizes the vector and returns the state together with the norm
    /// deficit |‖v‖ − 1| that was absorbed.
    pub fn normalized(
        dim_per_mode: usize,
        num_modes: usize,
        mut amplitudes: DVector<Complex64>,
    ) -> Result<(Self, f64)> {
        let norm = amplitudes.norm();
        if norm <= 0.0 {
            return Err(GchanError::InvalidParameter("zero state vector".into()));
        }
        amplitudes /= Complex64::new(norm, 0.0);
        let st = Self::new(dim_per_mode, num_modes, amplitudes)?;
        Ok((st, (norm - 1.0).abs()))
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    /// ρ = |ψ⟩⟨ψ| as a density matrix (tail mass 0 by construction).
    pub fn to_density(&self) -> DensityMatrix {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        DensityMatrix {
            op: TruncatedOperator::from_matrix(self.dim_per_mode, self.num_modes, m),
            tail_mass: 0.0,
            quad_error: 0.0,
        }
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    /// Kronecker product of two registers (self is the slower index).
    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        if self.dim_per_mode != other.dim_per_mode {
            return Err(GchanError::IncompatibleOperands(
                "tensor product of states with different cutoffs".into(),
            ));
        }
        Ok(PureState {
            dim_per_mode: self.dim_per_mode,
            num_modes: self.num_modes + other.num_modes,
            amplitudes: self.amplitudes.kronecker(&other.amplitudes),
        })
    }
}

/// Hermitian positive-semidefinite operator with trace close to one; the
/// trace deficit attributed to truncation is carried along as `tail_mass`.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    pub op: TruncatedOperator,
    /// Trace deficit 1 − Tr ρ attributed to truncation.
    pub tail_mass: f64,
    /// Quadrature error estimate when the state came out of an integral
    /// channel application; 0 for exactly constructed states.
    pub quad_error: f64,
}

impl DensityMatrix {
    /// Validates Hermiticity, positivity and trace window with the default
    /// tail tolerance [`DEFAULT_TAIL_TOL`].
    pub fn try_new(op: TruncatedOperator) -> Result<Self> {
        Self::try_with_tail_tolerance(op, DEFAULT_TAIL_TOL)
    }

    /// Validates the density-matrix invariants: Hermitian within 1e−12,
    /// eigenvalues ≥ −1e−10, trace within [1 − tail_tolerance, 1 + 1e−12].
    pub fn try_with_tail_tolerance(op: TruncatedOperator, tail_tolerance: f64) -> Result<Self> {
        let dev = op.hermiticity_deviation();
        if dev > DENSITY_HERMITICITY_TOL {
            return Err(GchanError::NonHermitian {
                deviation: dev,
                tolerance: DENSITY_HERMITICITY_TOL,
            });
        }
        let eigs = hermitian_spectrum(&op)?;
        if let Some(&min) = eigs.last() {
            if min < NEGATIVITY_THRESHOLD {
                return Err(GchanError::NegativeEigenvalue {
                    value: min,
                    threshold: NEGATIVITY_THRESHOLD,
                });
            }
        }
        let trace = op.trace().re;
        if trace > 1.0 + 1e-12 || trace < 1.0 - tail_tolerance {
            return Err(GchanError::InvalidParameter(format!(
                "trace {trace} outside [1 - {tail_tolerance:.3e}, 1 + 1e-12]"
            )));
        }
        Ok(Self {
            op,
            tail_mass: (1.0 - trace).max(0.0),
            quad_error: 0.0,
        })
    }

    pub(crate) fn from_parts(op: TruncatedOperator, tail_mass: f64, quad_error: f64) -> Self {
        Self {
            op,
            tail_mass,
            quad_error,
        }
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn dim_per_mode(&self) -> usize {
        self.op.dim_per_mode
    }

    pub fn num_modes(&self) -> usize {
        self.op.num_modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.op.matrix
    }

    pub fn trace(&self) -> f64 {
        self.op.trace().re
    }

    /// Trace distance ½‖ρ − σ‖₁.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        if self.dim() != other.dim() {
            return Err(GchanError::IncompatibleOperands(
                "trace distance of states with different dimensions".into(),
            ));
        }
        let diff = TruncatedOperator::from_matrix(
            self.op.dim_per_mode,
            self.op.num_modes,
            &self.op.matrix - &other.op.matrix,
        );
        let eigs = hermitian_spectrum(&diff)?;
        Ok(0.5 * eigs.iter().map(|l| l.abs()).sum::<f64>())
    }
}

/// Row/column indexing for a register of `num_modes` modes with common cutoff.
#[derive(Debug, Clone, Copy)]
pub struct ModeIndexer {
    pub dim_per_mode: usize,
    pub num_modes: usize,
}

impl ModeIndexer {
    pub fn new(dim_per_mode: usize, num_modes: usize) -> Self {
        Self {
            dim_per_mode,
            num_modes,
        }
    }

    pub fn total_dim(&self) -> usize {
        self.dim_per_mode.pow(self.num_modes as u32)
    }

    /// Stride of a mode in the flat index (leftmost mode is slowest).
    pub fn stride(&self, mode: usize) -> usize {
        self.dim_per_mode.pow((self.num_modes - 1 - mode) as u32)
    }

    pub fn occupations(&self, mut index: usize) -> Vec<usize> {
        let mut occ = vec![0usize; self.num_modes];
        for mode in (0..self.num_modes).rev() {
            occ[mode] = index % self.dim_per_mode;
            index /= self.dim_per_mode;
        }
        occ
    }

    pub fn flat_index(&self, occ: &[usize]) -> usize {
        occ.iter().fold(0, |acc, &p| acc * self.dim_per_mode + p)
    }

    pub fn total_photons(&self, index: usize) -> usize {
        self.occupations(index).iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexer_round_trip() {
        let idx = ModeIndexer::new(3, 3);
        for i in 0..idx.total_dim() {
            let occ = idx.occupations(i);
            assert_eq!(idx.flat_index(&occ), i);
        }
        assert_eq!(idx.occupations(3 * 9 - 1), vec![2, 2, 2]);
        assert_eq!(idx.stride(0), 9);
        assert_eq!(idx.stride(2), 1);
    }

    #[test]
    fn density_validation_rejects_non_hermitian() {
        let mut m = DMatrix::from_diagonal_element(2, 2, Complex64::new(0.5, 0.0));
        m[(0, 1)] = Complex64::new(0.3, 0.1);
        let op = TruncatedOperator::from_matrix(2, 1, m);
        assert!(matches!(
            DensityMatrix::try_new(op),
            Err(GchanError::NonHermitian { .. })
        ));
    }

    #[test]
    fn density_validation_rejects_negative_eigenvalue() {
        let mut m = DMatrix::zeros(2, 2);
        m[(0, 0)] = Complex64::new(1.5, 0.0);
        m[(1, 1)] = Complex64::new(-0.5, 0.0);
        let op = TruncatedOperator::from_matrix(2, 1, m);
        assert!(matches!(
            DensityMatrix::try_new(op),
            Err(GchanError::NegativeEigenvalue { .. })
        ));
    }

    #[test]
    fn pure_state_norm_enforced() {
        let v = DVector::from_vec(vec![Complex64::new(0.5, 0.0), Complex64::new(0.5, 0.0)]);
        assert!(PureState::new(2, 1, v.clone()).is_err());
        let (st, deficit) = PureState::normalized(2, 1, v).unwrap();
        assert!((st.amplitudes.norm() - 1.0).abs() < 1e-15);
        assert!(deficit > 0.0);
    }
}
