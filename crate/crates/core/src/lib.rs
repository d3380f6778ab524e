//! Numerical toolkit for Gaussian bosonic channels in truncated Fock spaces.
//!
//! The crate builds the channels 𝒩_n (random isotropic displacement),
//! 𝒢 (anisotropic displacement), ℰ_n (beam-splitter coupling to a thermal
//! environment) and ℒ (squeezed thermal environment) as explicit maps on
//! dense Fock-truncated density matrices, and verifies their closed-form
//! output norms at desk scale:
//!
//! * maximal output k-norms [1/((n+1)^k − n^k)]^{m/k} and the effective-noise
//!   reductions of the anisotropic and lossy families ([`norms`]);
//! * the extended-space moment operator Θ, its circulant/DFT factorization,
//!   the λ₀ determinant identity, the trace identity against direct channel
//!   application, and the coherent-product top eigenvectors ([`theta`],
//!   [`spectral`]);
//! * squeezing decomposition rules connecting 𝒢 to 𝒩 and ℒ to ℰ, with
//!   independent integral routes as cross-checks ([`channels`]);
//! * numerical maximization of the output trace power over pure inputs,
//!   confirming that coherent products are optimal and the norm is
//!   multiplicative across uses ([`optimizer`]).
//!
//! Truncation is never hidden: states and operators carry tail-mass and
//! leakage diagnostics, and comparisons happen on the trusted block.

pub mod channels;
pub mod error;
pub mod fock;
pub mod norms;
pub mod optimizer;
pub mod quadrature;
pub mod spectral;
pub mod theta;

pub use channels::{
    apply_channel, apply_classical_noise, apply_classical_noise_default,
    apply_gaussian_displacement, apply_squeezed_env_loss, apply_thermal_loss,
    channel_adjoint_apply, gaussian_displacement_direct, squeezed_env_loss_direct, ChannelConfig,
    ChannelSpec,
};
pub use error::{GchanError, Result};
pub use fock::{
    annihilation_op, beam_splitter_op, coherent_state, creation_op, displacement_op, fock_state,
    hermitian_spectrum, partial_trace, random_pure_state, squeeze_op, squeezed_thermal_state,
    tensor_product, thermal_state, trace_power, DensityMatrix, ModeIndexer, PureState,
    TruncatedOperator,
};
pub use norms::{
    bounds_nu, closed_form_nu, coherent_output_norm, renyi_entropy, renyi_monotonicity_check,
    z_norm, NormReport, NormRoute,
};
pub use optimizer::{
    additivity_gap, coherent_diagnostic, maximize_output_norm, AdditivityReport,
    CoherentDiagnostic, OptimizationResult, OptimizerConfig,
};
pub use quadrature::{AnisotropicGrid, QuadratureGrid};
pub use spectral::{
    block_matrices, build_circulant_triple, dft_spectral_data, lambda0, squeeze_decomposition,
    theta_mode_ratio, CirculantTriple, Lambda0, SpectralData, SqueezeDecomposition,
};
pub use theta::{
    build_theta, build_theta_with_grid, laguerre_integral_oracle, optimal_eigenvector,
    spectral_bound_check, trace_identity_check, trace_identity_check_with, ThetaOperator,
    ThetaRoute,
};
