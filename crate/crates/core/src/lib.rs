//! Second-order turbulence kernels for paraxial light, the induced evolution
//! of Gaussian-state second moments, and a classical Monte-Carlo propagation
//! oracle to check them against.

pub mod error;
pub mod evolve;
pub mod grid;
pub mod io;
pub mod kernels;
pub mod lossmodel;
pub mod oracle;
pub mod quad;
pub mod states;
pub mod turbulence;

pub use error::{Error, Result};
pub use evolve::{
    apply_field_transform, drift_only_propagator, evolve_thermal, evolve_thermal_with,
    quartic_residual, rhs_at, trace_rate, DriftPropagator, EvolutionMode, EvolutionResult,
    EvolveOptions, TermSet,
};
pub use grid::{build_grid, diamond, grid_delta, BilinearKernel, TransverseGrid};
pub use kernels::{
    contraction_residual, phi0_eval, phi1_compute, phi1_markovian, DriftKernel, KernelPair,
    VertexKernel,
};
pub use lossmodel::{first_moment_equation, lossy_coherent_wigner, LossDiagnostics, LossyCoherent};
pub use oracle::{
    compare_mcf_to_moment, estimate_mcf, propagate_classical, run_ensemble, sample_medium,
    FieldRealization, MCFEstimate, Medium3D,
};
pub use states::{
    gaussian_moment, second_moment, thermal_from_modes, CoherentState, Factor, ThermalState,
};
pub use turbulence::{
    longitudinal_correlation, markovian_psd, psd_3d, SpectrumModel, SpectrumVariant,
};
