//! Diagnostics of single-mode vibrational states: moments and non-Gaussianity,
//! Wigner functions, thermal references, fidelities, spectra and overlaps.

mod gaussian;
mod metrics;
mod state;
mod thermal;
mod wigner;

pub use gaussian::{
    covariance, gaussian_entropy, gaussian_state, non_gaussianity, von_neumann_entropy,
    CovarianceSummary,
};
pub use metrics::{fidelity, normalized_overlap, spectrum_and_heatmap, trace_overlap, Spectrum};
pub use state::ReducedVibrationalState;
pub use thermal::{thermal_reference, thermal_reference_at_beta, ThermalReference};
pub use wigner::{
    fock_kernel, weyl_symbols, wigner, wigner_overlap, GridSpec, WignerGrid,
};

use thiserror::Error;

use crate::linalg::LinalgError;

/// Numerical floor applied to density-matrix eigenvalues before logarithms and
/// square roots.
pub const EIGENVALUE_CLIP: f64 = 1e-12;

/// Tolerance on Hermiticity, trace and positivity of a reduced state.
pub const STATE_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("non-physical covariance: symplectic eigenvalue {0} < 1/2")]
    NonPhysicalCovariance(f64),

    #[error("Wigner grids differ in shape or extent")]
    GridMismatch,

    #[error("grid too coarse: Wigner integral {0} deviates from 1 by more than 1e-3")]
    GridTooCoarse(f64),

    #[error("thermal reference energy must be positive, got {0}")]
    NonPositiveEnergy(f64),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type AnalysisResult<T> = Result<T, AnalysisError>;
