//! Simulation laboratory for the disordered Holstein-Tavis-Cummings model.
//!
//! Four propagation engines share one parameter model and one analysis
//! pipeline:
//!
//! - [`mps`]: TEBD on a matrix product state with a mobile cavity site, and the
//!   Ehrenfest mean-field limit of the same integrator;
//! - [`dense`]: Krylov propagation in the single-excitation block, the
//!   correctness anchor for small `N`;
//! - [`semiclassical`]: hybrid truncated-Wigner trajectories with discrete spin
//!   sampling;
//! - [`ensemble`]: disorder averaging and parameter sweeps on top of any engine.
//!
//! Energies are in units of the collective coupling `g_c`, `ħ = 1`.

pub mod analysis;
pub mod dense;
pub mod ensemble;
pub mod fockspace;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod parallel;
pub mod semiclassical;

pub use analysis::ReducedVibrationalState;
pub use model::{DisorderRealization, HtcParams, InitialStateSpec};
