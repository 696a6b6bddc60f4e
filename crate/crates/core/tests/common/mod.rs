#![allow(dead_code)]

use htc_core::ReducedVibrationalState;
use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `G G† / tr` for a Gaussian-entry `G` of rank `rank`.
pub fn random_state(d: usize, rank: usize, seed: u64) -> ReducedVibrationalState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Array2::from_shape_fn((d, rank), |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let mut rho = g.dot(&g.t().mapv(|z| z.conj()));
    let tr: f64 = rho.diag().iter().map(|z| z.re).sum();
    rho.mapv_inplace(|z| z / tr);
    ReducedVibrationalState::new(rho).unwrap()
}

/// Random state concentrated on low Fock levels.
pub fn random_low_state(d: usize, support: usize, seed: u64) -> ReducedVibrationalState {
    let small = random_state(support, support, seed);
    small.embedded(d - 1).unwrap()
}
