use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, AnalysisResult, ReducedVibrationalState};

/// Thermal state `e^{−βν b†b}/Z` of a single mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalReference {
    pub beta: f64,
    pub nu: f64,
    /// Target energy above the ground state; `None` when built from `β`.
    pub e0: Option<f64>,
    /// Populations on `0..=n_max`, renormalized after truncation.
    pub populations: Vec<f64>,
    /// Untruncated weight above `n_max`.
    pub tail: f64,
}

impl ThermalReference {
    /// Mean occupation `1/(e^{βν} − 1)` of the untruncated state.
    pub fn mean_occupation(&self) -> f64 {
        1.0 / (self.beta * self.nu).exp_m1()
    }

    /// Untruncated population `e^{−βνn}(1 − e^{−βν})`.
    pub fn untruncated_population(&self, n: usize) -> f64 {
        let q = (-self.beta * self.nu).exp();
        q.powi(n as i32) * (1.0 - q)
    }

    pub fn state(&self) -> ReducedVibrationalState {
        let d = self.populations.len();
        let rho = Array2::from_shape_fn((d, d), |(i, j)| {
            if i == j {
                C64::new(self.populations[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        ReducedVibrationalState::from_matrix_unchecked(rho).expect("square")
    }
}

pub fn thermal_reference_at_beta(beta: f64, nu: f64, n_max: usize) -> ThermalReference {
    let q = (-beta * nu).exp();
    let raw: Vec<f64> = (0..=n_max).map(|n| q.powi(n as i32) * (1.0 - q)).collect();
    let kept: f64 = raw.iter().sum();
    ThermalReference {
        beta,
        nu,
        e0: None,
        populations: raw.iter().map(|p| p / kept).collect(),
        tail: q.powi(n_max as i32 + 1),
    }
}

/// Thermal state whose untruncated energy above the ground state is `e0`:
/// `β_R = ln(1 + ν/E₀)/ν`.
pub fn thermal_reference(e0: f64, nu: f64, n_max: usize) -> AnalysisResult<ThermalReference> {
    if !(e0 > 0.0) {
        return Err(AnalysisError::NonPositiveEnergy(e0));
    }
    let beta = (nu / e0).ln_1p() / nu;
    let mut t = thermal_reference_at_beta(beta, nu, n_max);
    t.e0 = Some(e0);
    Ok(t)
}
