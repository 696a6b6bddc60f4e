use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, AnalysisResult, ReducedVibrationalState, EIGENVALUE_CLIP};
use crate::linalg::{hermitian_map, singular_values};

fn sqrt_psd(rho: &ReducedVibrationalState) -> AnalysisResult<Array2<num_complex::Complex64>> {
    Ok(hermitian_map(rho.matrix(), |l| if l > EIGENVALUE_CLIP { l.sqrt() } else { 0.0 })?)
}

/// Uhlmann fidelity `(tr|√ρ √σ|)²`, clamped to `[0, 1]`.
pub fn fidelity(rho: &ReducedVibrationalState, sigma: &ReducedVibrationalState) -> AnalysisResult<f64> {
    if rho.dim() != sigma.dim() {
        return Err(AnalysisError::ShapeMismatch(format!("{} vs {}", rho.dim(), sigma.dim())));
    }
    let prod = sqrt_psd(rho)?.dot(&sqrt_psd(sigma)?);
    let s: f64 = singular_values(&prod)?.iter().sum();
    Ok((s * s).clamp(0.0, 1.0))
}

/// Hilbert-Schmidt inner product `tr(ρσ)`.
pub fn trace_overlap(rho: &ReducedVibrationalState, sigma: &ReducedVibrationalState) -> AnalysisResult<f64> {
    if rho.dim() != sigma.dim() {
        return Err(AnalysisError::ShapeMismatch(format!("{} vs {}", rho.dim(), sigma.dim())));
    }
    // tr(ρσ) = Σ_ij ρ_ij σ_ji = Σ_ij ρ_ij conj(σ_ij) for Hermitian σ
    Ok(rho
        .matrix()
        .iter()
        .zip(sigma.matrix().iter())
        .map(|(a, b)| (a * b.conj()).re)
        .sum())
}

/// `tr(ρσ)/√(tr ρ² tr σ²)`: the Hilbert-Schmidt overlap scaled so that any
/// state has overlap one with itself. Equals `tr(ρσ)` for pure states.
pub fn normalized_overlap(rho: &ReducedVibrationalState, sigma: &ReducedVibrationalState) -> AnalysisResult<f64> {
    let o = trace_overlap(rho, sigma)?;
    let norm = (rho.purity() * sigma.purity()).sqrt();
    Ok((o / norm).clamp(0.0, 1.0))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// Descending, clipped at zero, summing to one.
    pub eigenvalues: Vec<f64>,
    /// `|⟨n|ρ|m⟩|`, row-major.
    pub heatmap: Vec<Vec<f64>>,
}

impl Spectrum {
    /// `Σ_{n≠m} |ρ_nm|`
    pub fn off_diagonal_mass(&self) -> f64 {
        self.heatmap
            .iter()
            .enumerate()
            .map(|(n, row)| row.iter().enumerate().filter(|(m, _)| *m != n).map(|(_, v)| v).sum::<f64>())
            .sum()
    }
}

pub fn spectrum_and_heatmap(rho: &ReducedVibrationalState) -> AnalysisResult<Spectrum> {
    let mut eigenvalues: Vec<f64> = rho.eigenvalues()?.into_iter().map(|l| l.max(0.0)).collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    let total: f64 = eigenvalues.iter().sum();
    if total > 0.0 {
        eigenvalues.iter_mut().for_each(|l| *l /= total);
    }
    let heatmap = rho.matrix().outer_iter().map(|row| row.iter().map(|z| z.norm()).collect()).collect();
    Ok(Spectrum { eigenvalues, heatmap })
}
