use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, AnalysisResult, ReducedVibrationalState, EIGENVALUE_CLIP};
use crate::fockspace::ladder_matrices;
use crate::linalg::eigh;

/// Lowest symplectic eigenvalue accepted before a state is reported as
/// non-physical.
const SYMPLECTIC_FLOOR: f64 = 0.5 - 1e-4;

/// Extra Fock levels used when building a Gaussian state before truncation.
const GAUSSIAN_PADDING: usize = 40;

/// First and second moments of the quadratures `R = (x, p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSummary {
    pub mean_x: f64,
    pub mean_p: f64,
    /// Symmetric covariance `V_ij = ½⟨{R_i − ⟨R_i⟩, R_j − ⟨R_j⟩}⟩`.
    pub v: [[f64; 2]; 2],
    /// Symplectic eigenvalue `√det V`.
    pub symplectic: f64,
}

/// Moments from `⟨b⟩`, `⟨b²⟩` and `⟨b†b⟩`, which use the exact commutator and
/// so stay correct for weight on the top Fock level.
pub fn covariance(rho: &ReducedVibrationalState) -> CovarianceSummary {
    let b = rho.mean_b();
    let b2 = rho.mean_b2();
    let n = rho.mean_number();
    let mx = std::f64::consts::SQRT_2 * b.re;
    let mp = std::f64::consts::SQRT_2 * b.im;
    let vxx = 0.5 + n + b2.re - mx * mx;
    let vpp = 0.5 + n - b2.re - mp * mp;
    let vxp = b2.im - mx * mp;
    let det = vxx * vpp - vxp * vxp;
    CovarianceSummary {
        mean_x: mx,
        mean_p: mp,
        v: [[vxx, vxp], [vxp, vpp]],
        symplectic: det.max(0.0).sqrt(),
    }
}

/// `S(τ) = (v+½)ln(v+½) − (v−½)ln(v−½)`, with `v` clamped to ½.
pub fn gaussian_entropy(v: f64) -> f64 {
    let v = v.max(0.5);
    let hi = v + 0.5;
    let lo = v - 0.5;
    let lo_term = if lo > 0.0 { lo * lo.ln() } else { 0.0 };
    hi * hi.ln() - lo_term
}

pub fn von_neumann_entropy(rho: &ReducedVibrationalState) -> AnalysisResult<f64> {
    Ok(rho
        .eigenvalues()?
        .into_iter()
        .filter(|&l| l > EIGENVALUE_CLIP)
        .map(|l| -l * l.ln())
        .sum())
}

/// `δ[ρ] = S(τ) − S(ρ)` with `τ` the Gaussian state of equal first and second
/// moments.
pub fn non_gaussianity(rho: &ReducedVibrationalState) -> AnalysisResult<f64> {
    let cov = covariance(rho);
    if cov.symplectic < SYMPLECTIC_FLOOR {
        return Err(AnalysisError::NonPhysicalCovariance(cov.symplectic));
    }
    Ok(gaussian_entropy(cov.symplectic) - von_neumann_entropy(rho)?)
}

/// Gaussian state with the given moments on Fock levels `0..=n_max`.
///
/// Built as `exp(−βK)` with `K = ½(R−μ)ᵀ(V/v)⁻¹(R−μ)`, whose spectrum is
/// `k + ½`, in a padded space; then truncated and renormalized.
pub fn gaussian_state(cov: &CovarianceSummary, n_max: usize) -> AnalysisResult<ReducedVibrationalState> {
    let v = cov.symplectic;
    if v < SYMPLECTIC_FLOOR {
        return Err(AnalysisError::NonPhysicalCovariance(v));
    }
    let big = n_max + GAUSSIAN_PADDING;
    let osc = ladder_matrices(big).expect("padded cutoff >= 1");
    let d = big + 1;
    let eye = Array2::<C64>::eye(d);
    let x = &osc.x - &eye.mapv(|z| z * cov.mean_x);
    let p = &osc.p - &eye.mapv(|z| z * cov.mean_p);

    let [[a, b], [_, c]] = cov.v;
    let det = a * c - b * b;
    // (V/v)⁻¹ = v·V⁻¹
    let (ma, mb, mc) = (v * c / det, -v * b / det, v * a / det);
    let xx = x.dot(&x);
    let pp = p.dot(&p);
    let xp = x.dot(&p) + p.dot(&x);
    let k = (xx.mapv(|z| z * ma) + xp.mapv(|z| z * mb) + pp.mapv(|z| z * mc)).mapv(|z| z * 0.5);

    let (vals, vecs) = eigh(&k)?;
    let weights: Vec<f64> = if v - 0.5 < 1e-9 {
        let mut w = vec![0.0; d];
        w[0] = 1.0;
        w
    } else {
        let beta = ((v + 0.5) / (v - 0.5)).ln();
        vals.iter().map(|&e| (-beta * (e - vals[0])).exp()).collect()
    };
    let keep = n_max + 1;
    let mut rho = Array2::<C64>::zeros((keep, keep));
    for (kk, &w) in weights.iter().enumerate() {
        if w < 1e-300 {
            continue;
        }
        for i in 0..keep {
            let vi = vecs[(i, kk)] * w;
            for j in 0..keep {
                rho[(i, j)] += vi * vecs[(j, kk)].conj();
            }
        }
    }
    ReducedVibrationalState::project_physical(&rho)
}
