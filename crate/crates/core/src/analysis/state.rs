use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use super::{AnalysisError, AnalysisResult, STATE_TOLERANCE};
use crate::linalg::{dagger, eigh, eigvalsh, hermiticity_defect, trace, ONE, ZERO};

/// Single-mode density matrix in the Fock basis `|0⟩ … |n_max⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedVibrationalState {
    rho: Array2<C64>,
}

impl ReducedVibrationalState {
    /// Validates Hermiticity, unit trace and positivity to [`STATE_TOLERANCE`].
    pub fn new(rho: Array2<C64>) -> AnalysisResult<Self> {
        let state = Self::from_matrix_unchecked(rho)?;
        state.validate()?;
        Ok(state)
    }

    /// Wraps a square matrix without the physical checks.
    pub fn from_matrix_unchecked(rho: Array2<C64>) -> AnalysisResult<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() < 2 {
            return Err(AnalysisError::ShapeMismatch(format!(
                "density matrix must be square with dim >= 2, got {:?}",
                rho.dim()
            )));
        }
        Ok(Self { rho })
    }

    pub fn validate(&self) -> AnalysisResult<()> {
        let herm = hermiticity_defect(&self.rho);
        if herm > STATE_TOLERANCE {
            return Err(AnalysisError::InvalidState(format!("Hermiticity defect {herm:e}")));
        }
        let tr = trace(&self.rho);
        if (tr - ONE).norm() > STATE_TOLERANCE {
            return Err(AnalysisError::InvalidState(format!("trace {tr}")));
        }
        let min = self.eigenvalues()?.into_iter().fold(f64::INFINITY, f64::min);
        if min < -STATE_TOLERANCE {
            return Err(AnalysisError::InvalidState(format!("eigenvalue {min:e}")));
        }
        Ok(())
    }

    pub fn pure(psi: &Array1<C64>) -> AnalysisResult<Self> {
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let v = psi.mapv(|z| z / norm);
        let d = v.len();
        Self::new(Array2::from_shape_fn((d, d), |(i, j)| v[i] * v[j].conj()))
    }

    pub fn fock(n: usize, n_max: usize) -> Self {
        let mut rho = Array2::zeros((n_max + 1, n_max + 1));
        rho[(n, n)] = ONE;
        Self { rho }
    }

    pub fn vacuum(n_max: usize) -> Self {
        Self::fock(0, n_max)
    }

    /// Coherent state `|α⟩` projected on the truncated space and renormalized.
    pub fn coherent(alpha: C64, n_max: usize) -> Self {
        let mut amp = Vec::with_capacity(n_max + 1);
        let mut c = ONE;
        for n in 0..=n_max {
            if n > 0 {
                c = c * alpha / (n as f64).sqrt();
            }
            amp.push(c);
        }
        Self::pure(&Array1::from(amp)).expect("coherent state is valid")
    }

    pub fn matrix(&self) -> &Array2<C64> {
        &self.rho
    }

    pub fn into_matrix(self) -> Array2<C64> {
        self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn n_max(&self) -> usize {
        self.dim() - 1
    }

    pub fn trace(&self) -> C64 {
        trace(&self.rho)
    }

    pub fn purity(&self) -> f64 {
        // tr ρ² = Σ |ρ_ij|² for Hermitian ρ
        self.rho.iter().map(|z| z.norm_sqr()).sum()
    }

    /// `tr(ρ b)`
    pub fn mean_b(&self) -> C64 {
        (1..self.dim()).map(|n| self.rho[(n, n - 1)] * (n as f64).sqrt()).sum()
    }

    /// `tr(ρ b²)`
    pub fn mean_b2(&self) -> C64 {
        (2..self.dim())
            .map(|n| self.rho[(n, n - 2)] * ((n * (n - 1)) as f64).sqrt())
            .sum()
    }

    /// `tr(ρ b†b)`
    pub fn mean_number(&self) -> f64 {
        (0..self.dim()).map(|n| self.rho[(n, n)].re * n as f64).sum()
    }

    /// `⟨x⟩ = √2 Re⟨b⟩`
    pub fn mean_x(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.mean_b().re
    }

    pub fn mean_p(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.mean_b().im
    }

    pub fn eigenvalues(&self) -> AnalysisResult<Vec<f64>> {
        Ok(eigvalsh(&self.rho)?)
    }

    /// `½ Σ |eig(ρ − σ)|`
    pub fn trace_distance(&self, other: &Self) -> AnalysisResult<f64> {
        if self.dim() != other.dim() {
            return Err(AnalysisError::ShapeMismatch(format!("{} vs {}", self.dim(), other.dim())));
        }
        let diff = &self.rho - &other.rho;
        Ok(0.5 * eigvalsh(&diff)?.iter().map(|e| e.abs()).sum::<f64>())
    }

    /// Hermitian part with negative eigenvalues removed and unit trace.
    pub fn project_physical(rho: &Array2<C64>) -> AnalysisResult<Self> {
        let h = (rho + &dagger(rho)).mapv(|z| z * 0.5);
        let (vals, vecs) = eigh(&h)?;
        let clipped: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = clipped.iter().sum();
        if total <= 0.0 {
            return Err(AnalysisError::InvalidState("no positive weight".into()));
        }
        let d = h.nrows();
        let mut out = Array2::from_elem((d, d), ZERO);
        for k in 0..d {
            if clipped[k] == 0.0 {
                continue;
            }
            let w = clipped[k] / total;
            for i in 0..d {
                for j in 0..d {
                    out[(i, j)] += vecs[(i, k)] * w * vecs[(j, k)].conj();
                }
            }
        }
        Ok(Self { rho: out })
    }

    /// Copy of the state embedded in a larger Fock space.
    pub fn embedded(&self, n_max: usize) -> AnalysisResult<Self> {
        if n_max < self.n_max() {
            return Err(AnalysisError::ShapeMismatch(format!(
                "cannot embed cutoff {} into {n_max}",
                self.n_max()
            )));
        }
        let mut rho = Array2::zeros((n_max + 1, n_max + 1));
        rho.slice_mut(ndarray::s![..self.dim(), ..self.dim()]).assign(&self.rho);
        Ok(Self { rho })
    }
}
