//! Truncated harmonic-oscillator algebra.
//!
//! Quadratures follow `x = (b + b†)/√2`, `p = -i(b - b†)/√2`, so `[x, p] = i` and
//! the vacuum has variance 1/2 in each quadrature.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::linalg::ZERO;

/// Highest eigenfunction order accepted by [`hermite_psi`].
pub const MAX_HERMITE_ORDER: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum FockError {
    #[error("Fock cutoff must be at least 1, got {0}")]
    CutoffTooSmall(usize),

    #[error("eigenfunction order {0} exceeds the supported limit {MAX_HERMITE_ORDER}")]
    OrderTooLarge(usize),
}

/// Ladder and quadrature matrices on the Fock states `|0⟩ … |n_max⟩`.
#[derive(Clone, Debug)]
pub struct TruncatedOscillator {
    pub n_max: usize,
    pub b: Array2<C64>,
    pub bdag: Array2<C64>,
    pub number: Array2<C64>,
    pub x: Array2<C64>,
    pub p: Array2<C64>,
}

impl TruncatedOscillator {
    pub fn dim(&self) -> usize {
        self.n_max + 1
    }
}

pub fn ladder_matrices(n_max: usize) -> Result<TruncatedOscillator, FockError> {
    if n_max < 1 {
        return Err(FockError::CutoffTooSmall(n_max));
    }
    let d = n_max + 1;
    let mut b = Array2::zeros((d, d));
    for n in 1..d {
        b[(n - 1, n)] = C64::new((n as f64).sqrt(), 0.0);
    }
    let bdag = b.t().to_owned();
    let number = Array2::from_shape_fn((d, d), |(i, j)| if i == j { C64::new(i as f64, 0.0) } else { ZERO });
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let x = (&b + &bdag).mapv(|z| z * s);
    let p = (&b - &bdag).mapv(|z| z * C64::new(0.0, -s));
    Ok(TruncatedOscillator { n_max, b, bdag, number, x, p })
}

/// Normalized oscillator eigenfunction `ψ_n(x)`, evaluated with the stable
/// three-term recurrence on normalized functions.
pub fn hermite_psi(n: usize, x: f64) -> Result<f64, FockError> {
    if n > MAX_HERMITE_ORDER {
        return Err(FockError::OrderTooLarge(n));
    }
    Ok(*hermite_psi_all(n, x)?.last().unwrap())
}

/// `ψ_0(x) … ψ_n(x)` in one pass.
pub fn hermite_psi_all(n: usize, x: f64) -> Result<Vec<f64>, FockError> {
    if n > MAX_HERMITE_ORDER {
        return Err(FockError::OrderTooLarge(n));
    }
    let mut out = Vec::with_capacity(n + 1);
    let psi0 = std::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    out.push(psi0);
    if n == 0 {
        return Ok(out);
    }
    out.push(std::f64::consts::SQRT_2 * x * psi0);
    for k in 1..n {
        let kf = k as f64;
        let next = (2.0 / (kf + 1.0)).sqrt() * x * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
        out.push(next);
    }
    Ok(out)
}
