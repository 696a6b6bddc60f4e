use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, AnalysisResult, ReducedVibrationalState};

/// Uniform phase-space grid, `x` and `p` axes inclusive of both ends.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_min: -5.0, x_max: 5.0, nx: 201, p_min: -5.0, p_max: 5.0, np: 201 }
    }
}

fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| lo + k as f64 * h).collect()
}

/// Trapezoid weights of a uniform axis.
fn weights(ax: &[f64]) -> Vec<f64> {
    let n = ax.len();
    if n < 2 {
        return vec![1.0; n];
    }
    let h = ax[1] - ax[0];
    (0..n).map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h }).collect()
}

impl GridSpec {
    pub fn xs(&self) -> Vec<f64> {
        axis(self.x_min, self.x_max, self.nx)
    }

    pub fn ps(&self) -> Vec<f64> {
        axis(self.p_min, self.p_max, self.np)
    }
}

/// Wigner function sampled on a grid; `values[(ix, ip)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub values: Array2<f64>,
}

impl WignerGrid {
    /// Trapezoid quadrature `∬ f dx dp` of a function on this grid.
    pub fn integrate(&self, f: impl Fn(usize, usize) -> f64) -> f64 {
        let wx = weights(&self.xs);
        let wp = weights(&self.ps);
        let mut acc = 0.0;
        for (i, &a) in wx.iter().enumerate() {
            for (j, &b) in wp.iter().enumerate() {
                acc += a * b * f(i, j);
            }
        }
        acc
    }

    pub fn normalization(&self) -> f64 {
        self.integrate(|i, j| self.values[(i, j)])
    }

    /// Value and location `(x, p)` of the maximum.
    pub fn peak(&self) -> (f64, f64, f64) {
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for ((i, j), &w) in self.values.indexed_iter() {
            if w > best.0 {
                best = (w, self.xs[i], self.ps[j]);
            }
        }
        best
    }
}

/// `W_{nm}(x,p)` for `n ≥ m` with `n ≤ d−1`, by recurrence over Laguerre
/// polynomials; entry `(n, m)` of the result holds the Wigner function of the
/// operator `|n⟩⟨m|`, and `(m, n)` its conjugate.
fn kernel_table(x: f64, p: f64, d: usize) -> Array2<C64> {
    let r2 = x * x + p * p;
    let z = 2.0 * r2;
    let gauss = (-r2).exp() / std::f64::consts::PI;
    let w = C64::new(x, -p) * std::f64::consts::SQRT_2;
    let mut table = Array2::zeros((d, d));
    // ratio[m] = √(m!/(m+k)!) for the current k
    let mut ratio = vec![1.0; d];
    let mut wk = C64::new(1.0, 0.0);
    for k in 0..d {
        if k > 0 {
            wk *= w;
            for (m, r) in ratio.iter_mut().enumerate().take(d - k) {
                *r /= ((m + k) as f64).sqrt();
            }
        }
        let kf = k as f64;
        let (mut l_prev, mut l_cur) = (0.0, 1.0);
        for m in 0..d - k {
            if m == 1 {
                l_prev = 1.0;
                l_cur = 1.0 + kf - z;
            } else if m > 1 {
                let mf = (m - 1) as f64;
                let next = ((2.0 * mf + 1.0 + kf - z) * l_cur - (mf + kf) * l_prev) / (mf + 1.0);
                l_prev = l_cur;
                l_cur = next;
            }
            let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
            let val = wk * (sign * ratio[m] * gauss * l_cur);
            table[(m + k, m)] = val;
            if k > 0 {
                table[(m, m + k)] = val.conj();
            }
        }
    }
    table
}

/// Wigner function of the operator `|n⟩⟨m|` at `(x, p)`.
pub fn fock_kernel(n: usize, m: usize, x: f64, p: f64) -> C64 {
    kernel_table(x, p, n.max(m) + 1)[(n, m)]
}

/// Unbiased single-point estimators of `ρ_nm = ⟨n|ρ|m⟩`: the Weyl symbol of
/// `|m⟩⟨n|`, i.e. `2π W_{|m⟩⟨n|}(x, p)`, for `n, m < d`.
pub fn weyl_symbols(x: f64, p: f64, d: usize) -> Array2<C64> {
    let t = kernel_table(x, p, d);
    let two_pi = 2.0 * std::f64::consts::PI;
    Array2::from_shape_fn((d, d), |(n, m)| t[(m, n)] * two_pi)
}

fn wigner_value(rho: &Array2<C64>, table: &Array2<C64>) -> f64 {
    let d = rho.nrows();
    let mut acc = 0.0;
    for n in 0..d {
        acc += rho[(n, n)].re * table[(n, n)].re;
        for m in 0..n {
            acc += 2.0 * (rho[(n, m)] * table[(n, m)]).re;
        }
    }
    acc
}

/// Closed-form Wigner function of `rho` on `grid`. Fails if the grid does not
/// capture unit mass to 10⁻³.
pub fn wigner(rho: &ReducedVibrationalState, grid: &GridSpec) -> AnalysisResult<WignerGrid> {
    let xs = grid.xs();
    let ps = grid.ps();
    let d = rho.dim();
    let m = rho.matrix();
    let values = Array2::from_shape_fn((xs.len(), ps.len()), |(i, j)| {
        wigner_value(m, &kernel_table(xs[i], ps[j], d))
    });
    let out = WignerGrid { xs, ps, values };
    let norm = out.normalization();
    if (norm - 1.0).abs() > 1e-3 {
        return Err(AnalysisError::GridTooCoarse(norm));
    }
    Ok(out)
}

/// `O = 2π ∬ W₁ W₂ dx dp`.
pub fn wigner_overlap(w1: &WignerGrid, w2: &WignerGrid) -> AnalysisResult<f64> {
    if w1.xs != w2.xs || w1.ps != w2.ps || w1.values.dim() != w2.values.dim() {
        return Err(AnalysisError::GridMismatch);
    }
    Ok(2.0 * std::f64::consts::PI * w1.integrate(|i, j| w1.values[(i, j)] * w2.values[(i, j)]))
}
