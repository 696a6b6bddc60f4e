//! Thin bridge between `ndarray` containers and the `faer` decompositions used
//! by the engines and the analysis routines.

use faer::linalg::matmul::matmul as faer_matmul;
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};
use ndarray::{Array1, Array2, ArrayView2};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("singular value decomposition did not converge ({rows}x{cols})")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("hermitian eigendecomposition did not converge (dim {0})")]
    EigNoConvergence(usize),
}

pub type LinalgResult<T> = Result<T, LinalgError>;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Row-major `m×k` times `k×n` into `out` (row-major `m×n`), optionally
/// conjugating either operand and adding to `out`.
#[allow(clippy::too_many_arguments)]
pub fn gemm(
    out: &mut [C64],
    a: &[C64],
    b: &[C64],
    m: usize,
    k: usize,
    n: usize,
    conj_a: bool,
    accumulate: bool,
) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    debug_assert_eq!(out.len(), m * n);
    let lhs = MatRef::from_row_major_slice(a, m, k);
    let rhs = MatRef::from_row_major_slice(b, k, n);
    let dst = MatMut::from_row_major_slice_mut(out, m, n);
    let beta = if accumulate { Accum::Add } else { Accum::Replace };
    if conj_a {
        faer_matmul(dst, beta, lhs.conjugate(), rhs, ONE, Par::Seq);
    } else {
        faer_matmul(dst, beta, lhs, rhs, ONE, Par::Seq);
    }
}

/// `a · b` for standard-layout arrays.
pub fn matmul(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (m, k) = a.dim();
    let n = b.ncols();
    assert_eq!(k, b.nrows(), "inner dimensions differ");
    let a = a.as_standard_layout();
    let b = b.as_standard_layout();
    let mut out = Array2::zeros((m, n));
    gemm(
        out.as_slice_mut().expect("fresh array is contiguous"),
        a.as_slice().expect("standard layout"),
        b.as_slice().expect("standard layout"),
        m,
        k,
        n,
        false,
        false,
    );
    out
}

pub fn to_faer(a: ArrayView2<'_, C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub fn from_faer(m: MatRef<'_, C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD `a = u · diag(s) · v†`, singular values in nonincreasing order.
pub struct ThinSvd {
    pub u: Mat<C64>,
    pub s: Vec<f64>,
    pub v: Mat<C64>,
}

pub fn thin_svd(a: MatRef<'_, C64>) -> LinalgResult<ThinSvd> {
    let (rows, cols) = (a.nrows(), a.ncols());
    let svd = a
        .thin_svd()
        .map_err(|_| LinalgError::SvdNoConvergence { rows, cols })?;
    let s: Vec<f64> = svd.S().column_vector().iter().map(|x| x.re).collect();
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let is_sorted = order.iter().enumerate().all(|(k, &i)| k == i);
    if is_sorted {
        return Ok(ThinSvd { u: svd.U().to_owned(), s, v: svd.V().to_owned() });
    }
    let u = Mat::from_fn(rows, s.len(), |i, k| svd.U()[(i, order[k])]);
    let v = Mat::from_fn(cols, s.len(), |i, k| svd.V()[(i, order[k])]);
    let s = order.iter().map(|&i| s[i]).collect();
    Ok(ThinSvd { u, s, v })
}

/// Eigendecomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors
/// as columns.
pub fn eigh(h: &Array2<C64>) -> LinalgResult<(Vec<f64>, Array2<C64>)> {
    let n = h.nrows();
    let m = Mat::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)].conj()));
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::EigNoConvergence(n))?;
    let vals: Vec<f64> = evd.S().column_vector().iter().map(|x| x.re).collect();
    Ok((vals, from_faer(evd.U())))
}

/// Eigendecomposition of a real symmetric matrix; eigenvalues ascending.
pub fn eigh_real(h: &Array2<f64>) -> LinalgResult<(Vec<f64>, Array2<f64>)> {
    let n = h.nrows();
    let m = Mat::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]));
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|_| LinalgError::EigNoConvergence(n))?;
    let vals = evd.S().column_vector().iter().copied().collect();
    let u = evd.U();
    Ok((vals, Array2::from_shape_fn((n, n), |(i, j)| u[(i, j)])))
}

pub fn eigvalsh(h: &Array2<C64>) -> LinalgResult<Vec<f64>> {
    Ok(eigh(h)?.0)
}

/// `exp(-i·tau·h)` for Hermitian `h`.
pub fn evolution_operator(h: &Array2<C64>, tau: f64) -> LinalgResult<Array2<C64>> {
    let (vals, vecs) = eigh(h)?;
    let n = h.nrows();
    let phases: Vec<C64> = vals.iter().map(|&e| C64::from_polar(1.0, -tau * e)).collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += vecs[(i, k)] * phases[k] * vecs[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_map(h: &Array2<C64>, f: impl Fn(f64) -> f64) -> LinalgResult<Array2<C64>> {
    let (vals, vecs) = eigh(h)?;
    let n = h.nrows();
    let fv: Vec<f64> = vals.iter().map(|&v| f(v)).collect();
    let mut out = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = ZERO;
            for k in 0..n {
                acc += vecs[(i, k)] * fv[k] * vecs[(j, k)].conj();
            }
            out[(i, j)] = acc;
        }
    }
    Ok(out)
}

pub fn singular_values(a: &Array2<C64>) -> LinalgResult<Vec<f64>> {
    let m = to_faer(a.view());
    Ok(thin_svd(m.as_ref())?.s)
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    Array2::from_shape_fn((ar * br, ac * bc), |(i, j)| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

pub fn dagger(a: &Array2<C64>) -> Array2<C64> {
    a.t().mapv(|z| z.conj())
}

pub fn identity(n: usize) -> Array2<C64> {
    Array2::from_diag(&Array1::from_elem(n, ONE))
}

pub fn trace(a: &Array2<C64>) -> C64 {
    a.diag().sum()
}

/// Largest elementwise modulus of `a - b`.
pub fn max_abs_diff(a: &Array2<C64>, b: &Array2<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn frobenius_norm(a: &Array2<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn hermiticity_defect(a: &Array2<C64>) -> f64 {
    max_abs_diff(a, &dagger(a))
}

pub fn real_to_complex(a: &Array2<f64>) -> Array2<C64> {
    a.mapv(|x| C64::new(x, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn svd_reconstructs_input() {
        let a = Array2::from_shape_fn((5, 3), |(i, j)| C64::new((i * 3 + j) as f64, (i as f64) - (j as f64)));
        let svd = thin_svd(to_faer(a.view()).as_ref()).unwrap();
        assert!(svd.s.windows(2).all(|w| w[0] >= w[1]));
        let back = Array2::from_shape_fn((5, 3), |(i, j)| {
            (0..svd.s.len()).map(|k| svd.u[(i, k)] * svd.s[k] * svd.v[(j, k)].conj()).sum::<C64>()
        });
        assert!(max_abs_diff(&a, &back) < 1e-12);
    }

    #[test]
    fn evolution_operator_is_unitary_and_matches_pauli_rotation() {
        let sx = array![[ZERO, ONE], [ONE, ZERO]];
        let u = evolution_operator(&sx, 0.3).unwrap();
        let expected = array![
            [C64::new(0.3f64.cos(), 0.0), C64::new(0.0, -(0.3f64.sin()))],
            [C64::new(0.0, -(0.3f64.sin())), C64::new(0.3f64.cos(), 0.0)]
        ];
        assert!(max_abs_diff(&u, &expected) < 1e-14);
    }

    #[test]
    fn kron_layout_is_row_major_outer() {
        let a = array![[ONE, ZERO], [ZERO, -ONE]];
        let b = array![[ZERO, ONE], [ONE, ZERO]];
        let k = kron(&a, &b);
        assert_eq!(k[(0, 1)], ONE);
        assert_eq!(k[(2, 3)], -ONE);
        assert_eq!(k[(0, 3)], ZERO);
    }
}
