use ndarray::{Array1, Array2, Array3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::{MpsError, MpsResult};
use crate::linalg::{gemm, thin_svd, ZERO};

/// What a chain position holds. Molecules keep their 0-based identity while the
/// cavity is swapped through the chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SiteKind {
    Cavity,
    Molecule(usize),
}

/// Bond-dimension cap and relative singular-value cutoff.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub chi_max: usize,
    pub svd_cutoff: f64,
}

impl Truncation {
    pub const EXACT: Truncation = Truncation { chi_max: usize::MAX, svd_cutoff: 0.0 };
}

/// Which side keeps the orthogonality center after a two-site update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    Right,
    Left,
}

/// Two-site gate on `(left, right)` local indices, row-major over the output
/// pair. With `swap`, rows are ordered `(right, left)` and the two sites trade
/// places.
#[derive(Clone, Debug)]
pub struct TwoSiteGate {
    pub matrix: Array2<C64>,
    pub swap: bool,
}

impl TwoSiteGate {
    /// Wraps `u` acting on `(d1, d2)`, optionally followed by a swap.
    pub fn new(u: &Array2<C64>, d1: usize, d2: usize, swap: bool) -> Self {
        assert_eq!(u.dim(), (d1 * d2, d1 * d2));
        if !swap {
            return Self { matrix: u.clone(), swap };
        }
        let mut m = Array2::zeros((d1 * d2, d1 * d2));
        for t1 in 0..d1 {
            for t2 in 0..d2 {
                m.row_mut(t2 * d1 + t1).assign(&u.row(t1 * d2 + t2));
            }
        }
        Self { matrix: m, swap }
    }
}

/// Matrix product state with `U(1)` charges on every bond.
///
/// Tensors are stored densely as `(left bond, local, right bond)`; the charges
/// identify which blocks may be nonzero and split every SVD into sectors.
/// Bond `b` carries the excitation number of sites `0..b`.
#[derive(Clone, Debug)]
pub struct Mps {
    pub(crate) kinds: Vec<SiteKind>,
    pub(crate) local_charges: Vec<Vec<i32>>,
    pub(crate) tensors: Vec<Array3<C64>>,
    pub(crate) bonds: Vec<Vec<i32>>,
    pub(crate) center: usize,
}

fn definite_charge(v: &Array1<C64>, charges: &[i32]) -> MpsResult<i32> {
    let mut q = None;
    for (k, z) in v.iter().enumerate() {
        if z.norm() > 0.0 {
            match q {
                None => q = Some(charges[k]),
                Some(q0) if q0 != charges[k] => return Err(MpsError::ChargeViolation),
                _ => {}
            }
        }
    }
    q.ok_or(MpsError::ChargeViolation)
}

impl Mps {
    /// Normalized product state with one definite-charge vector per site.
    pub fn product(kinds: Vec<SiteKind>, local_charges: Vec<Vec<i32>>, vectors: &[Array1<C64>]) -> MpsResult<Self> {
        let n = kinds.len();
        if n < 2 || local_charges.len() != n || vectors.len() != n {
            return Err(MpsError::Shape("product state needs matching site lists of length >= 2".into()));
        }
        let mut bonds = vec![vec![0]];
        let mut tensors = Vec::with_capacity(n);
        for (j, v) in vectors.iter().enumerate() {
            if v.len() != local_charges[j].len() {
                return Err(MpsError::Shape(format!("site {j}: vector length {}", v.len())));
            }
            let q = definite_charge(v, &local_charges[j])?;
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let mut t = Array3::zeros((1, v.len(), 1));
            for (s, z) in v.iter().enumerate() {
                t[(0, s, 0)] = z / norm;
            }
            tensors.push(t);
            let prev = bonds[j][0];
            bonds.push(vec![prev + q]);
        }
        Ok(Self { kinds, local_charges, tensors, bonds, center: 0 })
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn kinds(&self) -> &[SiteKind] {
        &self.kinds
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn position_of(&self, kind: SiteKind) -> Option<usize> {
        self.kinds.iter().position(|&k| k == kind)
    }

    pub fn bond_dims(&self) -> Vec<usize> {
        self.bonds.iter().map(|b| b.len()).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bonds.iter().map(|b| b.len()).max().unwrap_or(1)
    }

    pub fn tensor(&self, pos: usize) -> &Array3<C64> {
        &self.tensors[pos]
    }

    pub fn total_charge(&self) -> i32 {
        *self.bonds.last().and_then(|b| b.first()).unwrap_or(&0)
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|z| z.re.is_finite() && z.im.is_finite()))
    }

    /// `A[l,·,r] ← u · A[l,·,r]` for a local operator `u`.
    pub fn apply_one_site(&mut self, pos: usize, u: &Array2<C64>) {
        let t = &self.tensors[pos];
        let (dl, d, dr) = t.dim();
        assert_eq!(u.dim(), (d, d));
        let u = u.as_standard_layout();
        let us = u.as_slice().unwrap();
        let src = t.as_slice().expect("standard layout");
        let mut out = Array3::zeros((dl, d, dr));
        let dst = out.as_slice_mut().unwrap();
        for l in 0..dl {
            let range = l * d * dr..(l + 1) * d * dr;
            gemm(&mut dst[range.clone()], us, &src[range], d, d, dr, false, false);
        }
        self.tensors[pos] = out;
    }

    /// Applies `gate` to sites `(pos, pos+1)`, splits with a charge-blocked SVD
    /// and truncates. Returns the discarded weight before renormalization.
    pub fn apply_two_site(&mut self, pos: usize, gate: &TwoSiteGate, sweep: Sweep, trunc: Truncation) -> MpsResult<f64> {
        if pos + 1 >= self.len() {
            return Err(MpsError::Shape(format!("no bond to the right of site {pos}")));
        }
        let (dl, d1, dk) = self.tensors[pos].dim();
        let (_, d2, dr) = self.tensors[pos + 1].dim();
        let dd = d1 * d2;
        if gate.matrix.dim() != (dd, dd) {
            return Err(MpsError::Shape(format!("gate {:?} on local dims {d1}x{d2}", gate.matrix.dim())));
        }

        // θ[l, s1, s2, r]
        let mut theta = vec![ZERO; dl * dd * dr];
        gemm(
            &mut theta,
            self.tensors[pos].as_slice().unwrap(),
            self.tensors[pos + 1].as_slice().unwrap(),
            dl * d1,
            dk,
            d2 * dr,
            false,
            false,
        );
        let g = gate.matrix.as_standard_layout();
        let gs = g.as_slice().unwrap();
        let mut gated = vec![ZERO; dl * dd * dr];
        for l in 0..dl {
            let range = l * dd * dr..(l + 1) * dd * dr;
            gemm(&mut gated[range.clone()], gs, &theta[range], dd, dd, dr, false, false);
        }

        let (na, nb) = if gate.swap { (d2, d1) } else { (d1, d2) };
        if gate.swap {
            self.kinds.swap(pos, pos + 1);
            self.local_charges.swap(pos, pos + 1);
        }
        let qa = self.local_charges[pos].clone();
        let qb = self.local_charges[pos + 1].clone();
        let left_bond = &self.bonds[pos];
        let right_bond = &self.bonds[pos + 1 + 1];

        // sector bookkeeping: rows (l, a), columns (b, r)
        let mut sectors: Vec<i32> = Vec::new();
        let mut rows: Vec<Vec<usize>> = Vec::new();
        for l in 0..dl {
            for a in 0..na {
                let q = left_bond[l] + qa[a];
                let k = match sectors.iter().position(|&s| s == q) {
                    Some(k) => k,
                    None => {
                        sectors.push(q);
                        rows.push(Vec::new());
                        sectors.len() - 1
                    }
                };
                rows[k].push(l * na + a);
            }
        }
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); sectors.len()];
        for b in 0..nb {
            for r in 0..dr {
                let q = right_bond[r] - qb[b];
                if let Some(k) = sectors.iter().position(|&s| s == q) {
                    cols[k].push(b * dr + r);
                }
            }
        }

        struct Block {
            charge: i32,
            rows: Vec<usize>,
            cols: Vec<usize>,
            u: faer::Mat<C64>,
            v: faer::Mat<C64>,
        }
        let mut blocks = Vec::new();
        let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
        let ncols_total = nb * dr;
        for k in 0..sectors.len() {
            if rows[k].is_empty() || cols[k].is_empty() {
                continue;
            }
            let (rk, ck) = (&rows[k], &cols[k]);
            let m = faer::Mat::from_fn(rk.len(), ck.len(), |i, j| gated[rk[i] * ncols_total + ck[j]]);
            let svd = thin_svd(m.as_ref())?;
            let bi = blocks.len();
            for (j, &s) in svd.s.iter().enumerate() {
                if s > 0.0 {
                    candidates.push((s, bi, j));
                }
            }
            blocks.push(Block { charge: sectors[k], rows: rk.clone(), cols: ck.clone(), u: svd.u, v: svd.v });
        }
        if candidates.is_empty() {
            return Err(MpsError::NonFinite);
        }
        candidates.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
        let total: f64 = candidates.iter().map(|c| c.0 * c.0).sum();
        if !total.is_finite() {
            return Err(MpsError::NonFinite);
        }
        let norm = total.sqrt();
        let mut keep = 0;
        for c in &candidates {
            if keep >= trunc.chi_max.max(1) || (keep > 0 && c.0 / norm <= trunc.svd_cutoff) {
                break;
            }
            keep += 1;
        }
        let discarded: f64 = candidates[keep..].iter().map(|c| c.0 * c.0).sum::<f64>() / total;
        let kept_norm = candidates[..keep].iter().map(|c| c.0 * c.0).sum::<f64>().sqrt();
        let mut kept: Vec<(f64, usize, usize)> = candidates[..keep].to_vec();
        // group the new bond by charge, largest values first inside a sector
        kept.sort_by(|x, y| {
            blocks[x.1].charge.cmp(&blocks[y.1].charge).then(y.0.total_cmp(&x.0)).then(x.2.cmp(&y.2))
        });

        let dnew = kept.len();
        let mut left = Array3::<C64>::zeros((dl, na, dnew));
        let mut right = Array3::<C64>::zeros((dnew, nb, dr));
        let mut new_bond = Vec::with_capacity(dnew);
        for (knew, &(s, bi, j)) in kept.iter().enumerate() {
            let blk = &blocks[bi];
            new_bond.push(blk.charge);
            let s = s / kept_norm;
            let (sl, sr) = match sweep {
                Sweep::Right => (1.0, s),
                Sweep::Left => (s, 1.0),
            };
            for (i, &row) in blk.rows.iter().enumerate() {
                left[(row / na, row % na, knew)] = blk.u[(i, j)] * sl;
            }
            for (i, &col) in blk.cols.iter().enumerate() {
                right[(knew, col / dr, col % dr)] = blk.v[(i, j)].conj() * sr;
            }
        }
        self.tensors[pos] = left;
        self.tensors[pos + 1] = right;
        self.bonds[pos + 1] = new_bond;
        self.center = match sweep {
            Sweep::Right => pos + 1,
            Sweep::Left => pos,
        };
        Ok(discarded)
    }

    /// Moves the orthogonality center without truncation.
    pub fn move_center(&mut self, to: usize) -> MpsResult<()> {
        while self.center < to {
            let pos = self.center;
            let d = self.tensors[pos].dim().1 * self.tensors[pos + 1].dim().1;
            let id = TwoSiteGate { matrix: Array2::eye(d), swap: false };
            self.apply_two_site(pos, &id, Sweep::Right, Truncation::EXACT)?;
        }
        while self.center > to {
            let pos = self.center - 1;
            let d = self.tensors[pos].dim().1 * self.tensors[pos + 1].dim().1;
            let id = TwoSiteGate { matrix: Array2::eye(d), swap: false };
            self.apply_two_site(pos, &id, Sweep::Left, Truncation::EXACT)?;
        }
        Ok(())
    }

    /// `⟨ψ|ψ⟩` by full contraction, independent of the canonical form.
    pub fn norm_sq(&self) -> f64 {
        let mut env: Option<Array2<C64>> = None;
        for t in &self.tensors {
            env = Some(transfer_left(env.as_ref(), t, None));
        }
        env.map_or(0.0, |e| e.diag().iter().map(|z| z.re).sum())
    }

    /// Reduced density matrices of every site, in chain order.
    pub fn site_density_matrices(&self) -> Vec<Array2<C64>> {
        let n = self.len();
        let c = self.center;
        let mut out = vec![Array2::zeros((0, 0)); n];
        let mut env: Option<Array2<C64>> = None;
        for j in c..n {
            out[j] = site_rdm(env.as_ref(), &self.tensors[j], None);
            env = Some(transfer_left(env.as_ref(), &self.tensors[j], None));
        }
        let mut renv: Option<Array2<C64>> = None;
        for j in (0..c).rev() {
            renv = Some(transfer_right(renv.as_ref(), &self.tensors[j + 1]));
            out[j] = site_rdm(None, &self.tensors[j], renv.as_ref());
        }
        out
    }

    pub fn site_density_matrix(&self, pos: usize) -> Array2<C64> {
        let c = self.center;
        if pos >= c {
            let mut env: Option<Array2<C64>> = None;
            for j in c..pos {
                env = Some(transfer_left(env.as_ref(), &self.tensors[j], None));
            }
            site_rdm(env.as_ref(), &self.tensors[pos], None)
        } else {
            let mut renv: Option<Array2<C64>> = None;
            for j in (pos + 1..=c).rev() {
                renv = Some(transfer_right(renv.as_ref(), &self.tensors[j]));
            }
            site_rdm(None, &self.tensors[pos], renv.as_ref())
        }
    }

    /// `⟨O_pos⟩` for a local operator.
    pub fn expectation(&self, pos: usize, op: &Array2<C64>) -> MpsResult<C64> {
        let d = self.tensors[pos].dim().1;
        if op.dim() != (d, d) {
            return Err(MpsError::Shape(format!("operator {:?} on local dim {d}", op.dim())));
        }
        let rho = self.site_density_matrix(pos);
        Ok((0..d).flat_map(|s| (0..d).map(move |t| (s, t))).map(|(s, t)| op[(s, t)] * rho[(t, s)]).sum())
    }

    /// `⟨O_p P_k⟩` for a fixed `p` and every `k > p`; requires the center at or
    /// left of `p`.
    pub fn correlations_from(&self, p: usize, op: &Array2<C64>, other: &Array2<C64>) -> MpsResult<Vec<(usize, C64)>> {
        if self.center > p {
            return Err(MpsError::Shape(format!("center {} right of site {p}", self.center)));
        }
        let mut env: Option<Array2<C64>> = None;
        for j in self.center..p {
            env = Some(transfer_left(env.as_ref(), &self.tensors[j], None));
        }
        let mut e = transfer_left(env.as_ref(), &self.tensors[p], Some(op));
        let mut out = Vec::new();
        for k in p + 1..self.len() {
            let closed = transfer_left(Some(&e), &self.tensors[k], Some(other));
            out.push((k, closed.diag().sum()));
            e = transfer_left(Some(&e), &self.tensors[k], None);
        }
        Ok(out)
    }
}

/// `E'[r,r'] = Σ conj(A[l,s,r]) op[s,t] A[l',t,r'] E[l,l']`, with `E = 1` and
/// `op = 1` when absent.
pub(crate) fn transfer_left(env: Option<&Array2<C64>>, a: &Array3<C64>, op: Option<&Array2<C64>>) -> Array2<C64> {
    let (dl, d, dr) = a.dim();
    let src = a.as_slice().expect("standard layout");
    let applied: Vec<C64> = match op {
        None => src.to_vec(),
        Some(o) => {
            let o = o.as_standard_layout();
            let os = o.as_slice().unwrap();
            let mut buf = vec![ZERO; src.len()];
            for l in 0..dl {
                let range = l * d * dr..(l + 1) * d * dr;
                gemm(&mut buf[range.clone()], os, &src[range], d, d, dr, false, false);
            }
            buf
        }
    };
    let x = match env {
        None => applied,
        Some(e) => {
            let e = e.as_standard_layout();
            let mut buf = vec![ZERO; src.len()];
            gemm(&mut buf, e.as_slice().unwrap(), &applied, dl, dl, d * dr, false, false);
            buf
        }
    };
    // A1^H · X1 with A1 = (dl·d) × dr: accumulate per row block as conj(A1)ᵀ X1
    let mut out = Array2::zeros((dr, dr));
    let a1 = ndarray::ArrayView2::from_shape((dl * d, dr), src).unwrap();
    let x1 = ndarray::ArrayView2::from_shape((dl * d, dr), &x[..]).unwrap();
    let at = a1.t().mapv(|z| z.conj());
    let at = at.as_standard_layout();
    let x1 = x1.as_standard_layout();
    gemm(
        out.as_slice_mut().unwrap(),
        at.as_slice().unwrap(),
        x1.as_slice().unwrap(),
        dr,
        dl * d,
        dr,
        false,
        false,
    );
    out
}

/// `R'[l,l'] = Σ conj(A[l,s,r]) A[l',s,r'] R[r,r']`.
pub(crate) fn transfer_right(renv: Option<&Array2<C64>>, a: &Array3<C64>) -> Array2<C64> {
    let (dl, d, dr) = a.dim();
    let src = a.as_slice().expect("standard layout");
    // Z[l',(s,r)] = Σ_r' A[l',s,r'] R[r,r'] = (A1 · Rᵀ)
    let z: Vec<C64> = match renv {
        None => src.to_vec(),
        Some(r) => {
            let rt = r.t().to_owned();
            let rt = rt.as_standard_layout();
            let mut buf = vec![ZERO; src.len()];
            gemm(&mut buf, src, rt.as_slice().unwrap(), dl * d, dr, dr, false, false);
            buf
        }
    };
    // out = conj(A2) · Z2ᵀ with A2, Z2 of shape dl × (d·dr)
    let z2 = ndarray::ArrayView2::from_shape((dl, d * dr), &z[..]).unwrap();
    let zt = z2.t().as_standard_layout().to_owned();
    let mut out = Array2::zeros((dl, dl));
    gemm(out.as_slice_mut().unwrap(), src, zt.as_slice().unwrap(), dl, d * dr, dl, true, false);
    out
}

/// `ρ[s,s'] = Σ A[l,s,r] conj(A[l',s',r']) L[l',l] R[r',r]`.
fn site_rdm(lenv: Option<&Array2<C64>>, a: &Array3<C64>, renv: Option<&Array2<C64>>) -> Array2<C64> {
    let (dl, d, dr) = a.dim();
    let src = a.as_slice().expect("standard layout");
    // T[l',(s,r)] = Σ_l L[l',l] A[l,s,r]
    let t: Vec<C64> = match lenv {
        None => src.to_vec(),
        Some(l) => {
            let l = l.as_standard_layout();
            let mut buf = vec![ZERO; src.len()];
            gemm(&mut buf, l.as_slice().unwrap(), src, dl, dl, d * dr, false, false);
            buf
        }
    };
    // U[(l',s),r'] = Σ_r T[(l',s),r] R[r',r]
    let u: Vec<C64> = match renv {
        None => t,
        Some(r) => {
            let rt = r.t().to_owned();
            let rt = rt.as_standard_layout();
            let mut buf = vec![ZERO; src.len()];
            gemm(&mut buf, &t, rt.as_slice().unwrap(), dl * d, dr, dr, false, false);
            buf
        }
    };
    let mut rho = Array2::<C64>::zeros((d, d));
    for l in 0..dl {
        for s in 0..d {
            for sp in 0..d {
                let mut acc = ZERO;
                let ub = (l * d + s) * dr;
                let ab = (l * d + sp) * dr;
                for r in 0..dr {
                    acc += u[ub + r] * src[ab + r].conj();
                }
                rho[(s, sp)] += acc;
            }
        }
    }
    rho
}
