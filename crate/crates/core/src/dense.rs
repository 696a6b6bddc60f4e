//! Brute-force reference propagation in the truncated Hilbert space.
//!
//! Basis states are `(cavity photons c, electronic excitation mask, vibrational
//! occupations n_1..n_N)`. By default only the single-excitation block is
//! kept; the full space is available for leakage checks. The Hamiltonian is
//! real, stored in CSR form, and applied through a Lanczos approximation of
//! `exp(−iHτ)ψ` with an a-posteriori error estimate and adaptive step halving.

use std::collections::HashMap;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::analysis::{AnalysisError, ReducedVibrationalState};
use crate::linalg::{eigh_real, LinalgError, ZERO};
use crate::model::{DisorderRealization, HtcParams, InitialStateSpec, ModelError};

pub const DEFAULT_DIMENSION_LIMIT: usize = 200_000;

/// Local error target of one Krylov step, relative to the state norm.
pub const KRYLOV_TOLERANCE: f64 = 1e-12;

const KRYLOV_DIM: usize = 30;
const MAX_HALVINGS: u32 = 40;

#[derive(Debug, Error)]
pub enum DenseError {
    #[error("Hilbert-space dimension {dim} exceeds the limit {limit}")]
    DimensionLimit { dim: usize, limit: usize },

    #[error("Krylov propagation failed to reach tolerance")]
    KrylovFailure,

    #[error("non-finite amplitude after propagation")]
    NonFinite,

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Linalg(#[from] LinalgError),

    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub type DenseResult<T> = Result<T, DenseError>;

#[derive(Clone, Copy, Debug)]
pub struct DenseOptions {
    pub single_excitation_block: bool,
    pub dimension_limit: usize,
}

impl Default for DenseOptions {
    fn default() -> Self {
        Self { single_excitation_block: true, dimension_limit: DEFAULT_DIMENSION_LIMIT }
    }
}

/// Real sparse matrix in compressed-row form.
#[derive(Clone, Debug)]
pub struct Csr {
    pub dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[k]] * self.vals[k];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.dim, self.dim));
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out[(r, self.cols[k])] += self.vals[k];
            }
        }
        out
    }
}

/// State vector over the engine's basis at a given time.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseState {
    pub time: f64,
    pub amplitudes: Array1<C64>,
}

impl DenseState {
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Cavity/electronic configuration of a basis block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ElectronicConfig {
    pub photons: usize,
    pub mask: u64,
}

impl ElectronicConfig {
    pub fn excitations(&self) -> usize {
        self.photons + self.mask.count_ones() as usize
    }
}

pub struct DenseEngine {
    params: HtcParams,
    configs: Vec<ElectronicConfig>,
    vib_block: usize,
    hamiltonian: Csr,
}

impl DenseEngine {
    pub fn new(params: &HtcParams, realization: &DisorderRealization, options: DenseOptions) -> DenseResult<Self> {
        params.validate()?;
        let n = params.n_molecules;
        if realization.epsilons.len() != n {
            return Err(ModelError::RealizationLength { got: realization.epsilons.len(), expected: n }.into());
        }
        let dv = params.n_max_vib + 1;
        let configs: Vec<ElectronicConfig> = if options.single_excitation_block {
            std::iter::once(ElectronicConfig { photons: 1, mask: 0 })
                .chain((0..n).map(|i| ElectronicConfig { photons: 0, mask: 1 << i }))
                .collect()
        } else {
            if n >= 40 {
                return Err(DenseError::DimensionLimit { dim: usize::MAX, limit: options.dimension_limit });
            }
            (0..=params.n_max_cav)
                .flat_map(|c| (0..(1u64 << n)).map(move |mask| ElectronicConfig { photons: c, mask }))
                .collect()
        };
        let vib_block = (dv as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
        let dim = (configs.len() as u128).saturating_mul(vib_block);
        if dim > options.dimension_limit as u128 {
            return Err(DenseError::DimensionLimit {
                dim: dim.min(usize::MAX as u128) as usize,
                limit: options.dimension_limit,
            });
        }
        let vib_block = vib_block as usize;
        let hamiltonian = build_hamiltonian(params, &realization.epsilons, &configs, vib_block);
        Ok(Self { params: params.clone(), configs, vib_block, hamiltonian })
    }

    pub fn dim(&self) -> usize {
        self.configs.len() * self.vib_block
    }

    pub fn hamiltonian(&self) -> &Csr {
        &self.hamiltonian
    }

    pub fn configs(&self) -> &[ElectronicConfig] {
        &self.configs
    }

    fn config_index(&self, cfg: ElectronicConfig) -> Option<usize> {
        self.configs.iter().position(|&c| c == cfg)
    }

    pub fn initial_state(&self, spec: InitialStateSpec) -> DenseResult<DenseState> {
        spec.validate(&self.params)?;
        let cfg = match spec.excited_molecule() {
            None => ElectronicConfig { photons: 1, mask: 0 },
            Some(i) => ElectronicConfig { photons: 0, mask: 1 << i },
        };
        let k = self.config_index(cfg).expect("single-excitation configs are always present");
        let mut amplitudes = Array1::from_elem(self.dim(), ZERO);
        amplitudes[k * self.vib_block] = C64::new(1.0, 0.0);
        Ok(DenseState { time: 0.0, amplitudes })
    }

    /// `exp(−iHτ)ψ`.
    pub fn propagate(&self, state: &DenseState, tau: f64) -> DenseResult<DenseState> {
        let mut psi = state.amplitudes.to_vec();
        let mut remaining = tau;
        let mut step = tau;
        let mut halvings = 0;
        while remaining.abs() > 0.0 {
            let h = if step.abs() > remaining.abs() { remaining } else { step };
            match krylov_step(&self.hamiltonian, &psi, h)? {
                Some(next) => {
                    psi = next;
                    remaining -= h;
                    if remaining.abs() < 1e-15 * tau.abs().max(1.0) {
                        remaining = 0.0;
                    }
                }
                None => {
                    halvings += 1;
                    if halvings > MAX_HALVINGS {
                        return Err(DenseError::KrylovFailure);
                    }
                    step *= 0.5;
                }
            }
        }
        if psi.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(DenseError::NonFinite);
        }
        Ok(DenseState { time: state.time + tau, amplitudes: Array1::from(psi) })
    }

    /// States at each of `times` (ascending, measured from `state.time`).
    pub fn evolve(&self, state: &DenseState, times: &[f64]) -> DenseResult<Vec<DenseState>> {
        let mut out = Vec::with_capacity(times.len());
        let mut cur = state.clone();
        for &t in times {
            cur = self.propagate(&cur, t - cur.time)?;
            cur.time = t;
            out.push(cur.clone());
        }
        Ok(out)
    }

    fn vib_stride(&self, i: usize) -> usize {
        let dv = self.params.n_max_vib + 1;
        dv.pow((self.params.n_molecules - 1 - i) as u32)
    }

    /// Reduced density matrix of the vibrational mode of molecule `i` (0-based).
    pub fn reduced_vibrational_dm(&self, state: &DenseState, i: usize) -> DenseResult<ReducedVibrationalState> {
        let dv = self.params.n_max_vib + 1;
        let stride = self.vib_stride(i);
        let outer = self.vib_block / (stride * dv);
        let mut rho = Array2::from_elem((dv, dv), ZERO);
        let psi = &state.amplitudes;
        for k in 0..self.configs.len() {
            let base = k * self.vib_block;
            for a in 0..outer {
                for c in 0..stride {
                    let idx = |n: usize| base + (a * dv + n) * stride + c;
                    for n in 0..dv {
                        let x = psi[idx(n)];
                        if x == ZERO {
                            continue;
                        }
                        for m in 0..dv {
                            rho[(n, m)] += x * psi[idx(m)].conj();
                        }
                    }
                }
            }
        }
        Ok(ReducedVibrationalState::new(rho)?)
    }

    fn diagonal_expectation(&self, state: &DenseState, f: impl Fn(ElectronicConfig) -> f64) -> f64 {
        self.configs
            .iter()
            .enumerate()
            .map(|(k, &cfg)| {
                let w = f(cfg);
                if w == 0.0 {
                    return 0.0;
                }
                let block = state.amplitudes.slice(ndarray::s![k * self.vib_block..(k + 1) * self.vib_block]);
                w * block.iter().map(|z| z.norm_sqr()).sum::<f64>()
            })
            .sum()
    }

    pub fn photon_number(&self, state: &DenseState) -> f64 {
        self.diagonal_expectation(state, |c| c.photons as f64)
    }

    pub fn excited_population(&self, state: &DenseState, i: usize) -> f64 {
        self.diagonal_expectation(state, |c| ((c.mask >> i) & 1) as f64)
    }

    pub fn excitation_number(&self, state: &DenseState) -> f64 {
        self.diagonal_expectation(state, |c| c.excitations() as f64)
    }

    /// Weight outside the single-excitation manifold.
    pub fn leakage(&self, state: &DenseState) -> f64 {
        self.diagonal_expectation(state, |c| if c.excitations() == 1 { 0.0 } else { 1.0 })
    }

    pub fn energy(&self, state: &DenseState) -> f64 {
        let psi = state.amplitudes.as_slice().expect("contiguous");
        let mut hpsi = vec![ZERO; psi.len()];
        self.hamiltonian.matvec(psi, &mut hpsi);
        psi.iter().zip(&hpsi).map(|(a, b)| (a.conj() * b).re).sum()
    }

    /// `⟨x̂_i⟩`
    pub fn mean_x(&self, state: &DenseState, i: usize) -> DenseResult<f64> {
        Ok(self.reduced_vibrational_dm(state, i)?.mean_x())
    }
}

fn build_hamiltonian(params: &HtcParams, eps: &[f64], configs: &[ElectronicConfig], vib_block: usize) -> Csr {
    let n = params.n_molecules;
    let dv = params.n_max_vib + 1;
    let nu = params.nu;
    let holstein = params.huang_rhys_lambda * nu;
    let g = params.coupling_per_molecule();
    let lookup: HashMap<ElectronicConfig, usize> = configs.iter().enumerate().map(|(k, &c)| (c, k)).collect();
    let strides: Vec<usize> = (0..n).map(|i| dv.pow((n - 1 - i) as u32)).collect();

    let mut rows = Vec::with_capacity(configs.len() * vib_block);
    let mut occ = vec![0usize; n];
    for (k, &cfg) in configs.iter().enumerate() {
        // electronic couplings to other blocks: (target block, amplitude)
        let mut hops = Vec::new();
        for i in 0..n {
            let excited = (cfg.mask >> i) & 1 == 1;
            if excited && cfg.photons < params.n_max_cav {
                let to = ElectronicConfig { photons: cfg.photons + 1, mask: cfg.mask & !(1 << i) };
                if let Some(&t) = lookup.get(&to) {
                    hops.push((t, g * ((cfg.photons + 1) as f64).sqrt()));
                }
            }
            if !excited && cfg.photons >= 1 {
                let to = ElectronicConfig { photons: cfg.photons - 1, mask: cfg.mask | (1 << i) };
                if let Some(&t) = lookup.get(&to) {
                    hops.push((t, g * (cfg.photons as f64).sqrt()));
                }
            }
        }
        let onsite: f64 = (0..n)
            .filter(|&i| (cfg.mask >> i) & 1 == 1)
            .map(|i| eps[i] + params.detuning)
            .sum();
        for v in 0..vib_block {
            let mut rem = v;
            for i in 0..n {
                occ[i] = rem / strides[i];
                rem %= strides[i];
            }
            let row_idx = k * vib_block + v;
            let mut row = Vec::with_capacity(2 + 2 * n + hops.len());
            let diag = onsite + nu * occ.iter().sum::<usize>() as f64;
            row.push((row_idx, diag));
            for i in 0..n {
                if (cfg.mask >> i) & 1 == 0 || holstein == 0.0 {
                    continue;
                }
                if occ[i] + 1 < dv {
                    row.push((row_idx + strides[i], -holstein * ((occ[i] + 1) as f64).sqrt()));
                }
                if occ[i] >= 1 {
                    row.push((row_idx - strides[i], -holstein * (occ[i] as f64).sqrt()));
                }
            }
            for &(t, amp) in &hops {
                if amp != 0.0 {
                    row.push((t * vib_block + v, amp));
                }
            }
            rows.push(row);
        }
    }
    Csr::from_rows(rows)
}

/// One Lanczos step; `None` if the error estimate exceeds the tolerance.
fn krylov_step(h: &Csr, psi: &[C64], tau: f64) -> DenseResult<Option<Vec<C64>>> {
    let dim = psi.len();
    let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Ok(Some(psi.to_vec()));
    }
    let m_max = KRYLOV_DIM.min(dim);
    let mut basis: Vec<Vec<C64>> = vec![psi.iter().map(|z| z / norm).collect()];
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta: Vec<f64> = Vec::with_capacity(m_max);
    let mut w = vec![ZERO; dim];
    let mut breakdown = false;
    for j in 0..m_max {
        h.matvec(&basis[j], &mut w);
        let a: f64 = basis[j].iter().zip(&w).map(|(v, x)| (v.conj() * x).re).sum();
        alpha.push(a);
        // full reorthogonalization
        for v in &basis {
            let c: C64 = v.iter().zip(&w).map(|(v, x)| v.conj() * x).sum();
            w.iter_mut().zip(v).for_each(|(x, v)| *x -= c * v);
        }
        let b = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        beta.push(b);
        if b < 1e-13 {
            breakdown = true;
            break;
        }
        if j + 1 < m_max {
            basis.push(w.iter().map(|z| z / b).collect());
        }
    }
    let m = alpha.len();
    let t = Array2::from_shape_fn((m, m), |(i, j)| {
        if i == j {
            alpha[i]
        } else if i + 1 == j {
            beta[i]
        } else if j + 1 == i {
            beta[j]
        } else {
            0.0
        }
    });
    let (vals, vecs) = eigh_real(&t)?;
    let y: Vec<C64> = (0..m)
        .map(|i| {
            (0..m)
                .map(|k| C64::from_polar(vecs[(i, k)] * vecs[(0, k)], -tau * vals[k]))
                .sum::<C64>()
        })
        .collect();
    if !breakdown {
        let err = beta[m - 1] * y[m - 1].norm();
        if err > KRYLOV_TOLERANCE {
            return Ok(None);
        }
    }
    let mut out = vec![ZERO; dim];
    for (v, &c) in basis.iter().zip(&y) {
        let c = c * norm;
        out.iter_mut().zip(v).for_each(|(o, v)| *o += c * v);
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eigh, real_to_complex};
    use crate::model::{build_terms, sample_disorder};

    #[test]
    fn hamiltonian_matches_kronecker_assembly() {
        // full space of a two-molecule system against the term-list assembly
        let mut p = HtcParams::resonant(2).with_disorder(0.5).with_vib_cutoff(2);
        p.n_max_cav = 2;
        let r = sample_disorder(&p, 3);
        let engine = DenseEngine::new(&p, &r, DenseOptions { single_excitation_block: false, ..Default::default() }).unwrap();
        let terms = build_terms(&p, &r).unwrap();
        let reference = terms.assemble_dense();
        let dense = engine.hamiltonian().to_dense();
        // both orderings are (cavity, e1, e2, n1, n2) vs (cavity, e1, n1, e2, n2)
        let dv = 3;
        let map = |c: usize, mask: u64, n1: usize, n2: usize| {
            let e1 = (mask & 1) as usize;
            let e2 = ((mask >> 1) & 1) as usize;
            ((c * 2 + e1) * dv + n1) * 2 * dv + e2 * dv + n2
        };
        let mut max_err: f64 = 0.0;
        for (k, cfg) in engine.configs().iter().enumerate() {
            for v in 0..dv * dv {
                for (k2, cfg2) in engine.configs().iter().enumerate() {
                    for v2 in 0..dv * dv {
                        let a = dense[(k * 9 + v, k2 * 9 + v2)];
                        let b = reference[(map(cfg.photons, cfg.mask, v / dv, v % dv), map(cfg2.photons, cfg2.mask, v2 / dv, v2 % dv))];
                        max_err = max_err.max((a - b.re).abs() + b.im.abs());
                    }
                }
            }
        }
        assert!(max_err < 1e-14, "{max_err}");
    }

    #[test]
    fn krylov_matches_exact_exponential() {
        let p = HtcParams::resonant(2).with_disorder(0.5).with_vib_cutoff(3);
        let r = sample_disorder(&p, 8);
        let engine = DenseEngine::new(&p, &r, DenseOptions::default()).unwrap();
        let psi0 = engine.initial_state(InitialStateSpec::MoleculeExcited(1)).unwrap();
        let hc = real_to_complex(&engine.hamiltonian().to_dense());
        let (vals, vecs) = eigh(&hc).unwrap();
        let t = 7.3;
        let coeff: Vec<C64> = (0..vals.len())
            .map(|k| (0..vals.len()).map(|i| vecs[(i, k)].conj() * psi0.amplitudes[i]).sum::<C64>() * C64::from_polar(1.0, -t * vals[k]))
            .collect();
        let exact: Vec<C64> = (0..vals.len()).map(|i| (0..vals.len()).map(|k| vecs[(i, k)] * coeff[k]).sum()).collect();
        let got = engine.propagate(&psi0, t).unwrap();
        let err = got.amplitudes.iter().zip(&exact).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn dimension_limit_is_enforced() {
        let p = HtcParams::resonant(6);
        let err = DenseEngine::new(&p, &DisorderRealization::clean(6), DenseOptions::default()).err().unwrap();
        assert!(matches!(err, DenseError::DimensionLimit { .. }));
    }
}
