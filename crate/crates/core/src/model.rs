//! Physical parameters, static disorder and the local Hamiltonian terms of the
//! disordered Holstein-Tavis-Cummings model
//!
//! ```text
//! H = Σ_i [ ν b_i†b_i − λν (b_i† + b_i) σ_i⁺σ_i⁻ + (ε_i + Δ) σ_i⁺σ_i⁻ ]
//!   + (g_c/√N) Σ_i ( a†σ_i⁻ + a σ_i⁺ )
//! ```
//!
//! in the frame rotating at the cavity frequency. Energies are in units of the
//! collective coupling `g_c` and `ħ = 1`.
//!
//! Local bases: a molecule is one merged electro-vibrational site with index
//! `e·(n_max_vib+1) + n` (`e = 0` ground, `e = 1` excited); the cavity site holds
//! photon numbers `0..=n_max_cav`.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fockspace::{ladder_matrices, FockError, TruncatedOscillator};
use crate::linalg::{identity, kron, ONE, ZERO};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("molecule index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("disorder realization has {got} energies, expected {expected}")]
    RealizationLength { got: usize, expected: usize },

    #[error(transparent)]
    Fock(#[from] FockError),
}

pub type ModelResult<T> = Result<T, ModelError>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DisorderDistribution {
    /// `ε_i ~ N(0, W²)`
    #[default]
    Normal,
    /// `ε_i ~ U[−W/2, W/2]`, for comparison with perturbative results.
    Box,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HtcParams {
    pub n_molecules: usize,
    pub g_collective: f64,
    pub nu: f64,
    pub huang_rhys_lambda: f64,
    pub disorder_w: f64,
    #[serde(default)]
    pub detuning: f64,
    pub n_max_vib: usize,
    #[serde(default = "default_cavity_cutoff")]
    pub n_max_cav: usize,
    #[serde(default)]
    pub disorder_distribution: DisorderDistribution,
}

fn default_cavity_cutoff() -> usize {
    1
}

/// Default meV value of `g_c` (Rabi splitting of 700 meV).
pub const DEFAULT_G_C_MEV: f64 = 350.0;

/// How energies in a parameter file are expressed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "units", rename_all = "snake_case")]
pub enum EnergyUnits {
    GC,
    Mev { g_c_mev: f64 },
}

impl HtcParams {
    /// Resonant parameter set with `ν = 0.3 g_c`, `λ = 0.4`, no disorder,
    /// `n_max_vib = 8` and a single-photon cavity cutoff.
    pub fn resonant(n_molecules: usize) -> Self {
        Self {
            n_molecules,
            g_collective: 1.0,
            nu: 0.3,
            huang_rhys_lambda: 0.4,
            disorder_w: 0.0,
            detuning: 0.0,
            n_max_vib: 8,
            n_max_cav: 1,
            disorder_distribution: DisorderDistribution::Normal,
        }
    }

    pub fn with_disorder(mut self, w: f64) -> Self {
        self.disorder_w = w;
        self
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.huang_rhys_lambda = lambda;
        self
    }

    pub fn with_vib_cutoff(mut self, n_max_vib: usize) -> Self {
        self.n_max_vib = n_max_vib;
        self
    }

    pub fn with_molecules(mut self, n: usize) -> Self {
        self.n_molecules = n;
        self
    }

    /// Converts energies given in `units` to internal `g_c` units.
    pub fn into_internal_units(mut self, units: EnergyUnits) -> Self {
        if let EnergyUnits::Mev { g_c_mev } = units {
            for e in [
                &mut self.g_collective,
                &mut self.nu,
                &mut self.disorder_w,
                &mut self.detuning,
            ] {
                *e /= g_c_mev;
            }
        }
        self
    }

    /// `g = g_c/√N`
    pub fn coupling_per_molecule(&self) -> f64 {
        self.g_collective / (self.n_molecules as f64).sqrt()
    }

    /// `R = λ²ν`
    pub fn reorganization_energy(&self) -> f64 {
        self.huang_rhys_lambda.powi(2) * self.nu
    }

    /// `2π/ν`
    pub fn vibrational_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.nu
    }

    pub fn molecule_dim(&self) -> usize {
        2 * (self.n_max_vib + 1)
    }

    pub fn cavity_dim(&self) -> usize {
        self.n_max_cav + 1
    }

    pub fn validate(&self) -> ModelResult<()> {
        let bad = |field: &'static str, reason: &str| {
            Err(ModelError::InvalidParameter { field, reason: reason.to_string() })
        };
        if self.n_molecules == 0 {
            return bad("n_molecules", "must be positive");
        }
        if self.n_max_vib == 0 {
            return bad("n_max_vib", "cutoff must be at least 1");
        }
        if self.n_max_cav == 0 {
            return bad("n_max_cav", "must hold the single excitation");
        }
        for (field, v) in [
            ("g_collective", self.g_collective),
            ("nu", self.nu),
            ("huang_rhys_lambda", self.huang_rhys_lambda),
            ("disorder_w", self.disorder_w),
            ("detuning", self.detuning),
        ] {
            if !v.is_finite() {
                return bad(field, "must be finite");
            }
        }
        if self.nu <= 0.0 {
            return bad("nu", "must be positive");
        }
        if self.g_collective < 0.0 {
            return bad("g_collective", "must be non-negative");
        }
        if self.disorder_w < 0.0 {
            return bad("disorder_w", "must be non-negative");
        }
        Ok(())
    }

    /// Stable SHA-256 digest of the parameter set.
    pub fn digest(&self) -> String {
        let json = serde_json::to_string(self).expect("params serialize");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRealization {
    pub seed: u64,
    pub epsilons: Vec<f64>,
}

impl DisorderRealization {
    pub fn clean(n: usize) -> Self {
        Self { seed: 0, epsilons: vec![0.0; n] }
    }
}

/// Seed of realization `index` in the ensemble keyed by `master_seed`.
///
/// Each realization reads its own ChaCha stream, so the value does not depend
/// on the order in which realizations are scheduled.
pub fn realization_seed(master_seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.next_u64()
}

/// Draws `ε_i` as `W` times a unit draw, so realizations with a common seed are
/// rescaled copies of each other across disorder strengths.
pub fn sample_disorder(params: &HtcParams, seed: u64) -> DisorderRealization {
    let n = params.n_molecules;
    let w = params.disorder_w;
    if w == 0.0 {
        return DisorderRealization { seed, epsilons: vec![0.0; n] };
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let epsilons = match params.disorder_distribution {
        DisorderDistribution::Normal => (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                w * z
            })
            .collect(),
        DisorderDistribution::Box => {
            let unit = Uniform::new(-0.5, 0.5).expect("valid range");
            (0..n).map(|_| w * unit.sample(&mut rng)).collect()
        }
    };
    DisorderRealization { seed, epsilons }
}

/// Which site carries the single initial excitation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index", rename_all = "snake_case")]
pub enum InitialStateSpec {
    CavityExcited,
    /// 1-based molecule index.
    MoleculeExcited(usize),
}

impl InitialStateSpec {
    pub fn validate(&self, params: &HtcParams) -> ModelResult<()> {
        if let InitialStateSpec::MoleculeExcited(i) = *self {
            if i == 0 || i > params.n_molecules {
                return Err(ModelError::IndexOutOfRange { index: i, n: params.n_molecules });
            }
        }
        Ok(())
    }

    /// 0-based index of the excited molecule, if any.
    pub fn excited_molecule(&self) -> Option<usize> {
        match *self {
            InitialStateSpec::CavityExcited => None,
            InitialStateSpec::MoleculeExcited(i) => Some(i - 1),
        }
    }
}

/// Operators on the local spaces.
#[derive(Clone, Debug)]
pub struct LocalOperators {
    pub vib: TruncatedOscillator,
    /// `σ⁻ = |g⟩⟨e|` on the electronic two-level space.
    pub sigma_minus: Array2<C64>,
    pub sigma_plus: Array2<C64>,
    /// `σ⁺σ⁻`
    pub excited: Array2<C64>,
    pub a: Array2<C64>,
    pub adag: Array2<C64>,
    pub photon_number: Array2<C64>,
}

impl LocalOperators {
    pub fn new(params: &HtcParams) -> ModelResult<Self> {
        let vib = ladder_matrices(params.n_max_vib)?;
        let mut sigma_minus = Array2::zeros((2, 2));
        sigma_minus[(0, 1)] = ONE;
        let sigma_plus = sigma_minus.t().to_owned();
        let excited = sigma_plus.dot(&sigma_minus);
        let cav = ladder_matrices(params.n_max_cav)?;
        Ok(Self {
            vib,
            sigma_minus,
            sigma_plus,
            excited,
            a: cav.b,
            adag: cav.bdag,
            photon_number: cav.number,
        })
    }

    /// Electronic operator lifted to the merged molecule site.
    pub fn on_molecule_electronic(&self, el: &Array2<C64>) -> Array2<C64> {
        kron(el, &identity(self.vib.dim()))
    }

    /// Vibrational operator lifted to the merged molecule site.
    pub fn on_molecule_vibrational(&self, vib: &Array2<C64>) -> Array2<C64> {
        kron(&identity(2), vib)
    }
}

/// Local term list of the Hamiltonian for one disorder realization.
#[derive(Clone, Debug)]
pub struct HtcTerms {
    pub params: HtcParams,
    pub epsilons: Vec<f64>,
    pub ops: LocalOperators,
    /// `ν b†b − λν(b†+b)σ⁺σ⁻ + (ε_i+Δ)σ⁺σ⁻` on each merged molecule site.
    pub molecule_onsite: Vec<Array2<C64>>,
    /// `g(a†σ⁻ + aσ⁺)` on cavity ⊗ molecule, cavity index major.
    pub coupling: Vec<Array2<C64>>,
    /// Same coupling restricted to cavity ⊗ electronic level.
    pub electronic_coupling: Array2<C64>,
}

impl HtcTerms {
    pub fn n_molecules(&self) -> usize {
        self.params.n_molecules
    }

    /// Vibrational part of the molecule term for a given electronic level,
    /// `ν b†b − f (b†+b)` with `f = λν·e`.
    pub fn vibrational_hamiltonian(&self, excited_population: f64) -> Array2<C64> {
        let p = &self.params;
        let osc = &self.ops.vib;
        let f = p.huang_rhys_lambda * p.nu * excited_population;
        osc.number.mapv(|z| z * p.nu) - (&osc.b + &osc.bdag).mapv(|z| z * f)
    }

    /// Dense Hamiltonian on cavity ⊗ molecule_1 ⊗ … ⊗ molecule_N. Small systems only.
    pub fn assemble_dense(&self) -> Array2<C64> {
        let n = self.n_molecules();
        let dc = self.params.cavity_dim();
        let dm = self.params.molecule_dim();
        let dim = dc * dm.pow(n as u32);
        let mut h = Array2::zeros((dim, dim));
        for i in 0..n {
            // identity on the cavity and molecules before i, the term, identity after
            let left = identity(dc * dm.pow(i as u32));
            let right = identity(dm.pow((n - 1 - i) as u32));
            h = h + kron(&kron(&left, &self.molecule_onsite[i]), &right);
            // coupling: cavity ⊗ (id on molecules < i) ⊗ molecule i ⊗ (id after)
            let before = dm.pow(i as u32);
            let after = dm.pow((n - 1 - i) as u32);
            let c = &self.coupling[i];
            for (idx, &val) in c.indexed_iter().filter(|(_, v)| v.norm() > 0.0) {
                let (row, col) = idx;
                let (cr, mr) = (row / dm, row % dm);
                let (cc, mc) = (col / dm, col % dm);
                for b in 0..before {
                    for a in 0..after {
                        let r = ((cr * before + b) * dm + mr) * after + a;
                        let s = ((cc * before + b) * dm + mc) * after + a;
                        h[(r, s)] += val;
                    }
                }
            }
        }
        h
    }

    /// Total excitation number `a†a + Σσ⁺σ⁻` on the same space as
    /// [`assemble_dense`](Self::assemble_dense).
    pub fn dense_excitation_number(&self) -> Array2<C64> {
        let n = self.n_molecules();
        let dc = self.params.cavity_dim();
        let dm = self.params.molecule_dim();
        let mut out = kron(&self.ops.photon_number, &identity(dm.pow(n as u32)));
        let exc = self.ops.on_molecule_electronic(&self.ops.excited);
        for i in 0..n {
            let left = identity(dc * dm.pow(i as u32));
            let right = identity(dm.pow((n - 1 - i) as u32));
            out = out + kron(&kron(&left, &exc), &right);
        }
        out
    }
}

pub fn build_terms(params: &HtcParams, realization: &DisorderRealization) -> ModelResult<HtcTerms> {
    params.validate()?;
    if realization.epsilons.len() != params.n_molecules {
        return Err(ModelError::RealizationLength {
            got: realization.epsilons.len(),
            expected: params.n_molecules,
        });
    }
    let ops = LocalOperators::new(params)?;
    let osc = &ops.vib;
    let nu = params.nu;
    let holstein = params.huang_rhys_lambda * nu;
    let vib_only = ops.on_molecule_vibrational(&osc.number.mapv(|z| z * nu));
    let displacement = kron(&ops.excited, &(&osc.b + &osc.bdag));
    let excited = ops.on_molecule_electronic(&ops.excited);
    let molecule_onsite = realization
        .epsilons
        .iter()
        .map(|&eps| {
            &vib_only - &displacement.mapv(|z| z * holstein) + excited.mapv(|z| z * (eps + params.detuning))
        })
        .collect();

    let g = params.coupling_per_molecule();
    let electronic_coupling =
        (kron(&ops.adag, &ops.sigma_minus) + kron(&ops.a, &ops.sigma_plus)).mapv(|z| z * g);
    let lifted = kron(&electronic_coupling, &identity(osc.dim()));
    // kron(cavity ⊗ el, vib) already has index order (cavity, el, vib) = (cavity, molecule)
    let coupling = vec![lifted; params.n_molecules];
    Ok(HtcTerms {
        params: params.clone(),
        epsilons: realization.epsilons.clone(),
        ops,
        molecule_onsite,
        coupling,
        electronic_coupling,
    })
}

/// Product state: one normalized vector per site.
#[derive(Clone, Debug, PartialEq)]
pub struct ProductState {
    pub cavity: Array1<C64>,
    pub molecules: Vec<Array1<C64>>,
}

impl ProductState {
    pub fn norm(&self) -> f64 {
        let n = |v: &Array1<C64>| v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        (n(&self.cavity) * self.molecules.iter().map(n).product::<f64>()).sqrt()
    }
}

fn local_expectation(v: &Array1<C64>, op: &Array2<C64>) -> f64 {
    let w = op.dot(v);
    v.iter().zip(w.iter()).map(|(a, b)| (a.conj() * b).re).sum()
}

impl ProductState {
    pub fn photon_number(&self, ops: &LocalOperators) -> f64 {
        local_expectation(&self.cavity, &ops.photon_number)
    }

    pub fn excited_population(&self, ops: &LocalOperators, i: usize) -> f64 {
        local_expectation(&self.molecules[i], &ops.on_molecule_electronic(&ops.excited))
    }

    pub fn vibrational_number(&self, ops: &LocalOperators, i: usize) -> f64 {
        local_expectation(&self.molecules[i], &ops.on_molecule_vibrational(&ops.vib.number))
    }
}

pub fn initial_state(spec: InitialStateSpec, params: &HtcParams) -> ModelResult<ProductState> {
    params.validate()?;
    spec.validate(params)?;
    let mut cavity = Array1::from_elem(params.cavity_dim(), ZERO);
    let ground = {
        let mut v = Array1::from_elem(params.molecule_dim(), ZERO);
        v[0] = ONE;
        v
    };
    let mut molecules = vec![ground; params.n_molecules];
    match spec {
        InitialStateSpec::CavityExcited => cavity[1] = ONE,
        InitialStateSpec::MoleculeExcited(i) => {
            cavity[0] = ONE;
            let m = &mut molecules[i - 1];
            m[0] = ZERO;
            m[params.n_max_vib + 1] = ONE;
        }
    }
    Ok(ProductState { cavity, molecules })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, eigvalsh, frobenius_norm, hermiticity_defect, max_abs_diff};
    use statrs::distribution::{ContinuousCDF, Normal};

    #[test]
    fn zero_disorder_gives_zero_offsets() {
        let p = HtcParams::resonant(7);
        for seed in [0, 1, 99] {
            assert_eq!(sample_disorder(&p, seed).epsilons, vec![0.0; 7]);
        }
    }

    #[test]
    fn disorder_is_deterministic_per_seed() {
        let p = HtcParams::resonant(20).with_disorder(0.5);
        assert_eq!(sample_disorder(&p, 42), sample_disorder(&p, 42));
        assert_ne!(sample_disorder(&p, 42).epsilons, sample_disorder(&p, 43).epsilons);
    }

    #[test]
    fn disorder_rescales_with_strength() {
        let a = sample_disorder(&HtcParams::resonant(10).with_disorder(0.5), 5);
        let b = sample_disorder(&HtcParams::resonant(10).with_disorder(1.0), 5);
        for (x, y) in a.epsilons.iter().zip(&b.epsilons) {
            assert!((2.0 * x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn disorder_statistics_and_normality() {
        let n = 100_000;
        let w = 0.5;
        let p = HtcParams::resonant(n).with_disorder(w);
        let eps = sample_disorder(&p, 2024).epsilons;
        let mean = eps.iter().sum::<f64>() / n as f64;
        let var = eps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!(mean.abs() < 5.0 * w / (n as f64).sqrt(), "mean {mean}");
        assert!((var / (w * w) - 1.0).abs() < 0.05, "var {var}");

        // Kolmogorov-Smirnov against N(0, W²); critical value at level 1e-3
        let mut sorted = eps.clone();
        sorted.sort_by(f64::total_cmp);
        let normal = Normal::new(0.0, w).unwrap();
        let d = sorted
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let cdf = normal.cdf(x);
                let hi = (k + 1) as f64 / n as f64 - cdf;
                let lo = cdf - k as f64 / n as f64;
                hi.max(lo)
            })
            .fold(0.0, f64::max);
        let critical = 1.9495 / (n as f64).sqrt();
        assert!(d < critical, "KS statistic {d} >= {critical}");
    }

    #[test]
    fn box_disorder_stays_in_window() {
        let mut p = HtcParams::resonant(1000).with_disorder(0.8);
        p.disorder_distribution = DisorderDistribution::Box;
        let eps = sample_disorder(&p, 3).epsilons;
        assert!(eps.iter().all(|e| e.abs() <= 0.4));
    }

    #[test]
    fn realization_seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..8).map(|k| realization_seed(7, k)).collect();
        let b: Vec<u64> = (0..8).rev().map(|k| realization_seed(7, k)).collect();
        let mut br = b.clone();
        br.reverse();
        assert_eq!(a, br);
        let mut dedup = a.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), 8);
    }

    #[test]
    fn decoupled_onsite_term_is_pure_oscillator() {
        let p = HtcParams::resonant(2).with_lambda(0.0).with_vib_cutoff(3);
        let terms = build_terms(&p, &DisorderRealization::clean(2)).unwrap();
        let expected = terms.ops.on_molecule_vibrational(&terms.ops.vib.number.mapv(|z| z * p.nu));
        for h in &terms.molecule_onsite {
            assert!(max_abs_diff(h, &expected) < 1e-15);
        }
    }

    #[test]
    fn jaynes_cummings_limit_spectrum() {
        let mut p = HtcParams::resonant(1).with_lambda(0.0).with_vib_cutoff(1);
        p.n_max_cav = 1;
        let terms = build_terms(&p, &DisorderRealization::clean(1)).unwrap();
        let h = terms.assemble_dense();
        assert_eq!(h.dim(), (8, 8));
        assert!(hermiticity_defect(&h) < 1e-15);
        let evals = eigvalsh(&h).unwrap();
        for target in [-1.0, 1.0] {
            assert!(evals.iter().any(|e| (e - target).abs() < 1e-12), "{evals:?}");
        }
    }

    #[test]
    fn hamiltonian_is_hermitian_and_conserves_excitations() {
        let mut p = HtcParams::resonant(2).with_disorder(0.5).with_vib_cutoff(2);
        p.n_max_cav = 2;
        p.detuning = 0.1;
        let r = sample_disorder(&p, 11);
        let terms = build_terms(&p, &r).unwrap();
        let h = terms.assemble_dense();
        assert!(max_abs_diff(&h, &dagger(&h)) < 1e-14);
        let nexc = terms.dense_excitation_number();
        let comm = h.dot(&nexc) - nexc.dot(&h);
        assert!(frobenius_norm(&comm) < 1e-12);
    }

    #[test]
    fn build_terms_rejects_mismatched_realization() {
        let p = HtcParams::resonant(3);
        let err = build_terms(&p, &DisorderRealization::clean(2)).unwrap_err();
        assert_eq!(err, ModelError::RealizationLength { got: 2, expected: 3 });
    }

    #[test]
    fn initial_states_carry_one_excitation() {
        let p = HtcParams::resonant(4).with_vib_cutoff(3);
        let ops = LocalOperators::new(&p).unwrap();
        let cav = initial_state(InitialStateSpec::CavityExcited, &p).unwrap();
        assert!((cav.photon_number(&ops) - 1.0).abs() < 1e-15);
        assert!((0..4).all(|i| cav.excited_population(&ops, i) == 0.0));
        let mol = initial_state(InitialStateSpec::MoleculeExcited(1), &p).unwrap();
        assert!((mol.excited_population(&ops, 0) - 1.0).abs() < 1e-15);
        assert_eq!(mol.photon_number(&ops), 0.0);
        for s in [&cav, &mol] {
            assert!((s.norm() - 1.0).abs() < 1e-15);
            assert!((0..4).all(|i| s.vibrational_number(&ops, i) == 0.0));
        }
        assert_eq!(
            initial_state(InitialStateSpec::MoleculeExcited(5), &p).unwrap_err(),
            ModelError::IndexOutOfRange { index: 5, n: 4 }
        );
        assert!(initial_state(InitialStateSpec::MoleculeExcited(0), &p).is_err());
    }

    #[test]
    fn mev_conversion_uses_collective_coupling() {
        let mut p = HtcParams::resonant(2);
        p.g_collective = 350.0;
        p.nu = 105.0;
        p.disorder_w = 175.0;
        let q = p.into_internal_units(EnergyUnits::Mev { g_c_mev: DEFAULT_G_C_MEV });
        assert!((q.g_collective - 1.0).abs() < 1e-15);
        assert!((q.nu - 0.3).abs() < 1e-15);
        assert!((q.disorder_w - 0.5).abs() < 1e-15);
    }

    #[test]
    fn derived_quantities() {
        let p = HtcParams::resonant(4);
        assert!((p.coupling_per_molecule() - 0.5).abs() < 1e-15);
        assert!((p.reorganization_energy() - 0.048).abs() < 1e-15);
        assert_eq!(p.molecule_dim(), 18);
    }
}
