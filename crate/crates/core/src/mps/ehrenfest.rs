use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use super::chain::{Mps, SiteKind, Truncation, TwoSiteGate};
use super::tebd::{coupling_gates, sweep_couplings, trace_product, trotter_schedule, MpsObservables, GRID_SLACK};
use super::{EvolutionConfig, MpsError, MpsResult, TrotterOrder};
use crate::analysis::ReducedVibrationalState;
use crate::linalg::{evolution_operator, ONE, ZERO};
use crate::model::{build_terms, initial_state, DisorderRealization, HtcParams, HtcTerms, InitialStateSpec};

/// Mean-field state: an electro-photonic chain `[cavity, el_1, …, el_N]` times
/// one vibrational wavefunction per molecule.
#[derive(Clone, Debug)]
pub struct EhrenfestState {
    pub electronic: Mps,
    pub vibrations: Vec<Array1<C64>>,
}

struct GateSet {
    tau: f64,
    right: TwoSiteGate,
    middle: TwoSiteGate,
    left: TwoSiteGate,
}

fn gate_sets(terms: &HtcTerms, order: TrotterOrder, dt: f64) -> MpsResult<Vec<GateSet>> {
    let dc = terms.params.cavity_dim();
    let (taus, _) = trotter_schedule(order, dt);
    taus.iter()
        .map(|&tau| {
            let (right, middle, left) = coupling_gates(&terms.electronic_coupling, dc, 2, tau)?;
            Ok(GateSet { tau, right, middle, left })
        })
        .collect()
}

/// Ehrenfest dynamics: the TEBD sweep with the bond between each vibration and
/// the electro-photonic system restricted to dimension one.
///
/// The electro-photonic chain is exact in the single-excitation manifold. In
/// the onsite half steps each vibration feels the force `λν⟨σ⁺σ⁻⟩` and each
/// electronic level the shift `−λν⟨b + b†⟩(t)`; both are integrated in
/// closed form since `⟨σ⁺σ⁻⟩` is constant under the onsite terms.
pub struct EhrenfestEngine {
    terms: HtcTerms,
    config: EvolutionConfig,
    gates: Vec<GateSet>,
    state: EhrenfestState,
    time: f64,
}

impl EhrenfestEngine {
    pub fn new(
        params: &HtcParams,
        realization: &DisorderRealization,
        spec: InitialStateSpec,
        config: EvolutionConfig,
    ) -> MpsResult<Self> {
        config.validate()?;
        let terms = build_terms(params, realization)?;
        let ps = initial_state(spec, params)?;
        let dv = params.n_max_vib + 1;
        let mut kinds = vec![SiteKind::Cavity];
        let mut charges = vec![(0..params.cavity_dim() as i32).collect::<Vec<_>>()];
        let mut vectors = vec![ps.cavity.clone()];
        let mut vibrations = Vec::with_capacity(params.n_molecules);
        for (i, m) in ps.molecules.iter().enumerate() {
            kinds.push(SiteKind::Molecule(i));
            charges.push(vec![0, 1]);
            let ground: f64 = (0..dv).map(|n| m[n].norm_sqr()).sum();
            let el = if ground > 0.5 { Array1::from(vec![ONE, ZERO]) } else { Array1::from(vec![ZERO, ONE]) };
            let offset = if ground > 0.5 { 0 } else { dv };
            vibrations.push(Array1::from_shape_fn(dv, |n| m[offset + n]));
            vectors.push(el);
        }
        let electronic = Mps::product(kinds, charges, &vectors)?;
        let gates = gate_sets(&terms, config.order, config.dt)?;
        Ok(Self { terms, config, gates, state: EhrenfestState { electronic, vibrations }, time: 0.0 })
    }

    pub fn state(&self) -> &EhrenfestState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    fn excited_populations(&self) -> Vec<f64> {
        let n = self.terms.n_molecules();
        let mut out = vec![0.0; n];
        for (pos, rho) in self.state.electronic.site_density_matrices().iter().enumerate() {
            if let SiteKind::Molecule(i) = self.state.electronic.kinds()[pos] {
                out[i] = rho[(1, 1)].re;
            }
        }
        out
    }

    fn mean_b(&self, i: usize) -> C64 {
        let v = &self.state.vibrations[i];
        (1..v.len()).map(|n| v[n - 1].conj() * v[n] * (n as f64).sqrt()).sum()
    }

    /// Exact mean-field flow of the onsite terms over `h`.
    fn onsite(&mut self, h: f64) -> MpsResult<()> {
        let p = &self.terms.params;
        let nu = p.nu;
        let lam = p.huang_rhys_lambda;
        let pops = self.excited_populations();
        for (i, &pe) in pops.iter().enumerate() {
            let b0 = self.mean_b(i);
            let bstar = C64::new(lam * pe, 0.0);
            // ∫₀ʰ 2 Re⟨b⟩(t) dt with ⟨b⟩(t) = b* + (b₀ − b*) e^{−iνt}
            let osc = (b0 - bstar) * (ONE - C64::from_polar(1.0, -nu * h)) / C64::new(0.0, nu);
            let integral = 2.0 * (bstar * h + osc).re;
            let phase = (self.terms.epsilons[i] + p.detuning) * h - lam * nu * integral;
            let vib_h = self.terms.vibrational_hamiltonian(pe);
            let u = evolution_operator(&vib_h, h)?;
            self.state.vibrations[i] = u.dot(&self.state.vibrations[i]);
            let pos = self.state.electronic.position_of(SiteKind::Molecule(i)).expect("molecule on chain");
            let mut diag = Array2::zeros((2, 2));
            diag[(0, 0)] = ONE;
            diag[(1, 1)] = C64::from_polar(1.0, -phase);
            self.state.electronic.apply_one_site(pos, &diag);
        }
        Ok(())
    }

    fn apply_step(&mut self, gates: &[GateSet], tau: f64) -> MpsResult<()> {
        let (_, sequence) = trotter_schedule(self.config.order, tau);
        let n = self.terms.n_molecules();
        let trunc = Truncation { chi_max: usize::MAX, svd_cutoff: self.config.svd_cutoff };
        for which in sequence {
            let g = &gates[which];
            self.onsite(g.tau / 2.0)?;
            sweep_couplings(&mut self.state.electronic, n, &g.right, &g.middle, &g.left, trunc)?;
            self.onsite(g.tau / 2.0)?;
        }
        if !self.state.electronic.is_finite() || self.state.vibrations.iter().flatten().any(|z| !z.re.is_finite()) {
            return Err(MpsError::NonFinite);
        }
        self.time += tau;
        Ok(())
    }

    pub fn step(&mut self) -> MpsResult<()> {
        let gates = std::mem::take(&mut self.gates);
        let out = self.apply_step(&gates, self.config.dt);
        self.gates = gates;
        out
    }

    /// Full steps up to `t`, then one shorter step if `t` is off the grid.
    pub fn advance_to(&mut self, t: f64) -> MpsResult<()> {
        let dt = self.config.dt;
        while self.time + dt <= t + GRID_SLACK * dt {
            self.step()?;
        }
        let rest = t - self.time;
        if rest > GRID_SLACK * dt {
            let gates = gate_sets(&self.terms, self.config.order, rest)?;
            self.apply_step(&gates, rest)?;
        }
        Ok(())
    }

    pub fn reduced_vibrational_dm(&self, i: usize) -> MpsResult<ReducedVibrationalState> {
        Ok(ReducedVibrationalState::pure(&self.state.vibrations[i])?)
    }

    /// Mean-field energy, conserved by the exact mean-field flow.
    pub fn energy(&self) -> MpsResult<f64> {
        let p = &self.terms.params;
        let pops = self.excited_populations();
        let mut e = 0.0;
        for (i, &pe) in pops.iter().enumerate() {
            let v = &self.state.vibrations[i];
            let nb: f64 = v.iter().enumerate().map(|(n, z)| n as f64 * z.norm_sqr()).sum();
            let x2 = 2.0 * self.mean_b(i).re;
            e += p.nu * nb + (self.terms.epsilons[i] + p.detuning) * pe - p.huang_rhys_lambda * p.nu * pe * x2;
        }
        let ops = &self.terms.ops;
        let mut el = self.state.electronic.clone();
        el.move_center(0)?;
        for (_, c) in el.correlations_from(0, &ops.adag, &ops.sigma_minus)? {
            e += 2.0 * p.coupling_per_molecule() * c.re;
        }
        Ok(e)
    }

    pub fn observe(&self, with_energy: bool) -> MpsResult<MpsObservables> {
        let el = &self.state.electronic;
        let cav = el.position_of(SiteKind::Cavity).expect("cavity on chain");
        let photon_number = trace_product(&self.terms.ops.photon_number, &el.site_density_matrix(cav));
        let vib_norm: f64 = self
            .state
            .vibrations
            .iter()
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .product();
        Ok(MpsObservables {
            time: self.time(),
            norm: (el.norm_sq() * vib_norm).sqrt(),
            photon_number,
            excited_populations: self.excited_populations(),
            vibrational_states: (0..self.terms.n_molecules())
                .map(|i| self.reduced_vibrational_dm(i))
                .collect::<MpsResult<Vec<_>>>()?,
            energy: if with_energy { Some(self.energy()?) } else { None },
            truncation_weight: 0.0,
            max_bond_dim: 1,
        })
    }

    pub fn run(&mut self, sample_times: &[f64], with_energy: bool) -> MpsResult<Vec<MpsObservables>> {
        let mut out = Vec::with_capacity(sample_times.len());
        for &t in sample_times {
            self.advance_to(t)?;
            out.push(self.observe(with_energy)?);
        }
        Ok(out)
    }
}
