use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::chain::{Mps, SiteKind, Sweep, Truncation, TwoSiteGate};
use super::{AlarmPolicy, EvolutionConfig, MpsError, MpsResult, TrotterOrder};
use crate::analysis::ReducedVibrationalState;
use crate::linalg::{evolution_operator, ZERO};
use crate::model::{build_terms, initial_state, DisorderRealization, HtcParams, HtcTerms, InitialStateSpec};

/// Sub-step lengths and the sequence in which they are applied.
pub(crate) fn trotter_schedule(order: TrotterOrder, dt: f64) -> (Vec<f64>, Vec<usize>) {
    match order {
        TrotterOrder::Second => (vec![dt], vec![0]),
        TrotterOrder::Fourth => {
            let p = suzuki_p();
            (vec![p * dt, (1.0 - 4.0 * p) * dt], vec![0, 0, 1, 0, 0])
        }
    }
}

/// Suzuki weight `p = 1/(4 − 4^{1/3})` of the fourth-order composition.
fn suzuki_p() -> f64 {
    1.0 / (4.0 - 4f64.powf(1.0 / 3.0))
}

/// Product state `[cavity, molecule_1, …, molecule_N]` with the initial excitation.
pub fn initial_mps(params: &HtcParams, spec: InitialStateSpec) -> MpsResult<Mps> {
    let ps = initial_state(spec, params)?;
    let dv = params.n_max_vib + 1;
    let mut kinds = vec![SiteKind::Cavity];
    let mut charges = vec![(0..params.cavity_dim() as i32).collect::<Vec<_>>()];
    let mut vectors: Vec<Array1<C64>> = vec![ps.cavity.clone()];
    for (i, v) in ps.molecules.iter().enumerate() {
        kinds.push(SiteKind::Molecule(i));
        charges.push((0..params.molecule_dim()).map(|s| (s / dv) as i32).collect());
        vectors.push(v.clone());
    }
    Mps::product(kinds, charges, &vectors)
}

/// Permutes a two-site operator on `(d1, d2)` to act on `(d2, d1)`.
fn exchange_factors(u: &Array2<C64>, d1: usize, d2: usize) -> Array2<C64> {
    Array2::from_shape_fn((d1 * d2, d1 * d2), |(r, c)| {
        let (r2, r1) = (r / d1, r % d1);
        let (c2, c1) = (c / d1, c % d1);
        u[(r1 * d2 + r2, c1 * d2 + c2)]
    })
}

struct GateSet {
    onsite_half: Vec<Array2<C64>>,
    right: TwoSiteGate,
    middle: TwoSiteGate,
    left: TwoSiteGate,
}

impl GateSet {
    fn new(terms: &HtcTerms, tau: f64) -> MpsResult<Self> {
        let dc = terms.params.cavity_dim();
        let dm = terms.params.molecule_dim();
        let onsite_half = terms
            .molecule_onsite
            .iter()
            .map(|h| evolution_operator(h, tau / 2.0))
            .collect::<Result<Vec<_>, _>>()?;
        // the cavity coupling is identical for every molecule
        let (right, middle, left) = coupling_gates(&terms.coupling[0], dc, dm, tau)?;
        Ok(Self { onsite_half, right, middle, left })
    }
}

/// Tolerance, in units of `dt`, for treating a target time as on the step grid.
pub(crate) const GRID_SLACK: f64 = 1e-9;

fn apply_onsite(state: &mut Mps, onsite_half: &[Array2<C64>]) {
    for pos in 0..state.len() {
        if let SiteKind::Molecule(i) = state.kinds()[pos] {
            state.apply_one_site(pos, &onsite_half[i]);
        }
    }
}

/// Discarded weight of one full time step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub discarded_weight: f64,
    pub max_bond_dim: usize,
}

/// Observables of the tensor-network state at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct MpsObservables {
    pub time: f64,
    pub norm: f64,
    pub photon_number: f64,
    pub excited_populations: Vec<f64>,
    pub vibrational_states: Vec<ReducedVibrationalState>,
    pub energy: Option<f64>,
    pub truncation_weight: f64,
    pub max_bond_dim: usize,
}

impl MpsObservables {
    pub fn excitation_number(&self) -> f64 {
        self.photon_number + self.excited_populations.iter().sum::<f64>()
    }
}

/// TEBD propagator for one disorder realization.
///
/// One second-order step is
/// `onsite(τ/2) · [SWAP·e^{−iτV/2}]_{1..N−1} · e^{−iτV_N} · [SWAP·e^{−iτV/2}]_{N−1..1} · onsite(τ/2)`:
/// the cavity starts at the left end, is swapped to the right applying every
/// coupling on the way, and is swapped back.
pub struct MpsEngine {
    terms: HtcTerms,
    config: EvolutionConfig,
    gates: Vec<GateSet>,
    state: Mps,
    steps: usize,
    time: f64,
    truncation_weight: f64,
    max_step_weight: f64,
    alarms: usize,
}

impl MpsEngine {
    pub fn new(
        params: &HtcParams,
        realization: &DisorderRealization,
        spec: InitialStateSpec,
        config: EvolutionConfig,
    ) -> MpsResult<Self> {
        let terms = build_terms(params, realization)?;
        let state = initial_mps(params, spec)?;
        Self::from_state(terms, state, config)
    }

    pub fn from_state(terms: HtcTerms, state: Mps, config: EvolutionConfig) -> MpsResult<Self> {
        config.validate()?;
        if state.len() != terms.n_molecules() + 1 || state.kinds()[0] != SiteKind::Cavity {
            return Err(MpsError::Shape("state must be [cavity, molecules...] at rest".into()));
        }
        let (taus, _) = trotter_schedule(config.order, config.dt);
        let gates = taus.iter().map(|&t| GateSet::new(&terms, t)).collect::<MpsResult<Vec<_>>>()?;
        Ok(Self { terms, config, gates, state, steps: 0, time: 0.0, truncation_weight: 0.0, max_step_weight: 0.0, alarms: 0 })
    }

    /// Continues from a saved state at `time` after `steps` steps.
    pub fn resume(
        terms: HtcTerms,
        state: Mps,
        config: EvolutionConfig,
        time: f64,
        steps: usize,
        truncation_weight: f64,
    ) -> MpsResult<Self> {
        let mut engine = Self::from_state(terms, state, config)?;
        engine.time = time;
        engine.steps = steps;
        engine.truncation_weight = truncation_weight;
        Ok(engine)
    }

    pub fn state(&self) -> &Mps {
        &self.state
    }

    pub fn terms(&self) -> &HtcTerms {
        &self.terms
    }

    pub fn config(&self) -> &EvolutionConfig {
        &self.config
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Accumulated discarded weight.
    pub fn truncation_weight(&self) -> f64 {
        self.truncation_weight
    }

    pub fn max_step_weight(&self) -> f64 {
        self.max_step_weight
    }

    /// Steps whose discarded weight exceeded the alarm threshold.
    pub fn alarm_count(&self) -> usize {
        self.alarms
    }

    fn apply_step(&mut self, gates: &[GateSet], tau: f64) -> MpsResult<StepReport> {
        let (_, sequence) = trotter_schedule(self.config.order, tau);
        let trunc = self.config.truncation();
        let n = self.terms.n_molecules();
        let mut discarded = 0.0;
        for which in sequence {
            let g = &gates[which];
            apply_onsite(&mut self.state, &g.onsite_half);
            discarded += sweep_couplings(&mut self.state, n, &g.right, &g.middle, &g.left, trunc)?;
            apply_onsite(&mut self.state, &g.onsite_half);
        }
        if !self.state.is_finite() {
            return Err(MpsError::NonFinite);
        }
        self.steps += 1;
        self.time += tau;
        self.truncation_weight += discarded;
        self.max_step_weight = self.max_step_weight.max(discarded);
        if discarded > self.config.alarm_weight {
            self.alarms += 1;
            if self.config.alarm_policy == AlarmPolicy::Abort {
                return Err(MpsError::TruncationAlarm { weight: discarded, threshold: self.config.alarm_weight });
            }
        }
        Ok(StepReport { discarded_weight: discarded, max_bond_dim: self.state.max_bond_dim() })
    }

    /// One time step of length `dt`.
    pub fn step(&mut self) -> MpsResult<StepReport> {
        let gates = std::mem::take(&mut self.gates);
        let report = self.apply_step(&gates, self.config.dt);
        self.gates = gates;
        report
    }

    /// Full steps up to `t`, then one shorter step if `t` is off the grid.
    pub fn advance_to(&mut self, t: f64) -> MpsResult<()> {
        let dt = self.config.dt;
        while self.time + dt <= t + GRID_SLACK * dt {
            self.step()?;
        }
        let rest = t - self.time;
        if rest > GRID_SLACK * dt {
            let (taus, _) = trotter_schedule(self.config.order, rest);
            let gates = taus.iter().map(|&tau| GateSet::new(&self.terms, tau)).collect::<MpsResult<Vec<_>>>()?;
            self.apply_step(&gates, rest)?;
        }
        Ok(())
    }

    /// Observables at each sample time.
    pub fn run(&mut self, sample_times: &[f64], with_energy: bool) -> MpsResult<Vec<MpsObservables>> {
        let mut out = Vec::with_capacity(sample_times.len());
        for &t in sample_times {
            self.advance_to(t)?;
            out.push(self.observe(with_energy)?);
        }
        Ok(out)
    }

    fn vib_from_site(&self, rho: &Array2<C64>) -> MpsResult<ReducedVibrationalState> {
        let dv = self.terms.params.n_max_vib + 1;
        let vib = Array2::from_shape_fn((dv, dv), |(n, m)| rho[(n, m)] + rho[(dv + n, dv + m)]);
        Ok(ReducedVibrationalState::new(vib)?)
    }

    /// Reduced vibrational state of molecule `i` (0-based).
    pub fn reduced_vibrational_dm(&self, i: usize) -> MpsResult<ReducedVibrationalState> {
        let pos = self
            .state
            .position_of(SiteKind::Molecule(i))
            .ok_or_else(|| MpsError::Shape(format!("no molecule {i}")))?;
        self.vib_from_site(&self.state.site_density_matrix(pos))
    }

    /// `⟨H⟩`; the cavity must be at the left end, which holds between steps.
    pub fn energy(&self) -> MpsResult<f64> {
        let ops = &self.terms.ops;
        let rdms = self.state.site_density_matrices();
        let mut e = 0.0;
        for (pos, rho) in rdms.iter().enumerate() {
            if let SiteKind::Molecule(i) = self.state.kinds()[pos] {
                e += trace_product(&self.terms.molecule_onsite[i], rho);
            }
        }
        let g = self.terms.params.coupling_per_molecule();
        let sm = ops.on_molecule_electronic(&ops.sigma_minus);
        let mut state = self.state.clone();
        state.move_center(0)?;
        for (_, c) in state.correlations_from(0, &ops.adag, &sm)? {
            e += 2.0 * g * c.re;
        }
        Ok(e)
    }

    pub fn observe(&self, with_energy: bool) -> MpsResult<MpsObservables> {
        let rdms = self.state.site_density_matrices();
        let ops = &self.terms.ops;
        let n = self.terms.n_molecules();
        let exc = ops.on_molecule_electronic(&ops.excited);
        let mut photon_number = 0.0;
        let mut excited = vec![0.0; n];
        let mut vib: Vec<Option<ReducedVibrationalState>> = vec![None; n];
        for (pos, rho) in rdms.iter().enumerate() {
            match self.state.kinds()[pos] {
                SiteKind::Cavity => photon_number = trace_product(&ops.photon_number, rho),
                SiteKind::Molecule(i) => {
                    excited[i] = trace_product(&exc, rho);
                    vib[i] = Some(self.vib_from_site(rho)?);
                }
            }
        }
        Ok(MpsObservables {
            time: self.time(),
            norm: self.state.norm_sq().sqrt(),
            photon_number,
            excited_populations: excited,
            vibrational_states: vib.into_iter().map(|v| v.expect("every molecule is on the chain")).collect(),
            energy: if with_energy { Some(self.energy()?) } else { None },
            truncation_weight: self.truncation_weight,
            max_bond_dim: self.state.max_bond_dim(),
        })
    }
}

/// Swaps the cavity from the left end to the right and back, applying every
/// cavity-molecule gate on the way. Returns the summed discarded weight.
pub(crate) fn sweep_couplings(
    state: &mut Mps,
    n: usize,
    right: &TwoSiteGate,
    middle: &TwoSiteGate,
    left: &TwoSiteGate,
    trunc: Truncation,
) -> MpsResult<f64> {
    let mut discarded = 0.0;
    for pos in 0..n - 1 {
        discarded += state.apply_two_site(pos, right, Sweep::Right, trunc)?;
    }
    discarded += state.apply_two_site(n - 1, middle, Sweep::Left, trunc)?;
    for pos in (0..n - 1).rev() {
        discarded += state.apply_two_site(pos, left, Sweep::Left, trunc)?;
    }
    Ok(discarded)
}

/// Gates `(right, middle, left)` for a cavity-molecule coupling `v` on
/// `(dc, dm)` and sub-step `tau`.
pub(crate) fn coupling_gates(v: &Array2<C64>, dc: usize, dm: usize, tau: f64) -> MpsResult<(TwoSiteGate, TwoSiteGate, TwoSiteGate)> {
    let half = evolution_operator(v, tau / 2.0)?;
    let full = evolution_operator(v, tau)?;
    Ok((
        TwoSiteGate::new(&half, dc, dm, true),
        TwoSiteGate::new(&full, dc, dm, false),
        TwoSiteGate::new(&exchange_factors(&half, dc, dm), dm, dc, true),
    ))
}

/// `tr(O ρ)` for Hermitian operands.
pub(crate) fn trace_product(op: &Array2<C64>, rho: &Array2<C64>) -> f64 {
    let d = op.nrows();
    let mut acc = ZERO;
    for s in 0..d {
        for t in 0..d {
            acc += op[(s, t)] * rho[(t, s)];
        }
    }
    acc.re
}

/// Snapshots of the state at the requested times. Memory grows with the number
/// of samples; [`MpsEngine::run`] keeps only observables.
pub fn evolve_tebd(
    state: Mps,
    terms: &HtcTerms,
    config: &EvolutionConfig,
    sample_times: &[f64],
) -> MpsResult<Vec<(f64, Mps)>> {
    let mut engine = MpsEngine::from_state(terms.clone(), state, config.clone())?;
    let mut out = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        engine.advance_to(t)?;
        out.push((engine.time(), engine.state.clone()));
    }
    Ok(out)
}
