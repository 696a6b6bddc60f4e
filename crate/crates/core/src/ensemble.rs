//! Disorder ensembles and parameter sweeps over any engine.
//!
//! Realization `k` of an ensemble keyed by `master_seed` always uses the seed
//! [`realization_seed`]`(master_seed, k)`, for every engine and every sweep
//! point. Disorder draws are `W` times a fixed unit draw, so a W sweep rescales
//! one set of draws and engines compared at a sweep point see the same
//! realizations.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{normalized_overlap, non_gaussianity, trace_overlap, AnalysisError, GridSpec, ReducedVibrationalState};
use crate::dense::{DenseEngine, DenseError, DenseOptions, DEFAULT_DIMENSION_LIMIT};
use crate::model::{realization_seed, sample_disorder, HtcParams, InitialStateSpec, ModelError};
use crate::mps::{AlarmPolicy, EhrenfestEngine, EvolutionConfig, MpsEngine, MpsError, TrotterOrder};
use crate::parallel::ordered_map;
use crate::semiclassical::{evolve_trajectories, FockEstimator, SemiclassicalError, TrajectorySummaryRow, TwaOptions};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Mps(#[from] MpsError),

    #[error(transparent)]
    Dense(#[from] DenseError),

    #[error(transparent)]
    Semiclassical(#[from] SemiclassicalError),

    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid ensemble config: {0}")]
    Config(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    #[error("realization {index} (seed {seed}) failed: {source}")]
    Realization {
        index: usize,
        seed: u64,
        #[source]
        source: EngineError,
    },

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub type EnsembleResult<T> = Result<T, EnsembleError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    Mps,
    Dense,
    Ehrenfest,
    Twa,
}

impl EngineKind {
    pub fn name(self) -> &'static str {
        match self {
            EngineKind::Mps => "mps",
            EngineKind::Dense => "dense",
            EngineKind::Ehrenfest => "ehrenfest",
            EngineKind::Twa => "twa",
        }
    }
}

impl std::str::FromStr for EngineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mps" => Ok(EngineKind::Mps),
            "dense" => Ok(EngineKind::Dense),
            "ehrenfest" => Ok(EngineKind::Ehrenfest),
            "twa" => Ok(EngineKind::Twa),
            other => Err(format!("unknown engine '{other}' (expected mps, dense, ehrenfest or twa)")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum SweepAxis {
    #[default]
    None,
    MoleculeNumber(Vec<usize>),
    DisorderStrength(Vec<f64>),
}

/// TEBD settings shared by the MPS and Ehrenfest engines.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpsSettings {
    pub chi_max: usize,
    pub steps_per_period: usize,
    pub order: TrotterOrder,
    pub svd_cutoff: f64,
    pub alarm_weight: f64,
    pub alarm_policy: AlarmPolicy,
}

impl Default for MpsSettings {
    fn default() -> Self {
        Self {
            chi_max: 64,
            steps_per_period: 400,
            order: TrotterOrder::Second,
            svd_cutoff: 1e-10,
            alarm_weight: 1e-8,
            alarm_policy: AlarmPolicy::Warn,
        }
    }
}

impl MpsSettings {
    pub fn evolution_config(&self, params: &HtcParams, t_final: f64, ehrenfest: bool) -> EvolutionConfig {
        EvolutionConfig {
            dt: params.vibrational_period() / self.steps_per_period as f64,
            t_final,
            chi_max: self.chi_max,
            svd_cutoff: self.svd_cutoff,
            ehrenfest_mode: ehrenfest,
            order: self.order,
            alarm_weight: self.alarm_weight,
            alarm_policy: self.alarm_policy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwaSettings {
    pub n_traj: usize,
    pub steps_per_period: usize,
    pub batch_size: usize,
    pub estimator: FockEstimator,
    pub histogram: Option<GridSpec>,
}

impl Default for TwaSettings {
    fn default() -> Self {
        Self { n_traj: 20_000, steps_per_period: 800, batch_size: 256, estimator: FockEstimator::default(), histogram: None }
    }
}

impl TwaSettings {
    pub fn options(&self, seed: u64) -> TwaOptions {
        TwaOptions {
            n_traj: self.n_traj,
            steps_per_period: self.steps_per_period,
            seed,
            batch_size: self.batch_size,
            histogram: self.histogram,
            estimator: self.estimator,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenseSettings {
    pub dimension_limit: usize,
}

impl Default for DenseSettings {
    fn default() -> Self {
        Self { dimension_limit: DEFAULT_DIMENSION_LIMIT }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_realizations: usize,
    pub master_seed: u64,
    pub engine: EngineKind,
    pub spec: InitialStateSpec,
    /// Ascending, in units of `1/g_c`.
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub sweep: SweepAxis,
    /// Whether a sweep with a non-MPS engine also runs MPS for the overlap rows.
    #[serde(default = "yes")]
    pub compare_with_mps: bool,
    #[serde(default)]
    pub mps: MpsSettings,
    #[serde(default)]
    pub twa: TwaSettings,
    #[serde(default)]
    pub dense: DenseSettings,
}

fn yes() -> bool {
    true
}

impl EnsembleConfig {
    pub fn new(engine: EngineKind, spec: InitialStateSpec, n_realizations: usize, sample_times: Vec<f64>) -> Self {
        Self {
            n_realizations,
            master_seed: 0,
            engine,
            spec,
            sample_times,
            sweep: SweepAxis::None,
            compare_with_mps: true,
            mps: MpsSettings::default(),
            twa: TwaSettings::default(),
            dense: DenseSettings::default(),
        }
    }

    pub fn with_seed(mut self, master_seed: u64) -> Self {
        self.master_seed = master_seed;
        self
    }

    pub fn validate(&self) -> EnsembleResult<()> {
        let bad = |m: &str| Err(EnsembleError::Config(m.into()));
        if self.n_realizations == 0 {
            return bad("n_realizations must be at least 1");
        }
        if self.sample_times.is_empty() {
            return bad("sample_times must not be empty");
        }
        if self.sample_times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || self.sample_times.windows(2).any(|w| w[1] < w[0]) {
            return bad("sample_times must be finite, non-negative and ascending");
        }
        match &self.sweep {
            SweepAxis::None => {}
            SweepAxis::MoleculeNumber(ns) if ns.is_empty() || ns.contains(&0) => {
                return bad("molecule_number sweep needs a non-empty list of positive N");
            }
            SweepAxis::DisorderStrength(ws) if ws.is_empty() || ws.iter().any(|w| !(w.is_finite() && *w >= 0.0)) => {
                return bad("disorder_strength sweep needs a non-empty list of W >= 0");
            }
            _ => {}
        }
        if self.mps.chi_max == 0 || self.mps.steps_per_period == 0 {
            return bad("mps.chi_max and mps.steps_per_period must be positive");
        }
        if self.twa.n_traj == 0 || self.twa.steps_per_period == 0 || self.twa.batch_size == 0 {
            return bad("twa.n_traj, twa.steps_per_period and twa.batch_size must be positive");
        }
        Ok(())
    }

    pub fn t_final(&self) -> f64 {
        self.sample_times.last().copied().unwrap_or(0.0)
    }
}

/// Upper bound on the tensor memory of one MPS realization.
pub const MPS_MEMORY_LIMIT_BYTES: f64 = 4.0 * (1u64 << 30) as f64;

/// Refuses runs that cannot fit: the dense engine beyond its dimension limit,
/// or an MPS whose full-bond tensors would exceed [`MPS_MEMORY_LIMIT_BYTES`].
pub fn check_resources(engine: EngineKind, params: &HtcParams, config: &EnsembleConfig) -> EnsembleResult<()> {
    if engine == EngineKind::Mps {
        let chi = config.mps.chi_max as f64;
        // tensors plus a two-site workspace, complex f64
        let bytes = 16.0 * chi * chi * params.molecule_dim() as f64 * (params.n_molecules as f64 + 1.0 + 2.0 * params.molecule_dim() as f64);
        if bytes > MPS_MEMORY_LIMIT_BYTES {
            return Err(EnsembleError::ResourceLimit(format!(
                "MPS with chi_max = {} and N = {} needs about {:.1} GiB",
                config.mps.chi_max,
                params.n_molecules,
                bytes / (1u64 << 30) as f64
            )));
        }
    }
    if engine == EngineKind::Dense {
        let dv = (params.n_max_vib + 1) as f64;
        let dim = (params.n_molecules + 1) as f64 * dv.powi(params.n_molecules as i32);
        if dim > config.dense.dimension_limit as f64 {
            return Err(EnsembleError::ResourceLimit(format!(
                "dense dimension {dim:.3e} for N = {} exceeds the limit {}",
                params.n_molecules, config.dense.dimension_limit
            )));
        }
    }
    Ok(())
}

/// States and diagnostics of one realization at every sample time.
#[derive(Clone, Debug)]
pub struct RealizationOutcome {
    pub index: usize,
    pub seed: u64,
    /// `ρ₁^(k)(t)` for the initially excited molecule.
    pub excited: Option<Vec<ReducedVibrationalState>>,
    /// `(1/N) Σᵢ ρᵢ^(k)(t)`.
    pub average: Vec<ReducedVibrationalState>,
    pub photon_number: Vec<f64>,
    pub norm: Vec<f64>,
    /// Accumulated discarded weight (MPS only).
    pub truncation_weight: f64,
    pub max_bond_dim: usize,
    /// Steps whose discarded weight exceeded the alarm threshold (MPS only).
    pub truncation_alarms: usize,
    /// Largest per-trajectory energy drift (TWA only).
    pub energy_drift: Option<f64>,
    /// Trajectory moments per time and molecule (TWA only).
    pub twa_summary: Option<Vec<TrajectorySummaryRow>>,
}

impl RealizationOutcome {
    /// `δ[ρ₁^(k)]` per sample time.
    pub fn excited_deltas(&self) -> AnalysisResultVec {
        self.excited.as_ref().map(|s| s.iter().map(non_gaussianity).collect()).transpose()
    }
}

type AnalysisResultVec = Result<Option<Vec<f64>>, AnalysisError>;

/// Convex combination `Σ_k w_k ρ_k`, summed in index order.
pub fn aggregate(states: &[ReducedVibrationalState], weights: &[f64]) -> EnsembleResult<ReducedVibrationalState> {
    if states.is_empty() || states.len() != weights.len() {
        return Err(AnalysisError::ShapeMismatch(format!("{} states, {} weights", states.len(), weights.len())).into());
    }
    let d = states[0].dim();
    if let Some(s) = states.iter().find(|s| s.dim() != d) {
        return Err(AnalysisError::ShapeMismatch(format!("dimension {} vs {d}", s.dim())).into());
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
        return Err(EnsembleError::Config(format!("weights must be non-negative and sum to 1, got {total}")));
    }
    let mut acc = Array2::<C64>::zeros((d, d));
    for (s, &w) in states.iter().zip(weights) {
        acc.scaled_add(C64::new(w, 0.0), s.matrix());
    }
    Ok(ReducedVibrationalState::new(acc)?)
}

/// Equal-weight mean of same-shaped states, in index order.
fn mean_state(states: &[ReducedVibrationalState]) -> Result<ReducedVibrationalState, AnalysisError> {
    let d = states[0].dim();
    let w = C64::new(1.0 / states.len() as f64, 0.0);
    let mut acc = Array2::<C64>::zeros((d, d));
    for s in states {
        acc.scaled_add(w, s.matrix());
    }
    ReducedVibrationalState::new(acc)
}

fn uniform_mean(states: &[ReducedVibrationalState]) -> EnsembleResult<ReducedVibrationalState> {
    Ok(mean_state(states)?)
}

fn run_realization(
    engine: EngineKind,
    params: &HtcParams,
    config: &EnsembleConfig,
    index: usize,
    seed: u64,
    inner_workers: usize,
) -> Result<RealizationOutcome, EngineError> {
    let realization = sample_disorder(params, seed);
    let times = &config.sample_times;
    let excited = config.spec.excited_molecule();
    let n = params.n_molecules;
    let mut out = RealizationOutcome {
        index,
        seed,
        excited: excited.map(|_| Vec::with_capacity(times.len())),
        average: Vec::with_capacity(times.len()),
        photon_number: Vec::with_capacity(times.len()),
        norm: Vec::with_capacity(times.len()),
        truncation_weight: 0.0,
        max_bond_dim: 1,
        truncation_alarms: 0,
        energy_drift: None,
        twa_summary: None,
    };
    let push = |out: &mut RealizationOutcome, states: Vec<ReducedVibrationalState>, photons: f64, norm: f64| {
        if let (Some(i), Some(ex)) = (excited, out.excited.as_mut()) {
            ex.push(states[i].clone());
        }
        out.average.push(mean_state(&states)?);
        out.photon_number.push(photons);
        out.norm.push(norm);
        Ok::<_, EngineError>(())
    };
    match engine {
        EngineKind::Mps | EngineKind::Ehrenfest => {
            let ehrenfest = engine == EngineKind::Ehrenfest;
            let evo = config.mps.evolution_config(params, config.t_final(), ehrenfest);
            let observations = if ehrenfest {
                EhrenfestEngine::new(params, &realization, config.spec, evo)?.run(times, false)?
            } else {
                let mut mps = MpsEngine::new(params, &realization, config.spec, evo)?;
                let obs = mps.run(times, false)?;
                out.truncation_alarms = mps.alarm_count();
                obs
            };
            for o in observations {
                out.truncation_weight = out.truncation_weight.max(o.truncation_weight);
                out.max_bond_dim = out.max_bond_dim.max(o.max_bond_dim);
                push(&mut out, o.vibrational_states, o.photon_number, o.norm)?;
            }
        }
        EngineKind::Dense => {
            let options = DenseOptions { dimension_limit: config.dense.dimension_limit, ..DenseOptions::default() };
            let dense = DenseEngine::new(params, &realization, options)?;
            let psi0 = dense.initial_state(config.spec)?;
            for s in dense.evolve(&psi0, times)? {
                let states = (0..n).map(|i| dense.reduced_vibrational_dm(&s, i)).collect::<Result<Vec<_>, _>>()?;
                push(&mut out, states, dense.photon_number(&s), s.norm())?;
            }
        }
        EngineKind::Twa => {
            let options = config.twa.options(seed);
            let ens = evolve_trajectories(params, &realization, config.spec, &options, times, inner_workers)?;
            let mut drift: f64 = 0.0;
            for (k, s) in ens.samples.iter().enumerate() {
                drift = drift.max(s.max_energy_drift);
                if let (Some(i), Some(ex)) = (excited, out.excited.as_mut()) {
                    ex.push(ens.reconstruct_state(k, i)?);
                }
                out.average.push(ens.reconstruct_average(k)?);
                out.photon_number.push(s.photon_weight());
                out.norm.push(1.0);
            }
            out.energy_drift = Some(drift);
            out.twa_summary = Some(ens.summary());
        }
    }
    Ok(out)
}

/// Disorder-averaged states of one ensemble run.
#[derive(Clone, Debug)]
pub struct EnsembleRun {
    pub engine: EngineKind,
    pub params: HtcParams,
    pub master_seed: u64,
    pub times: Vec<f64>,
    pub realizations: Vec<RealizationOutcome>,
    /// `ξ₁(t)` when a molecule was excited initially.
    pub xi_excited: Option<Vec<ReducedVibrationalState>>,
    pub xi_avg: Vec<ReducedVibrationalState>,
}

/// δ diagnostics at one sample time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub time: f64,
    pub delta_xi1: Option<f64>,
    pub delta_xi_avg: f64,
    /// Mean and standard deviation of `δ[ρ₁^(k)]` over realizations.
    pub scatter_mean: Option<f64>,
    pub scatter_std: Option<f64>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

impl EnsembleRun {
    /// `δ[ρ₁^(k)](t_j)` indexed `[k][j]`.
    pub fn realization_deltas(&self) -> EnsembleResult<Option<Vec<Vec<f64>>>> {
        if self.xi_excited.is_none() {
            return Ok(None);
        }
        let rows = self
            .realizations
            .iter()
            .map(|r| r.excited_deltas().map(|d| d.unwrap_or_default()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Some(rows))
    }

    pub fn delta_rows(&self) -> EnsembleResult<Vec<DeltaRow>> {
        let per = self.realization_deltas()?;
        let mut rows = Vec::with_capacity(self.times.len());
        for (j, &time) in self.times.iter().enumerate() {
            let delta_xi1 = self.xi_excited.as_ref().map(|x| non_gaussianity(&x[j])).transpose()?;
            let scatter = per.as_ref().map(|p| mean_std(&p.iter().map(|row| row[j]).collect::<Vec<_>>()));
            rows.push(DeltaRow {
                time,
                delta_xi1,
                delta_xi_avg: non_gaussianity(&self.xi_avg[j])?,
                scatter_mean: scatter.map(|s| s.0),
                scatter_std: scatter.map(|s| s.1),
            });
        }
        Ok(rows)
    }
}

/// Runs `config.n_realizations` realizations of `engine` (ignoring the sweep
/// axis) and averages their reduced states in realization order.
pub fn run_ensemble_with(
    engine: EngineKind,
    config: &EnsembleConfig,
    params: &HtcParams,
    workers: usize,
) -> EnsembleResult<EnsembleRun> {
    config.validate()?;
    params.validate()?;
    config.spec.validate(params)?;
    check_resources(engine, params, config)?;
    let seeds: Vec<(usize, u64)> =
        (0..config.n_realizations).map(|k| (k, realization_seed(config.master_seed, k as u64))).collect();
    let inner = if config.n_realizations == 1 { workers } else { 1 };
    let outcomes = ordered_map(&seeds, workers, |_, &(k, seed)| {
        run_realization(engine, params, config, k, seed, inner).map_err(|source| EnsembleError::Realization { index: k, seed, source })
    });
    let realizations = outcomes.into_iter().collect::<EnsembleResult<Vec<_>>>()?;
    let n_times = config.sample_times.len();
    let xi_avg = (0..n_times)
        .map(|j| uniform_mean(&realizations.iter().map(|r| r.average[j].clone()).collect::<Vec<_>>()))
        .collect::<EnsembleResult<Vec<_>>>()?;
    let xi_excited = match config.spec.excited_molecule() {
        None => None,
        Some(_) => Some(
            (0..n_times)
                .map(|j| {
                    let states: Vec<_> =
                        realizations.iter().map(|r| r.excited.as_ref().expect("molecule excited")[j].clone()).collect();
                    uniform_mean(&states)
                })
                .collect::<EnsembleResult<Vec<_>>>()?,
        ),
    };
    Ok(EnsembleRun {
        engine,
        params: params.clone(),
        master_seed: config.master_seed,
        times: config.sample_times.clone(),
        realizations,
        xi_excited,
        xi_avg,
    })
}

pub fn run_ensemble(config: &EnsembleConfig, params: &HtcParams, workers: usize) -> EnsembleResult<EnsembleRun> {
    run_ensemble_with(config.engine, config, params, workers)
}

/// End-time observables at one sweep point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_molecules: usize,
    pub disorder_w: f64,
    pub time: f64,
    pub delta_xi1: Option<f64>,
    pub delta_xi_avg: f64,
    pub scatter_mean: Option<f64>,
    pub scatter_std: Option<f64>,
    /// `1 − O₁` against MPS, with `O` the purity-normalized overlap.
    pub infidelity_1: Option<f64>,
    pub infidelity_avg: Option<f64>,
    /// Unnormalized `tr(ξ^MPS ξ^engine)` for the same pairs.
    pub hs_overlap_1: Option<f64>,
    pub hs_overlap_avg: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub params: HtcParams,
    pub run: EnsembleRun,
    pub reference: Option<EnsembleRun>,
    pub row: SweepRow,
}

/// Parameter sets of the sweep, in the order given.
pub fn sweep_params(config: &EnsembleConfig, params: &HtcParams) -> Vec<HtcParams> {
    match &config.sweep {
        SweepAxis::None => vec![params.clone()],
        SweepAxis::MoleculeNumber(ns) => ns.iter().map(|&n| params.clone().with_molecules(n)).collect(),
        SweepAxis::DisorderStrength(ws) => ws.iter().map(|&w| params.clone().with_disorder(w)).collect(),
    }
}

/// Runs every sweep point and reports end-time observables. For a non-MPS
/// engine with `compare_with_mps`, MPS runs on the same realization seeds and
/// the overlap columns compare the two.
pub fn sweep(config: &EnsembleConfig, params: &HtcParams, workers: usize) -> EnsembleResult<Vec<SweepPoint>> {
    config.validate()?;
    let mut points = Vec::new();
    for p in sweep_params(config, params) {
        let run = run_ensemble_with(config.engine, config, &p, workers)?;
        let reference = if config.engine != EngineKind::Mps && config.compare_with_mps {
            Some(run_ensemble_with(EngineKind::Mps, config, &p, workers)?)
        } else {
            None
        };
        let last = run.times.len() - 1;
        let deltas = run.delta_rows()?.pop().expect("at least one sample");
        let pair = |a: Option<&ReducedVibrationalState>, b: Option<&ReducedVibrationalState>| -> EnsembleResult<(Option<f64>, Option<f64>)> {
            match (a, b) {
                (Some(a), Some(b)) => Ok((Some(1.0 - normalized_overlap(a, b)?), Some(trace_overlap(a, b)?))),
                _ => Ok((None, None)),
            }
        };
        let ref_excited = reference.as_ref().and_then(|r| r.xi_excited.as_ref().map(|x| &x[last]));
        let (inf1, hs1) = pair(ref_excited, run.xi_excited.as_ref().map(|x| &x[last]))?;
        let (infa, hsa) = pair(reference.as_ref().map(|r| &r.xi_avg[last]), Some(&run.xi_avg[last]))?;
        let row = SweepRow {
            n_molecules: p.n_molecules,
            disorder_w: p.disorder_w,
            time: run.times[last],
            delta_xi1: deltas.delta_xi1,
            delta_xi_avg: deltas.delta_xi_avg,
            scatter_mean: deltas.scatter_mean,
            scatter_std: deltas.scatter_std,
            infidelity_1: inf1,
            infidelity_avg: infa,
            hs_overlap_1: hs1,
            hs_overlap_avg: hsa,
        };
        points.push(SweepPoint { params: p, run, reference, row });
    }
    Ok(points)
}
