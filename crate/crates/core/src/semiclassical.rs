//! Hybrid truncated Wigner dynamics: continuous `(x, p)` for every vibration,
//! discrete-sampled spins for every electronic level and for the cavity.
//!
//! The Weyl symbol of the Hamiltonian is
//! `H_W = Σᵢ [ν(xᵢ²+pᵢ²)/2 − √2λν xᵢ(1+s_zⁱ)/2 + (εᵢ+Δ)(1+s_zⁱ)/2] + g Σᵢ (a_x s_xⁱ + a_y s_yⁱ)/2`
//! with brackets `{x, p} = 1` and `{s_a, s_b} = 2ε_abc s_c`, so that
//! `ds/dt = 2 ∇_s H × s`.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{gaussian_state, weyl_symbols, AnalysisError, CovarianceSummary, GridSpec, ReducedVibrationalState, WignerGrid};
use crate::model::{DisorderRealization, HtcParams, InitialStateSpec, ModelError};
use crate::parallel::ordered_map;

#[derive(Debug, Error)]
pub enum SemiclassicalError {
    #[error("trajectory {trajectory} became non-finite at t = {time}")]
    NonFinite { trajectory: usize, time: f64 },

    #[error("empty trajectory ensemble")]
    EmptyEnsemble,

    #[error("invalid TWA options: {0}")]
    Options(String),

    #[error("sample index {0} out of range")]
    SampleIndex(usize),

    #[error(transparent)]
    Model(#[from] ModelError),

    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

pub type SemiclassicalResult<T> = Result<T, SemiclassicalError>;

/// Phase-space point of one trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryState {
    pub spins: Vec<[f64; 3]>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub cavity: [f64; 3],
}

/// How a density matrix is extracted from the trajectory ensemble.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FockEstimator {
    /// Ensemble mean of the Weyl symbols of `|m⟩⟨n|`, made physical.
    Raw,
    /// Moment-matched Gaussian plus the Weyl-symbol deviations that exceed
    /// three standard errors, made physical.
    #[default]
    GaussianShrinkage,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwaOptions {
    pub n_traj: usize,
    #[serde(default = "default_steps")]
    pub steps_per_period: usize,
    pub seed: u64,
    /// Trajectories per work unit; fixes the reduction order.
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    /// Histogram grid for Wigner estimates; none keeps only moments and Weyl sums.
    #[serde(default)]
    pub histogram: Option<GridSpec>,
    #[serde(default)]
    pub estimator: FockEstimator,
}

fn default_steps() -> usize {
    800
}

fn default_batch() -> usize {
    256
}

/// Histogram grid used when one is requested without further detail.
pub fn default_histogram_grid() -> GridSpec {
    GridSpec { x_min: -5.0, x_max: 5.0, nx: 81, p_min: -5.0, p_max: 5.0, np: 81 }
}

impl TwaOptions {
    pub fn new(n_traj: usize, seed: u64) -> Self {
        Self {
            n_traj,
            steps_per_period: default_steps(),
            seed,
            batch_size: default_batch(),
            histogram: None,
            estimator: FockEstimator::default(),
        }
    }

    pub fn with_histogram(mut self, grid: GridSpec) -> Self {
        self.histogram = Some(grid);
        self
    }

    pub fn validate(&self) -> SemiclassicalResult<()> {
        if self.n_traj == 0 {
            return Err(SemiclassicalError::Options("n_traj must be at least 1".into()));
        }
        if self.steps_per_period == 0 || self.batch_size == 0 {
            return Err(SemiclassicalError::Options("steps_per_period and batch_size must be positive".into()));
        }
        if let Some(g) = &self.histogram {
            if g.nx < 2 || g.np < 2 || !(g.x_max > g.x_min) || !(g.p_max > g.p_min) {
                return Err(SemiclassicalError::Options("histogram grid needs at least 2x2 points".into()));
            }
        }
        Ok(())
    }
}

/// Draws the initial phase-space point: vacuum Gaussians for the vibrations,
/// `s_z = ±1` and uniformly random `s_x, s_y ∈ {±1}` for every spin.
pub fn sample_initial<R: Rng + ?Sized>(spec: InitialStateSpec, params: &HtcParams, rng: &mut R) -> TrajectoryState {
    let n = params.n_molecules;
    let vacuum = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("positive width");
    let coin = |rng: &mut R| if rng.random::<bool>() { 1.0 } else { -1.0 };
    let excited = spec.excited_molecule();
    let cavity_z = if excited.is_none() { 1.0 } else { -1.0 };
    let cavity = [coin(rng), coin(rng), cavity_z];
    let mut spins = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    let mut p = Vec::with_capacity(n);
    for i in 0..n {
        let z = if excited == Some(i) { 1.0 } else { -1.0 };
        spins.push([coin(rng), coin(rng), z]);
        x.push(vacuum.sample(rng));
        p.push(vacuum.sample(rng));
    }
    TrajectoryState { spins, x, p, cavity }
}

/// Classical flow of the Weyl Hamiltonian for one realization.
#[derive(Clone, Debug)]
pub struct TwaFlow {
    nu: f64,
    force: f64,
    g: f64,
    onsite: Vec<f64>,
}

fn cross(u: [f64; 3], v: [f64; 3]) -> [f64; 3] {
    [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]]
}

impl TwaFlow {
    pub fn new(params: &HtcParams, realization: &DisorderRealization) -> SemiclassicalResult<Self> {
        params.validate()?;
        if realization.epsilons.len() != params.n_molecules {
            return Err(ModelError::RealizationLength { got: realization.epsilons.len(), expected: params.n_molecules }.into());
        }
        Ok(Self {
            nu: params.nu,
            force: std::f64::consts::SQRT_2 * params.huang_rhys_lambda * params.nu,
            g: params.coupling_per_molecule(),
            onsite: realization.epsilons.iter().map(|e| e + params.detuning).collect(),
        })
    }

    /// Weyl-symbol energy, dropping the constant zero-point terms.
    pub fn energy(&self, s: &TrajectoryState) -> f64 {
        let mut e = 0.0;
        for i in 0..s.x.len() {
            let pe = 0.5 * (1.0 + s.spins[i][2]);
            e += 0.5 * self.nu * (s.x[i] * s.x[i] + s.p[i] * s.p[i]) - self.force * s.x[i] * pe + self.onsite[i] * pe;
            e += 0.5 * self.g * (s.cavity[0] * s.spins[i][0] + s.cavity[1] * s.spins[i][1]);
        }
        e
    }

    fn derivative(&self, s: &TrajectoryState, out: &mut TrajectoryState) {
        let n = s.x.len();
        let mut grad_a = [0.0; 3];
        for i in 0..n {
            let pe = 0.5 * (1.0 + s.spins[i][2]);
            out.x[i] = self.nu * s.p[i];
            out.p[i] = -self.nu * s.x[i] + self.force * pe;
            let grad_s = [0.5 * self.g * s.cavity[0], 0.5 * self.g * s.cavity[1], 0.5 * (self.onsite[i] - self.force * s.x[i])];
            let c = cross(grad_s, s.spins[i]);
            out.spins[i] = [2.0 * c[0], 2.0 * c[1], 2.0 * c[2]];
            grad_a[0] += 0.5 * self.g * s.spins[i][0];
            grad_a[1] += 0.5 * self.g * s.spins[i][1];
        }
        let c = cross(grad_a, s.cavity);
        out.cavity = [2.0 * c[0], 2.0 * c[1], 2.0 * c[2]];
    }

    /// One classical RK4 step of length `h`, followed by rescaling every spin
    /// to its norm at the start of the step (the exact flow preserves it).
    pub fn rk4_step(&self, s: &mut TrajectoryState, h: f64, ws: &mut Rk4Workspace) {
        let Rk4Workspace { k, tmp } = ws;
        let norm = |v: &[f64; 3]| (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        let before: Vec<f64> = s.spins.iter().map(norm).collect();
        let cavity_before = norm(&s.cavity);
        self.derivative(s, &mut k[0]);
        combine(tmp, s, &k[0], 0.5 * h);
        self.derivative(tmp, &mut k[1]);
        combine(tmp, s, &k[1], 0.5 * h);
        self.derivative(tmp, &mut k[2]);
        combine(tmp, s, &k[2], h);
        self.derivative(tmp, &mut k[3]);
        let w = [h / 6.0, h / 3.0, h / 3.0, h / 6.0];
        for i in 0..s.x.len() {
            s.x[i] += w[0] * k[0].x[i] + w[1] * k[1].x[i] + w[2] * k[2].x[i] + w[3] * k[3].x[i];
            s.p[i] += w[0] * k[0].p[i] + w[1] * k[1].p[i] + w[2] * k[2].p[i] + w[3] * k[3].p[i];
            for a in 0..3 {
                s.spins[i][a] += w[0] * k[0].spins[i][a] + w[1] * k[1].spins[i][a] + w[2] * k[2].spins[i][a] + w[3] * k[3].spins[i][a];
            }
        }
        for a in 0..3 {
            s.cavity[a] += w[0] * k[0].cavity[a] + w[1] * k[1].cavity[a] + w[2] * k[2].cavity[a] + w[3] * k[3].cavity[a];
        }
        let rescale = |v: &mut [f64; 3], target: f64| {
            let now = norm(v);
            if now > 0.0 {
                v.iter_mut().for_each(|c| *c *= target / now);
            }
        };
        for (v, &target) in s.spins.iter_mut().zip(&before) {
            rescale(v, target);
        }
        rescale(&mut s.cavity, cavity_before);
    }
}

/// Stage buffers for [`TwaFlow::rk4_step`].
#[derive(Clone, Debug)]
pub struct Rk4Workspace {
    k: [TrajectoryState; 4],
    tmp: TrajectoryState,
}

impl Rk4Workspace {
    pub fn new(n: usize) -> Self {
        let zero = TrajectoryState { spins: vec![[0.0; 3]; n], x: vec![0.0; n], p: vec![0.0; n], cavity: [0.0; 3] };
        Self { k: [zero.clone(), zero.clone(), zero.clone(), zero.clone()], tmp: zero }
    }
}

/// `out = s + w·k`.
fn combine(out: &mut TrajectoryState, s: &TrajectoryState, k: &TrajectoryState, w: f64) {
    for i in 0..s.x.len() {
        out.x[i] = s.x[i] + w * k.x[i];
        out.p[i] = s.p[i] + w * k.p[i];
        for a in 0..3 {
            out.spins[i][a] = s.spins[i][a] + w * k.spins[i][a];
        }
    }
    for a in 0..3 {
        out.cavity[a] = s.cavity[a] + w * k.cavity[a];
    }
}

fn is_finite(s: &TrajectoryState) -> bool {
    s.x.iter().chain(&s.p).all(|v| v.is_finite())
        && s.spins.iter().flatten().all(|v| v.is_finite())
        && s.cavity.iter().all(|v| v.is_finite())
}

/// Mergeable sums over trajectories for one molecule at one time.
#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeAccumulator {
    pub count: u64,
    pub sum_x: f64,
    pub sum_p: f64,
    pub sum_xx: f64,
    pub sum_pp: f64,
    pub sum_xp: f64,
    pub sum_spin: [f64; 3],
    /// Sums of the Weyl symbols of `|m⟩⟨n|`.
    pub weyl: Array2<C64>,
    /// Sums of `|symbol|²`, for standard errors.
    pub weyl_sq: Array2<f64>,
    /// Raw counts per grid node.
    pub histogram: Option<Array2<f64>>,
}

impl MoleculeAccumulator {
    fn new(d: usize, grid: Option<&GridSpec>) -> Self {
        Self {
            count: 0,
            sum_x: 0.0,
            sum_p: 0.0,
            sum_xx: 0.0,
            sum_pp: 0.0,
            sum_xp: 0.0,
            sum_spin: [0.0; 3],
            weyl: Array2::zeros((d, d)),
            weyl_sq: Array2::zeros((d, d)),
            histogram: grid.map(|g| Array2::zeros((g.nx, g.np))),
        }
    }

    fn add(&mut self, x: f64, p: f64, spin: [f64; 3], grid: Option<&GridSpec>) {
        self.count += 1;
        self.sum_x += x;
        self.sum_p += p;
        self.sum_xx += x * x;
        self.sum_pp += p * p;
        self.sum_xp += x * p;
        for a in 0..3 {
            self.sum_spin[a] += spin[a];
        }
        let w = weyl_symbols(x, p, self.weyl.nrows());
        self.weyl += &w;
        self.weyl_sq.zip_mut_with(&w, |acc, z| *acc += z.norm_sqr());
        if let (Some(h), Some(g)) = (self.histogram.as_mut(), grid) {
            let hx = (g.x_max - g.x_min) / (g.nx - 1) as f64;
            let hp = (g.p_max - g.p_min) / (g.np - 1) as f64;
            let ix = ((x - g.x_min) / hx).round();
            let ip = ((p - g.p_min) / hp).round();
            if ix >= 0.0 && ip >= 0.0 && (ix as usize) < g.nx && (ip as usize) < g.np {
                h[(ix as usize, ip as usize)] += 1.0;
            }
        }
    }

    /// Adds `other`'s sums into `self`.
    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        self.sum_x += other.sum_x;
        self.sum_p += other.sum_p;
        self.sum_xx += other.sum_xx;
        self.sum_pp += other.sum_pp;
        self.sum_xp += other.sum_xp;
        for a in 0..3 {
            self.sum_spin[a] += other.sum_spin[a];
        }
        self.weyl += &other.weyl;
        self.weyl_sq += &other.weyl_sq;
        if let (Some(h), Some(o)) = (self.histogram.as_mut(), other.histogram.as_ref()) {
            *h += o;
        }
    }

    fn n(&self) -> f64 {
        self.count as f64
    }

    pub fn mean_x(&self) -> f64 {
        self.sum_x / self.n()
    }

    pub fn mean_p(&self) -> f64 {
        self.sum_p / self.n()
    }

    /// Symmetrized covariance of the sampled quadratures.
    pub fn covariance(&self) -> CovarianceSummary {
        let (mx, mp) = (self.mean_x(), self.mean_p());
        let vxx = self.sum_xx / self.n() - mx * mx;
        let vpp = self.sum_pp / self.n() - mp * mp;
        let vxp = self.sum_xp / self.n() - mx * mp;
        let det = vxx * vpp - vxp * vxp;
        CovarianceSummary { mean_x: mx, mean_p: mp, v: [[vxx, vxp], [vxp, vpp]], symplectic: det.max(0.0).sqrt() }
    }

    /// `(1 + ⟨s_z⟩)/2`.
    pub fn excited_population(&self) -> f64 {
        0.5 * (1.0 + self.sum_spin[2] / self.n())
    }

    /// Unprojected Weyl-symbol estimate of `ρ` and its elementwise standard error.
    pub fn raw_estimate(&self) -> (Array2<C64>, Array2<f64>) {
        let n = self.n();
        let mean = self.weyl.mapv(|z| z / n);
        let mut se = Array2::zeros(mean.dim());
        ndarray::Zip::from(&mut se).and(&mean).and(&self.weyl_sq).for_each(|s, m, sq| {
            let var = (sq / n - m.norm_sqr()).max(0.0);
            *s = (var / n).sqrt();
        });
        (mean, se)
    }

    pub fn reconstruct(&self, estimator: FockEstimator) -> SemiclassicalResult<ReducedVibrationalState> {
        if self.count == 0 {
            return Err(SemiclassicalError::EmptyEnsemble);
        }
        let (raw, se) = self.raw_estimate();
        match estimator {
            FockEstimator::Raw => Ok(ReducedVibrationalState::project_physical(&raw)?),
            FockEstimator::GaussianShrinkage => {
                let mut cov = self.covariance();
                // sampling noise can push the fit below the uncertainty bound
                if cov.symplectic < 0.5 {
                    let scale = if cov.symplectic > 0.0 { 0.5 / cov.symplectic } else { 1.0 };
                    if cov.symplectic > 0.0 {
                        for row in cov.v.iter_mut() {
                            for v in row.iter_mut() {
                                *v *= scale;
                            }
                        }
                    } else {
                        cov.v = [[0.5, 0.0], [0.0, 0.5]];
                    }
                    cov.symplectic = 0.5;
                }
                let fit = gaussian_state(&cov, raw.nrows() - 1)?;
                let mut est = fit.matrix().clone();
                ndarray::Zip::from(&mut est).and(&raw).and(&se).for_each(|e, r, s| {
                    let dev = r - *e;
                    if dev.norm() >= SIGNIFICANCE * s {
                        *e += dev;
                    }
                });
                Ok(ReducedVibrationalState::project_physical(&est)?)
            }
        }
    }

    /// Histogram normalized to unit trapezoid mass on `grid`.
    pub fn wigner_estimate(&self, grid: &GridSpec) -> Option<WignerGrid> {
        let h = self.histogram.as_ref()?;
        let mut w = WignerGrid { xs: grid.xs(), ps: grid.ps(), values: h.clone() };
        let mass = w.normalization();
        if mass > 0.0 {
            w.values.mapv_inplace(|v| v / mass);
        }
        Some(w)
    }
}

/// Deviations from the Gaussian fit are kept beyond this many standard errors.
const SIGNIFICANCE: f64 = 3.0;

/// Ensemble sums at one sample time.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleAccumulator {
    pub time: f64,
    pub count: u64,
    pub sum_cavity: [f64; 3],
    pub molecules: Vec<MoleculeAccumulator>,
    /// Largest `|H_W(t) − H_W(0)|` over trajectories.
    pub max_energy_drift: f64,
    /// Largest deviation of any `|s|²` from its initial value.
    pub max_spin_drift: f64,
}

impl SampleAccumulator {
    fn new(time: f64, n: usize, d: usize, grid: Option<&GridSpec>) -> Self {
        Self {
            time,
            count: 0,
            sum_cavity: [0.0; 3],
            molecules: (0..n).map(|_| MoleculeAccumulator::new(d, grid)).collect(),
            max_energy_drift: 0.0,
            max_spin_drift: 0.0,
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.count += other.count;
        for a in 0..3 {
            self.sum_cavity[a] += other.sum_cavity[a];
        }
        for (m, o) in self.molecules.iter_mut().zip(&other.molecules) {
            m.merge(o);
        }
        self.max_energy_drift = self.max_energy_drift.max(other.max_energy_drift);
        self.max_spin_drift = self.max_spin_drift.max(other.max_spin_drift);
    }

    /// `(1 + ⟨a_z⟩)/2`.
    pub fn photon_weight(&self) -> f64 {
        0.5 * (1.0 + self.sum_cavity[2] / self.count as f64)
    }

    /// All molecules pooled, for the site-averaged state.
    pub fn pooled(&self) -> MoleculeAccumulator {
        let mut acc = self.molecules[0].clone();
        for m in &self.molecules[1..] {
            acc.merge(m);
        }
        acc
    }
}

/// Per-time, per-molecule moments for export.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummaryRow {
    pub time: f64,
    pub molecule: usize,
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
    pub mean_sx: f64,
    pub mean_sy: f64,
    pub mean_sz: f64,
    pub photon_weight: f64,
}

/// Result of a TWA run: merged sums at each sample time.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryEnsemble {
    pub params: HtcParams,
    pub spec: InitialStateSpec,
    pub options: TwaOptions,
    pub samples: Vec<SampleAccumulator>,
}

impl TrajectoryEnsemble {
    fn sample(&self, k: usize) -> SemiclassicalResult<&SampleAccumulator> {
        self.samples.get(k).ok_or(SemiclassicalError::SampleIndex(k))
    }

    pub fn reconstruct_state(&self, k: usize, molecule: usize) -> SemiclassicalResult<ReducedVibrationalState> {
        let s = self.sample(k)?;
        let m = s.molecules.get(molecule).ok_or(ModelError::IndexOutOfRange { index: molecule, n: s.molecules.len() })?;
        m.reconstruct(self.options.estimator)
    }

    /// Estimate of the site-averaged state from all molecules pooled.
    pub fn reconstruct_average(&self, k: usize) -> SemiclassicalResult<ReducedVibrationalState> {
        self.sample(k)?.pooled().reconstruct(self.options.estimator)
    }

    pub fn wigner_estimate(&self, k: usize, molecule: usize) -> SemiclassicalResult<Option<WignerGrid>> {
        let s = self.sample(k)?;
        let m = s.molecules.get(molecule).ok_or(ModelError::IndexOutOfRange { index: molecule, n: s.molecules.len() })?;
        Ok(self.options.histogram.as_ref().and_then(|g| m.wigner_estimate(g)))
    }

    pub fn summary(&self) -> Vec<TrajectorySummaryRow> {
        let mut rows = Vec::new();
        for s in &self.samples {
            for (i, m) in s.molecules.iter().enumerate() {
                let c = m.covariance();
                let n = m.count as f64;
                rows.push(TrajectorySummaryRow {
                    time: s.time,
                    molecule: i,
                    mean_x: c.mean_x,
                    mean_p: c.mean_p,
                    var_x: c.v[0][0],
                    var_p: c.v[1][1],
                    cov_xp: c.v[0][1],
                    mean_sx: m.sum_spin[0] / n,
                    mean_sy: m.sum_spin[1] / n,
                    mean_sz: m.sum_spin[2] / n,
                    photon_weight: s.photon_weight(),
                });
            }
        }
        rows
    }
}

fn spin_norms(s: &TrajectoryState) -> impl Iterator<Item = f64> + '_ {
    s.spins.iter().chain(std::iter::once(&s.cavity)).map(|v| v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

fn run_batch(
    flow: &TwaFlow,
    params: &HtcParams,
    spec: InitialStateSpec,
    options: &TwaOptions,
    sample_times: &[f64],
    range: std::ops::Range<usize>,
) -> SemiclassicalResult<Vec<SampleAccumulator>> {
    let n = params.n_molecules;
    let d = params.n_max_vib + 1;
    let grid = options.histogram.as_ref();
    let dt = params.vibrational_period() / options.steps_per_period as f64;
    let mut acc: Vec<SampleAccumulator> = sample_times.iter().map(|&t| SampleAccumulator::new(t, n, d, grid)).collect();
    for traj in range {
        let mut rng = ChaCha20Rng::seed_from_u64(options.seed);
        rng.set_stream(traj as u64);
        let mut s = sample_initial(spec, params, &mut rng);
        let e0 = flow.energy(&s);
        let norms0: Vec<f64> = spin_norms(&s).collect();
        let mut ws = Rk4Workspace::new(n);
        let mut t = 0.0;
        for (k, &target) in sample_times.iter().enumerate() {
            while t + dt <= target + 1e-9 * dt {
                flow.rk4_step(&mut s, dt, &mut ws);
                t += dt;
            }
            if target - t > 1e-9 * dt {
                flow.rk4_step(&mut s, target - t, &mut ws);
                t = target;
            }
            if !is_finite(&s) {
                return Err(SemiclassicalError::NonFinite { trajectory: traj, time: t });
            }
            let a = &mut acc[k];
            a.count += 1;
            for c in 0..3 {
                a.sum_cavity[c] += s.cavity[c];
            }
            for i in 0..n {
                a.molecules[i].add(s.x[i], s.p[i], s.spins[i], grid);
            }
            a.max_energy_drift = a.max_energy_drift.max((flow.energy(&s) - e0).abs());
            let spin = spin_norms(&s).zip(&norms0).map(|(v, v0)| (v - v0).abs()).fold(0.0, f64::max);
            a.max_spin_drift = a.max_spin_drift.max(spin);
        }
    }
    Ok(acc)
}

/// Runs `options.n_traj` trajectories and accumulates them at `sample_times`
/// (ascending). Batches are reduced in index order, so the result is the same
/// for every worker count.
pub fn evolve_trajectories(
    params: &HtcParams,
    realization: &DisorderRealization,
    spec: InitialStateSpec,
    options: &TwaOptions,
    sample_times: &[f64],
    workers: usize,
) -> SemiclassicalResult<TrajectoryEnsemble> {
    options.validate()?;
    spec.validate(params)?;
    if sample_times.windows(2).any(|w| w[1] < w[0]) || sample_times.iter().any(|&t| !(t >= 0.0)) {
        return Err(SemiclassicalError::Options("sample times must be non-negative and ascending".into()));
    }
    let flow = TwaFlow::new(params, realization)?;
    let batches: Vec<std::ops::Range<usize>> = (0..options.n_traj)
        .step_by(options.batch_size)
        .map(|start| start..(start + options.batch_size).min(options.n_traj))
        .collect();
    let parts = ordered_map(&batches, workers, |_, r| run_batch(&flow, params, spec, options, sample_times, r.clone()));
    let mut samples: Option<Vec<SampleAccumulator>> = None;
    for part in parts {
        let part = part?;
        match samples.as_mut() {
            None => samples = Some(part),
            Some(acc) => acc.iter_mut().zip(&part).for_each(|(a, b)| a.merge(b)),
        }
    }
    Ok(TrajectoryEnsemble {
        params: params.clone(),
        spec,
        options: options.clone(),
        samples: samples.unwrap_or_default(),
    })
}
