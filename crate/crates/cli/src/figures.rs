//! Figure-data exporters. Each figure reads a finished run directory and writes
//! plain CSV tables to `<run>/figures/<figure>/` with a manifest of its own.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::ValueEnum;
use htc_core::analysis::{
    fidelity, non_gaussianity, spectrum_and_heatmap, thermal_reference, wigner, ThermalReference,
};
use htc_core::{InitialStateSpec, ReducedVibrationalState};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::commands::{
    DeltaCsvRow, RealizationCsvRow, SweepCsvRow, CONFIG_COPY, DELTA_CSV, REALIZATIONS_CSV, STATES, SWEEP_CSV,
};
use crate::config::RunConfig;
use crate::io::{read_csv, read_manifest, read_matrices, OutputSet, RunManifest, MANIFEST_VERSION};
use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[value(rename_all = "snake_case")]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// Wigner maps of ξ₁ (or ξ_avg) at the first, middle and last sample.
    WignerMap,
    /// δ[ξ₁], δ[ξ_avg] and realization scatter against time.
    DeltaVsTime,
    /// End-time δ against the sweep axis.
    Scaling,
    /// Fidelity, spectra and coherences against the thermal reference.
    ThermalCompare,
    /// Infidelity against the MPS reference over the sweep axis.
    OverlapScaling,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::WignerMap => "wigner_map",
            Figure::DeltaVsTime => "delta_vs_time",
            Figure::Scaling => "scaling",
            Figure::ThermalCompare => "thermal_compare",
            Figure::OverlapScaling => "overlap_scaling",
        }
    }

    fn needs(self) -> &'static str {
        match self {
            Figure::Scaling | Figure::OverlapScaling => "sweep",
            _ => "simulate",
        }
    }
}

pub fn default_figure_dir(run: &Path, figure: Figure) -> PathBuf {
    run.join("figures").join(figure.name())
}

fn missing(m: impl Into<String>) -> CliError {
    CliError::Missing(m.into())
}

fn analysis(e: htc_core::analysis::AnalysisError) -> CliError {
    CliError::Missing(format!("stored state is unusable: {e}"))
}

/// States keyed by name, in time order.
fn load_states(run: &Path) -> Result<Vec<(String, f64, ReducedVibrationalState)>, CliError> {
    read_matrices(run, STATES)?
        .into_iter()
        .map(|(e, m)| Ok((e.name, e.time, ReducedVibrationalState::from_matrix_unchecked(m).map_err(analysis)?)))
        .collect()
}

/// ξ₁ when the run has it, otherwise ξ_avg.
fn primary_series(
    states: &[(String, f64, ReducedVibrationalState)],
) -> Result<(&'static str, Vec<(f64, &ReducedVibrationalState)>), CliError> {
    for name in ["xi1", "xi_avg"] {
        let s: Vec<_> = states.iter().filter(|(n, _, _)| n == name).map(|(_, t, r)| (*t, r)).collect();
        if !s.is_empty() {
            return Ok((name, s));
        }
    }
    Err(missing("run holds neither xi1 nor xi_avg states"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerRow {
    pub state: String,
    pub time: f64,
    pub x: f64,
    pub p: f64,
    pub w: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaFigureRow {
    pub time: f64,
    pub t_over_period: f64,
    pub delta_xi1: Option<f64>,
    pub delta_xi_avg: f64,
    pub scatter_mean: Option<f64>,
    pub scatter_std: Option<f64>,
    pub scatter_min: Option<f64>,
    pub scatter_max: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThermalRow {
    pub time: f64,
    pub state: String,
    pub e0: f64,
    pub beta_r: f64,
    pub beta_r_nu: f64,
    pub fidelity: f64,
    pub delta: f64,
    pub mean_number: f64,
    pub thermal_mean_number: f64,
    pub off_diagonal_mass: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub time: f64,
    pub state: String,
    pub n: usize,
    pub eigenvalue: f64,
    pub thermal_population: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OffDiagonalRow {
    pub time: f64,
    pub state: String,
    pub n: usize,
    pub m: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n_molecules: usize,
    pub disorder_w: f64,
    pub time: f64,
    pub statistic: String,
    pub value: f64,
    pub scatter_mean: Option<f64>,
    pub scatter_std: Option<f64>,
    pub ln_n: f64,
    pub ln_value: Option<f64>,
}

fn first_mid_last<T>(v: &[T]) -> Vec<&T> {
    let mut idx = vec![0, v.len() / 2, v.len().saturating_sub(1)];
    idx.dedup();
    idx.into_iter().filter_map(|i| v.get(i)).collect()
}

fn wigner_map(run: &Path, config: &RunConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let states = load_states(run)?;
    let (name, series) = primary_series(&states)?;
    let grid = &config.output.wigner_grid;
    let mut rows = Vec::new();
    for (t, rho) in first_mid_last(&series) {
        let w = wigner(rho, grid).map_err(analysis)?;
        for ((i, j), &v) in w.values.indexed_iter() {
            rows.push(WignerRow { state: name.into(), time: *t, x: w.xs[i], p: w.ps[j], w: v });
        }
    }
    out.add_csv("wigner_map.csv", &rows)
}

fn delta_vs_time(run: &Path, out: &mut OutputSet) -> Result<(), CliError> {
    let delta: Vec<DeltaCsvRow> = read_csv(&run.join(DELTA_CSV))?;
    let per: Vec<RealizationCsvRow> = read_csv(&run.join(REALIZATIONS_CSV))?;
    let rows: Vec<DeltaFigureRow> = delta
        .into_iter()
        .map(|d| {
            let at: Vec<f64> = per.iter().filter(|r| r.time == d.time).filter_map(|r| r.delta_rho1).collect();
            let (lo, hi) = if at.is_empty() {
                (None, None)
            } else {
                (Some(at.iter().copied().fold(f64::INFINITY, f64::min)), Some(at.iter().copied().fold(f64::NEG_INFINITY, f64::max)))
            };
            DeltaFigureRow {
                time: d.time,
                t_over_period: d.t_over_period,
                delta_xi1: d.delta_xi1,
                delta_xi_avg: d.delta_xi_avg,
                scatter_mean: d.scatter_mean,
                scatter_std: d.scatter_std,
                scatter_min: lo,
                scatter_max: hi,
            }
        })
        .collect();
    out.add_csv("delta_vs_time.csv", &rows)
}

/// Thermal reference of the run: `E₀ = R` for a molecular excitation compared
/// with ξ₁, `E₀ = R/N` for a cavity excitation compared with ξ_avg.
fn reference_for(config: &RunConfig, n_max: usize) -> Result<(&'static str, ThermalReference), CliError> {
    let params = config.params();
    let r = params.reorganization_energy();
    let (state, e0) = match config.run.spec {
        InitialStateSpec::MoleculeExcited(_) => ("xi1", r),
        InitialStateSpec::CavityExcited => ("xi_avg", r / params.n_molecules as f64),
    };
    let t = thermal_reference(e0, params.nu, n_max).map_err(|e| missing(format!("no thermal reference: {e}")))?;
    Ok((state, t))
}

fn thermal_compare(run: &Path, config: &RunConfig, out: &mut OutputSet) -> Result<(), CliError> {
    let states = load_states(run)?;
    let n_max = states.first().map(|s| s.2.n_max()).ok_or_else(|| missing("run holds no states"))?;
    let (name, reference) = reference_for(config, n_max)?;
    let thermal = reference.state();
    let mut rows = Vec::new();
    let mut spectra = Vec::new();
    let mut offdiag = Vec::new();
    for (_, t, rho) in states.iter().filter(|(n, _, _)| n == name) {
        let spec = spectrum_and_heatmap(rho).map_err(analysis)?;
        rows.push(ThermalRow {
            time: *t,
            state: name.into(),
            e0: reference.e0.unwrap_or(f64::NAN),
            beta_r: reference.beta,
            beta_r_nu: reference.beta * reference.nu,
            fidelity: fidelity(rho, &thermal).map_err(analysis)?,
            delta: non_gaussianity(rho).map_err(analysis)?,
            mean_number: rho.mean_number(),
            thermal_mean_number: reference.mean_occupation(),
            off_diagonal_mass: spec.off_diagonal_mass(),
        });
        for (n, &l) in spec.eigenvalues.iter().enumerate() {
            spectra.push(SpectrumRow {
                time: *t,
                state: name.into(),
                n,
                eigenvalue: l,
                thermal_population: reference.populations[n],
            });
        }
        for (n, row) in spec.heatmap.iter().enumerate() {
            for (m, &v) in row.iter().enumerate() {
                offdiag.push(OffDiagonalRow { time: *t, state: name.into(), n, m, magnitude: v });
            }
        }
    }
    if rows.is_empty() {
        return Err(missing(format!("run holds no {name} states")));
    }
    out.add_csv("thermal_compare.csv", &rows)?;
    out.add_csv("spectra.csv", &spectra)?;
    out.add_csv("offdiag.csv", &offdiag)
}

fn sweep_figure(run: &Path, out: &mut OutputSet, stats: &[&str], file: &str) -> Result<(), CliError> {
    let sweep: Vec<SweepCsvRow> = read_csv(&run.join(SWEEP_CSV))?;
    let rows: Vec<ScalingRow> = sweep
        .into_iter()
        .filter(|r| stats.contains(&r.statistic.as_str()))
        .map(|r| ScalingRow {
            n_molecules: r.n_molecules,
            disorder_w: r.disorder_w,
            time: r.time,
            ln_n: (r.n_molecules as f64).ln(),
            ln_value: (r.value > 0.0).then(|| r.value.ln()),
            statistic: r.statistic,
            value: r.value,
            scatter_mean: r.scatter_mean,
            scatter_std: r.scatter_std,
        })
        .collect();
    if rows.is_empty() {
        return Err(missing(format!("sweep holds none of {}", stats.join(", "))));
    }
    out.add_csv(file, &rows)
}

/// Writes the tables of `figure` for the run in `run` into `dest`
/// (default `<run>/figures/<figure>`).
pub fn export_figure_data(run: &Path, figure: Figure, dest: Option<&Path>) -> Result<RunManifest, CliError> {
    let manifest = read_manifest(run)?;
    if manifest.kind != figure.needs() {
        return Err(missing(format!(
            "{} needs a {} run, {} holds a {} run",
            figure.name(),
            figure.needs(),
            run.display(),
            manifest.kind
        )));
    }
    let config = RunConfig::load(&run.join(CONFIG_COPY)).map_err(|e| missing(e.to_string()))?;
    let start = Instant::now();
    let dest = dest.map(Path::to_path_buf).unwrap_or_else(|| default_figure_dir(run, figure));
    let mut out = OutputSet::create(&dest)?;
    match figure {
        Figure::WignerMap => wigner_map(run, &config, &mut out)?,
        Figure::DeltaVsTime => delta_vs_time(run, &mut out)?,
        Figure::ThermalCompare => thermal_compare(run, &config, &mut out)?,
        Figure::Scaling => sweep_figure(run, &mut out, &["delta_xi1", "delta_xi_avg"], "scaling.csv")?,
        Figure::OverlapScaling => sweep_figure(
            run,
            &mut out,
            &["infidelity_1", "infidelity_avg", "hs_overlap_1", "hs_overlap_avg"],
            "overlap_scaling.csv",
        )?,
    }
    let m = RunManifest {
        manifest_version: MANIFEST_VERSION,
        kind: format!("figure:{}", figure.name()),
        tool_version: manifest.tool_version.clone(),
        config_sha256: manifest.config_sha256.clone(),
        engine: manifest.engine.clone(),
        master_seed: manifest.master_seed,
        realization_seeds: manifest.realization_seeds.clone(),
        workers: 1,
        wall_time_s: start.elapsed().as_secs_f64(),
        diagnostics: json!({ "source_run": run.display().to_string() }),
        outputs: Vec::new(),
    };
    out.finish(m)
}
