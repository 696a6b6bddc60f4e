use std::path::Path;
use std::time::Instant;

use htc_core::ensemble::{
    check_resources, run_ensemble, run_ensemble_with, sweep, EngineKind, EnsembleRun, SweepPoint,
};
use htc_core::mps::TrotterOrder;
use htc_core::{HtcParams, ReducedVibrationalState};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::io::{OutputSet, RunManifest, MANIFEST_VERSION};
use crate::CliError;

pub const CONFIG_COPY: &str = "config.toml";
pub const DELTA_CSV: &str = "delta.csv";
pub const REALIZATIONS_CSV: &str = "realizations.csv";
pub const TWA_SUMMARY_CSV: &str = "twa_summary.csv";
pub const STATES: &str = "states";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SWEEP_REALIZATIONS_CSV: &str = "sweep_realizations.csv";
pub const ORACLE_CSV: &str = "oracle.csv";

/// Command-line overrides of the config file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub engine: Option<EngineKind>,
    pub seed: Option<u64>,
}

impl Overrides {
    pub fn apply(&self, config: &mut RunConfig) {
        if let Some(e) = self.engine {
            config.run.engine = e;
        }
        if let Some(s) = self.seed {
            config.run.master_seed = s;
        }
    }
}

fn tool_version() -> String {
    format!("htc {}", env!("CARGO_PKG_VERSION"))
}

fn warn_if_long(config: &RunConfig) {
    for w in config.long_running_warnings() {
        warn!("{w}; expect a long run");
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaCsvRow {
    pub time: f64,
    pub t_over_period: f64,
    pub delta_xi1: Option<f64>,
    pub delta_xi_avg: f64,
    pub scatter_mean: Option<f64>,
    pub scatter_std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealizationCsvRow {
    pub realization: usize,
    pub seed: u64,
    pub time: f64,
    pub delta_rho1: Option<f64>,
    pub delta_avg: f64,
    pub photon_number: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TwaSummaryCsvRow {
    pub realization: usize,
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

fn realization_diagnostics(run: &EnsembleRun) -> serde_json::Value {
    let per: Vec<_> = run
        .realizations
        .iter()
        .map(|r| {
            json!({
                "index": r.index,
                "seed": r.seed,
                "truncation_weight": r.truncation_weight,
                "max_bond_dim": r.max_bond_dim,
                "truncation_alarms": r.truncation_alarms,
                "energy_drift": r.energy_drift,
                "max_norm_error": r.norm.iter().map(|n| (n - 1.0).abs()).fold(0.0, f64::max),
            })
        })
        .collect();
    json!({
        "max_truncation_weight": run.realizations.iter().map(|r| r.truncation_weight).fold(0.0, f64::max),
        "truncation_alarms": run.realizations.iter().map(|r| r.truncation_alarms).sum::<usize>(),
        "realizations": per,
    })
}

fn report_alarms(run: &EnsembleRun) {
    let alarms: usize = run.realizations.iter().map(|r| r.truncation_alarms).sum();
    if alarms > 0 {
        warn!("{alarms} TEBD steps exceeded the truncation alarm threshold; consider a larger chi_max");
    }
}

/// Time series of one ensemble run.
pub fn simulate(config: &RunConfig, out: &Path, workers: usize) -> Result<RunManifest, CliError> {
    config.validate()?;
    warn_if_long(config);
    let params = config.params();
    let ens = config.ensemble(&params);
    let mut outputs = OutputSet::create(out)?;
    let start = Instant::now();
    info!("simulate: {} engine, N = {}, {} realizations", ens.engine.name(), params.n_molecules, ens.n_realizations);
    let run = run_ensemble(&ens, &params, workers)?;
    report_alarms(&run);
    let period = params.vibrational_period();

    let delta: Vec<DeltaCsvRow> = run
        .delta_rows()?
        .into_iter()
        .map(|r| DeltaCsvRow {
            time: r.time,
            t_over_period: r.time / period,
            delta_xi1: r.delta_xi1,
            delta_xi_avg: r.delta_xi_avg,
            scatter_mean: r.scatter_mean,
            scatter_std: r.scatter_std,
        })
        .collect();
    let per_delta = run.realization_deltas()?;
    let mut per = Vec::new();
    for (k, r) in run.realizations.iter().enumerate() {
        for (j, &time) in run.times.iter().enumerate() {
            per.push(RealizationCsvRow {
                realization: r.index,
                seed: r.seed,
                time,
                delta_rho1: per_delta.as_ref().map(|d| d[k][j]),
                delta_avg: htc_core::analysis::non_gaussianity(&r.average[j]).map_err(|e| CliError::Engine(e.to_string()))?,
                photon_number: r.photon_number[j],
                norm: r.norm[j],
            });
        }
    }
    outputs.add_csv(DELTA_CSV, &delta)?;
    outputs.add_csv(REALIZATIONS_CSV, &per)?;
    if run.engine == EngineKind::Twa {
        let rows: Vec<TwaSummaryCsvRow> = run
            .realizations
            .iter()
            .flat_map(|r| {
                r.twa_summary.iter().flatten().map(move |s| TwaSummaryCsvRow {
                    realization: r.index,
                    time: s.time,
                    molecule: s.molecule,
                    mean_x: s.mean_x,
                    mean_p: s.mean_p,
                    var_x: s.var_x,
                    var_p: s.var_p,
                    cov_xp: s.cov_xp,
                    mean_sx: s.mean_sx,
                    mean_sy: s.mean_sy,
                    mean_sz: s.mean_sz,
                    photon_weight: s.photon_weight,
                })
            })
            .collect();
        outputs.add_csv(TWA_SUMMARY_CSV, &rows)?;
    }
    let mut items = Vec::new();
    if let Some(x) = &run.xi_excited {
        for (t, rho) in run.times.iter().zip(x) {
            items.push(("xi1".to_string(), *t, rho.matrix()));
        }
    }
    for (t, rho) in run.times.iter().zip(&run.xi_avg) {
        items.push(("xi_avg".to_string(), *t, rho.matrix()));
    }
    outputs.add_matrices(STATES, &items);
    outputs.add(CONFIG_COPY, config.to_toml().into_bytes());

    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        kind: "simulate".into(),
        tool_version: tool_version(),
        config_sha256: Some(config.digest()),
        engine: Some(run.engine.name().into()),
        master_seed: Some(run.master_seed),
        realization_seeds: run.realizations.iter().map(|r| r.seed).collect(),
        workers,
        wall_time_s: start.elapsed().as_secs_f64(),
        diagnostics: realization_diagnostics(&run),
        outputs: Vec::new(),
    };
    outputs.finish(manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub point: usize,
    pub n_molecules: usize,
    pub disorder_w: f64,
    pub time: f64,
    pub statistic: String,
    pub value: f64,
    pub scatter_mean: Option<f64>,
    pub scatter_std: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRealizationRow {
    pub point: usize,
    pub n_molecules: usize,
    pub disorder_w: f64,
    pub engine: String,
    pub realization: usize,
    pub seed: u64,
    pub delta_rho1: Option<f64>,
    pub delta_avg: f64,
}

fn sweep_rows(k: usize, p: &SweepPoint) -> Vec<SweepCsvRow> {
    let r = &p.row;
    let stats = [
        ("delta_xi1", r.delta_xi1, true),
        ("delta_xi_avg", Some(r.delta_xi_avg), false),
        ("infidelity_1", r.infidelity_1, false),
        ("infidelity_avg", r.infidelity_avg, false),
        ("hs_overlap_1", r.hs_overlap_1, false),
        ("hs_overlap_avg", r.hs_overlap_avg, false),
    ];
    stats
        .into_iter()
        .filter_map(|(name, v, scatter)| {
            v.map(|value| SweepCsvRow {
                point: k,
                n_molecules: r.n_molecules,
                disorder_w: r.disorder_w,
                time: r.time,
                statistic: name.into(),
                value,
                scatter_mean: if scatter { r.scatter_mean } else { None },
                scatter_std: if scatter { r.scatter_std } else { None },
            })
        })
        .collect()
}

fn end_states(run: &EnsembleRun) -> Vec<(&'static str, &ReducedVibrationalState)> {
    let last = run.times.len() - 1;
    let mut v = Vec::new();
    if let Some(x) = &run.xi_excited {
        v.push(("xi1", &x[last]));
    }
    v.push(("xi_avg", &run.xi_avg[last]));
    v
}

/// End-time observables over the sweep axis.
pub fn run_sweep(config: &RunConfig, out: &Path, workers: usize) -> Result<RunManifest, CliError> {
    config.validate()?;
    warn_if_long(config);
    let params = config.params();
    let ens = config.ensemble(&params);
    let mut outputs = OutputSet::create(out)?;
    let start = Instant::now();
    let points = sweep(&ens, &params, workers)?;
    let mut rows = Vec::new();
    let mut per = Vec::new();
    let mut names = Vec::new();
    for (k, p) in points.iter().enumerate() {
        rows.extend(sweep_rows(k, p));
        for run in std::iter::once(&p.run).chain(p.reference.as_ref()) {
            report_alarms(run);
            let deltas = run.realization_deltas()?;
            let last = run.times.len() - 1;
            for (i, r) in run.realizations.iter().enumerate() {
                per.push(SweepRealizationRow {
                    point: k,
                    n_molecules: p.params.n_molecules,
                    disorder_w: p.params.disorder_w,
                    engine: run.engine.name().into(),
                    realization: r.index,
                    seed: r.seed,
                    delta_rho1: deltas.as_ref().map(|d| d[i][last]),
                    delta_avg: htc_core::analysis::non_gaussianity(&r.average[last])
                        .map_err(|e| CliError::Engine(e.to_string()))?,
                });
            }
            for (name, rho) in end_states(run) {
                names.push((format!("p{k}/{}/{name}", run.engine.name()), run.times[last], rho.matrix().clone()));
            }
        }
    }
    outputs.add_csv(SWEEP_CSV, &rows)?;
    outputs.add_csv(SWEEP_REALIZATIONS_CSV, &per)?;
    let items: Vec<_> = names.iter().map(|(n, t, m)| (n.clone(), *t, m)).collect();
    outputs.add_matrices(STATES, &items);
    outputs.add(CONFIG_COPY, config.to_toml().into_bytes());
    let diagnostics = json!({
        "points": points.iter().map(|p| json!({
            "n_molecules": p.params.n_molecules,
            "disorder_w": p.params.disorder_w,
            "engine": realization_diagnostics(&p.run),
            "mps_reference": p.reference.as_ref().map(realization_diagnostics),
        })).collect::<Vec<_>>(),
    });
    let seeds = points.first().map(|p| p.run.realizations.iter().map(|r| r.seed).collect()).unwrap_or_default();
    let manifest = RunManifest {
        manifest_version: MANIFEST_VERSION,
        kind: "sweep".into(),
        tool_version: tool_version(),
        config_sha256: Some(config.digest()),
        engine: Some(ens.engine.name().into()),
        master_seed: Some(ens.master_seed),
        realization_seeds: seeds,
        workers,
        wall_time_s: start.elapsed().as_secs_f64(),
        diagnostics,
        outputs: Vec::new(),
    };
    outputs.finish(manifest)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleRow {
    pub realization: usize,
    pub seed: u64,
    pub time: f64,
    pub state: String,
    pub mps_dense: f64,
    pub ehrenfest_dense: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub max_mps_dense: f64,
    pub max_ehrenfest_dense: f64,
    pub violations: Vec<String>,
    pub pass: bool,
}

/// MPS-vs-dense distances below this pass the oracle check.
pub const ORACLE_TOLERANCE: f64 = 1e-6;

fn invariant_violations(run: &EnsembleRun, out: &mut Vec<String>) {
    for r in &run.realizations {
        for (j, &t) in run.times.iter().enumerate() {
            let states = r.excited.iter().map(|x| &x[j]).chain(std::iter::once(&r.average[j]));
            for rho in states {
                match htc_core::analysis::non_gaussianity(rho) {
                    Ok(d) if d >= -1e-8 => {}
                    Ok(d) => out.push(format!("{} realization {} t = {t}: δ = {d:e}", run.engine.name(), r.index)),
                    Err(e) => out.push(format!("{} realization {} t = {t}: {e}", run.engine.name(), r.index)),
                }
            }
            if run.engine != EngineKind::Twa && (r.norm[j] - 1.0).abs() > 1e-8 {
                out.push(format!("{} realization {} t = {t}: norm {}", run.engine.name(), r.index, r.norm[j]));
            }
        }
    }
}

/// MPS, dense and Ehrenfest on identical realizations. MPS runs at fourth
/// Trotter order so that the comparison is limited by truncation only.
pub fn oracle_check(config: &RunConfig, out: Option<&Path>, workers: usize) -> Result<OracleReport, CliError> {
    config.validate()?;
    let params: HtcParams = config.params();
    let mut ens = config.ensemble(&params);
    ens.mps.order = TrotterOrder::Fourth;
    check_resources(EngineKind::Dense, &params, &ens)?;
    let mut outputs = out.map(OutputSet::create).transpose()?;
    let start = Instant::now();
    let dense = run_ensemble_with(EngineKind::Dense, &ens, &params, workers)?;
    let mps = run_ensemble_with(EngineKind::Mps, &ens, &params, workers)?;
    let mf = run_ensemble_with(EngineKind::Ehrenfest, &ens, &params, workers)?;
    let dist = |a: &ReducedVibrationalState, b: &ReducedVibrationalState| {
        a.trace_distance(b).map_err(|e| CliError::Engine(e.to_string()))
    };
    let mut rows = Vec::new();
    for ((d, m), e) in dense.realizations.iter().zip(&mps.realizations).zip(&mf.realizations) {
        for (j, &time) in dense.times.iter().enumerate() {
            let mut pairs = vec![("avg", &d.average[j], &m.average[j], &e.average[j])];
            if let (Some(dx), Some(mx), Some(ex)) = (&d.excited, &m.excited, &e.excited) {
                pairs.insert(0, ("rho1", &dx[j], &mx[j], &ex[j]));
            }
            for (state, rd, rm, re) in pairs {
                rows.push(OracleRow {
                    realization: d.index,
                    seed: d.seed,
                    time,
                    state: state.into(),
                    mps_dense: dist(rm, rd)?,
                    ehrenfest_dense: dist(re, rd)?,
                });
            }
        }
    }
    let mut violations = Vec::new();
    for run in [&dense, &mps, &mf] {
        invariant_violations(run, &mut violations);
    }
    let max_mps_dense = rows.iter().map(|r| r.mps_dense).fold(0.0, f64::max);
    let max_ehrenfest_dense = rows.iter().map(|r| r.ehrenfest_dense).fold(0.0, f64::max);
    let report = OracleReport {
        max_mps_dense,
        max_ehrenfest_dense,
        pass: max_mps_dense < ORACLE_TOLERANCE && violations.is_empty(),
        violations,
    };
    if let Some(mut o) = outputs.take() {
        o.add_csv(ORACLE_CSV, &rows)?;
        o.add(CONFIG_COPY, config.to_toml().into_bytes());
        let manifest = RunManifest {
            manifest_version: MANIFEST_VERSION,
            kind: "oracle_check".into(),
            tool_version: tool_version(),
            config_sha256: Some(config.digest()),
            engine: Some("mps,dense,ehrenfest".into()),
            master_seed: Some(ens.master_seed),
            realization_seeds: dense.realizations.iter().map(|r| r.seed).collect(),
            workers,
            wall_time_s: start.elapsed().as_secs_f64(),
            diagnostics: serde_json::to_value(&report).expect("report serializes"),
            outputs: Vec::new(),
        };
        o.finish(manifest)?;
    }
    Ok(report)
}
