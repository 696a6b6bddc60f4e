use std::fs;
use std::path::Path;
use std::process::Command;

use htc_cli::commands::{oracle_check, run_sweep, simulate, DeltaCsvRow, DELTA_CSV, REALIZATIONS_CSV};
use htc_cli::config::RunConfig;
use htc_cli::figures::{export_figure_data, Figure};
use htc_cli::io::{audit, read_csv, read_manifest, read_matrices, MANIFEST_FILE};
use htc_cli::CliError;
use htc_core::ensemble::EngineKind;
use tempfile::tempdir;

const MINIMAL: &str = r#"
units = "g_c"

[model]
n_molecules = 2
g_collective = 1.0
nu = 0.3
huang_rhys_lambda = 0.4
disorder_w = 0.0
n_max_vib = 6

[time]
t_final_periods = 1.0
intervals = 8

[run]
engine = "dense"
n_realizations = 2
master_seed = 7
spec = { kind = "molecule_excited", index = 1 }
"#;

fn minimal() -> RunConfig {
    RunConfig::parse(MINIMAL).unwrap()
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_htc"));
    c.env_remove("HTC_WORKERS");
    c
}

#[test]
fn schema_round_trip() {
    let config = minimal();
    let again = RunConfig::parse(&config.to_toml()).unwrap();
    assert_eq!(config, again);
    assert_eq!(config.digest(), again.digest());
}

#[test]
fn mev_inputs_are_converted() {
    let text = MINIMAL
        .replace("units = \"g_c\"", "units = \"meV\"")
        .replace("g_collective = 1.0", "g_collective = 350.0")
        .replace("nu = 0.3", "nu = 105.0");
    let params = RunConfig::parse(&text).unwrap().params();
    assert!((params.g_collective - 1.0).abs() < 1e-15);
    assert!((params.nu - 0.3).abs() < 1e-15);
}

#[test]
fn schema_violations_are_rejected() {
    assert!(matches!(RunConfig::parse(&format!("{MINIMAL}\nbogus = 1\n")), Err(CliError::Schema(_))));
    let bad = MINIMAL.replace("index = 1", "index = 3");
    assert!(matches!(RunConfig::parse(&bad), Err(CliError::Schema(_))));
    let bad = MINIMAL.replace("intervals = 8", "intervals = 0");
    assert!(matches!(RunConfig::parse(&bad), Err(CliError::Schema(_))));
}

#[test]
fn simulate_writes_outputs_and_manifest() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("run");
    let manifest = simulate(&minimal(), &out, 1).unwrap();
    assert_eq!(manifest.kind, "simulate");
    assert_eq!(manifest.realization_seeds.len(), 2);
    for f in [DELTA_CSV, REALIZATIONS_CSV, "states.bin", "states.json", "config.toml"] {
        assert!(out.join(f).is_file(), "{f}");
        assert!(manifest.outputs.iter().any(|o| o.path == f));
    }
    assert_eq!(read_manifest(&out).unwrap(), manifest);
    let rows: Vec<DeltaCsvRow> = read_csv(&out.join(DELTA_CSV)).unwrap();
    assert_eq!(rows.len(), 9);
    assert!((rows[8].t_over_period - 1.0).abs() < 1e-12);
    assert!(rows.iter().map(|r| r.delta_xi1.unwrap()).fold(0.0, f64::max) > 1e-3);
    let states = read_matrices(&out, "states").unwrap();
    assert_eq!(states.len(), 18);
    assert_eq!(states[0].1.dim(), (7, 7));
    // a second run refuses to overwrite
    assert!(simulate(&minimal(), &out, 1).is_err());

    assert!(audit(dir.path()).unwrap().is_clean());
    fs::write(out.join("stray.csv"), "x\n").unwrap();
    let a = audit(dir.path()).unwrap();
    assert_eq!(a.orphans, vec![out.join("stray.csv")]);
    fs::remove_file(out.join("stray.csv")).unwrap();
    fs::write(out.join(DELTA_CSV), "tampered\n").unwrap();
    assert_eq!(audit(dir.path()).unwrap().broken, vec![out.join(DELTA_CSV)]);
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let dir = tempdir().unwrap();
    let mut config = minimal();
    config.model.disorder_w = 0.5;
    config.run.n_realizations = 3;
    simulate(&config, &dir.path().join("a"), 1).unwrap();
    simulate(&config, &dir.path().join("b"), 3).unwrap();
    for f in [DELTA_CSV, REALIZATIONS_CSV, "states.bin"] {
        assert_eq!(fs::read(dir.path().join("a").join(f)).unwrap(), fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn decoupled_run_has_no_non_gaussianity() {
    let dir = tempdir().unwrap();
    let mut config = minimal();
    config.model.huang_rhys_lambda = 0.0;
    config.model.disorder_w = 0.5;
    simulate(&config, &dir.path().join("run"), 1).unwrap();
    let rows: Vec<DeltaCsvRow> = read_csv(&dir.path().join("run").join(DELTA_CSV)).unwrap();
    for r in rows {
        assert!(r.delta_xi1.unwrap().abs() < 1e-8 && r.delta_xi_avg.abs() < 1e-8, "{r:?}");
    }
}

#[test]
fn oracle_check_passes_at_two_molecules() {
    let dir = tempdir().unwrap();
    let report = oracle_check(&minimal(), Some(&dir.path().join("oracle")), 1).unwrap();
    assert!(report.pass, "{report:?}");
    assert!(report.max_mps_dense < 1e-6);
    assert!(dir.path().join("oracle").join("oracle.csv").is_file());
    assert!(audit(dir.path()).unwrap().is_clean());
}

#[test]
fn oracle_distance_shrinks_with_bond_dimension() {
    let mut config = minimal();
    config.model.n_molecules = 3;
    config.model.disorder_w = 0.5;
    config.run.n_realizations = 1;
    config.time.intervals = 2;
    config.mps.chi_max = 2;
    let coarse = oracle_check(&config, None, 1).unwrap();
    config.mps.chi_max = 64;
    let fine = oracle_check(&config, None, 1).unwrap();
    assert!(coarse.max_mps_dense > fine.max_mps_dense, "{coarse:?} vs {fine:?}");
    assert!(!coarse.pass && fine.pass);
}

#[test]
fn decoupled_ehrenfest_matches_dense() {
    let mut config = minimal();
    config.model.huang_rhys_lambda = 0.0;
    let report = oracle_check(&config, None, 1).unwrap();
    assert!(report.max_ehrenfest_dense < 1e-8, "{report:?}");
}

#[test]
fn figures_export_from_a_simulation() {
    let dir = tempdir().unwrap();
    let run = dir.path().join("run");
    let mut config = minimal();
    config.time.intervals = 2;
    simulate(&config, &run, 1).unwrap();

    export_figure_data(&run, Figure::WignerMap, None).unwrap();
    #[derive(serde::Deserialize)]
    struct W {
        time: f64,
        x: f64,
        p: f64,
        w: f64,
    }
    let rows: Vec<W> = read_csv(&run.join("figures/wigner_map/wigner_map.csv")).unwrap();
    assert_eq!(rows.len(), 3 * 201 * 201);
    let peak = rows.iter().filter(|r| r.time == 0.0).max_by(|a, b| a.w.total_cmp(&b.w)).unwrap();
    assert!((peak.w - 1.0 / std::f64::consts::PI).abs() < 1e-10);
    assert!(peak.x.abs() < 1e-12 && peak.p.abs() < 1e-12);

    export_figure_data(&run, Figure::DeltaVsTime, None).unwrap();
    #[derive(serde::Deserialize)]
    struct D {
        scatter_std: Option<f64>,
        scatter_min: Option<f64>,
        scatter_max: Option<f64>,
    }
    for r in read_csv::<D>(&run.join("figures/delta_vs_time/delta_vs_time.csv")).unwrap() {
        assert_eq!(r.scatter_std, Some(0.0));
        assert_eq!(r.scatter_min, r.scatter_max);
    }

    export_figure_data(&run, Figure::ThermalCompare, None).unwrap();
    #[derive(serde::Deserialize)]
    struct T {
        beta_r_nu: f64,
        thermal_mean_number: f64,
        fidelity: f64,
    }
    let rows: Vec<T> = read_csv(&run.join("figures/thermal_compare/thermal_compare.csv")).unwrap();
    assert_eq!(rows.len(), 3);
    for r in &rows {
        assert!((r.beta_r_nu - 7.25f64.ln()).abs() < 1e-12);
        assert!((r.thermal_mean_number - 0.16).abs() < 1e-10);
        assert!((0.0..=1.0 + 1e-12).contains(&r.fidelity));
    }
    let header = fs::read_to_string(run.join("figures/thermal_compare/spectra.csv")).unwrap();
    assert!(header.starts_with("time,state,n,eigenvalue,thermal_population"));
    assert!(run.join("figures/thermal_compare/offdiag.csv").is_file());

    // sweep figures need a sweep run
    assert!(matches!(export_figure_data(&run, Figure::Scaling, None), Err(CliError::Missing(_))));
    assert!(audit(dir.path()).unwrap().is_clean());
}

#[test]
fn sweep_figures_cover_every_point() {
    let dir = tempdir().unwrap();
    let run = dir.path().join("sweep");
    let text = MINIMAL.replace("master_seed = 7", "master_seed = 7\nsweep = { axis = \"molecule_number\", values = [2, 3] }");
    let mut config = RunConfig::parse(&text).unwrap();
    config.run.engine = EngineKind::Ehrenfest;
    config.time.intervals = 2;
    run_sweep(&config, &run, 1).unwrap();
    export_figure_data(&run, Figure::Scaling, None).unwrap();
    export_figure_data(&run, Figure::OverlapScaling, None).unwrap();
    #[derive(serde::Deserialize)]
    struct S {
        n_molecules: usize,
        statistic: String,
        value: f64,
    }
    let rows: Vec<S> = read_csv(&run.join("figures/overlap_scaling/overlap_scaling.csv")).unwrap();
    for n in [2, 3] {
        let r = rows.iter().find(|r| r.n_molecules == n && r.statistic == "infidelity_1").unwrap();
        assert!(r.value > 0.0 && r.value < 1.0);
    }
    assert!(matches!(export_figure_data(&run, Figure::WignerMap, None), Err(CliError::Missing(_))));
    assert!(audit(dir.path()).unwrap().is_clean());
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.toml");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn binary_exit_codes() {
    let dir = tempdir().unwrap();
    let good = write_config(dir.path(), MINIMAL);
    let status = bin().args(["simulate", "--config"]).arg(&good).arg("--out").arg(dir.path().join("ok")).output().unwrap().status;
    assert_eq!(status.code(), Some(0));
    assert!(dir.path().join("ok").join(MANIFEST_FILE).is_file());

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, format!("{MINIMAL}\nbogus = 1\n")).unwrap();
    let status = bin().args(["simulate", "--config"]).arg(&bad).arg("--out").arg(dir.path().join("x")).output().unwrap().status;
    assert_eq!(status.code(), Some(2));

    let big = dir.path().join("big.toml");
    fs::write(&big, MINIMAL.replace("n_molecules = 2", "n_molecules = 8").replace("n_max_vib = 6", "n_max_vib = 8")).unwrap();
    let status = bin().args(["oracle-check", "--config"]).arg(&big).output().unwrap().status;
    assert_eq!(status.code(), Some(4));
    let status = bin().args(["simulate", "--config"]).arg(&big).arg("--out").arg(dir.path().join("y")).output().unwrap().status;
    assert_eq!(status.code(), Some(4));

    let failing = dir.path().join("fail.toml");
    let text = MINIMAL.replace("n_molecules = 2", "n_molecules = 3").replace("disorder_w = 0.0", "disorder_w = 0.5")
        + "\n[mps]\nchi_max = 1\nalarm_policy = \"abort\"\n";
    fs::write(&failing, text).unwrap();
    let status = bin()
        .args(["simulate", "--engine", "mps", "--config"])
        .arg(&failing)
        .arg("--out")
        .arg(dir.path().join("z"))
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(3));
}

#[test]
fn binary_overrides_and_export() {
    let dir = tempdir().unwrap();
    let cfg = write_config(dir.path(), MINIMAL);
    let out = dir.path().join("run");
    let status = bin()
        .env("HTC_WORKERS", "2")
        .args(["simulate", "--engine", "ehrenfest", "--seed", "11", "--workers", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    let m = read_manifest(&out).unwrap();
    assert_eq!(m.engine.as_deref(), Some("ehrenfest"));
    assert_eq!(m.master_seed, Some(11));
    assert_eq!(m.workers, 2);
    let status = bin().args(["export-figure-data", "--figure", "delta_vs_time"]).arg(&out).output().unwrap().status;
    assert!(status.success());
    assert!(out.join("figures/delta_vs_time/manifest.json").is_file());
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let config = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            assert!((config.params().g_collective - 1.0).abs() < 1e-12);
            seen += 1;
        }
    }
    assert!(seen >= 2);
}
