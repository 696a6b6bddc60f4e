use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use htc_cli::commands::{oracle_check, run_sweep, simulate, Overrides};
use htc_cli::config::RunConfig;
use htc_cli::figures::{export_figure_data, Figure};
use htc_cli::CliError;
use htc_core::ensemble::EngineKind;
use htc_core::parallel::resolve_workers;

#[derive(Parser)]
#[command(name = "htc", version, about = "Vibrational dynamics of disordered molecules in a cavity")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; must be absent or empty.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; HTC_WORKERS overrides this.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides run.engine (mps, dense, ehrenfest, twa).
    #[arg(long)]
    engine: Option<EngineKind>,
    /// Overrides run.master_seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for the oracle table and manifest.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Accepted for symmetry; the check always runs MPS, dense and Ehrenfest.
    #[arg(long)]
    engine: Option<EngineKind>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Time series of one ensemble.
    Simulate(RunArgs),
    /// End-time observables over the configured sweep axis.
    Sweep(RunArgs),
    /// Compare MPS and Ehrenfest against the dense oracle.
    OracleCheck(OracleArgs),
    /// Write plot-ready tables for a finished run.
    ExportFigureData {
        run_dir: PathBuf,
        #[arg(long, value_enum)]
        figure: Figure,
        /// Defaults to <RUN_DIR>/figures/<FIGURE>.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, engine: Option<EngineKind>, seed: Option<u64>) -> Result<RunConfig, CliError> {
    let mut config = RunConfig::load(path)?;
    Overrides { engine, seed }.apply(&mut config);
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => {
            let config = load(&a.config, a.engine, a.seed)?;
            let m = simulate(&config, &a.out, resolve_workers(a.workers))?;
            println!("wrote {} files to {} in {:.1} s", m.outputs.len(), a.out.display(), m.wall_time_s);
        }
        Command::Sweep(a) => {
            let config = load(&a.config, a.engine, a.seed)?;
            let m = run_sweep(&config, &a.out, resolve_workers(a.workers))?;
            println!("wrote {} files to {} in {:.1} s", m.outputs.len(), a.out.display(), m.wall_time_s);
        }
        Command::OracleCheck(a) => {
            if a.engine.is_some() {
                log::warn!("--engine is ignored by oracle-check");
            }
            let config = load(&a.config, None, a.seed)?;
            let report = oracle_check(&config, a.out.as_deref(), resolve_workers(a.workers))?;
            println!("max trace distance MPS vs dense:       {:e}", report.max_mps_dense);
            println!("max trace distance Ehrenfest vs dense: {:e}", report.max_ehrenfest_dense);
            for v in &report.violations {
                println!("invariant violation: {v}");
            }
            if !report.pass {
                println!("FAIL");
                return Err(CliError::CheckFailed(format!("MPS vs dense distance {:e}", report.max_mps_dense)));
            }
            println!("PASS");
        }
        Command::ExportFigureData { run_dir, figure, out } => {
            let m = export_figure_data(&run_dir, figure, out.as_deref())?;
            for o in &m.outputs {
                println!("{}", o.path);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("htc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
