//! Run configuration: one TOML file with explicit energy units.

use std::path::Path;

use htc_core::analysis::GridSpec;
use htc_core::ensemble::{DenseSettings, EngineKind, EnsembleConfig, MpsSettings, SweepAxis, TwaSettings};
use htc_core::model::{EnergyUnits, DEFAULT_G_C_MEV};
use htc_core::{HtcParams, InitialStateSpec};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    #[serde(rename = "g_c")]
    GC,
    #[serde(rename = "meV")]
    Mev,
}

/// Sample times `k·t_final/intervals`, `k = 0..=intervals`, with `t_final` in
/// vibrational periods.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub t_final_periods: f64,
    pub intervals: usize,
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self { t_final_periods: 1.0, intervals: 16 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub engine: EngineKind,
    #[serde(default = "one")]
    pub n_realizations: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "yes")]
    pub compare_with_mps: bool,
    pub spec: InitialStateSpec,
    #[serde(default)]
    pub sweep: SweepAxis,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Grid for exported Wigner maps.
    pub wigner_grid: GridSpec,
}

fn default_g_c_mev() -> f64 {
    DEFAULT_G_C_MEV
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub units: Units,
    /// Value of `g_c` in meV, used when `units = "meV"`.
    #[serde(default = "default_g_c_mev")]
    pub g_c_mev: f64,
    pub model: HtcParams,
    #[serde(default)]
    pub time: TimeGrid,
    pub run: RunSection,
    #[serde(default)]
    pub mps: MpsSettings,
    #[serde(default)]
    pub twa: TwaSettings,
    #[serde(default)]
    pub dense: DenseSettings,
    #[serde(default)]
    pub output: OutputSection,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let config: Self = toml::from_str(text).map_err(|e| CliError::Schema(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Schema(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Model parameters in internal `g_c` units.
    pub fn params(&self) -> HtcParams {
        let units = match self.units {
            Units::GC => EnergyUnits::GC,
            Units::Mev => EnergyUnits::Mev { g_c_mev: self.g_c_mev },
        };
        self.model.clone().into_internal_units(units)
    }

    pub fn sample_times(&self, params: &HtcParams) -> Vec<f64> {
        let t = self.time.t_final_periods * params.vibrational_period();
        let n = self.time.intervals;
        (0..=n).map(|k| t * k as f64 / n as f64).collect()
    }

    pub fn ensemble(&self, params: &HtcParams) -> EnsembleConfig {
        EnsembleConfig {
            n_realizations: self.run.n_realizations,
            master_seed: self.run.master_seed,
            engine: self.run.engine,
            spec: self.run.spec,
            sample_times: self.sample_times(params),
            sweep: self.run.sweep.clone(),
            compare_with_mps: self.run.compare_with_mps,
            mps: self.mps.clone(),
            twa: self.twa.clone(),
            dense: self.dense.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let schema = |m: String| Err(CliError::Schema(m));
        if !(self.g_c_mev.is_finite() && self.g_c_mev > 0.0) {
            return schema(format!("g_c_mev must be positive, got {}", self.g_c_mev));
        }
        if !(self.time.t_final_periods.is_finite() && self.time.t_final_periods > 0.0) || self.time.intervals == 0 {
            return schema("time.t_final_periods must be positive and time.intervals at least 1".into());
        }
        let g = &self.output.wigner_grid;
        if g.nx < 2 || g.np < 2 || !(g.x_max > g.x_min) || !(g.p_max > g.p_min) {
            return schema("output.wigner_grid needs increasing bounds and at least 2x2 points".into());
        }
        let params = self.params();
        params.validate().map_err(|e| CliError::Schema(e.to_string()))?;
        self.run.spec.validate(&params).map_err(|e| CliError::Schema(e.to_string()))?;
        self.ensemble(&params).validate().map_err(|e| CliError::Schema(e.to_string()))?;
        if let SweepAxis::MoleculeNumber(ns) = &self.run.sweep {
            for &n in ns {
                self.run.spec.validate(&params.clone().with_molecules(n)).map_err(|e| CliError::Schema(e.to_string()))?;
            }
        }
        Ok(())
    }

    /// Settings far beyond desk scale; these run, but slowly.
    pub fn long_running_warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        let n_max = match &self.run.sweep {
            SweepAxis::MoleculeNumber(ns) => ns.iter().copied().max().unwrap_or(0).max(self.model.n_molecules),
            _ => self.model.n_molecules,
        };
        if n_max > 32 {
            out.push(format!("N = {n_max} is beyond desk scale (32)"));
        }
        if self.run.n_realizations > 100 {
            out.push(format!("{} realizations is beyond desk scale (100)", self.run.n_realizations));
        }
        if self.mps.chi_max > 64 && matches!(self.run.engine, EngineKind::Mps) {
            out.push(format!("chi_max = {} is beyond desk scale (64)", self.mps.chi_max));
        }
        out
    }
}
