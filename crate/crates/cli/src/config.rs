//! JSON inputs of the commands. Every document carries `schema_version`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use ringmod::card::{HeaterSettings, ModelCard};
use ringmod::electrical::ElectricalParams;
use ringmod::extraction::{CouplingBranch, S11Mask};
use ringmod::scenario::Scenario;

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

/// Parses a JSON document; errors name the file, the field and the line.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("{}: {e}", path.display())))
}

fn check_version(path: &Path, v: u32) -> CliResult<()> {
    if v != SCHEMA_VERSION {
        return Err(CliError::input(format!(
            "{}: schema_version: unsupported version {v} (expected {SCHEMA_VERSION})",
            path.display()
        )));
    }
    Ok(())
}

pub fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let s: Scenario = load_json(path)?;
    check_version(path, s.schema_version)?;
    s.validate().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(s)
}

pub fn load_card(path: &Path) -> CliResult<ModelCard> {
    let c: ModelCard = load_json(path)?;
    check_version(path, c.schema_version)?;
    c.modulator().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(c)
}

fn default_dwell() -> f64 {
    ringmod::analysis::DEFAULT_DWELL_TAU
}

fn default_samples() -> usize {
    2001
}

fn default_rel_tol() -> f64 {
    1e-8
}

fn default_laser_mw() -> f64 {
    1.0
}

/// Chirped-laser spectra at a list of biases or heater powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub schema_version: u32,
    /// Bias points (V); the heater stays at `heater_mW`.
    #[serde(rename = "bias_V", default, skip_serializing_if = "Option::is_none")]
    pub bias_v: Option<Vec<f64>>,
    /// Heater powers (mW); the bias stays at `fixed_bias_V`.
    #[serde(rename = "heater_mW_list", default, skip_serializing_if = "Option::is_none")]
    pub heater_mw_list: Option<Vec<f64>>,
    #[serde(rename = "fixed_bias_V", default)]
    pub fixed_bias_v: f64,
    #[serde(rename = "heater_mW", default)]
    pub heater_mw: f64,
    pub lambda_start_nm: f64,
    pub lambda_stop_nm: f64,
    /// Chirp duration; derived from `dwell_tau` when absent.
    #[serde(rename = "duration_s", default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default = "default_dwell")]
    pub dwell_tau: f64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(rename = "laser_power_mW", default = "default_laser_mw")]
    pub laser_power_mw: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    /// Write transmission in dB instead of linear.
    #[serde(default)]
    pub db: bool,
}

/// One sweep point of a [`SweepConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub bias: f64,
    pub heater_power: f64,
}

impl SweepConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let c: Self = load_json(path)?;
        check_version(path, c.schema_version)?;
        c.points().map_err(|m| CliError::input(format!("{}: {m}", path.display())))?;
        Ok(c)
    }

    pub fn points(&self) -> Result<Vec<SweepPoint>, String> {
        let pts: Vec<SweepPoint> = match (&self.bias_v, &self.heater_mw_list) {
            (Some(_), Some(_)) => return Err("give either bias_V or heater_mW_list, not both".into()),
            (None, None) => return Err("bias_V or heater_mW_list is required".into()),
            (Some(b), None) => b.iter().map(|&v| SweepPoint { bias: v, heater_power: self.heater_mw * 1e-3 }).collect(),
            (None, Some(h)) => h.iter().map(|&p| SweepPoint { bias: self.fixed_bias_v, heater_power: p * 1e-3 }).collect(),
        };
        if pts.is_empty() {
            return Err(if self.bias_v.is_some() { "bias_V: empty list" } else { "heater_mW_list: empty list" }.into());
        }
        if pts.iter().any(|p| !(p.heater_power >= 0.0)) {
            return Err("heater powers must be non-negative".into());
        }
        if !(self.lambda_start_nm > 0.0 && self.lambda_stop_nm > 0.0) {
            return Err("lambda_start_nm and lambda_stop_nm must be positive".into());
        }
        if self.n_samples < 2 {
            return Err("n_samples: need at least 2".into());
        }
        if !(self.dwell_tau > 0.0) || !(self.rel_tol > 0.0) || self.duration_s.is_some_and(|d| !(d > 0.0)) {
            return Err("dwell_tau, rel_tol and duration_s must be positive".into());
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    pub file: PathBuf,
    #[serde(rename = "bias_V", default)]
    pub bias_v: f64,
    #[serde(rename = "heater_mW", default)]
    pub heater_mw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S11File {
    pub file: PathBuf,
    #[serde(rename = "bias_V", default)]
    pub bias_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeaterDrivePoint {
    #[serde(rename = "v_V")]
    pub v: f64,
    #[serde(rename = "p_mW")]
    pub p_mw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    #[serde(default = "default_degree")]
    pub lambda0_degree: usize,
    #[serde(default)]
    pub branch: CouplingBranch,
    #[serde(default = "default_window")]
    pub resonance_window: usize,
    #[serde(default)]
    pub s11_free: S11Mask,
}

fn default_degree() -> usize {
    2
}

fn default_window() -> usize {
    1
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { lambda0_degree: 2, branch: CouplingBranch::default(), resonance_window: 1, s11_free: S11Mask::default() }
    }
}

/// Measurement bundle for `fit`; file paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitManifest {
    pub schema_version: u32,
    pub bias_sweeps: Vec<SweepFile>,
    #[serde(default)]
    pub heater_sweeps: Vec<SweepFile>,
    #[serde(default)]
    pub heater_drive: Vec<HeaterDrivePoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s11: Option<S11File>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cv: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub electrical_init: Option<ElectricalParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_ref_nm: Option<f64>,
    #[serde(default)]
    pub heater: HeaterSettings,
    #[serde(default)]
    pub options: FitOptions,
}

impl FitManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let m: Self = load_json(path)?;
        check_version(path, m.schema_version)?;
        if m.bias_sweeps.is_empty() {
            return Err(CliError::input(format!("{}: bias_sweeps: empty list", path.display())));
        }
        Ok(m)
    }
}

fn default_skip() -> usize {
    10
}

/// Eye folding settings; bit pattern given by PRBS order and seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EyeConfig {
    pub schema_version: u32,
    pub data_rate: f64,
    #[serde(default = "default_skip")]
    pub skip_ui: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_ui: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_p: Option<usize>,
    /// NRZ pattern behind the trace; metrics need it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prbs_order: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u32>,
}

impl EyeConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let c: Self = load_json(path)?;
        check_version(path, c.schema_version)?;
        if !(c.data_rate > 0.0) {
            return Err(CliError::input(format!("{}: data_rate: must be positive", path.display())));
        }
        if c.samples_per_ui == Some(0) || c.n_t == Some(0) || c.n_p == Some(0) {
            return Err(CliError::input(format!("{}: grid sizes must be positive", path.display())));
        }
        Ok(c)
    }
}
