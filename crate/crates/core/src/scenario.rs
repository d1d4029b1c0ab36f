//! Scenario files describing one modulated transient run.

use serde::{Deserialize, Serialize};

use crate::card::ModelCard;
use crate::error::{Error, Result};
use crate::solver::{Modulator, SolverConfig};
use crate::stimulus::{
    cw_laser, default_pam4_levels, nrz_waveform, pam4_symbols, pam4_waveform, prbs_bits, HeaterDrive,
    HeaterLevel, Stimulus, VoltageDrive,
};

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Nrz,
    Pam4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaserSpec {
    #[serde(rename = "power_mW")]
    pub power_mw: f64,
    #[serde(rename = "lambda_L_nm")]
    pub lambda_l_nm: f64,
    /// Overrides the card's analytic-frame reference when present.
    #[serde(rename = "lambda_ref_nm", default, skip_serializing_if = "Option::is_none")]
    pub lambda_ref_nm: Option<f64>,
}

/// Heater drive as voltage or power; power wins when both are given.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeaterSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<f64>,
    #[serde(rename = "mW", default, skip_serializing_if = "Option::is_none")]
    pub mw: Option<f64>,
}

impl HeaterSpec {
    pub fn level(&self) -> Option<HeaterLevel> {
        match (self.mw, self.v) {
            (Some(p), _) => Some(HeaterLevel::Power(p * 1e-3)),
            (None, Some(v)) => Some(HeaterLevel::Voltage(v)),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol_field: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol_voltage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_step_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_step_s: Option<f64>,
    /// Uniform output spacing; accepted steps are written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dt_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition {
    /// Ring at the steady state of the initial drive.
    #[default]
    Steady,
    /// Empty ring, parasitics at their DC point.
    Dark,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    /// Symbol rate (Bd); equals the bit rate for NRZ.
    pub data_rate: f64,
    pub format: Format,
    pub vpp: f64,
    pub v_bias: f64,
    pub prbs_order: u32,
    pub seed: u32,
    pub t_edge_ui: f64,
    pub laser: LaserSpec,
    #[serde(default)]
    pub heater: HeaterSpec,
    pub n_ui: usize,
    #[serde(default = "default_gray")]
    pub gray: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_end_s: Option<f64>,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub solver: SolverSpec,
}

fn default_gray() -> bool {
    true
}

/// Everything needed to run a scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub model: Modulator,
    pub stimulus: Stimulus,
    pub ui: f64,
    /// Transmitted bits (NRZ) or the bits behind the PAM4 symbols.
    pub bits: Vec<u8>,
    /// Symbol index per unit interval.
    pub symbols: Vec<u8>,
    pub solver: SolverConfig,
}

fn field_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::InvalidParameter(format!("{field}: {msg}"))
}

impl Scenario {
    pub fn ui(&self) -> f64 {
        1.0 / self.data_rate
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCENARIO_VERSION {
            return Err(field_err("schema_version", format!("unsupported version {}", self.schema_version)));
        }
        if !(self.data_rate > 0.0 && self.data_rate.is_finite()) {
            return Err(field_err("data_rate", "must be positive"));
        }
        if !(self.vpp >= 0.0) {
            return Err(field_err("vpp", "must be non-negative"));
        }
        if !(self.t_edge_ui > 0.0 && self.t_edge_ui < 1.0) {
            return Err(field_err("t_edge_ui", "must lie in (0, 1)"));
        }
        if !(self.laser.power_mw >= 0.0) {
            return Err(field_err("laser.power_mW", "must be non-negative"));
        }
        if !(self.laser.lambda_l_nm > 0.0) {
            return Err(field_err("laser.lambda_L_nm", "must be positive"));
        }
        if let Some(t) = self.t_end_s {
            if !(t >= 0.0) {
                return Err(field_err("t_end_s", "must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn t_end(&self) -> f64 {
        self.t_end_s.unwrap_or(self.n_ui as f64 * self.ui())
    }

    pub fn prepare(&self, card: &ModelCard) -> Result<Prepared> {
        self.validate()?;
        let mut card = card.clone();
        if let Some(r) = self.laser.lambda_ref_nm {
            card.optical.lambda_ref = r * 1e-9;
        }
        let model = card.modulator()?;
        let ui = self.ui();
        let t_edge = self.t_edge_ui * ui;
        let lo = self.v_bias - self.vpp / 2.0;
        let hi = self.v_bias + self.vpp / 2.0;

        let (bits, symbols, pwl) = match self.format {
            Format::Nrz => {
                let bits = prbs_bits(self.prbs_order, self.seed, self.n_ui)?;
                let pwl = nrz_waveform(&bits, ui, lo, hi, t_edge)?;
                (bits.clone(), bits, pwl)
            }
            Format::Pam4 => {
                let bits = prbs_bits(self.prbs_order, self.seed, 2 * self.n_ui)?;
                let levels = default_pam4_levels(self.v_bias, self.vpp);
                let pwl = pam4_waveform(&bits, ui, levels, t_edge, self.gray)?;
                let symbols = pam4_symbols(&bits, self.gray);
                (bits, symbols, pwl)
            }
        };

        let laser = cw_laser(
            self.laser.power_mw * 1e-3,
            self.laser.lambda_l_nm * 1e-9,
            model.optical.lambda_ref,
        )?;
        let heater = match self.heater.level() {
            Some(level) => HeaterDrive::constant(level.power(&model.thermal)?),
            None => HeaterDrive::off(),
        };

        let mut solver = SolverConfig::for_ui(ui, self.t_end());
        let s = &self.solver;
        if let Some(v) = s.rel_tol {
            solver.rel_tol = v;
        }
        if let Some(v) = s.abs_tol_field {
            solver.abs_tol_field = v;
        }
        if let Some(v) = s.abs_tol_voltage {
            solver.abs_tol_voltage = v;
        }
        if let Some(v) = s.max_step_s {
            solver.max_step = v;
        }
        if let Some(v) = s.min_step_s {
            solver.min_step = v;
        }
        solver.output_dt = s.output_dt_s;
        solver.validate().map_err(|e| field_err("solver", e))?;

        Ok(Prepared {
            model,
            stimulus: Stimulus { voltage: VoltageDrive::Pwl(pwl), laser, heater },
            ui,
            bits,
            symbols,
            solver,
        })
    }
}
