//! Embedded microheater: resistive drive and thermo-optic resonance shift.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest heater voltage the device is rated for.
pub const MAX_HEATER_VOLTAGE: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalParams {
    /// Tuning efficiency (m/W).
    pub gamma: f64,
    /// Heater resistance (ohm), held constant.
    #[serde(rename = "Rh")]
    pub rh: f64,
    /// First-order thermal time constant (s).
    pub tau_h: f64,
    /// Integrate the thermal lag instead of applying the static shift.
    pub dynamic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ThermalState {
    /// Current thermo-optic red shift of the resonance (m).
    pub d_lambda: f64,
}

impl ThermalParams {
    pub fn reference_device() -> Self {
        Self { gamma: 251e-9, rh: 8e3, tau_h: 15e-6, dynamic: false }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, value) in [("gamma", self.gamma), ("Rh", self.rh), ("tau_h", self.tau_h)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {value}")));
            }
        }
        Ok(())
    }

    /// Dissipated power and current `(Ph, Ih)` for a heater voltage.
    pub fn heater_power(&self, v_h: f64) -> Result<(f64, f64)> {
        if v_h > MAX_HEATER_VOLTAGE {
            return Err(Error::HeaterOverdrive { v_h, max: MAX_HEATER_VOLTAGE });
        }
        if !(v_h >= 0.0) {
            return Err(Error::InvalidParameter(format!("heater voltage must be >= 0, got {v_h}")));
        }
        let i_h = v_h / self.rh;
        Ok((v_h * i_h, i_h))
    }

    pub fn wavelength_shift_static(&self, p_h: f64) -> f64 {
        self.gamma * p_h
    }

    /// Exact update of `d(dLambda)/dt = (gamma Ph - dLambda) / tau_h` over `dt`
    /// with `Ph` held constant.
    pub fn wavelength_shift_step(&self, st: ThermalState, p_h: f64, dt: f64) -> ThermalState {
        let target = self.wavelength_shift_static(p_h);
        let decay = (-dt / self.tau_h).exp();
        ThermalState { d_lambda: target + (st.d_lambda - target) * decay }
    }

    /// Right-hand side of the thermal lag, used by the joint integrator.
    #[inline]
    pub fn shift_rate(&self, d_lambda: f64, p_h: f64) -> f64 {
        (self.wavelength_shift_static(p_h) - d_lambda) / self.tau_h
    }
}
