//! Lumped electrical parasitics of the modulator.
//!
//! Topology: the source drives the pad node `v1` through the reference
//! impedance `Z0`. Three branches hang from the pad node to ground: the pad
//! capacitance, the substrate branch (`RSi` in series with `Cox`) and the
//! junction branch (`Rs` in series with the depletion capacitance `Cj`).
//! The modulating voltage is the voltage across `Cj`; positive values are
//! reverse bias.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fraction of `Vbi` kept between the junction voltage and the forward-bias
/// singularity of the depletion formula.
pub const CLAMP_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElectricalParams {
    #[serde(rename = "Cj0")]
    pub cj0: f64,
    #[serde(rename = "Vbi")]
    pub vbi: f64,
    pub mj: f64,
    #[serde(rename = "Rs")]
    pub rs: f64,
    #[serde(rename = "Cox")]
    pub cox: f64,
    #[serde(rename = "RSi")]
    pub rsi: f64,
    #[serde(rename = "Cpad")]
    pub cpad: f64,
    #[serde(rename = "Z0")]
    pub z0: f64,
    #[serde(rename = "Rh")]
    pub rh: f64,
}

/// Node voltages of the parasitic network.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElectricalState {
    pub v1: f64,
    pub v_cox: f64,
    pub v_m: f64,
}

impl ElectricalState {
    /// DC operating point for a constant source voltage.
    pub fn equilibrium(v: f64) -> Self {
        Self { v1: v, v_cox: v, v_m: v }
    }
}

impl ElectricalParams {
    /// Values extracted for the microdisk test device, 50 ohm source.
    pub fn reference_device() -> Self {
        Self {
            cj0: 143e-15,
            vbi: 1.328,
            mj: 0.5,
            rs: 79.28,
            cox: 65.3e-15,
            rsi: 1.4e3,
            cpad: 20.3e-15,
            z0: 50.0,
            rh: 8e3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("Cj0", self.cj0),
            ("Rs", self.rs),
            ("Cox", self.cox),
            ("RSi", self.rsi),
            ("Cpad", self.cpad),
            ("Z0", self.z0),
            ("Rh", self.rh),
            ("Vbi", self.vbi),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {value}"
                )));
            }
        }
        if !(self.mj > 0.0 && self.mj < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mj must lie in (0, 1), got {}",
                self.mj
            )));
        }
        Ok(())
    }

    /// Lowest junction voltage for which the depletion formula is used.
    pub fn forward_limit(&self) -> f64 {
        -self.vbi + CLAMP_FRACTION * self.vbi
    }

    /// Depletion capacitance `Cj0 / (1 + v_m/Vbi)^mj`.
    pub fn junction_capacitance(&self, v_m: f64) -> Result<f64> {
        let limit = self.forward_limit();
        if v_m.is_nan() || v_m <= limit {
            return Err(Error::ForwardBiasLimit { v_m, limit });
        }
        Ok(self.cj0 / (1.0 + v_m / self.vbi).powf(self.mj))
    }

    /// Time derivative of the node voltages.
    pub fn network_derivatives(&self, st: &ElectricalState, v_src: f64) -> Result<ElectricalState> {
        let cj = self.junction_capacitance(st.v_m)?;
        Ok(self.derivatives_with_cj(st, v_src, cj))
    }

    /// Same as [`network_derivatives`](Self::network_derivatives) with the
    /// junction capacitance supplied by the caller.
    pub fn derivatives_with_cj(&self, st: &ElectricalState, v_src: f64, cj: f64) -> ElectricalState {
        let i_src = (v_src - st.v1) / self.z0;
        let i_sub = (st.v1 - st.v_cox) / self.rsi;
        let i_j = (st.v1 - st.v_m) / self.rs;
        ElectricalState {
            v1: (i_src - i_sub - i_j) / self.cpad,
            v_cox: i_sub / self.cox,
            v_m: i_j / cj,
        }
    }

    /// Branch currents `(source, pad capacitor, substrate, junction)`.
    pub fn branch_currents(&self, st: &ElectricalState, v_src: f64, dv1_dt: f64) -> [f64; 4] {
        [
            (v_src - st.v1) / self.z0,
            self.cpad * dv1_dt,
            (st.v1 - st.v_cox) / self.rsi,
            (st.v1 - st.v_m) / self.rs,
        ]
    }

    /// Small-signal impedance looking into the pad at bias `v_bias`.
    pub fn input_impedance(&self, v_bias: f64, f: f64) -> Result<Complex64> {
        if !(f > 0.0) {
            return Err(Error::InvalidParameter(format!("frequency must be positive, got {f}")));
        }
        let cj = self.junction_capacitance(v_bias)?;
        Ok(self.impedance_with_cj(cj, f))
    }

    pub(crate) fn impedance_with_cj(&self, cj: f64, f: f64) -> Complex64 {
        let jw = Complex64::new(0.0, 2.0 * PI * f);
        let y_pad = jw * self.cpad;
        let y_sub = 1.0 / (self.rsi + 1.0 / (jw * self.cox));
        let y_j = 1.0 / (self.rs + 1.0 / (jw * cj));
        1.0 / (y_pad + y_sub + y_j)
    }

    /// Reflection coefficient referenced to `Z0`.
    pub fn s11(&self, v_bias: f64, f: f64) -> Result<Complex64> {
        let z = self.input_impedance(v_bias, f)?;
        Ok(reflection(z, self.z0))
    }

    /// Self-bandwidth `1/(2 pi Rs Cj)` of the junction branch.
    pub fn electrical_bandwidth(&self, v_bias: f64) -> Result<f64> {
        Ok(1.0 / (2.0 * PI * self.rs * self.junction_capacitance(v_bias)?))
    }
}

#[inline]
pub fn reflection(z: Complex64, z0: f64) -> Complex64 {
    (z - z0) / (z + z0)
}
