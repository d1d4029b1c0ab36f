//! JSON model card: the optical fit at top level, plus the parasitic
//! network and heater settings.

use serde::{Deserialize, Serialize};

use crate::electrical::ElectricalParams;
use crate::error::{Error, Result};
use crate::model::ResonatorParams;
use crate::solver::Modulator;
use crate::thermal::ThermalParams;

pub const MODEL_CARD_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeaterSettings {
    pub tau_h: f64,
    #[serde(default)]
    pub dynamic: bool,
}

impl Default for HeaterSettings {
    fn default() -> Self {
        Self { tau_h: 15e-6, dynamic: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelCard {
    pub schema_version: u32,
    #[serde(flatten)]
    pub optical: ResonatorParams,
    pub electrical: ElectricalParams,
    #[serde(default)]
    pub heater: HeaterSettings,
}

impl ModelCard {
    pub fn new(optical: ResonatorParams, electrical: ElectricalParams, heater: HeaterSettings) -> Self {
        Self { schema_version: MODEL_CARD_VERSION, optical, electrical, heater }
    }

    pub fn thermal(&self) -> ThermalParams {
        ThermalParams {
            gamma: self.optical.gamma,
            rh: self.electrical.rh,
            tau_h: self.heater.tau_h,
            dynamic: self.heater.dynamic,
        }
    }

    pub fn modulator(&self) -> Result<Modulator> {
        if self.schema_version != MODEL_CARD_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model card schema_version {}",
                self.schema_version
            )));
        }
        Modulator::new(self.optical.clone(), self.electrical, self.thermal())
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model card serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn card_round_trip_keeps_optical_fields_at_top_level() {
        let card = ModelCard::new(
            ResonatorParams {
                lambda_ref: 1566.7e-9,
                lambda0_coeffs: vec![1566.7e-9, 60e-12],
                tau_c_coeffs: [15e-12, 0.0, 0.0],
                tau_l_coeffs: [25e-12, 0.0, 0.0],
                v_range: (-0.5, 2.5),
                gamma: 251e-9,
            },
            ElectricalParams::reference_device(),
            HeaterSettings::default(),
        );
        let text = card.to_json();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v.get("lambda0_coeffs").is_some());
        assert_eq!(v["electrical"]["Cj0"], 143e-15);
        assert_eq!(ModelCard::from_json(&text).unwrap(), card);
        assert!(card.modulator().is_ok());
    }
}
