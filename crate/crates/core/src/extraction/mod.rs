//! Measurement-to-model extraction: resonance fits per bias, bias and heater
//! trends, junction C–V and the parasitic network from S11.

pub mod circuit;
pub mod lm;
pub mod lorentz;
pub mod poly;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use circuit::{fit_cv, fit_s11, log_grid, CvFit, S11Fit, S11Mask};
pub use lorentz::{deembed, find_resonance, find_resonance_window, fit_tau, CouplingBranch, Deembedded, TauFit};
pub use poly::{fit_gamma, fit_voltage_polys, polyfit, polyval, BiasPoint, VoltagePolys};

use crate::card::{HeaterSettings, ModelCard};
use crate::electrical::ElectricalParams;
use crate::error::{Error, Result};
use crate::model::ResonatorParams;

pub const FIT_REPORT_VERSION: u32 = 1;

/// Power transmission against wavelength at one bias / heater condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionSweep {
    pub bias: f64,
    pub heater_power: f64,
    /// `(wavelength m, power transmission)`
    pub points: Vec<(f64, f64)>,
}

impl TransmissionSweep {
    pub fn validate(&self) -> Result<()> {
        for (i, w) in self.points.windows(2).enumerate() {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidParameter(format!(
                    "wavelengths must increase strictly (point {})",
                    i + 1
                )));
            }
        }
        if let Some((i, p)) = self.points.iter().enumerate().find(|(_, p)| !(p.1 > 0.0 && p.1.is_finite())) {
            return Err(Error::InvalidParameter(format!("transmission at point {i} is {}", p.1)));
        }
        Ok(())
    }

    /// Samples the static transmission of `params` on a uniform grid.
    pub fn synthesize(params: &ResonatorParams, bias: f64, heater_power: f64, lambdas: &[f64]) -> Result<Self> {
        let d_lambda = params.gamma * heater_power;
        let points = lambdas
            .iter()
            .map(|&l| Ok((l, params.static_transmission(bias, d_lambda, l)?)))
            .collect::<Result<_>>()?;
        Ok(Self { bias, heater_power, points })
    }
}

/// Uniform wavelength grid `start, start + step, ..` with `n` points.
pub fn wavelength_grid(start: f64, step: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| start + step * i as f64).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct S11Data {
    pub bias: f64,
    pub points: Vec<(f64, Complex64)>,
}

/// Everything the extraction flow consumes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MeasurementSet {
    pub bias_sweeps: Vec<TransmissionSweep>,
    pub heater_sweeps: Vec<TransmissionSweep>,
    /// `(heater voltage, dissipated power)` pairs for the heater resistance.
    pub heater_drive: Vec<(f64, f64)>,
    pub s11: Option<S11Data>,
    pub cv: Vec<(f64, f64)>,
    /// Starting point and fixed values (`Z0`, `Rh`) for the network fit.
    pub electrical_init: Option<ElectricalParams>,
    /// Reference wavelength of the analytic frame; defaults to the fitted
    /// unbiased resonance.
    pub lambda_ref: Option<f64>,
    pub heater: HeaterSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    pub lambda0_degree: usize,
    pub branch: CouplingBranch,
    pub s11_mask: S11Mask,
    /// Half-width (samples) of the least-squares window used to locate each
    /// resonance; 1 interpolates the three samples around the minimum.
    pub resonance_window: usize,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self { lambda0_degree: 2, branch: CouplingBranch::default(), s11_mask: S11Mask::default(), resonance_window: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasFit {
    pub bias: f64,
    pub lambda0: f64,
    pub t0: f64,
    pub tau_l: f64,
    pub tau_c: f64,
    pub residual_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeaterFit {
    /// `(heater power W, resonance wavelength m)`
    pub points: Vec<(f64, f64)>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub per_bias: Vec<BiasFit>,
    pub polynomials: VoltagePolys,
    pub heater: Option<HeaterFit>,
    pub cv: Option<CvFit>,
    pub s11: Option<S11Fit>,
    pub rh: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub card: ModelCard,
    pub report: FitReport,
}

/// De-embeds a sweep, then locates and fits its resonance.
pub fn fit_sweep(sweep: &TransmissionSweep, opts: &ExtractOptions) -> Result<BiasFit> {
    let d = deembed(sweep)?;
    let (lambda0, t0) = find_resonance_window(&d.sweep, opts.resonance_window)?;
    let tau = fit_tau(&d.sweep, lambda0, t0, opts.branch)?;
    Ok(BiasFit { bias: sweep.bias, lambda0, t0, tau_l: tau.tau_l, tau_c: tau.tau_c, residual_rms: tau.residual_rms })
}

/// Runs the whole flow: per-bias resonance fits, bias polynomials, heater
/// efficiency, then C–V and S11 for the network.
pub fn extract(set: &MeasurementSet, opts: &ExtractOptions) -> Result<Extraction> {
    let mut warnings = Vec::new();

    let per_bias: Vec<BiasFit> = set
        .bias_sweeps
        .par_iter()
        .map(|s| fit_sweep(s, opts))
        .collect::<Result<_>>()?;
    let points: Vec<BiasPoint> = per_bias
        .iter()
        .map(|f| BiasPoint { v: f.bias, lambda0: f.lambda0, tau_c: f.tau_c, tau_l: f.tau_l })
        .collect();
    let polys = fit_voltage_polys(&points, opts.lambda0_degree)?;
    let v_range = per_bias
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), f| (lo.min(f.bias), hi.max(f.bias)));

    let heater = if set.heater_sweeps.is_empty() {
        warnings.push("no heater sweeps: gamma set to 0".to_string());
        None
    } else {
        let mut pts: Vec<(f64, f64)> = set
            .heater_sweeps
            .par_iter()
            .map(|s| fit_sweep(s, opts).map(|f| (s.heater_power, f.lambda0)))
            .collect::<Result<_>>()?;
        if !pts.iter().any(|p| p.0 == 0.0) {
            let bias = set.heater_sweeps[0].bias;
            pts.insert(0, (0.0, polyval(&polys.lambda0_coeffs, bias)));
            warnings.push(format!("no unheated sweep: reference taken from the bias fit at {bias} V"));
        }
        let gamma = fit_gamma(&pts)?;
        Some(HeaterFit { points: pts, gamma })
    };

    let cv = if set.cv.is_empty() { None } else { Some(fit_cv(&set.cv)?) };

    let mut init = match set.electrical_init {
        Some(ep) => ep,
        None => {
            if set.s11.is_none() {
                return Err(Error::InvalidParameter(
                    "no S11 data and no electrical parameters supplied".into(),
                ));
            }
            warnings.push("no electrical starting point: using typical pad/junction values".to_string());
            ElectricalParams::reference_device()
        }
    };
    if let Some(cv) = cv {
        init.cj0 = cv.cj0;
        init.vbi = cv.vbi;
        init.mj = cv.mj;
    }
    let s11 = match &set.s11 {
        Some(data) => Some(fit_s11(&data.points, data.bias, &init, opts.s11_mask)?),
        None => {
            warnings.push("no S11 data: network elements taken from the starting point".to_string());
            None
        }
    };
    let mut electrical = s11.as_ref().map_or(init, |f| f.params);

    let rh = if set.heater_drive.is_empty() {
        None
    } else {
        let mut acc = 0.0;
        for &(v, p) in &set.heater_drive {
            if !(p > 0.0) {
                return Err(Error::InvalidParameter(format!("heater power must be positive at {v} V")));
            }
            acc += v * v / p;
        }
        Some(acc / set.heater_drive.len() as f64)
    };
    if let Some(r) = rh {
        electrical.rh = r;
    }

    let lambda_ref = set
        .lambda_ref
        .unwrap_or_else(|| polyval(&polys.lambda0_coeffs, 0.0f64.clamp(v_range.0, v_range.1)));
    let optical = ResonatorParams {
        lambda_ref,
        lambda0_coeffs: polys.lambda0_coeffs.clone(),
        tau_c_coeffs: polys.tau_c_coeffs,
        tau_l_coeffs: polys.tau_l_coeffs,
        v_range,
        gamma: heater.as_ref().map_or(0.0, |h| h.gamma),
    };
    optical.validate()?;
    electrical.validate()?;

    let report = FitReport {
        schema_version: FIT_REPORT_VERSION,
        per_bias,
        polynomials: polys,
        heater,
        cv,
        s11,
        rh,
        warnings,
    };
    Ok(Extraction { card: ModelCard::new(optical, electrical, set.heater), report })
}
