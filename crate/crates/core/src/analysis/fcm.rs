//! Static spectra from slow laser chirps (frequency chirp method).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::TransmissionSweep;
use crate::model::SPEED_OF_LIGHT;
use crate::solver::{integrate_adaptive, Modulator, SimState, SolverConfig};
use crate::stimulus::{chirp_laser, HeaterDrive, Stimulus, VoltageDrive};

/// Minimum dwell per linewidth, in units of the longest photon lifetime,
/// below which a chirp is flagged as too fast.
pub const MIN_DWELL_TAU: f64 = 20.0;
/// Dwell used when a sweep duration is chosen automatically.
pub const DEFAULT_DWELL_TAU: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chirp {
    pub f_start: f64,
    pub f_stop: f64,
    pub duration: f64,
}

impl Chirp {
    pub fn offset(&self, t: f64) -> f64 {
        if self.duration <= 0.0 {
            return self.f_start;
        }
        self.f_start + (self.f_stop - self.f_start) * (t / self.duration).clamp(0.0, 1.0)
    }

    /// Time spent sweeping across one linewidth `1/(pi tau)`.
    pub fn dwell_per_linewidth(&self, tau: f64) -> f64 {
        let span = (self.f_stop - self.f_start).abs();
        if span == 0.0 {
            return f64::INFINITY;
        }
        self.duration / span / (PI * tau)
    }
}

/// Chirp duration giving `dwell_tau` photon lifetimes per linewidth.
pub fn chirp_duration(span_hz: f64, tau_max: f64, dwell_tau: f64) -> f64 {
    dwell_tau * PI * tau_max * tau_max * span_hz.abs()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FcmWarning {
    ChirpTooFast { dwell: f64, required: f64 },
}

impl std::fmt::Display for FcmWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FcmWarning::ChirpTooFast { dwell, required } => write!(
                f,
                "chirp too fast: dwell per linewidth {dwell:e} s is below {required:e} s"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcmSpectrum {
    pub sweep: TransmissionSweep,
    pub warnings: Vec<FcmWarning>,
}

pub fn check_chirp(chirp: &Chirp, tau_max: f64) -> Option<FcmWarning> {
    let dwell = chirp.dwell_per_linewidth(tau_max);
    let required = MIN_DWELL_TAU * tau_max;
    // small slack so a chirp built exactly at the limit passes
    (dwell < required * (1.0 - 1e-9)).then_some(FcmWarning::ChirpTooFast { dwell, required })
}

/// Maps output samples of a chirped run to a wavelength spectrum.
///
/// `samples` are `(t, output power)`; only samples within the chirp are
/// used. With zero span every sample maps to one wavelength and the result
/// is a single averaged point.
pub fn fcm_spectrum(
    samples: &[(f64, f64)],
    laser_power: f64,
    chirp: &Chirp,
    lambda_ref: f64,
    tau_max: Option<f64>,
) -> Result<FcmSpectrum> {
    if !(laser_power > 0.0) {
        return Err(Error::InvalidParameter(format!("laser power must be positive, got {laser_power}")));
    }
    let warnings: Vec<FcmWarning> = tau_max.and_then(|t| check_chirp(chirp, t)).into_iter().collect();
    let nu_ref = SPEED_OF_LIGHT / lambda_ref;
    let mut points: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(t, _)| *t >= 0.0 && *t <= chirp.duration * (1.0 + 1e-12))
        .map(|&(t, p)| (SPEED_OF_LIGHT / (nu_ref + chirp.offset(t)), p / laser_power))
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    // merge samples at the same wavelength
    let mut merged: Vec<(f64, f64, usize)> = Vec::with_capacity(points.len());
    for (l, t) in points {
        match merged.last_mut() {
            Some(last) if last.0 == l => {
                last.1 += t;
                last.2 += 1;
            }
            _ => merged.push((l, t, 1)),
        }
    }
    let points = merged.into_iter().map(|(l, t, n)| (l, t / n as f64)).collect();
    Ok(FcmSpectrum { sweep: TransmissionSweep { bias: 0.0, heater_power: 0.0, points }, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcmSweepSpec {
    pub bias: f64,
    pub heater_power: f64,
    pub laser_power: f64,
    /// Start and stop wavelengths of the chirp.
    pub lambda_start: f64,
    pub lambda_stop: f64,
    /// Chirp duration; chosen from the dwell criterion when absent.
    pub duration: Option<f64>,
    pub dwell_tau: f64,
    pub n_samples: usize,
}

/// Runs one chirped transient at fixed bias and heater power and returns
/// its spectrum, tagged with the bias and heater power.
pub fn sweep_fcm(model: &Modulator, spec: &FcmSweepSpec, rel_tol: f64) -> Result<FcmSpectrum> {
    let lambda_ref = model.optical.lambda_ref;
    let nu_ref = SPEED_OF_LIGHT / lambda_ref;
    let f_start = SPEED_OF_LIGHT / spec.lambda_start - nu_ref;
    let f_stop = SPEED_OF_LIGHT / spec.lambda_stop - nu_ref;
    let tau_max = model.optical.tau_max()?;
    let duration = spec.duration.unwrap_or_else(|| chirp_duration(f_stop - f_start, tau_max, spec.dwell_tau));
    let chirp = Chirp { f_start, f_stop, duration };
    if spec.n_samples < 2 {
        return Err(Error::InvalidParameter("a sweep needs at least two samples".into()));
    }
    let stim = Stimulus {
        voltage: VoltageDrive::constant(spec.bias),
        laser: chirp_laser(spec.laser_power, f_start, f_stop, duration)?,
        heater: HeaterDrive::constant(spec.heater_power),
    };
    let mut cfg = SolverConfig::with_end(duration);
    cfg.rel_tol = rel_tol;
    cfg.max_step = (duration / 200.0).max(1e-15);
    cfg.output_dt = Some(duration / (spec.n_samples - 1) as f64);
    let init = SimState::steady(model, &stim)?;
    let trace = integrate_adaptive(model, &cfg, &stim, Some(init))?;
    let samples: Vec<(f64, f64)> = trace.points.iter().map(|p| (p.t, p.p_out())).collect();
    let mut out = fcm_spectrum(&samples, spec.laser_power, &chirp, lambda_ref, Some(tau_max))?;
    out.sweep.bias = spec.bias;
    out.sweep.heater_power = spec.heater_power;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_span_gives_one_point() {
        let chirp = Chirp { f_start: 1e9, f_stop: 1e9, duration: 1e-9 };
        let samples: Vec<(f64, f64)> = (0..10).map(|i| (i as f64 * 1e-10, 0.5e-3)).collect();
        let s = fcm_spectrum(&samples, 1e-3, &chirp, 1566.7e-9, Some(30e-12)).unwrap();
        assert_eq!(s.sweep.points.len(), 1);
        assert!((s.sweep.points[0].1 - 0.5).abs() < 1e-15);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn output_is_sorted_by_wavelength() {
        // increasing frequency means decreasing wavelength
        let chirp = Chirp { f_start: -10e9, f_stop: 10e9, duration: 1e-6 };
        let samples: Vec<(f64, f64)> = (0..=100).map(|i| (i as f64 * 1e-8, 1e-3)).collect();
        let s = fcm_spectrum(&samples, 1e-3, &chirp, 1566.7e-9, None).unwrap();
        assert_eq!(s.sweep.points.len(), 101);
        assert!(s.sweep.points.windows(2).all(|w| w[1].0 > w[0].0));
        let nu = SPEED_OF_LIGHT / s.sweep.points[0].0;
        assert!((nu - (SPEED_OF_LIGHT / 1566.7e-9 + 10e9)).abs() < 1.0);
    }

    #[test]
    fn fast_chirp_is_flagged() {
        let tau = 10e-12;
        let span = 40e9;
        let ok = Chirp { f_start: 0.0, f_stop: span, duration: chirp_duration(span, tau, 20.0) };
        assert!(check_chirp(&ok, tau).is_none());
        let fast = Chirp { duration: ok.duration / 2.0, ..ok };
        assert!(matches!(check_chirp(&fast, tau), Some(FcmWarning::ChirpTooFast { .. })));
    }
}
