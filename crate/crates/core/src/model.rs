//! Lumped resonator model: voltage-dependent resonance and decay rates,
//! steady-state energy amplitude and the static Lorentzian transmission.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Maximum allowed distance between the analytic-frame reference and the
/// unbiased resonance.
pub const MAX_REFERENCE_OFFSET: f64 = 1e-9;

/// Angular optical frequency for a vacuum wavelength.
#[inline]
pub fn omega_of(lambda: f64) -> f64 {
    2.0 * PI * SPEED_OF_LIGHT / lambda
}

/// Horner evaluation of `c[0] + c[1] x + c[2] x^2 + ...`.
#[inline]
pub fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// Fitted optical parameters of one resonance.
///
/// Polynomials are in the modulation voltage `v` (positive = reverse bias).
/// `lambda0_coeffs` holds two (linear) or three (quadratic) coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    pub lambda_ref: f64,
    pub lambda0_coeffs: Vec<f64>,
    pub tau_c_coeffs: [f64; 3],
    pub tau_l_coeffs: [f64; 3],
    pub v_range: (f64, f64),
    pub gamma: f64,
}

/// Decay constants at one bias point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decay {
    pub tau_c: f64,
    pub tau_l: f64,
    /// Net amplitude decay time, `1/(1/tau_c + 1/tau_l)`.
    pub tau: f64,
    /// Energy cross-coupling factor `sqrt(2/tau_c)`.
    pub mu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityMetrics {
    /// Loaded quality factor `omega0 * tau / 2`.
    pub q: f64,
    /// Optical 3 dB bandwidth `omega0 / (2 pi Q)` (Hz).
    pub f_opt: f64,
    /// Full width at half depth of the power dip (Hz).
    pub fwhm: f64,
}

/// Baseband ODE coefficients at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalCoefficients {
    /// Resonance angular frequency relative to the reference frame (rad/s).
    pub omega0_rel: f64,
    pub inv_tau: f64,
    pub mu: f64,
}

impl ResonatorParams {
    /// Checks the structural and physical invariants of the parameter set.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.v_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "v_range must be an increasing finite interval, got ({lo}, {hi})"
            )));
        }
        if !(2..=3).contains(&self.lambda0_coeffs.len()) {
            return Err(Error::InvalidParameter(format!(
                "lambda0_coeffs must hold 2 or 3 coefficients, got {}",
                self.lambda0_coeffs.len()
            )));
        }
        let all = self
            .lambda0_coeffs
            .iter()
            .chain(&self.tau_c_coeffs)
            .chain(&self.tau_l_coeffs)
            .chain([&self.lambda_ref, &self.gamma]);
        if all.into_iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coefficient".into()));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        for v in validation_grid(lo, hi, &[&self.tau_c_coeffs, &self.tau_l_coeffs]) {
            self.tau_at(v)?;
            let l0 = poly_eval(&self.lambda0_coeffs, v);
            if l0 <= 0.0 {
                return Err(Error::NonPhysicalFit { what: "lambda0", value: l0, v });
            }
        }
        let l00 = poly_eval(&self.lambda0_coeffs, 0.0);
        if (self.lambda_ref - l00).abs() > MAX_REFERENCE_OFFSET {
            return Err(Error::InvalidParameter(format!(
                "lambda_ref {:e} m is more than 1 nm from lambda0(0) = {:e} m",
                self.lambda_ref, l00
            )));
        }
        Ok(())
    }

    fn check_range(&self, v: f64) -> Result<()> {
        let (min, max) = self.v_range;
        if v.is_nan() || v < min || v > max {
            return Err(Error::OutOfRangeBias { v, min, max });
        }
        Ok(())
    }

    /// Resonance wavelength including the thermo-optic shift `d_lambda`.
    pub fn resonance_wavelength(&self, v: f64, d_lambda: f64) -> Result<f64> {
        self.check_range(v)?;
        Ok(d_lambda + poly_eval(&self.lambda0_coeffs, v))
    }

    pub fn tau_at(&self, v: f64) -> Result<Decay> {
        self.check_range(v)?;
        self.decay_unchecked(v)
    }

    fn decay_unchecked(&self, v: f64) -> Result<Decay> {
        let tau_c = poly_eval(&self.tau_c_coeffs, v);
        if tau_c.is_nan() || tau_c <= 0.0 {
            return Err(Error::NonPhysicalFit { what: "tau_c", value: tau_c, v });
        }
        let tau_l = poly_eval(&self.tau_l_coeffs, v);
        if tau_l.is_nan() || tau_l <= 0.0 {
            return Err(Error::NonPhysicalFit { what: "tau_l", value: tau_l, v });
        }
        Ok(Decay {
            tau_c,
            tau_l,
            tau: 1.0 / (1.0 / tau_c + 1.0 / tau_l),
            mu: (2.0 / tau_c).sqrt(),
        })
    }

    pub fn omega_ref(&self) -> f64 {
        omega_of(self.lambda_ref)
    }

    /// Coefficients of the baseband coupled ODEs at bias `v` and thermal
    /// shift `d_lambda`.
    pub fn coefficients(&self, v: f64, d_lambda: f64) -> Result<OpticalCoefficients> {
        let decay = self.tau_at(v)?;
        let lambda0 = d_lambda + poly_eval(&self.lambda0_coeffs, v);
        Ok(OpticalCoefficients {
            omega0_rel: omega_of(lambda0) - self.omega_ref(),
            inv_tau: 1.0 / decay.tau,
            mu: decay.mu,
        })
    }

    /// Steady-state energy amplitude for a single-tone input at absolute
    /// angular frequency `omega_laser`.
    pub fn steady_state_amplitude(
        &self,
        v: f64,
        d_lambda: f64,
        omega_laser: f64,
        e_in: Complex64,
    ) -> Result<Complex64> {
        let decay = self.tau_at(v)?;
        let omega0 = omega_of(self.resonance_wavelength(v, d_lambda)?);
        Ok(steady_state(omega_laser - omega0, decay.tau, decay.mu, e_in))
    }

    /// Lorentzian power transmission `|Eout/Ein|^2` of the bus at a fixed
    /// laser wavelength.
    pub fn static_transmission(&self, v: f64, d_lambda: f64, lambda_laser: f64) -> Result<f64> {
        let decay = self.tau_at(v)?;
        let omega0 = omega_of(self.resonance_wavelength(v, d_lambda)?);
        Ok(lorentzian_power(
            omega_of(lambda_laser) - omega0,
            decay.tau_c,
            decay.tau_l,
        ))
    }

    pub fn quality_metrics(&self, v: f64) -> Result<QualityMetrics> {
        let decay = self.tau_at(v)?;
        let omega0 = omega_of(self.resonance_wavelength(v, 0.0)?);
        let q = omega0 * decay.tau / 2.0;
        Ok(QualityMetrics {
            q,
            f_opt: omega0 / (2.0 * PI * q),
            fwhm: 1.0 / (PI * decay.tau),
        })
    }

    /// Largest amplitude decay time over the validity window.
    pub fn tau_max(&self) -> Result<f64> {
        let (lo, hi) = self.v_range;
        validation_grid(lo, hi, &[&self.tau_c_coeffs, &self.tau_l_coeffs])
            .into_iter()
            .try_fold(0.0_f64, |m, v| Ok(m.max(self.tau_at(v)?.tau)))
    }
}

/// `a = -j mu Ein / (j detuning + 1/tau)`.
#[inline]
pub fn steady_state(detuning: f64, tau: f64, mu: f64, e_in: Complex64) -> Complex64 {
    -Complex64::i() * mu * e_in / Complex64::new(1.0 / tau, detuning)
}

/// Power transmission of the single-bus resonator for detuning
/// `omega - omega0`.
#[inline]
pub fn lorentzian_power(detuning: f64, tau_c: f64, tau_l: f64) -> f64 {
    let d2 = detuning * detuning;
    let diff = 1.0 / tau_l - 1.0 / tau_c;
    let sum = 1.0 / tau_l + 1.0 / tau_c;
    (d2 + diff * diff) / (d2 + sum * sum)
}

/// Dense sampling of the bias window plus the vertices of any quadratic
/// whose extremum falls inside it.
fn validation_grid(lo: f64, hi: f64, quadratics: &[&[f64; 3]]) -> Vec<f64> {
    const N: usize = 200;
    let mut grid: Vec<f64> = (0..=N)
        .map(|i| lo + (hi - lo) * i as f64 / N as f64)
        .collect();
    for q in quadratics {
        if q[2] != 0.0 {
            let vertex = -q[1] / (2.0 * q[2]);
            if vertex > lo && vertex < hi {
                grid.push(vertex);
            }
        }
    }
    grid
}

/// Physical ring geometry; informational only, the model derives the
/// coupling factor from `tau_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorGeometry {
    pub radius: f64,
    pub group_velocity: f64,
    pub power_coupling: f64,
    pub n_eff: f64,
    pub circumference: f64,
    pub order: u32,
}

impl ResonatorGeometry {
    /// `mu^2 = kappa^2 v_g / (2 pi R)`.
    pub fn mu_squared(&self) -> f64 {
        self.power_coupling * self.group_velocity / (2.0 * PI * self.radius)
    }

    /// `omega0 = 2 pi m c / (n L)`.
    pub fn resonance_omega(&self) -> f64 {
        2.0 * PI * self.order as f64 * SPEED_OF_LIGHT / (self.n_eff * self.circumference)
    }

    /// Checks the geometric coupling against `2/tau_c(0)` to 1 %.
    pub fn check_against(&self, params: &ResonatorParams) -> Result<()> {
        let expected = 2.0 / params.tau_at(0.0)?.tau_c;
        let rel = (self.mu_squared() - expected).abs() / expected;
        if rel > 0.01 {
            return Err(Error::InvalidParameter(format!(
                "geometric mu^2 {:e} differs from 2/tau_c {:e} by {:.2} %",
                self.mu_squared(),
                expected,
                rel * 100.0
            )));
        }
        Ok(())
    }
}
