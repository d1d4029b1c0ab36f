//! Least-squares polynomials and the bias / heater trend fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Evaluates `c[0] + c[1] x + ...`.
pub fn polyval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

/// Least-squares polynomial of the given degree, lowest order first.
///
/// The mean of `y` is removed before solving so that small variations on a
/// large offset (resonance wavelengths) keep their relative precision.
pub fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidParameter(format!("x has {n} samples, y has {}", y.len())));
    }
    if n < degree + 1 {
        return Err(Error::InsufficientPoints { need: degree + 1, got: n });
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let a = DMatrix::from_fn(n, degree + 1, |i, j| x[i].powi(j as i32));
    let b = DVector::from_iterator(n, y.iter().map(|v| v - mean));
    let svd = a.svd(true, true);
    let sol = svd
        .solve(&b, 1e-14)
        .map_err(|e| Error::FitDiverged(format!("polynomial solve failed: {e}")))?;
    let mut c: Vec<f64> = sol.iter().copied().collect();
    c[0] += mean;
    Ok(c)
}

/// Resonance parameters extracted at one bias point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BiasPoint {
    pub v: f64,
    pub lambda0: f64,
    pub tau_c: f64,
    pub tau_l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoltagePolys {
    pub lambda0_coeffs: Vec<f64>,
    pub tau_c_coeffs: [f64; 3],
    pub tau_l_coeffs: [f64; 3],
    /// Per-point residuals `(lambda0, tau_c, tau_l)`, data minus fit.
    pub residuals: Vec<[f64; 3]>,
    /// Relative RMS of each fit, normalized by the mean magnitude of the data.
    pub relative_rms: [f64; 3],
}

fn distinct(v: &[f64]) -> usize {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    s.len()
}

/// Fits the bias dependence of `lambda0` (degree 1 or 2) and of both decay
/// times (degree 2).
pub fn fit_voltage_polys(per_bias: &[BiasPoint], lambda0_degree: usize) -> Result<VoltagePolys> {
    if !(1..=2).contains(&lambda0_degree) {
        return Err(Error::InvalidParameter(format!("lambda0 degree must be 1 or 2, got {lambda0_degree}")));
    }
    let v: Vec<f64> = per_bias.iter().map(|p| p.v).collect();
    let got = distinct(&v);
    if got < 3 {
        return Err(Error::InsufficientPoints { need: 3, got });
    }
    let l0: Vec<f64> = per_bias.iter().map(|p| p.lambda0).collect();
    let tc: Vec<f64> = per_bias.iter().map(|p| p.tau_c).collect();
    let tl: Vec<f64> = per_bias.iter().map(|p| p.tau_l).collect();

    let lambda0_coeffs = polyfit(&v, &l0, lambda0_degree)?;
    let fit_tau = |y: &[f64]| -> Result<[f64; 3]> {
        let c = polyfit(&v, y, 2)?;
        Ok([c[0], c[1], c[2]])
    };
    let tau_c_coeffs = fit_tau(&tc)?;
    let tau_l_coeffs = fit_tau(&tl)?;

    let residuals: Vec<[f64; 3]> = per_bias
        .iter()
        .map(|p| {
            [
                p.lambda0 - polyval(&lambda0_coeffs, p.v),
                p.tau_c - polyval(&tau_c_coeffs, p.v),
                p.tau_l - polyval(&tau_l_coeffs, p.v),
            ]
        })
        .collect();
    let mut relative_rms = [0.0; 3];
    for (k, data) in [&l0, &tc, &tl].into_iter().enumerate() {
        let scale = data.iter().map(|x| x.abs()).sum::<f64>() / data.len() as f64;
        let ss = residuals.iter().map(|r| r[k] * r[k]).sum::<f64>() / residuals.len() as f64;
        relative_rms[k] = ss.sqrt() / scale;
    }
    if residuals.iter().flatten().any(|r| !r.is_finite()) {
        return Err(Error::FitDiverged("non-finite polynomial residual".into()));
    }
    Ok(VoltagePolys { lambda0_coeffs, tau_c_coeffs, tau_l_coeffs, residuals, relative_rms })
}

/// Heater tuning efficiency: slope of the resonance shift against heater
/// power, constrained through the unheated reference point.
pub fn fit_gamma(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientPoints { need: 2, got: points.len() });
    }
    let reference = points
        .iter()
        .find(|p| p.0.abs() < 1e-12)
        .ok_or_else(|| Error::InvalidParameter("heater fit needs a zero-power reference".into()))?
        .1;
    let (num, den) = points.iter().fold((0.0, 0.0), |(n, d), &(p, l)| (n + p * (l - reference), d + p * p));
    if den == 0.0 {
        return Err(Error::InsufficientPoints { need: 2, got: 1 });
    }
    Ok(num / den)
}
