//! Per-sweep resonance extraction: baseline de-embedding, resonance
//! location and the single-variable decay-time fit.

use serde::{Deserialize, Serialize};

use super::poly::{polyfit, polyval};
use super::TransmissionSweep;
use crate::error::{Error, Result};
use crate::model::omega_of;

/// Which decay channel is taken to dominate when the resonance depth alone
/// cannot tell them apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingBranch {
    /// `1/tau_c > 1/tau_l`: bus coupling is the faster decay (`tau_c < tau_l`).
    #[default]
    CouplingDominated,
    /// `1/tau_l > 1/tau_c`.
    LossDominated,
}

/// Off-resonance exclusion zone, in multiples of the estimated FWHM.
pub const OFF_RESONANCE_FWHM: f64 = 5.0;
const MAX_BASELINE_ITER: usize = 60;
/// Residual RMS (amplitude units) above which a resonance fit is rejected.
pub const MAX_FIT_RMS: f64 = 0.05;

#[derive(Debug, Clone, PartialEq)]
pub struct Deembedded {
    pub sweep: TransmissionSweep,
    /// Baseline polynomial in `x = (lambda - center) / scale`.
    pub baseline: Vec<f64>,
    pub center: f64,
    pub scale: f64,
}

impl Deembedded {
    pub fn baseline_at(&self, lambda: f64) -> f64 {
        polyval(&self.baseline, (lambda - self.center) / self.scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TauFit {
    pub tau_l: f64,
    pub tau_c: f64,
    pub residual_rms: f64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Width of the raw dip at half depth, by linear interpolation of the
/// crossings on both sides of the minimum.
fn half_depth_width(lam: &[f64], t: &[f64], i_min: usize, top: f64) -> Option<f64> {
    let level = 0.5 * (top + t[i_min]);
    let cross = |range: &mut dyn Iterator<Item = usize>| -> Option<f64> {
        let mut prev = i_min;
        for i in range {
            if t[i] >= level {
                let f = (level - t[prev]) / (t[i] - t[prev]);
                return Some(lam[prev] + f * (lam[i] - lam[prev]));
            }
            prev = i;
        }
        None
    };
    let right = cross(&mut ((i_min + 1)..lam.len()));
    let left = cross(&mut (0..i_min).rev());
    match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        (Some(l), None) => Some(2.0 * (lam[i_min] - l)),
        (None, Some(r)) => Some(2.0 * (r - lam[i_min])),
        (None, None) => None,
    }
}

/// Normalizes a raw sweep by a low-order background polynomial fitted to the
/// points far from the dip. The background is refined jointly with a
/// Lorentzian fit so that the resonance tails do not bias it.
pub fn deembed(sweep: &TransmissionSweep) -> Result<Deembedded> {
    sweep.validate()?;
    let n = sweep.points.len();
    if n < 20 {
        return Err(Error::InsufficientPoints { need: 20, got: n });
    }
    let lam: Vec<f64> = sweep.points.iter().map(|p| p.0).collect();
    let t: Vec<f64> = sweep.points.iter().map(|p| p.1).collect();
    let (i_min, &t_min) = t
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty");
    let top = median(t.clone());
    if !(t_min < 0.9 * top) {
        return Err(Error::NoResonanceFound(format!(
            "minimum {t_min:.4} is not below 90% of the median level {top:.4}"
        )));
    }
    let fwhm = half_depth_width(&lam, &t, i_min, top)
        .ok_or_else(|| Error::NoResonanceFound("dip never recovers to half depth".into()))?;
    let lam_min = lam[i_min];
    let off: Vec<usize> = (0..n)
        .filter(|&i| (lam[i] - lam_min).abs() > OFF_RESONANCE_FWHM * fwhm)
        .collect();
    if off.is_empty() {
        return Err(Error::NoResonanceFound(
            "no off-resonance points beyond 5 linewidths of the dip".into(),
        ));
    }
    let has_left = off.iter().any(|&i| lam[i] < lam_min);
    let has_right = off.iter().any(|&i| lam[i] > lam_min);
    let degree = if has_left && has_right { 2.min(off.len() - 1) } else { 0 };

    let center = 0.5 * (lam[0] + lam[n - 1]);
    let scale = 0.5 * (lam[n - 1] - lam[0]);
    let x_off: Vec<f64> = off.iter().map(|&i| (lam[i] - center) / scale).collect();

    let mut target: Vec<f64> = off.iter().map(|&i| t[i]).collect();
    let mut baseline = polyfit(&x_off, &target, degree)?;
    for _ in 0..MAX_BASELINE_ITER {
        let normalized = normalize(sweep, &baseline, center, scale);
        let Ok(shape) = lorentz_shape(&normalized) else { break };
        for (k, &i) in off.iter().enumerate() {
            target[k] = t[i] / shape(lam[i]);
        }
        let next = polyfit(&x_off, &target, degree)?;
        let change = x_off
            .iter()
            .map(|&x| ((polyval(&next, x) - polyval(&baseline, x)) / polyval(&baseline, x)).abs())
            .fold(0.0, f64::max);
        baseline = next;
        if change < 1e-13 {
            break;
        }
    }
    if x_off.iter().any(|&x| !(polyval(&baseline, x) > 0.0)) {
        return Err(Error::NoResonanceFound("background fit is not positive".into()));
    }
    Ok(Deembedded { sweep: normalize(sweep, &baseline, center, scale), baseline, center, scale })
}

fn normalize(sweep: &TransmissionSweep, baseline: &[f64], center: f64, scale: f64) -> TransmissionSweep {
    TransmissionSweep {
        points: sweep
            .points
            .iter()
            .map(|&(l, t)| (l, t / polyval(baseline, (l - center) / scale)))
            .collect(),
        ..sweep.clone()
    }
}

/// Fitted Lorentzian power shape of a normalized sweep (branch-independent).
fn lorentz_shape(sweep: &TransmissionSweep) -> Result<impl Fn(f64) -> f64> {
    let (lambda0, t0) = find_resonance(sweep)?;
    let fit = fit_tau(sweep, lambda0, t0, CouplingBranch::default())?;
    let omega0 = omega_of(lambda0);
    Ok(move |l: f64| crate::model::lorentzian_power(omega_of(l) - omega0, fit.tau_c, fit.tau_l))
}

/// Locates the resonance of a normalized sweep.
///
/// Returns the resonance wavelength and the amplitude transmission `T0` at
/// resonance. The three samples around the discrete minimum are
/// interpolated by a parabola in `(omega, 1/(1 - T))`, which is exactly
/// quadratic for a Lorentzian dip.
pub fn find_resonance(sweep: &TransmissionSweep) -> Result<(f64, f64)> {
    find_resonance_window(sweep, 1)
}

/// Like [`find_resonance`] but fits the parabola by least squares through
/// the `2 * half_window + 1` samples centred on the discrete minimum, which
/// averages down measurement noise.
pub fn find_resonance_window(sweep: &TransmissionSweep, half_window: usize) -> Result<(f64, f64)> {
    let pts = &sweep.points;
    let n = pts.len();
    if n < 3 || half_window == 0 {
        return Err(Error::NoResonanceFound("need at least three samples".into()));
    }
    let (i_min, _) = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("non-empty");
    if i_min == 0 || i_min == n - 1 {
        return Err(Error::NoResonanceFound("minimum lies on the sweep edge".into()));
    }
    let lo = i_min.saturating_sub(half_window);
    let hi = (i_min + half_window).min(n - 1);
    let omega_c = omega_of(pts[i_min].0);
    let mut xs = Vec::with_capacity(hi - lo + 1);
    let mut ys = Vec::with_capacity(hi - lo + 1);
    for &(l, t) in &pts[lo..=hi] {
        if !(t < 1.0) {
            return Err(Error::NoResonanceFound("dip does not fall below unity".into()));
        }
        xs.push((omega_of(l) - omega_c) * 1e-9);
        ys.push(1.0 / (1.0 - t));
    }
    let c = polyfit(&xs, &ys, 2)?;
    if !(c[2] > 0.0) {
        return Err(Error::NoResonanceFound("no curvature at the minimum".into()));
    }
    let x0 = -c[1] / (2.0 * c[2]);
    let y0 = polyval(&c, x0);
    let omega0 = omega_c + x0 * 1e9;
    let lambda0 = 2.0 * std::f64::consts::PI * crate::model::SPEED_OF_LIGHT / omega0;
    let t0_sq = (1.0 - 1.0 / y0).max(0.0);
    Ok((lambda0, t0_sq.sqrt()))
}

/// Amplitude transmission of the reduced single-variable Lorentzian, with
/// `tau_s` the shorter of the two decay times.
#[inline]
fn reduced_amplitude(detuning: f64, a: f64, b: f64, tau_s: f64) -> f64 {
    let d2 = detuning * detuning;
    let na = a / tau_s;
    let nb = b / tau_s;
    ((d2 + na * na) / (d2 + nb * nb)).sqrt()
}

/// Fits the decay times of a normalized sweep given its resonance.
///
/// The depth fixes the ratio of the two decay times, so only the shorter
/// one is searched for (golden-section search on a log scale, refined by
/// successive parabolic interpolation); the other follows from the ratio.
pub fn fit_tau(sweep: &TransmissionSweep, lambda0: f64, t0: f64, branch: CouplingBranch) -> Result<TauFit> {
    if !(t0 >= 0.0) {
        return Err(Error::InvalidParameter(format!("T0 must be non-negative, got {t0}")));
    }
    if t0 >= 0.999 {
        return Err(Error::DegenerateT0(t0));
    }
    let a = 2.0 * t0 / (1.0 + t0);
    let b = 2.0 / (1.0 + t0);
    let omega0 = omega_of(lambda0);
    let data: Vec<(f64, f64)> = sweep
        .points
        .iter()
        .map(|&(l, t)| (omega_of(l) - omega0, t.max(0.0).sqrt()))
        .collect();
    let cost = |log_tau: f64| -> f64 {
        let tau_s = log_tau.exp();
        data.iter()
            .map(|&(d, amp)| {
                let r = reduced_amplitude(d, a, b, tau_s) - amp;
                r * r
            })
            .sum()
    };

    // initial guess from the half-depth width in angular frequency
    let level = 0.5 * (1.0 + t0 * t0);
    let half = data
        .iter()
        .filter(|(_, amp)| amp * amp <= level)
        .map(|(d, _)| d.abs())
        .fold(0.0, f64::max);
    let guess = if half > 0.0 { b / half } else { 1e-11 };

    // coarse log-spaced scan to bracket the minimum
    const SCAN: usize = 41;
    let span = 10f64.ln();
    let grid: Vec<f64> = (0..SCAN)
        .map(|i| guess.ln() - span + 2.0 * span * i as f64 / (SCAN - 1) as f64)
        .collect();
    let costs: Vec<f64> = grid.iter().map(|&u| cost(u)).collect();
    let k = costs
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .map(|(i, _)| i)
        .expect("non-empty scan");
    let lo = grid[k.saturating_sub(1)];
    let hi = grid[(k + 1).min(SCAN - 1)];
    let u = minimize_scalar(&cost, lo, hi, 1e-12);

    let tau_s = u.exp();
    let rms = (cost(u) / data.len() as f64).sqrt();
    if !(rms <= MAX_FIT_RMS) {
        return Err(Error::FitDiverged(format!("Lorentzian residual RMS {rms:.4} exceeds {MAX_FIT_RMS}")));
    }
    let tau_long = tau_s * (1.0 + t0) / (1.0 - t0);
    let (tau_c, tau_l) = match branch {
        CouplingBranch::CouplingDominated => (tau_s, tau_long),
        CouplingBranch::LossDominated => (tau_long, tau_s),
    };
    Ok(TauFit { tau_l, tau_c, residual_rms: rms })
}

/// Golden-section search on `[lo, hi]` followed by successive parabolic
/// refinement around the best point.
pub fn minimize_scalar(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > 1e-4 * (1.0 + c.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    // parabolic refinement through three points around the best estimate
    let (mut x, mut fx) = if fc < fd { (c, fc) } else { (d, fd) };
    let mut h = (b - a).max(1e-6);
    for _ in 0..60 {
        let (xl, xr) = (x - h, x + h);
        let (fl, fr) = (f(xl), f(xr));
        let denom = fl - 2.0 * fx + fr;
        if !(denom > 0.0) {
            h *= 0.5;
            if h < tol {
                break;
            }
            continue;
        }
        let step = 0.5 * h * (fl - fr) / denom;
        let xn = x + step.clamp(-h, h);
        let fnew = f(xn);
        if fnew <= fx {
            x = xn;
            fx = fnew;
        }
        h = (step.abs() * 2.0).clamp(tol * 0.1, h * 0.5);
        if step.abs() < tol {
            break;
        }
    }
    x
}
