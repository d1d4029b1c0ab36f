//! Junction C–V and parasitic-network (S11) fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::lm::{levenberg_marquardt, LmOptions};
use crate::electrical::ElectricalParams;
use crate::error::{Error, Result};

pub const VBI_BOUNDS: (f64, f64) = (0.3, 3.0);
pub const MJ_BOUNDS: (f64, f64) = (0.2, 0.9);
pub const S11_MAX_ITER: usize = 500;
pub const MAX_S11_RMS: f64 = 0.05;

fn bounded(u: f64, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) / (1.0 + (-u).exp())
}

fn unbounded(x: f64, (lo, hi): (f64, f64)) -> f64 {
    let s = ((x - lo) / (hi - lo)).clamp(1e-9, 1.0 - 1e-9);
    (s / (1.0 - s)).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvFit {
    pub cj0: f64,
    pub vbi: f64,
    pub mj: f64,
    /// RMS of the log-capacitance residual.
    pub residual_rms: f64,
}

/// Fits `Cj(v) = Cj0 / (1 + v/Vbi)^mj` in the log domain with `Vbi` and
/// `mj` kept inside physical bounds.
pub fn fit_cv(points: &[(f64, f64)]) -> Result<CvFit> {
    let mut vs: Vec<f64> = points.iter().map(|p| p.0).collect();
    vs.sort_by(f64::total_cmp);
    vs.dedup();
    if vs.len() < 3 {
        return Err(Error::InsufficientPoints { need: 3, got: vs.len() });
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0)) {
        return Err(Error::InvalidParameter(format!("capacitance must be positive, got {} at {} V", p.1, p.0)));
    }
    let v_min = vs[0];
    let vbi_floor = (-v_min * 1.05).max(VBI_BOUNDS.0 * 1.01);
    if vbi_floor >= VBI_BOUNDS.1 {
        return Err(Error::BadDomain(format!("bias {v_min} V requires Vbi above {} V", VBI_BOUNDS.1)));
    }

    let residuals = |p: &[f64]| -> Option<Vec<f64>> {
        let vbi = bounded(p[1], VBI_BOUNDS);
        let mj = bounded(p[2], MJ_BOUNDS);
        points
            .iter()
            .map(|&(v, c)| {
                let arg = 1.0 + v / vbi;
                (arg > 0.0).then(|| c.ln() - p[0] + mj * arg.ln())
            })
            .collect()
    };

    // reference capacitance: the sample closest to zero bias
    let c_ref = points
        .iter()
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .map(|p| p.1)
        .expect("non-empty");
    let opts = LmOptions { max_iter: 500, ..LmOptions::default() };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for vbi0 in [1.0, 2.0, 0.6, 2.8] {
        let vbi0 = f64::max(vbi0, vbi_floor * 1.1).min(VBI_BOUNDS.1 * 0.99);
        for mj0 in [0.5, 0.33, 0.8] {
            let x0 = [c_ref.ln(), unbounded(vbi0, VBI_BOUNDS), unbounded(mj0, MJ_BOUNDS)];
            let Some(res) = levenberg_marquardt(residuals, &x0, &opts) else { continue };
            if best.as_ref().is_none_or(|b| res.cost < b.0) {
                best = Some((res.cost, res.x));
            }
        }
        if best.as_ref().is_some_and(|b| b.0 < 1e-24) {
            break;
        }
    }
    let (cost, x) = best.ok_or_else(|| Error::BadDomain("no starting point inside the junction domain".into()))?;
    let rms = (cost / points.len() as f64).sqrt();
    if !(rms <= 0.05) {
        return Err(Error::FitDiverged(format!("C-V log residual RMS {rms:.3e}")));
    }
    Ok(CvFit { cj0: x[0].exp(), vbi: bounded(x[1], VBI_BOUNDS), mj: bounded(x[2], MJ_BOUNDS), residual_rms: rms })
}

/// Which network elements are free in the S11 fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct S11Mask {
    pub cj0: bool,
    pub rs: bool,
    pub cox: bool,
    pub rsi: bool,
    pub cpad: bool,
}

impl Default for S11Mask {
    fn default() -> Self {
        Self { cj0: true, rs: true, cox: true, rsi: true, cpad: true }
    }
}

impl S11Mask {
    fn flags(&self) -> [bool; 5] {
        [self.cj0, self.rs, self.cox, self.rsi, self.cpad]
    }
}

pub const S11_PARAM_NAMES: [&str; 5] = ["Cj0", "Rs", "Cox", "RSi", "Cpad"];

fn get(ep: &ElectricalParams, k: usize) -> f64 {
    [ep.cj0, ep.rs, ep.cox, ep.rsi, ep.cpad][k]
}

fn set(ep: &mut ElectricalParams, k: usize, v: f64) {
    match k {
        0 => ep.cj0 = v,
        1 => ep.rs = v,
        2 => ep.cox = v,
        3 => ep.rsi = v,
        _ => ep.cpad = v,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct S11Fit {
    pub params: ElectricalParams,
    pub residual_rms: f64,
    pub iterations: usize,
    /// Diagonal of `J^T J` with respect to the log of each element,
    /// ordered Cj0, Rs, Cox, RSi, Cpad; zero for fixed elements.
    pub sensitivities: [f64; 5],
}

/// Fits the parasitic network to a measured one-port reflection at the
/// given bias. `Vbi`, `mj`, `Z0` and `Rh` are taken from `init` unchanged.
pub fn fit_s11(measured: &[(f64, Complex64)], v_bias: f64, init: &ElectricalParams, mask: S11Mask) -> Result<S11Fit> {
    if measured.len() < 50 {
        return Err(Error::InsufficientPoints { need: 50, got: measured.len() });
    }
    let (f_lo, f_hi) = measured
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    if !(f_lo > 0.0 && f_hi >= 10.0 * f_lo) {
        return Err(Error::InvalidParameter(format!(
            "S11 data must span at least a decade, got {f_lo:e}..{f_hi:e} Hz"
        )));
    }
    init.validate()?;
    let free: Vec<usize> = (0..5).filter(|&k| mask.flags()[k]).collect();
    let x0: Vec<f64> = free.iter().map(|&k| get(init, k).ln()).collect();
    let params_of = |x: &[f64]| {
        let mut ep = *init;
        for (i, &k) in free.iter().enumerate() {
            set(&mut ep, k, x[i].exp());
        }
        ep
    };
    let residuals = |x: &[f64]| -> Option<Vec<f64>> {
        let ep = params_of(x);
        let mut r = Vec::with_capacity(2 * measured.len());
        for &(f, s) in measured {
            let d = ep.s11(v_bias, f).ok()? - s;
            r.push(d.re);
            r.push(d.im);
        }
        Some(r)
    };
    let opts = LmOptions { max_iter: S11_MAX_ITER, ..LmOptions::default() };
    let res = levenberg_marquardt(residuals, &x0, &opts)
        .ok_or_else(|| Error::BadDomain("initial network outside the junction domain".into()))?;
    // RMS of the complex error magnitude per frequency
    let rms = (res.cost / measured.len() as f64).sqrt();
    if !res.converged {
        return Err(Error::FitDiverged(format!("S11 fit hit the {S11_MAX_ITER}-iteration cap (RMS {rms:.3e})")));
    }
    if !(rms <= MAX_S11_RMS) {
        return Err(Error::FitDiverged(format!("S11 residual RMS {rms:.3e} exceeds {MAX_S11_RMS}")));
    }
    let mut sensitivities = [0.0; 5];
    for (i, &k) in free.iter().enumerate() {
        sensitivities[k] = res.jtj_diag[i];
    }
    Ok(S11Fit { params: params_of(&res.x), residual_rms: rms, iterations: res.iterations, sensitivities })
}

/// Logarithmic frequency grid, inclusive of both ends.
pub fn log_grid(f_start: f64, f_stop: f64, n: usize) -> Vec<f64> {
    let (a, b) = (f_start.ln(), f_stop.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n.max(2) - 1) as f64).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cj(v: f64, cj0: f64) -> f64 {
        cj0 / (1.0 + v / 1.328f64).powf(0.5)
    }

    #[test]
    fn cv_three_points_exact() {
        let pts: Vec<(f64, f64)> = [-0.4, 0.0, 1.0].iter().map(|&v| (v, cj(v, 143e-15))).collect();
        let fit = fit_cv(&pts).unwrap();
        assert!((fit.cj0 / 143e-15 - 1.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.vbi / 1.328 - 1.0).abs() < 1e-3, "{fit:?}");
        assert!((fit.mj / 0.5 - 1.0).abs() < 1e-3, "{fit:?}");

        let doubled: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, 2.0 * p.1)).collect();
        let fit2 = fit_cv(&doubled).unwrap();
        assert!((fit2.cj0 / fit.cj0 - 2.0).abs() < 1e-6);
        assert!((fit2.vbi - fit.vbi).abs() < 1e-6 && (fit2.mj - fit.mj).abs() < 1e-6);
    }

    #[test]
    fn cv_needs_three_voltages_and_a_domain() {
        assert!(matches!(fit_cv(&[(0.0, 1e-13), (1.0, 8e-14)]), Err(Error::InsufficientPoints { .. })));
        let deep = [(-3.5, 2e-13), (0.0, 1e-13), (1.0, 8e-14)];
        assert!(matches!(fit_cv(&deep), Err(Error::BadDomain(_))));
    }

    fn synth(ep: &ElectricalParams) -> Vec<(f64, Complex64)> {
        log_grid(0.1e9, 50e9, 201).into_iter().map(|f| (f, ep.s11(0.0, f).unwrap())).collect()
    }

    #[test]
    fn s11_identity_converges_immediately() {
        let truth = ElectricalParams::reference_device();
        let fit = fit_s11(&synth(&truth), 0.0, &truth, S11Mask::default()).unwrap();
        assert!(fit.iterations <= 2);
        assert!(fit.residual_rms < 1e-12);
        assert!(fit.sensitivities.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn s11_round_trip_from_perturbed_start() {
        let truth = ElectricalParams::reference_device();
        let mut init = truth;
        init.cj0 *= 1.3;
        init.rs *= 0.7;
        init.cox *= 1.3;
        init.rsi *= 0.7;
        init.cpad *= 1.3;
        let fit = fit_s11(&synth(&truth), 0.0, &init, S11Mask::default()).unwrap();
        for k in 0..5 {
            let rel = get(&fit.params, k) / get(&truth, k) - 1.0;
            assert!(rel.abs() < 0.02, "{}: {rel}", S11_PARAM_NAMES[k]);
        }
    }

    #[test]
    fn s11_requires_a_decade() {
        let truth = ElectricalParams::reference_device();
        let narrow: Vec<(f64, Complex64)> = (0..60)
            .map(|i| 10e9 + i as f64 * 1e8)
            .map(|f| (f, truth.s11(0.0, f).unwrap()))
            .collect();
        assert!(fit_s11(&narrow, 0.0, &truth, S11Mask::default()).is_err());
        assert!(matches!(
            fit_s11(&narrow[..10], 0.0, &truth, S11Mask::default()),
            Err(Error::InsufficientPoints { .. })
        ));
    }
}
