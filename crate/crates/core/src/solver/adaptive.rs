//! Dormand-Prince 5(4) integration with PI step-size control and
//! continuous (dense) output.

use std::time::Instant;

use super::{observe, pack, Modulator, SimState, SolverConfig, Trace, TracePoint, Vector, ABS_TOL_SHIFT};
use crate::error::{Error, Result};
use crate::model::OpticalCoefficients;
use crate::stimulus::Stimulus;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO: f64 = 0.2 - BETA * 0.75;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Right-hand side of the joint system with the heater power frozen over
/// the current step.
struct System<'a> {
    model: &'a Modulator,
    stim: &'a Stimulus,
    evals: usize,
}

impl System<'_> {
    fn eval(&mut self, t: f64, y: &Vector, heater_power: f64) -> Result<Vector> {
        self.evals += 1;
        let m = self.model;
        let v_m = y[4];
        let d_lambda = if m.thermal.dynamic { y[5] } else { m.thermal.wavelength_shift_static(heater_power) };
        let c: OpticalCoefficients = m.coefficients_lenient(v_m, d_lambda)?;
        let e = self.stim.laser.field(t);
        let v_src = self.stim.voltage.eval(t);

        let ep = &m.electrical;
        let cj = ep.junction_capacitance(v_m)?;
        let i_src = (v_src - y[2]) / ep.z0;
        let i_sub = (y[2] - y[3]) / ep.rsi;
        let i_j = (y[2] - v_m) / ep.rs;

        Ok([
            -c.omega0_rel * y[1] - y[0] * c.inv_tau + c.mu * e.im,
            c.omega0_rel * y[0] - y[1] * c.inv_tau - c.mu * e.re,
            (i_src - i_sub - i_j) / ep.cpad,
            i_sub / ep.cox,
            i_j / cj,
            if m.thermal.dynamic { m.thermal.shift_rate(y[5], heater_power) } else { 0.0 },
        ])
    }
}

#[inline]
fn axpy(y: &Vector, h: f64, terms: &[(f64, &Vector)]) -> Vector {
    let mut out = *y;
    for (i, o) in out.iter_mut().enumerate() {
        let s: f64 = terms.iter().map(|(c, k)| c * k[i]).sum();
        *o += h * s;
    }
    out
}

/// Integrates the joint system from `init` (or the steady operating point)
/// to `cfg.t_end`. Step boundaries are placed on every corner of the drive.
pub fn integrate_adaptive(
    model: &Modulator,
    cfg: &SolverConfig,
    stim: &Stimulus,
    init: Option<SimState>,
) -> Result<Trace> {
    cfg.validate()?;
    model.check_drive(&stim.voltage)?;
    let started = Instant::now();
    let init = match init {
        Some(s) => s,
        None => SimState::steady(model, stim)?,
    };
    let mut t = init.t;
    let mut y = pack(&init);
    if !model.thermal.dynamic {
        y[5] = model.thermal.wavelength_shift_static(stim.heater.power(t));
    }

    let mu_ref = model.optical.tau_at(model.optical.v_range.0.max(0.0).min(model.optical.v_range.1))?.mu;
    let atol: Vector = [
        cfg.abs_tol_field / mu_ref,
        cfg.abs_tol_field / mu_ref,
        cfg.abs_tol_voltage,
        cfg.abs_tol_voltage,
        cfg.abs_tol_voltage,
        ABS_TOL_SHIFT,
    ];
    let heater_corners = stim.heater.corners();
    let corners: Vec<f64> = stim
        .corners()
        .into_iter()
        .filter(|&c| c > t && c < cfg.t_end)
        .chain(std::iter::once(cfg.t_end))
        .collect();
    let mut next_corner = 0usize;

    let mut sys = System { model, stim, evals: 0 };
    let mut trace = Trace::default();
    let mut heater = stim.heater.power(t);
    let mut out_index = cfg.output_dt.map_or(0, |d| (t / d).floor() as usize);
    let emit = |trace: &mut Trace, tp: TracePoint| trace.points.push(tp);

    if t >= cfg.t_end {
        trace.stats.wall_clock_s = started.elapsed().as_secs_f64();
        return Ok(trace);
    }

    match cfg.output_dt {
        None => emit(&mut trace, observe(model, stim, &y, t, heater)?),
        Some(_) => {
            emit(&mut trace, observe(model, stim, &y, t, heater)?);
            out_index += 1;
        }
    }

    let mut k1 = sys.eval(t, &y, heater)?;
    let mut h = initial_step(&y, &k1, &atol, cfg).min(cfg.max_step);
    let mut fac_old = 1e-4_f64;
    let mut last_rejected = false;

    while t < cfg.t_end {
        let corner = corners[next_corner];
        let mut hit_corner = false;
        if t + h >= corner || corner - (t + h) < 1e-6 * h {
            h = corner - t;
            hit_corner = true;
        }
        if h < cfg.min_step {
            return Err(Error::StepSizeUnderflow { t, step: h, min_step: cfg.min_step });
        }

        let stages = attempt(&mut sys, t, &y, &k1, h, heater);
        let (y_new, k7, err_vec, ks) = match stages {
            Ok(v) => v,
            Err(Error::OutOfRangeBias { .. }) | Err(Error::ForwardBiasLimit { .. }) => {
                // an intermediate stage overshot the model window
                trace.stats.rejected_steps += 1;
                h *= 0.25;
                last_rejected = true;
                continue;
            }
            Err(e) => return Err(e),
        };

        let mut err = 0.0_f64;
        for i in 0..6 {
            let sc = atol[i] + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err = err.max((err_vec[i] / sc).abs());
        }
        if !err.is_finite() {
            err = 1e10;
        }

        if err <= 1.0 {
            let fac11 = err.powf(EXPO);
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            fac_old = err.max(1e-4);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            last_rejected = false;

            let t_new = if hit_corner { corner } else { t + h };

            if let Some(dt_out) = cfg.output_dt {
                let dense = Dense::new(&y, &y_new, &k1, &k7, &ks, h);
                loop {
                    let to = out_index as f64 * dt_out;
                    if to > t_new * (1.0 + 1e-14) || to > cfg.t_end * (1.0 + 1e-14) {
                        break;
                    }
                    let theta = ((to - t) / h).clamp(0.0, 1.0);
                    let yo = dense.at(theta);
                    emit(&mut trace, observe(model, stim, &yo, to, heater)?);
                    out_index += 1;
                }
            }

            t = t_new;
            y = y_new;
            trace.stats.accepted_steps += 1;
            if hit_corner {
                next_corner += 1;
                let heater_jump = heater_corners.iter().any(|&c| c == corner);
                if heater_jump {
                    heater = stim.heater.power(t);
                    if !model.thermal.dynamic {
                        y[5] = model.thermal.wavelength_shift_static(heater);
                    }
                    k1 = sys.eval(t, &y, heater)?;
                } else {
                    k1 = k7;
                }
            } else {
                k1 = k7;
            }
            if cfg.output_dt.is_none() {
                emit(&mut trace, observe(model, stim, &y, t, heater)?);
            }
            h = h_new.min(cfg.max_step);
        } else {
            trace.stats.rejected_steps += 1;
            h /= (err.powf(EXPO) / SAFETY).min(1.0 / FAC_MIN);
            last_rejected = true;
        }
    }

    // uniform output always closes on t_end
    if cfg.output_dt.is_some() && trace.last().is_some_and(|p| p.t < t * (1.0 - 1e-14)) {
        emit(&mut trace, observe(model, stim, &y, t, heater)?);
    }

    trace.stats.derivative_evals = sys.evals;
    trace.stats.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(trace)
}

type StageResult = (Vector, Vector, Vector, [Vector; 5]);

/// One Dormand-Prince step; returns the 5th-order solution, the last stage
/// derivative, the embedded error vector and stages k2..k6 for dense output.
fn attempt(sys: &mut System, t: f64, y: &Vector, k1: &Vector, h: f64, heater: f64) -> Result<StageResult> {
    let k2 = sys.eval(t + C2 * h, &axpy(y, h, &[(A21, k1)]), heater)?;
    let k3 = sys.eval(t + C3 * h, &axpy(y, h, &[(A31, k1), (A32, &k2)]), heater)?;
    let k4 = sys.eval(t + C4 * h, &axpy(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]), heater)?;
    let k5 = sys.eval(
        t + C5 * h,
        &axpy(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        heater,
    )?;
    let k6 = sys.eval(
        t + h,
        &axpy(y, h, &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        heater,
    )?;
    let y_new = axpy(y, h, &[(A71, k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    let k7 = sys.eval(t + h, &y_new, heater)?;
    let mut err = [0.0; 6];
    for i in 0..6 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok((y_new, k7, err, [k2, k3, k4, k5, k6]))
}

/// Hairer's continuous extension of the Dormand-Prince pair.
struct Dense {
    r: [Vector; 5],
}

impl Dense {
    fn new(y0: &Vector, y1: &Vector, k1: &Vector, k7: &Vector, ks: &[Vector; 5], h: f64) -> Self {
        let [_, k3, k4, k5, k6] = ks;
        let mut r = [[0.0; 6]; 5];
        for i in 0..6 {
            let diff = y1[i] - y0[i];
            let bspl = h * k1[i] - diff;
            r[0][i] = y0[i];
            r[1][i] = diff;
            r[2][i] = bspl;
            r[3][i] = diff - h * k7[i] - bspl;
            r[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        Self { r }
    }

    fn at(&self, theta: f64) -> Vector {
        let t1 = 1.0 - theta;
        let r = &self.r;
        let mut out = [0.0; 6];
        for i in 0..6 {
            out[i] = r[0][i] + theta * (r[1][i] + t1 * (r[2][i] + theta * (r[3][i] + t1 * r[4][i])));
        }
        out
    }
}

fn initial_step(y: &Vector, f: &Vector, atol: &Vector, cfg: &SolverConfig) -> f64 {
    let mut d0 = 0.0_f64;
    let mut d1 = 0.0_f64;
    for i in 0..6 {
        let sc = atol[i] + cfg.rel_tol * y[i].abs();
        d0 = d0.max((y[i] / sc).abs());
        d1 = d1.max((f[i] / sc).abs());
    }
    let h = if d1 < 1e-5 {
        cfg.max_step
    } else if d0 < 1e-5 {
        1e-15
    } else {
        0.01 * d0 / d1
    };
    h.max(cfg.min_step * 10.0)
}
