//! Clock-driven reference solver in the style of earlier lumped ring
//! models: at every tick the ring amplitude is advanced as the sum of the
//! instantaneous steady state and a decaying homogeneous part, and the
//! parasitics are advanced by one backward-Euler substep.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;

use super::{output_field, Modulator, ResonatorState, SimState, Trace, TracePoint};
use crate::electrical::ElectricalState;
use crate::error::{Error, Result};
use crate::model::steady_state;
use crate::stimulus::Stimulus;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineOptions {
    pub t_end: f64,
    /// Evaluate `Cj(v_m)` every tick; when false `Cj` is frozen at `Cj0`.
    pub nonlinear_cj: bool,
    /// Record every n-th tick (the first and last tick are always kept).
    pub record_every: usize,
}

impl BaselineOptions {
    /// Junction capacitance frozen at its zero-bias value.
    pub fn constant_cj(t_end: f64) -> Self {
        Self { t_end, nonlinear_cj: false, record_every: 1 }
    }
}

pub fn integrate_fixed_baseline(
    model: &Modulator,
    dt: f64,
    stim: &Stimulus,
    opts: &BaselineOptions,
    init: Option<SimState>,
) -> Result<Trace> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("tick must be positive, got {dt}")));
    }
    if opts.record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be at least 1".into()));
    }
    model.check_drive(&stim.voltage)?;
    let started = Instant::now();
    let init = match init {
        Some(s) => s,
        None => SimState::steady(model, stim)?,
    };

    let ep = &model.electrical;
    let mut t = init.t;
    let mut a = init.resonator.complex();
    let mut el = init.electrical;
    let mut thermal = init.thermal;
    let mut trace = Trace::default();

    // the final tick is shortened to land exactly on t_end
    let n_ticks = ((opts.t_end - t) / dt - 1e-9).ceil().max(0.0) as usize;
    let record = |trace: &mut Trace, t: f64, a: Complex64, el: ElectricalState, d_lambda: f64| -> Result<()> {
        let c = model.coefficients_lenient(el.v_m, d_lambda)?;
        let e_in = stim.laser.field(t);
        trace.points.push(TracePoint {
            t,
            v_src: stim.voltage.eval(t),
            electrical: el,
            a,
            e_in,
            e_out: output_field(c.mu, &ResonatorState::from(a), e_in),
            d_lambda,
        });
        Ok(())
    };

    let heater0 = stim.heater.power(t);
    record(&mut trace, t, a, el, model.d_lambda(&thermal, heater0))?;

    for n in 0..n_ticks {
        let heater = stim.heater.power(t);
        let d_lambda = model.d_lambda(&thermal, heater);
        let c = model.coefficients_lenient(el.v_m, d_lambda)?;
        let t_next = if n + 1 == n_ticks { opts.t_end } else { init.t + (n + 1) as f64 * dt };
        let h = t_next - t;

        // optical: exact response to a single tone with frozen coefficients
        let tau = 1.0 / c.inv_tau;
        let detune_now = 2.0 * PI * stim.laser.offset(t) - c.omega0_rel;
        let detune_next = 2.0 * PI * stim.laser.offset(t_next) - c.omega0_rel;
        let a_ss_now = steady_state(detune_now, tau, c.mu, stim.laser.field(t));
        let a_ss_next = steady_state(detune_next, tau, c.mu, stim.laser.field(t_next));
        let decay = Complex64::new(-c.inv_tau, c.omega0_rel) * h;
        a = a_ss_next + (a - a_ss_now) * decay.exp();

        // electrical: one backward-Euler substep
        let cj = if opts.nonlinear_cj { ep.junction_capacitance(el.v_m)? } else { ep.cj0 };
        el = backward_euler(model, &el, stim.voltage.eval(t_next), cj, h);

        if model.thermal.dynamic {
            thermal = model.thermal.wavelength_shift_step(thermal, heater, h);
        }
        t = t_next;

        if (n + 1) % opts.record_every == 0 || n + 1 == n_ticks {
            let heater = stim.heater.power(t);
            record(&mut trace, t, a, el, model.d_lambda(&thermal, heater))?;
        }
    }

    trace.stats.ticks = n_ticks;
    trace.stats.accepted_steps = n_ticks;
    trace.stats.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(trace)
}

/// Solves `(I - dt A) x' = x + dt b v_src` for the three node voltages.
fn backward_euler(model: &Modulator, x: &ElectricalState, v_src: f64, cj: f64, dt: f64) -> ElectricalState {
    let ep = &model.electrical;
    let g0 = 1.0 / ep.z0;
    let gs = 1.0 / ep.rsi;
    let gj = 1.0 / ep.rs;
    // row for v1
    let a11 = 1.0 + dt * (g0 + gs + gj) / ep.cpad;
    let a12 = -dt * gs / ep.cpad;
    let a13 = -dt * gj / ep.cpad;
    let r1 = x.v1 + dt * g0 * v_src / ep.cpad;
    // row for v_cox: (1 + dt gs/Cox) vc - dt gs/Cox v1 = vc_old
    let kc = dt * gs / ep.cox;
    // row for v_m:  (1 + dt gj/Cj) vm - dt gj/Cj v1 = vm_old
    let km = dt * gj / cj;
    // eliminate v_cox and v_m in terms of v1
    let vc_of = |v1: f64| (x.v_cox + kc * v1) / (1.0 + kc);
    let vm_of = |v1: f64| (x.v_m + km * v1) / (1.0 + km);
    let denom = a11 + a12 * kc / (1.0 + kc) + a13 * km / (1.0 + km);
    let rhs = r1 - a12 * x.v_cox / (1.0 + kc) - a13 * x.v_m / (1.0 + km);
    let v1 = rhs / denom;
    ElectricalState { v1, v_cox: vc_of(v1), v_m: vm_of(v1) }
}
