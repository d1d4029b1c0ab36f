//! Joint transient integration of the optical, electrical and thermal states.

mod adaptive;
mod baseline;

pub use adaptive::integrate_adaptive;
pub use baseline::{integrate_fixed_baseline, BaselineOptions};

use num_complex::Complex64;

use crate::electrical::{ElectricalParams, ElectricalState};
use crate::error::{Error, Result};
use crate::model::{steady_state, OpticalCoefficients, ResonatorParams};
use crate::stimulus::{Stimulus, VoltageDrive};
use crate::thermal::{ThermalParams, ThermalState};

/// Bias excursion beyond the fitted window tolerated for intermediate
/// solver stages; the coefficients are evaluated at the clamped voltage.
pub const STAGE_BIAS_SLACK: f64 = 1e-3;

/// Absolute tolerance applied to the thermo-optic shift (m).
pub const ABS_TOL_SHIFT: f64 = 1e-16;

/// A complete device: optical card, parasitics and heater.
#[derive(Debug, Clone, PartialEq)]
pub struct Modulator {
    pub optical: ResonatorParams,
    pub electrical: ElectricalParams,
    pub thermal: ThermalParams,
}

impl Modulator {
    pub fn new(optical: ResonatorParams, electrical: ElectricalParams, thermal: ThermalParams) -> Result<Self> {
        optical.validate()?;
        electrical.validate()?;
        thermal.validate()?;
        Ok(Self { optical, electrical, thermal })
    }

    /// Optical ODE coefficients at a (possibly slightly out-of-window) bias.
    pub(crate) fn coefficients_lenient(&self, v_m: f64, d_lambda: f64) -> Result<OpticalCoefficients> {
        let (lo, hi) = self.optical.v_range;
        if v_m < lo - STAGE_BIAS_SLACK || v_m > hi + STAGE_BIAS_SLACK || v_m.is_nan() {
            return Err(Error::OutOfRangeBias { v: v_m, min: lo, max: hi });
        }
        self.optical.coefficients(v_m.clamp(lo, hi), d_lambda)
    }

    pub(crate) fn d_lambda(&self, thermal: &ThermalState, heater_power: f64) -> f64 {
        if self.thermal.dynamic {
            thermal.d_lambda
        } else {
            self.thermal.wavelength_shift_static(heater_power)
        }
    }

    /// Checks that the drive never leaves the fitted bias window.
    pub(crate) fn check_drive(&self, drive: &VoltageDrive) -> Result<()> {
        let (min, max) = self.optical.v_range;
        let (lo, hi) = match drive {
            VoltageDrive::Pwl(p) => p
                .values()
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v))),
            VoltageDrive::Sine { offset, amplitude, .. } => (offset - amplitude.abs(), offset + amplitude.abs()),
        };
        for v in [lo, hi] {
            if v < min || v > max {
                return Err(Error::OutOfRangeBias { v, min, max });
            }
        }
        self.electrical.junction_capacitance(lo)?;
        Ok(())
    }
}

/// Real/imaginary parts of the resonator energy amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResonatorState {
    pub ax: f64,
    pub ay: f64,
}

impl ResonatorState {
    pub fn complex(&self) -> Complex64 {
        Complex64::new(self.ax, self.ay)
    }
}

impl From<Complex64> for ResonatorState {
    fn from(a: Complex64) -> Self {
        Self { ax: a.re, ay: a.im }
    }
}

/// Real-valued coupled ODEs of the resonator in the analytic frame:
/// `dax/dt = -w0' ay - ax/tau + mu Eiy`, `day/dt = w0' ax - ay/tau - mu Eix`.
#[inline]
pub fn resonator_derivatives(c: &OpticalCoefficients, st: &ResonatorState, e_in: Complex64) -> ResonatorState {
    ResonatorState {
        ax: -c.omega0_rel * st.ay - st.ax * c.inv_tau + c.mu * e_in.im,
        ay: c.omega0_rel * st.ax - st.ay * c.inv_tau - c.mu * e_in.re,
    }
}

/// Through-port field `Eout = Ein - j mu a`.
#[inline]
pub fn output_field(mu: f64, st: &ResonatorState, e_in: Complex64) -> Complex64 {
    Complex64::new(e_in.re + mu * st.ay, e_in.im - mu * st.ax)
}

/// Joint state of one simulation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SimState {
    pub resonator: ResonatorState,
    pub electrical: ElectricalState,
    pub thermal: ThermalState,
    pub t: f64,
}

impl SimState {
    /// DC operating point for the drive value at `t = 0`, with the ring at
    /// the steady state of the instantaneous laser tone.
    pub fn steady(model: &Modulator, stim: &Stimulus) -> Result<Self> {
        let v0 = stim.voltage.initial();
        let p_h = stim.heater.power(0.0);
        let thermal = ThermalState { d_lambda: model.thermal.wavelength_shift_static(p_h) };
        let c = model.optical.coefficients(v0, thermal.d_lambda)?;
        let omega = 2.0 * std::f64::consts::PI * stim.laser.offset(0.0);
        let a = steady_state(omega - c.omega0_rel, 1.0 / c.inv_tau, c.mu, stim.laser.field(0.0));
        Ok(Self {
            resonator: a.into(),
            electrical: ElectricalState::equilibrium(v0),
            thermal,
            t: 0.0,
        })
    }

    /// Same operating point with an empty resonator.
    pub fn dark(model: &Modulator, stim: &Stimulus) -> Result<Self> {
        Ok(Self { resonator: ResonatorState::default(), ..Self::steady(model, stim)? })
    }
}

/// Controls for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub rel_tol: f64,
    /// Absolute tolerance on the through-port field (sqrt W); applied to the
    /// amplitude state divided by the zero-bias coupling factor.
    pub abs_tol_field: f64,
    pub abs_tol_voltage: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub t_end: f64,
    /// Emit uniformly spaced samples (dense output) instead of accepted steps.
    pub output_dt: Option<f64>,
}

impl SolverConfig {
    /// Defaults for a modulated run at unit interval `ui`: `max_step = ui/20`.
    pub fn for_ui(ui: f64, t_end: f64) -> Self {
        Self { max_step: ui / 20.0, ..Self::with_end(t_end) }
    }

    pub fn with_end(t_end: f64) -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol_field: 1e-9,
            abs_tol_voltage: 1e-7,
            max_step: 2e-12,
            min_step: 1e-21,
            t_end,
            output_dt: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol_field > 0.0
            && self.abs_tol_voltage > 0.0
            && self.min_step > 0.0
            && self.min_step <= self.max_step
            && self.t_end >= 0.0
            && self.output_dt.is_none_or(|d| d > 0.0);
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }
}

/// One recorded instant of a transient run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub t: f64,
    pub v_src: f64,
    pub electrical: ElectricalState,
    pub a: Complex64,
    pub e_in: Complex64,
    pub e_out: Complex64,
    pub d_lambda: f64,
}

impl TracePoint {
    pub fn p_out(&self) -> f64 {
        self.e_out.norm_sqr()
    }

    pub fn p_in(&self) -> f64 {
        self.e_in.norm_sqr()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolverStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub derivative_evals: usize,
    /// Clock ticks of the fixed-step baseline.
    pub ticks: usize,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub points: Vec<TracePoint>,
    pub stats: SolverStats,
}

impl Trace {
    pub fn times(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    pub fn output_power(&self) -> Vec<f64> {
        self.points.iter().map(TracePoint::p_out).collect()
    }

    pub fn last(&self) -> Option<&TracePoint> {
        self.points.last()
    }
}

/// Six-component joint state `[ax, ay, v1, v_cox, v_m, d_lambda]`.
pub(crate) type Vector = [f64; 6];

pub(crate) fn pack(s: &SimState) -> Vector {
    [
        s.resonator.ax,
        s.resonator.ay,
        s.electrical.v1,
        s.electrical.v_cox,
        s.electrical.v_m,
        s.thermal.d_lambda,
    ]
}

pub(crate) fn unpack(y: &Vector, t: f64) -> SimState {
    SimState {
        resonator: ResonatorState { ax: y[0], ay: y[1] },
        electrical: ElectricalState { v1: y[2], v_cox: y[3], v_m: y[4] },
        thermal: ThermalState { d_lambda: y[5] },
        t,
    }
}

/// Builds a recorded point from a joint state.
pub(crate) fn observe(model: &Modulator, stim: &Stimulus, y: &Vector, t: f64, heater_power: f64) -> Result<TracePoint> {
    let s = unpack(y, t);
    let d_lambda = model.d_lambda(&s.thermal, heater_power);
    let c = model.coefficients_lenient(s.electrical.v_m, d_lambda)?;
    let e_in = stim.laser.field(t);
    Ok(TracePoint {
        t,
        v_src: stim.voltage.eval(t),
        electrical: s.electrical,
        a: s.resonator.complex(),
        e_in,
        e_out: output_field(c.mu, &s.resonator, e_in),
        d_lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimulus::{HeaterDrive, Laser};

    fn coeffs() -> OpticalCoefficients {
        OpticalCoefficients { omega0_rel: 3.0e10, inv_tau: 1.0e11, mu: 3.0e5 }
    }

    #[test]
    fn free_decay_and_pure_source() {
        let c = OpticalCoefficients { omega0_rel: 0.0, ..coeffs() };
        let d = resonator_derivatives(&c, &ResonatorState { ax: 1.0, ay: 0.0 }, Complex64::new(0.0, 0.0));
        assert_eq!(d, ResonatorState { ax: -1.0e11, ay: 0.0 });
        let d = resonator_derivatives(&c, &ResonatorState::default(), Complex64::new(0.02, 0.0));
        assert_eq!(d, ResonatorState { ax: 0.0, ay: -3.0e5 * 0.02 });
    }

    #[test]
    fn derivatives_match_complex_form() {
        let c = coeffs();
        let cases = [(0.3, -1.2, 0.01, 0.02), (-2.0, 0.5, -0.03, 0.0), (1e-7, 2e-7, 0.1, -0.1)];
        for (ax, ay, ex, ey) in cases {
            let a = Complex64::new(ax, ay);
            let e = Complex64::new(ex, ey);
            let expect = Complex64::new(-c.inv_tau, c.omega0_rel) * a - Complex64::i() * c.mu * e;
            let d = resonator_derivatives(&c, &ResonatorState { ax, ay }, e);
            assert!((Complex64::new(d.ax, d.ay) - expect).norm() <= 1e-12 * expect.norm());

            let out = output_field(c.mu, &ResonatorState { ax, ay }, e);
            let expect = e - Complex64::i() * c.mu * a;
            assert!((out - expect).norm() <= 1e-12 * expect.norm());
        }
        let e = Complex64::new(0.01, -0.02);
        assert_eq!(output_field(c.mu, &ResonatorState::default(), e), e);
    }

    #[test]
    fn steady_state_at_critical_coupling_extinguishes() {
        let optical = ResonatorParams {
            lambda_ref: 1566.7e-9,
            lambda0_coeffs: vec![1566.7e-9, 0.0, 0.0],
            tau_c_coeffs: [20e-12, 0.0, 0.0],
            tau_l_coeffs: [20e-12, 0.0, 0.0],
            v_range: (-0.5, 2.5),
            gamma: 251e-9,
        };
        let model = Modulator::new(optical, ElectricalParams::reference_device(), ThermalParams::reference_device()).unwrap();
        let stim = Stimulus {
            voltage: VoltageDrive::constant(0.0),
            laser: Laser::Cw { power: 1e-3, offset: 0.0 },
            heater: HeaterDrive::off(),
        };
        let s = SimState::steady(&model, &stim).unwrap();
        let p = observe(&model, &stim, &pack(&s), 0.0, 0.0).unwrap();
        assert!(p.e_out.norm() < 1e-15);
        assert!(p.a.norm() > 0.0);
    }
}
