//! Drive waveforms and baseband laser sources.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::SPEED_OF_LIGHT;
use crate::thermal::ThermalParams;

/// Largest baseband offset accepted for a laser source (Hz).
pub const MAX_OFFSET_HZ: f64 = 100e9;

// ---------------------------------------------------------------------------
// PRBS

/// Feedback taps (exponents of the generator polynomial) per order.
fn prbs_taps(order: u32) -> Result<&'static [u32]> {
    Ok(match order {
        7 => &[7, 6],
        9 => &[9, 5],
        13 => &[13, 12, 2, 1],
        15 => &[15, 14],
        31 => &[31, 28],
        other => return Err(Error::BadPrbsOrder(other)),
    })
}

/// Fibonacci LFSR producing a maximal-length sequence.
#[derive(Debug, Clone)]
pub struct Prbs {
    state: u32,
    mask: u32,
    taps: &'static [u32],
}

impl Prbs {
    pub fn new(order: u32, seed: u32) -> Result<Self> {
        let taps = prbs_taps(order)?;
        let mask = if order == 32 { u32::MAX } else { (1u32 << order) - 1 };
        let state = seed & mask;
        if state == 0 {
            return Err(Error::BadSeed);
        }
        Ok(Self { state, mask, taps })
    }
}

impl Iterator for Prbs {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        let fb = self
            .taps
            .iter()
            .fold(0u32, |acc, &t| acc ^ (self.state >> (t - 1)));
        let bit = fb & 1;
        self.state = ((self.state << 1) | bit) & self.mask;
        Some(bit as u8)
    }
}

/// First `n` bits of the PRBS of the given order.
pub fn prbs_bits(order: u32, seed: u32, n: usize) -> Result<Vec<u8>> {
    Ok(Prbs::new(order, seed)?.take(n).collect())
}

// ---------------------------------------------------------------------------
// Piecewise-linear drive

/// Piecewise-linear waveform, held constant outside its breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct Pwl {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl Pwl {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::InvalidParameter(
                "PWL needs matching, non-empty time and value lists".into(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("PWL times must increase strictly".into()));
        }
        Ok(Self { times, values })
    }

    pub fn constant(v: f64) -> Self {
        Self { times: vec![0.0], values: vec![v] }
    }

    /// Two-point ramp from `v0` to `v1` starting at `t0`.
    pub fn step(t0: f64, rise: f64, v0: f64, v1: f64) -> Result<Self> {
        Self::new(vec![t0, t0 + rise], vec![v0, v1])
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.times.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let k = self.times.partition_point(|&x| x <= t);
        let (t0, t1) = (self.times[k - 1], self.times[k]);
        let (v0, v1) = (self.values[k - 1], self.values[k]);
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    pub fn corners(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_slope(&self) -> f64 {
        self.times
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
            .fold(0.0, f64::max)
    }
}

/// Waveform holding `levels[k]` over unit interval `k`, with linear ramps of
/// duration `t_edge` centred on each symbol boundary where the level changes.
pub fn symbol_waveform(levels: &[f64], ui: f64, t_edge: f64) -> Result<Pwl> {
    if !(t_edge < ui) {
        return Err(Error::EdgeTooSlow { t_edge, ui });
    }
    if !(t_edge > 0.0) {
        return Err(Error::InvalidParameter(format!("edge time must be positive, got {t_edge}")));
    }
    let Some(&first) = levels.first() else {
        return Ok(Pwl::constant(0.0));
    };
    let mut times = vec![0.0];
    let mut values = vec![first];
    for (k, w) in levels.windows(2).enumerate() {
        if w[1] != w[0] {
            let tb = (k + 1) as f64 * ui;
            times.push(tb - t_edge / 2.0);
            values.push(w[0]);
            times.push(tb + t_edge / 2.0);
            values.push(w[1]);
        }
    }
    let end = levels.len() as f64 * ui;
    if end > *times.last().unwrap() {
        times.push(end);
        values.push(*levels.last().unwrap());
    }
    Pwl::new(times, values)
}

pub fn nrz_waveform(bits: &[u8], ui: f64, v_low: f64, v_high: f64, t_edge: f64) -> Result<Pwl> {
    let levels: Vec<f64> = bits
        .iter()
        .map(|&b| if b != 0 { v_high } else { v_low })
        .collect();
    symbol_waveform(&levels, ui, t_edge)
}

/// Maps consecutive bit pairs (first bit most significant) to PAM4 symbols.
pub fn pam4_symbols(bits: &[u8], gray: bool) -> Vec<u8> {
    bits.chunks_exact(2)
        .map(|p| {
            let (msb, lsb) = (p[0] & 1, p[1] & 1);
            match (gray, msb, lsb) {
                (true, 0, 0) => 0,
                (true, 0, 1) => 1,
                (true, 1, 1) => 2,
                (true, 1, 0) => 3,
                (_, m, l) => 2 * m + l,
            }
        })
        .collect()
}

/// Four equally spaced levels spanning `vpp` about `v_bias`.
pub fn default_pam4_levels(v_bias: f64, vpp: f64) -> [f64; 4] {
    let lo = v_bias - vpp / 2.0;
    [0.0, 1.0, 2.0, 3.0].map(|i| lo + i * vpp / 3.0)
}

pub fn pam4_waveform(bits: &[u8], ui: f64, levels: [f64; 4], t_edge: f64, gray: bool) -> Result<Pwl> {
    if levels.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("PAM4 levels must increase strictly".into()));
    }
    let volts: Vec<f64> = pam4_symbols(bits, gray)
        .into_iter()
        .map(|s| levels[s as usize])
        .collect();
    symbol_waveform(&volts, ui, t_edge)
}

/// Source voltage applied to the pad.
#[derive(Debug, Clone, PartialEq)]
pub enum VoltageDrive {
    Pwl(Pwl),
    /// `offset + amplitude sin(2 pi f t)`.
    Sine { offset: f64, amplitude: f64, freq: f64 },
}

impl VoltageDrive {
    pub fn constant(v: f64) -> Self {
        Self::Pwl(Pwl::constant(v))
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Self::Pwl(p) => p.eval(t),
            Self::Sine { offset, amplitude, freq } => offset + amplitude * (2.0 * PI * freq * t).sin(),
        }
    }

    pub fn corners(&self) -> &[f64] {
        match self {
            Self::Pwl(p) => p.corners(),
            Self::Sine { .. } => &[],
        }
    }

    pub fn initial(&self) -> f64 {
        self.eval(0.0)
    }
}

// ---------------------------------------------------------------------------
// Laser sources

/// Baseband offset of a laser at `lambda_l` in a frame referenced to
/// `lambda_ref`: `c (1/lambda_l - 1/lambda_ref)`.
pub fn offset_frequency(lambda_l: f64, lambda_ref: f64) -> f64 {
    SPEED_OF_LIGHT * (1.0 / lambda_l - 1.0 / lambda_ref)
}

/// Analytic (baseband) laser field relative to the reference frequency.
#[derive(Debug, Clone, PartialEq)]
pub enum Laser {
    /// Fixed offset `offset` (Hz).
    Cw { power: f64, offset: f64 },
    /// Linear sweep from `f_start` to `f_stop` over `duration`, then held.
    Chirp { power: f64, f_start: f64, f_stop: f64, duration: f64 },
    /// Piecewise-constant offset: `(start time, offset)` segments with
    /// continuous phase. The first segment starts at 0.
    Profile { power: f64, segments: Vec<(f64, f64)>, phases: Vec<f64> },
}

pub fn cw_laser(power: f64, lambda_l: f64, lambda_ref: f64) -> Result<Laser> {
    check_power(power)?;
    let offset = offset_frequency(lambda_l, lambda_ref);
    check_offset(offset)?;
    Ok(Laser::Cw { power, offset })
}

pub fn chirp_laser(power: f64, f_start: f64, f_stop: f64, duration: f64) -> Result<Laser> {
    check_power(power)?;
    if !(duration > 0.0) {
        return Err(Error::InvalidParameter(format!("chirp duration must be positive, got {duration}")));
    }
    check_offset(f_start)?;
    check_offset(f_stop)?;
    Ok(Laser::Chirp { power, f_start, f_stop, duration })
}

/// Laser with a piecewise-constant offset profile.
pub fn stepped_laser(power: f64, segments: Vec<(f64, f64)>) -> Result<Laser> {
    check_power(power)?;
    if segments.is_empty() || segments[0].0 != 0.0 {
        return Err(Error::InvalidParameter("offset profile must start at t = 0".into()));
    }
    if segments.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::InvalidParameter("offset profile times must increase".into()));
    }
    let mut phases = Vec::with_capacity(segments.len());
    let mut phase = 0.0;
    for (i, &(t, f)) in segments.iter().enumerate() {
        check_offset(f)?;
        if i > 0 {
            let (tp, fp) = segments[i - 1];
            phase += 2.0 * PI * fp * (t - tp);
        }
        phases.push(phase);
    }
    Ok(Laser::Profile { power, segments, phases })
}

fn check_power(power: f64) -> Result<()> {
    if !(power >= 0.0 && power.is_finite()) {
        return Err(Error::InvalidParameter(format!("laser power must be >= 0, got {power}")));
    }
    Ok(())
}

fn check_offset(offset: f64) -> Result<()> {
    if !(offset.abs() <= MAX_OFFSET_HZ) {
        return Err(Error::OffsetTooLarge { offset, limit: MAX_OFFSET_HZ });
    }
    Ok(())
}

impl Laser {
    pub fn power(&self) -> f64 {
        match self {
            Self::Cw { power, .. } | Self::Chirp { power, .. } | Self::Profile { power, .. } => *power,
        }
    }

    /// Instantaneous offset from the reference frequency (Hz).
    pub fn offset(&self, t: f64) -> f64 {
        match self {
            Self::Cw { offset, .. } => *offset,
            Self::Chirp { f_start, f_stop, duration, .. } => {
                let s = (t / duration).clamp(0.0, 1.0);
                f_start + (f_stop - f_start) * s
            }
            Self::Profile { segments, .. } => segments[segment_index(segments, t)].1,
        }
    }

    /// Accumulated phase `2 pi \int_0^t f`.
    pub fn phase(&self, t: f64) -> f64 {
        match self {
            Self::Cw { offset, .. } => 2.0 * PI * offset * t,
            Self::Chirp { f_start, f_stop, duration, .. } => {
                let rate = (f_stop - f_start) / duration;
                if t <= *duration {
                    2.0 * PI * (f_start * t + 0.5 * rate * t * t)
                } else {
                    2.0 * PI * (0.5 * (f_start + f_stop) * duration + f_stop * (t - duration))
                }
            }
            Self::Profile { segments, phases, .. } => {
                let k = segment_index(segments, t);
                phases[k] + 2.0 * PI * segments[k].1 * (t - segments[k].0)
            }
        }
    }

    /// Complex baseband field `sqrt(P) e^{j phase(t)}`.
    #[inline]
    pub fn field(&self, t: f64) -> Complex64 {
        Complex64::from_polar(self.power().sqrt(), self.phase(t))
    }

    pub fn corners(&self) -> Vec<f64> {
        match self {
            Self::Cw { .. } => vec![],
            Self::Chirp { duration, .. } => vec![0.0, *duration],
            Self::Profile { segments, .. } => segments.iter().map(|s| s.0).collect(),
        }
    }
}

fn segment_index(segments: &[(f64, f64)], t: f64) -> usize {
    segments.partition_point(|s| s.0 <= t).saturating_sub(1)
}

// ---------------------------------------------------------------------------
// Heater

/// Heater drive level as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HeaterLevel {
    Voltage(f64),
    Power(f64),
}

impl HeaterLevel {
    pub fn power(self, tp: &ThermalParams) -> Result<f64> {
        match self {
            Self::Voltage(v) => Ok(tp.heater_power(v)?.0),
            Self::Power(p) if p >= 0.0 => Ok(p),
            Self::Power(p) => Err(Error::InvalidParameter(format!("heater power must be >= 0, got {p}"))),
        }
    }
}

/// Piecewise-constant heater power schedule `(start time, W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeaterDrive {
    segments: Vec<(f64, f64)>,
}

impl HeaterDrive {
    pub fn off() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(power: f64) -> Self {
        Self { segments: vec![(0.0, power)] }
    }

    pub fn schedule(segments: Vec<(f64, f64)>) -> Result<Self> {
        if segments.is_empty() || segments[0].0 != 0.0 {
            return Err(Error::InvalidParameter("heater schedule must start at t = 0".into()));
        }
        if segments.windows(2).any(|w| !(w[1].0 > w[0].0)) || segments.iter().any(|s| !(s.1 >= 0.0)) {
            return Err(Error::InvalidParameter("heater schedule must be increasing in time with power >= 0".into()));
        }
        Ok(Self { segments })
    }

    /// Power in effect at `t` (right-continuous).
    pub fn power(&self, t: f64) -> f64 {
        self.segments[segment_index(&self.segments, t)].1
    }

    pub fn corners(&self) -> Vec<f64> {
        self.segments.iter().map(|s| s.0).collect()
    }
}

/// Complete excitation of one transient run.
#[derive(Debug, Clone, PartialEq)]
pub struct Stimulus {
    pub voltage: VoltageDrive,
    pub laser: Laser,
    pub heater: HeaterDrive,
}

impl Stimulus {
    /// Sorted, de-duplicated times where some input has a kink or jump.
    pub fn corners(&self) -> Vec<f64> {
        let mut c: Vec<f64> = self
            .voltage
            .corners()
            .iter()
            .copied()
            .chain(self.laser.corners())
            .chain(self.heater.corners())
            .filter(|t| *t > 0.0)
            .collect();
        c.sort_by(f64::total_cmp);
        c.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * b.abs().max(1e-18));
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn period(order: u32) -> usize {
        let mut g = Prbs::new(order, 1).unwrap();
        let start = g.state;
        let mut n = 0;
        loop {
            g.next();
            n += 1;
            if g.state == start {
                return n;
            }
        }
    }

    #[test]
    fn prbs_periods_are_maximal() {
        assert_eq!(period(7), 127);
        assert_eq!(period(9), 511);
        assert_eq!(period(13), 8191);
        assert_eq!(period(15), 32767);
    }

    #[test]
    fn prbs13_balance() {
        let bits = prbs_bits(13, 0x1abc, 8191).unwrap();
        let ones = bits.iter().filter(|&&b| b == 1).count();
        assert_eq!(ones, 4096);
        assert_eq!(bits.len() - ones, 4095);
        // periodic continuation
        let two = prbs_bits(13, 0x1abc, 2 * 8191).unwrap();
        assert_eq!(&two[..8191], &two[8191..]);
    }

    #[test]
    fn prbs31_runs_and_is_balanced_locally() {
        let bits = prbs_bits(31, 0x7fff_ffff, 100_000).unwrap();
        let ones = bits.iter().filter(|&&b| b == 1).count() as f64;
        assert!((ones / 1e5 - 0.5).abs() < 0.01);
    }

    #[test]
    fn prbs_errors_and_determinism() {
        assert_eq!(Prbs::new(7, 0).unwrap_err(), Error::BadSeed);
        assert_eq!(Prbs::new(7, 0x80).unwrap_err(), Error::BadSeed);
        assert!(matches!(Prbs::new(8, 1), Err(Error::BadPrbsOrder(8))));
        assert_eq!(prbs_bits(9, 77, 500).unwrap(), prbs_bits(9, 77, 500).unwrap());
    }

    #[test]
    fn prbs7_autocorrelation_is_two_valued() {
        let n = 127;
        let s: Vec<f64> = prbs_bits(7, 5, n)
            .unwrap()
            .iter()
            .map(|&b| if b == 1 { -1.0 } else { 1.0 })
            .collect();
        for lag in 0..n {
            let r: f64 = (0..n).map(|i| s[i] * s[(i + lag) % n]).sum::<f64>() / n as f64;
            let expect = if lag == 0 { 1.0 } else { -1.0 / n as f64 };
            assert!((r - expect).abs() < 1e-12, "lag {lag}: {r}");
        }
    }

    #[test]
    fn nrz_examples() {
        let w = nrz_waveform(&[0, 1], 40e-12, -0.5, 1.5, 10e-12).unwrap();
        assert_eq!(w.eval(0.0), -0.5);
        assert_eq!(w.eval(34.9e-12), -0.5);
        assert!((w.eval(40e-12) - 0.5).abs() < 1e-12);
        assert_eq!(w.eval(45e-12), 1.5);
        assert_eq!(w.eval(79e-12), 1.5);
        let has = |t: f64| w.corners().iter().any(|c| (c - t).abs() < 1e-24);
        assert!(has(35e-12) && has(45e-12));

        let ones = nrz_waveform(&[1; 8], 40e-12, -0.5, 1.5, 10e-12).unwrap();
        for i in 0..100 {
            assert_eq!(ones.eval(i as f64 * 4e-12), 1.5);
        }
        assert!(matches!(
            nrz_waveform(&[0, 1], 40e-12, 0.0, 1.0, 40e-12),
            Err(Error::EdgeTooSlow { .. })
        ));
    }

    #[test]
    fn pam4_examples() {
        assert_eq!(pam4_symbols(&[0, 0, 1, 1, 1, 0], true), vec![0, 2, 3]);
        assert_eq!(pam4_symbols(&[0, 0, 1, 1, 1, 0], false), vec![0, 3, 2]);
        let lv = default_pam4_levels(0.5, 2.0);
        let expect = [-0.5, 0.5 - 1.0 + 2.0 / 3.0, 0.5 - 1.0 + 4.0 / 3.0, 1.5];
        for (a, b) in lv.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((lv[1] - 0.1667).abs() < 1e-4 && (lv[2] - 0.8333).abs() < 1e-4);

        let dc = pam4_waveform(&[1, 1, 1, 1, 1, 1], 50e-12, lv, 10e-12, true).unwrap();
        assert_eq!(dc.eval(0.0), lv[2]);
        assert_eq!(dc.eval(120e-12), lv[2]);
        assert!(pam4_waveform(&[0, 1], 50e-12, [0.0, 1.0, 1.0, 2.0], 1e-12, true).is_err());
    }

    #[test]
    fn cw_laser_examples() {
        let l = cw_laser(1e-3, 1566.7e-9, 1566.7e-9).unwrap();
        assert_eq!(l.field(123e-12), Complex64::new(1e-3_f64.sqrt(), 0.0));

        let off = offset_frequency(1566.65e-9, 1566.70e-9);
        // c * (1/1566.65 - 1/1566.70) nm^-1
        let expect = SPEED_OF_LIGHT * 0.05e-9 / (1566.65e-9 * 1566.70e-9);
        assert!((off - expect).abs() < 1.0);
        assert!((off - 6.107e9).abs() < 0.01e9, "{off}");

        assert!(matches!(
            cw_laser(1e-3, 1560e-9, 1566.7e-9),
            Err(Error::OffsetTooLarge { .. })
        ));
    }

    #[test]
    fn chirp_examples() {
        let c = chirp_laser(2e-3, 5e9, 5e9, 1e-9).unwrap();
        let cw = Laser::Cw { power: 2e-3, offset: 5e9 };
        for i in 0..50 {
            let t = i as f64 * 0.03e-9;
            assert!((c.field(t) - cw.field(t)).norm() < 1e-12);
        }
        let c = chirp_laser(1e-3, -40e9, 60e9, 2e-9).unwrap();
        let expect = 2.0 * PI * (-40e9 + 60e9) / 2.0 * 2e-9;
        assert!((c.phase(2e-9) - expect).abs() < 1e-9 * expect.abs());

        // finite-difference instantaneous frequency
        let h = 1e-15;
        for i in 1..40 {
            let t = i as f64 * 0.05e-9;
            let f_num = (c.phase(t + h) - c.phase(t - h)) / (2.0 * h) / (2.0 * PI);
            let f = c.offset(t);
            assert!((f_num - f).abs() <= 1e-3 * f.abs().max(1e9), "{t}: {f_num} vs {f}");
        }
    }

    #[test]
    fn stepped_laser_phase_is_continuous() {
        let l = stepped_laser(1e-3, vec![(0.0, 5e9), (10e-12, -20e9), (25e-12, 0.0)]).unwrap();
        for &tc in &[10e-12, 25e-12] {
            let before = l.field(tc - 1e-21);
            let after = l.field(tc);
            assert!((before - after).norm() < 1e-9);
        }
        assert_eq!(l.offset(12e-12), -20e9);
    }

    #[test]
    fn heater_levels() {
        let tp = ThermalParams::reference_device();
        assert!((HeaterLevel::Voltage(2.0).power(&tp).unwrap() - 0.5e-3).abs() < 1e-15);
        assert_eq!(HeaterLevel::Power(1e-3).power(&tp).unwrap(), 1e-3);
        let d = HeaterDrive::schedule(vec![(0.0, 0.0), (1e-9, 1e-3)]).unwrap();
        assert_eq!(d.power(0.5e-9), 0.0);
        assert_eq!(d.power(1e-9), 1e-3);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(1000))]

        #[test]
        fn laser_power_is_preserved(p in 0.0f64..0.1, f0 in -1e11f64..1e11, f1 in -1e11f64..1e11, t in 0.0f64..5e-9) {
            let l = chirp_laser(p, f0, f1, 2e-9).unwrap();
            proptest::prop_assert!((l.field(t).norm_sqr() - p).abs() <= 1e-14 * p.max(1e-30) + 1e-30);
        }

        #[test]
        fn nrz_is_continuous_with_bounded_slew(seed in 1u32..127, te_frac in 0.05f64..0.95) {
            let ui = 40e-12;
            let bits = prbs_bits(7, seed, 40).unwrap();
            let w = nrz_waveform(&bits, ui, -0.5, 1.5, te_frac * ui).unwrap();
            let swing: f64 = 2.0;
            let slope = w.max_slope();
            let has_edge = bits.windows(2).any(|b| b[0] != b[1]);
            if has_edge {
                proptest::prop_assert!((slope - swing / (te_frac * ui)).abs() <= 1e-9 * slope);
            }
            // continuity: sampled jumps bounded by the slope
            let dt = ui / 97.0;
            for i in 0..(40 * 97) {
                let t = i as f64 * dt;
                proptest::prop_assert!((w.eval(t + dt) - w.eval(t)).abs() <= slope * dt * (1.0 + 1e-9) + 1e-12);
            }
        }
    }
}
