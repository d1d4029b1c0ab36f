//! Eye diagrams: folding, histogramming and NRZ metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLES_PER_UI: usize = 64;
pub const DEFAULT_BINS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeSpec {
    pub ui: f64,
    /// Leading unit intervals discarded as start-up transient.
    pub skip: usize,
    pub n_t: usize,
    pub n_p: usize,
    pub samples_per_ui: usize,
    /// Fixed vertical range; the data range when absent.
    pub power_range: Option<(f64, f64)>,
}

impl EyeSpec {
    pub fn new(ui: f64, skip: usize) -> Self {
        Self {
            ui,
            skip,
            n_t: DEFAULT_BINS,
            n_p: DEFAULT_BINS,
            samples_per_ui: DEFAULT_SAMPLES_PER_UI,
            power_range: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EyeMetrics {
    pub extinction_ratio_db: f64,
    pub eye_height: f64,
    pub eye_width: f64,
    pub rise_20_80: f64,
    pub fall_80_20: f64,
    pub p_high: f64,
    pub p_low: f64,
    /// Estimated drive-to-output delay.
    pub delay: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EyeDiagram {
    pub n_t: usize,
    pub n_p: usize,
    /// Row-major `[time bin][power bin]` counts over two unit intervals.
    pub counts: Vec<u64>,
    pub ui: f64,
    pub power_range: (f64, f64),
    pub metrics: Option<EyeMetrics>,
}

impl EyeDiagram {
    pub fn count(&self, it: usize, ip: usize) -> u64 {
        self.counts[it * self.n_p + ip]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin centres `(t, p)` for time bin `it` and power bin `ip`.
    pub fn bin_center(&self, it: usize, ip: usize) -> (f64, f64) {
        let (lo, hi) = self.power_range;
        (
            (it as f64 + 0.5) * 2.0 * self.ui / self.n_t as f64,
            lo + (ip as f64 + 0.5) * (hi - lo) / self.n_p as f64,
        )
    }
}

/// Linear interpolation of `(times, values)` at sorted query points.
/// Queries outside the data range take the nearest end value.
pub fn interpolate_sorted(times: &[f64], values: &[f64], queries: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut k = 0;
    queries
        .into_iter()
        .map(|t| {
            while k + 1 < times.len() && times[k + 1] < t {
                k += 1;
            }
            if t <= times[0] {
                return values[0];
            }
            if k + 1 >= times.len() {
                return values[times.len() - 1];
            }
            let (t0, t1) = (times[k], times[k + 1]);
            if t1 == t0 {
                return values[k + 1];
            }
            let f = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
            values[k] + f * (values[k + 1] - values[k])
        })
        .collect()
}

/// Uniform resampling on the absolute grid `j * dt` for all grid points in
/// `[t_from, t_last]`. Returns the first grid index and the samples.
fn absolute_grid(times: &[f64], values: &[f64], t_from: f64, dt: f64) -> (i64, Vec<f64>) {
    let t_last = *times.last().expect("non-empty");
    // tolerate grid points within rounding of the bounds
    let j0 = ((t_from / dt) - 1e-9).ceil() as i64;
    let j1 = ((t_last / dt) + 1e-9).floor() as i64;
    if j1 < j0 {
        return (j0, Vec::new());
    }
    let q = (j0..=j1).map(|j| j as f64 * dt);
    (j0, interpolate_sorted(times, values, q))
}

fn check_trace(times: &[f64], power: &[f64]) -> Result<()> {
    if times.len() != power.len() {
        return Err(Error::InvalidParameter("time and power lengths differ".into()));
    }
    if times.len() < 2 {
        return Err(Error::TraceTooShort(format!("{} samples", times.len())));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("trace times must be non-decreasing".into()));
    }
    Ok(())
}

/// Folds the output power at two unit intervals on absolute time and
/// accumulates a 2-D histogram. Samples outside a fixed power range land in
/// the edge rows so no sample is lost.
pub fn fold_eye(times: &[f64], power: &[f64], spec: &EyeSpec) -> Result<EyeDiagram> {
    check_trace(times, power)?;
    if !(spec.ui > 0.0) || spec.n_t == 0 || spec.n_p == 0 || spec.samples_per_ui == 0 {
        return Err(Error::InvalidParameter(format!("invalid eye specification {spec:?}")));
    }
    let t_first = times[0];
    let duration = times[times.len() - 1] - t_first;
    let need = (spec.skip + 10) as f64 * spec.ui;
    if !(duration > need) {
        return Err(Error::TraceTooShort(format!(
            "duration {duration:e} s does not exceed {need:e} s ({} skipped + 10 unit intervals)",
            spec.skip
        )));
    }
    let spu = spec.samples_per_ui;
    let dt = spec.ui / spu as f64;
    let (j0, samples) = absolute_grid(times, power, t_first + spec.skip as f64 * spec.ui, dt);

    let (lo, hi) = match spec.power_range {
        Some(r) => r,
        None => {
            let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > 1e-12 * hi.abs().max(lo.abs()) {
                (lo, hi)
            } else {
                let pad = 1e-6 * lo.abs().max(1e-30);
                (lo - pad, hi + pad)
            }
        }
    };
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("empty power range ({lo}, {hi})")));
    }

    let period = 2 * spu as i64;
    let mut counts = vec![0u64; spec.n_t * spec.n_p];
    for (k, &p) in samples.iter().enumerate() {
        let phase = (j0 + k as i64).rem_euclid(period) as usize;
        let it = phase * spec.n_t / period as usize;
        let ip = (((p - lo) / (hi - lo)) * spec.n_p as f64).floor().clamp(0.0, (spec.n_p - 1) as f64) as usize;
        counts[it * spec.n_p + ip] += 1;
    }
    Ok(EyeDiagram { n_t: spec.n_t, n_p: spec.n_p, counts, ui: spec.ui, power_range: (lo, hi), metrics: None })
}

/// Output power resampled on the absolute grid and aligned to the symbol
/// clock of the drive.
#[derive(Debug, Clone)]
pub struct Aligned {
    pub spu: usize,
    pub ui: f64,
    /// Grid index of the first sample (`t = j * ui / spu`).
    pub j0: i64,
    pub samples: Vec<f64>,
    /// Delay between a drive symbol and its optical response, in samples.
    pub delay_samples: usize,
    /// +1 when a higher symbol gives more output power, -1 otherwise.
    pub polarity: f64,
}

impl Aligned {
    /// Samples of symbol `k` in the fractional window `[from, to)` of its
    /// (delayed) unit interval.
    pub fn window(&self, k: usize, from: f64, to: f64) -> Option<&[f64]> {
        let start = k as i64 * self.spu as i64 + self.delay_samples as i64 + (from * self.spu as f64).round() as i64;
        let end = k as i64 * self.spu as i64 + self.delay_samples as i64 + (to * self.spu as f64).round() as i64;
        let a = start - self.j0;
        let b = end - self.j0;
        if a < 0 || b as usize > self.samples.len() || b <= a {
            return None;
        }
        Some(&self.samples[a as usize..b as usize])
    }

    pub fn delay(&self) -> f64 {
        self.delay_samples as f64 * self.ui / self.spu as f64
    }
}

/// Resamples the trace after `skip` unit intervals and estimates the
/// optical delay (up to two unit intervals) by correlation against the
/// symbol sequence. Symbol `k` occupies `[k ui, (k+1) ui)`.
pub fn align(times: &[f64], power: &[f64], symbols: &[u8], ui: f64, skip: usize, spu: usize) -> Result<Aligned> {
    check_trace(times, power)?;
    let dt = ui / spu as f64;
    let (j0, samples) = absolute_grid(times, power, skip as f64 * ui, dt);
    if samples.len() < 4 * spu {
        return Err(Error::TraceTooShort("fewer than four unit intervals after the skip".into()));
    }
    let mean_p = samples.iter().sum::<f64>() / samples.len() as f64;
    let mut best = (0usize, 0.0f64);
    for m in 0..2 * spu {
        let mut num = 0.0;
        let mut n = 0usize;
        let mut s_sum = 0.0;
        let mut terms = Vec::with_capacity(samples.len());
        for (k, &p) in samples.iter().enumerate() {
            let j = j0 + k as i64 - m as i64;
            if j < 0 {
                continue;
            }
            let sym = (j as usize) / spu;
            let Some(&s) = symbols.get(sym) else { continue };
            terms.push((p - mean_p, s as f64));
            s_sum += s as f64;
            n += 1;
        }
        if n == 0 {
            continue;
        }
        let s_mean = s_sum / n as f64;
        let (mut ss, mut pp) = (0.0, 0.0);
        for (dp, s) in terms {
            num += dp * (s - s_mean);
            ss += (s - s_mean).powi(2);
            pp += dp * dp;
        }
        let corr = if ss > 0.0 && pp > 0.0 { num / (ss * pp).sqrt() } else { 0.0 };
        if corr.abs() > best.1.abs() {
            best = (m, corr);
        }
    }
    Ok(Aligned {
        spu,
        ui,
        j0,
        samples,
        delay_samples: best.0,
        polarity: if best.1 < 0.0 { -1.0 } else { 1.0 },
    })
}

/// Mean and spread of the centre-window power for each symbol value, from
/// symbols that repeat their predecessor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub symbol: u8,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

pub const CENTER_WINDOW: (f64, f64) = (0.4, 0.6);

pub fn steady_levels(al: &Aligned, symbols: &[u8], skip: usize, n_levels: usize) -> Vec<LevelStats> {
    let mut acc = vec![Vec::new(); n_levels];
    for k in skip.max(1)..symbols.len() {
        if symbols[k] != symbols[k - 1] || symbols[k] as usize >= n_levels {
            continue;
        }
        if let Some(w) = al.window(k, CENTER_WINDOW.0, CENTER_WINDOW.1) {
            acc[symbols[k] as usize].push(w.iter().sum::<f64>() / w.len() as f64);
        }
    }
    acc.into_iter()
        .enumerate()
        .map(|(s, v)| {
            let n = v.len();
            let mean = if n > 0 { v.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            let var = if n > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64 } else { 0.0 };
            LevelStats { symbol: s as u8, mean, std: var.sqrt(), count: n }
        })
        .collect()
}

/// Time from one threshold to the other on an edge between `from` and
/// `to`, using the last crossing of the start threshold before the first
/// crossing of the end threshold.
pub fn transition_time(times: &[f64], power: &[f64], from: f64, to: f64, t_lo: f64, t_hi: f64) -> Option<f64> {
    let rising = to > from;
    let l_start = from + 0.2 * (to - from);
    let l_end = from + 0.8 * (to - from);
    let above = |p: f64, l: f64| if rising { p >= l } else { p <= l };
    let i_lo = times.partition_point(|&t| t < t_lo);
    let i_hi = times.partition_point(|&t| t <= t_hi);
    if i_hi <= i_lo + 1 {
        return None;
    }
    let cross = |i: usize, l: f64| {
        let (t0, t1, p0, p1) = (times[i - 1], times[i], power[i - 1], power[i]);
        if p1 == p0 {
            t1
        } else {
            t0 + (l - p0) / (p1 - p0) * (t1 - t0)
        }
    };
    // must start on the far side of the start threshold
    if above(power[i_lo], l_start) {
        return None;
    }
    let mut t_start = None;
    for i in (i_lo + 1)..i_hi {
        if above(power[i], l_start) && !above(power[i - 1], l_start) {
            t_start = Some(cross(i, l_start));
        }
        if above(power[i], l_end) && !above(power[i - 1], l_end) {
            return t_start.map(|ts| cross(i, l_end) - ts);
        }
        // fell back before reaching the end threshold
        if !above(power[i], l_start) {
            t_start = None;
        }
    }
    None
}

/// NRZ metrics from a trace whose drive carried `bits` (bit `k` on
/// `[k ui, (k+1) ui)`). Levels come from the centre 20% of repeated bits;
/// rise and fall from isolated transitions (two equal bits either side).
pub fn eye_metrics(times: &[f64], power: &[f64], bits: &[u8], ui: f64, skip: usize) -> Result<EyeMetrics> {
    let spu = DEFAULT_SAMPLES_PER_UI;
    let al = align(times, power, bits, ui, skip, spu)?;
    let levels = steady_levels(&al, bits, skip, 2);
    if levels.iter().any(|l| l.count == 0) {
        return Err(Error::InsufficientTransitions("both logic levels need repeated bits".into()));
    }
    // optical high is the brighter level, whichever bit drives it
    let (hi_bit, p_high, p_low) = if levels[1].mean >= levels[0].mean {
        (1u8, levels[1].mean, levels[0].mean)
    } else {
        (0u8, levels[0].mean, levels[1].mean)
    };
    let extinction_ratio_db = if p_low > 0.0 { 10.0 * (p_high / p_low).log10() } else { f64::INFINITY };

    let delay = al.delay();
    let (mut rises, mut falls) = (Vec::new(), Vec::new());
    for k in (skip + 2)..bits.len().saturating_sub(1) {
        let (a, b, c, d) = (bits[k - 2], bits[k - 1], bits[k], bits[k + 1]);
        if !(a == b && b != c && c == d) {
            continue;
        }
        let t_edge = k as f64 * ui + delay;
        let (t_lo, t_hi) = (t_edge - 0.5 * ui, t_edge + 1.5 * ui);
        let optical_rising = c == hi_bit;
        let (from, to) = if optical_rising { (p_low, p_high) } else { (p_high, p_low) };
        if let Some(dt) = transition_time(times, power, from, to, t_lo, t_hi) {
            if optical_rising {
                rises.push(dt)
            } else {
                falls.push(dt)
            }
        }
    }
    if rises.is_empty() || falls.is_empty() {
        return Err(Error::InsufficientTransitions(format!(
            "{} rising and {} falling isolated edges resolved",
            rises.len(),
            falls.len()
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;

    // eye opening per phase column across all bits after the skip
    let mut open = vec![(f64::INFINITY, f64::NEG_INFINITY); spu];
    for k in skip..bits.len() {
        if let Some(w) = al.window(k, 0.0, 1.0) {
            for (c, &p) in w.iter().enumerate().take(spu) {
                if bits[k] == hi_bit {
                    open[c].0 = open[c].0.min(p);
                } else {
                    open[c].1 = open[c].1.max(p);
                }
            }
        }
    }
    let heights: Vec<f64> = open.iter().map(|(h, l)| h - l).filter(|x| x.is_finite()).collect();
    let eye_height = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    let eye_width = heights.iter().filter(|&&h| h > 0.0).count() as f64 * ui / spu as f64;

    Ok(EyeMetrics {
        extinction_ratio_db,
        eye_height,
        eye_width,
        rise_20_80: mean(&rises),
        fall_80_20: mean(&falls),
        p_high,
        p_low,
        delay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// First-order response to an NRZ pattern, sampled finely.
    fn rc_trace(bits: &[u8], ui: f64, tau: f64, lo: f64, hi: f64) -> (Vec<f64>, Vec<f64>) {
        let n_per = 200;
        let dt = ui / n_per as f64;
        let mut p = lo;
        let (mut t, mut pw) = (Vec::new(), Vec::new());
        for (k, &b) in bits.iter().enumerate() {
            let target = if b == 1 { hi } else { lo };
            for i in 0..n_per {
                t.push((k * n_per + i) as f64 * dt);
                pw.push(p);
                p = target + (p - target) * (-dt / tau).exp();
            }
        }
        (t, pw)
    }

    #[test]
    fn constant_power_fills_one_row() {
        let t: Vec<f64> = (0..2000).map(|i| i as f64 * 1e-12).collect();
        let p = vec![1e-3; t.len()];
        let eye = fold_eye(&t, &p, &EyeSpec::new(40e-12, 2)).unwrap();
        let eye = &eye;
        let rows: std::collections::BTreeSet<usize> =
            (0..eye.n_t).flat_map(|it| (0..eye.n_p).filter(move |&ip| eye.count(it, ip) > 0)).collect();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn counts_are_conserved() {
        let bits = crate::stimulus::prbs_bits(7, 1, 60).unwrap();
        let ui = 40e-12;
        let (t, p) = rc_trace(&bits, ui, 3e-12, 0.1, 1.0);
        let spec = EyeSpec::new(ui, 3);
        let eye = fold_eye(&t, &p, &spec).unwrap();
        let dt = ui / 64.0;
        let expected = ((t.last().unwrap() / dt + 1e-9).floor() - (3.0 * ui / dt - 1e-9).ceil()) as u64 + 1;
        assert_eq!(eye.total(), expected);
    }

    #[test]
    fn square_nrz_has_two_rows_and_edges() {
        let bits = crate::stimulus::prbs_bits(7, 1, 60).unwrap();
        let ui = 40e-12;
        let t: Vec<f64> = (0..=60 * 400).map(|i| i as f64 * ui / 400.0).collect();
        let p: Vec<f64> = t
            .iter()
            .map(|&x| if bits[((x / ui) as usize).min(59)] == 1 { 1.0 } else { 0.2 })
            .collect();
        let eye = fold_eye(&t, &p, &EyeSpec::new(ui, 1)).unwrap();
        let mut rows = vec![0u64; eye.n_p];
        for it in 0..eye.n_t {
            for ip in 0..eye.n_p {
                rows[ip] += eye.count(it, ip);
            }
        }
        let total = eye.total();
        assert_eq!(rows[0] + rows[eye.n_p - 1], total);
        // both levels appear at every phase of the folded window
        for it in 0..eye.n_t {
            assert!(eye.count(it, 0) > 0 && eye.count(it, eye.n_p - 1) > 0);
        }
    }

    #[test]
    fn shifting_start_by_whole_intervals_keeps_grid() {
        let bits = crate::stimulus::prbs_bits(7, 3, 80).unwrap();
        let ui = 40e-12;
        let (t, p) = rc_trace(&bits, ui, 5e-12, 0.1, 1.0);
        let spec = EyeSpec { power_range: Some((0.0, 1.1)), ..EyeSpec::new(ui, 6) };
        let full = fold_eye(&t, &p, &spec).unwrap();
        for k in [1usize, 2, 3] {
            let start = k * 200;
            let spec_k = EyeSpec { skip: 6 - k, ..spec };
            let cut = fold_eye(&t[start..], &p[start..], &spec_k).unwrap();
            assert_eq!(cut.counts, full.counts, "shift {k}");
        }
    }

    #[test]
    fn too_short_trace() {
        let t: Vec<f64> = (0..100).map(|i| i as f64 * 1e-12).collect();
        let p = vec![1.0; 100];
        assert!(matches!(fold_eye(&t, &p, &EyeSpec::new(40e-12, 0)), Err(Error::TraceTooShort(_))));
    }

    #[test]
    fn extinction_ratio_and_exponential_edges() {
        let bits = crate::stimulus::prbs_bits(9, 1, 300).unwrap();
        let ui = 100e-12;
        let tau = 4e-12;
        let (t, p) = rc_trace(&bits, ui, tau, 1.0, 2.512);
        let m = eye_metrics(&t, &p, &bits, ui, 2).unwrap();
        assert!((m.extinction_ratio_db - 4.0).abs() < 1e-3, "{m:?}");
        let expect = tau * 4f64.ln();
        assert!((m.rise_20_80 / expect - 1.0).abs() < 0.01, "{m:?}");
        assert!((m.fall_80_20 / expect - 1.0).abs() < 0.01, "{m:?}");
        assert!(m.eye_width > 0.5 * ui && m.eye_height > 1.0);
    }

    #[test]
    fn inverted_polarity_is_detected() {
        let bits = crate::stimulus::prbs_bits(9, 1, 300).unwrap();
        let ui = 100e-12;
        let (t, p) = rc_trace(&bits, ui, 4e-12, 2.0, 1.0);
        let m = eye_metrics(&t, &p, &bits, ui, 2).unwrap();
        assert!((m.p_high - 2.0).abs() < 1e-6 && (m.p_low - 1.0).abs() < 1e-6);
    }

    #[test]
    fn equal_levels_give_zero_er_but_no_edges() {
        let bits = crate::stimulus::prbs_bits(9, 1, 100).unwrap();
        let ui = 100e-12;
        let t: Vec<f64> = (0..=10_000).map(|i| i as f64 * 1e-12).collect();
        let p = vec![1e-3; t.len()];
        let al = align(&t, &p, &bits, ui, 2, 64).unwrap();
        let lv = steady_levels(&al, &bits, 2, 2);
        assert!((10.0 * (lv[1].mean / lv[0].mean).log10()).abs() < 1e-12);
        assert!(matches!(eye_metrics(&t, &p, &bits, ui, 2), Err(Error::InsufficientTransitions(_))));
    }
}
