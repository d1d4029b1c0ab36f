//! Accuracy and cost comparison of two transient runs.

use serde::{Deserialize, Serialize};

use super::eye::interpolate_sorted;
use crate::error::{Error, Result};
use crate::solver::Trace;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverComparison {
    pub rms_power_diff: f64,
    pub max_diff: f64,
    /// Peak output power of the first trace, for relative figures.
    pub peak_power: f64,
    pub steps_a: usize,
    pub steps_b: usize,
    pub derivative_evals_a: usize,
    pub derivative_evals_b: usize,
    pub ticks_a: usize,
    pub ticks_b: usize,
    pub wall_clock_a: f64,
    pub wall_clock_b: f64,
    pub n_grid: usize,
}

impl SolverComparison {
    pub fn relative_rms(&self) -> f64 {
        self.rms_power_diff / self.peak_power
    }
}

/// Resamples both output powers onto `n_grid` uniform points spanning the
/// common interval and reports their difference and the solver effort.
pub fn compare_solvers(a: &Trace, b: &Trace, n_grid: usize) -> Result<SolverComparison> {
    let (Some(a0), Some(b0), Some(a1), Some(b1)) = (a.points.first(), b.points.first(), a.last(), b.last()) else {
        return Err(Error::MisalignedTraces("empty trace".into()));
    };
    let span = (a1.t - a0.t).max(b1.t - b0.t);
    let tol = 1e-15 + 1e-9 * span;
    if (a0.t - b0.t).abs() > tol || (a1.t - b1.t).abs() > tol {
        return Err(Error::MisalignedTraces(format!(
            "intervals [{:e}, {:e}] and [{:e}, {:e}] differ",
            a0.t, a1.t, b0.t, b1.t
        )));
    }
    if n_grid < 2 {
        return Err(Error::InvalidParameter("comparison grid needs at least two points".into()));
    }
    let (t0, t1) = (a0.t.max(b0.t), a1.t.min(b1.t));
    let grid = (0..n_grid).map(|i| t0 + (t1 - t0) * i as f64 / (n_grid - 1) as f64);
    let pa = interpolate_sorted(&a.times(), &a.output_power(), grid.clone());
    let pb = interpolate_sorted(&b.times(), &b.output_power(), grid);
    let (mut ss, mut max_diff) = (0.0, 0.0f64);
    for (x, y) in pa.iter().zip(&pb) {
        let d = x - y;
        ss += d * d;
        max_diff = max_diff.max(d.abs());
    }
    Ok(SolverComparison {
        rms_power_diff: (ss / n_grid as f64).sqrt(),
        max_diff,
        peak_power: pa.iter().cloned().fold(0.0, f64::max),
        steps_a: a.stats.accepted_steps,
        steps_b: b.stats.accepted_steps,
        derivative_evals_a: a.stats.derivative_evals,
        derivative_evals_b: b.stats.derivative_evals,
        ticks_a: a.stats.ticks,
        ticks_b: b.stats.ticks,
        wall_clock_a: a.stats.wall_clock_s,
        wall_clock_b: b.stats.wall_clock_s,
        n_grid,
    })
}
