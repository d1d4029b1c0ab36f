use serde::Serialize;

use ringmod::analysis::compare_solvers;
use ringmod::scenario::{Prepared, Scenario};
use ringmod::solver::{integrate_adaptive, integrate_fixed_baseline, BaselineOptions, SimState, Trace};

use super::simulate::{initial_state, prepare};
use crate::config::SCHEMA_VERSION;
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, write_json};
use crate::{info, BenchArgs, GlobalOpts, SolverKind};

/// Spacing of recorded samples in fine fixed-step runs.
const RECORD_SPACING: f64 = 50e-15;

#[derive(Debug, Serialize)]
pub struct SolverRun {
    pub kind: SolverKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub derivative_evals: usize,
    pub ticks: usize,
    /// Derivative evaluations (adaptive) or clock ticks (fixed step).
    pub cost: usize,
    pub wall_clock_s: f64,
}

#[derive(Debug, Serialize)]
pub struct Accuracy {
    #[serde(rename = "rms_power_diff_W")]
    pub rms_power_diff: f64,
    #[serde(rename = "max_diff_W")]
    pub max_diff: f64,
    #[serde(rename = "peak_power_W")]
    pub peak_power: f64,
    /// RMS difference over peak power.
    pub relative_rms: f64,
    pub n_grid: usize,
}

#[derive(Debug, Serialize)]
pub struct Reference {
    pub run: SolverRun,
    pub a_vs_reference: Accuracy,
    pub b_vs_reference: Accuracy,
}

#[derive(Debug, Serialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub command: &'static str,
    pub data_rate: f64,
    pub n_ui: usize,
    pub t_end_s: f64,
    pub a: SolverRun,
    pub b: SolverRun,
    pub a_vs_b: Accuracy,
    /// Cost of `b` over cost of `a`.
    pub step_ratio: f64,
    pub wall_clock_ratio: f64,
    pub reference: Option<Reference>,
}

fn run_solver(kind: SolverKind, dt: f64, p: &Prepared, init: Option<SimState>) -> ringmod::Result<Trace> {
    match kind {
        SolverKind::Adaptive => {
            let mut cfg = p.solver;
            // dense output costs no extra evaluations and keeps resampling exact
            cfg.output_dt.get_or_insert(p.ui / 64.0);
            integrate_adaptive(&p.model, &cfg, &p.stimulus, init)
        }
        SolverKind::Baseline | SolverKind::BaselineConstCj => {
            let opts = BaselineOptions {
                t_end: p.solver.t_end,
                nonlinear_cj: kind == SolverKind::Baseline,
                record_every: ((RECORD_SPACING / dt).round() as usize).max(1),
            };
            integrate_fixed_baseline(&p.model, dt, &p.stimulus, &opts, init)
        }
    }
}

fn summarize(kind: SolverKind, dt: f64, t: &Trace) -> SolverRun {
    let s = t.stats;
    let fixed = kind != SolverKind::Adaptive;
    SolverRun {
        kind,
        dt_s: fixed.then_some(dt),
        accepted_steps: s.accepted_steps,
        rejected_steps: s.rejected_steps,
        derivative_evals: s.derivative_evals,
        ticks: s.ticks,
        cost: if fixed { s.ticks } else { s.derivative_evals },
        wall_clock_s: s.wall_clock_s,
    }
}

fn accuracy(a: &Trace, b: &Trace, n_grid: usize) -> CliResult<Accuracy> {
    let c = compare_solvers(a, b, n_grid).map_err(|e| CliError::numerical("compare", e))?;
    Ok(Accuracy {
        rms_power_diff: c.rms_power_diff,
        max_diff: c.max_diff,
        peak_power: c.peak_power,
        relative_rms: c.relative_rms(),
        n_grid: c.n_grid,
    })
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

/// Runs both solvers (and the optional reference) on a prepared scenario.
pub fn bench(a: &BenchArgs, sc: &Scenario, p: &Prepared, init: Option<SimState>) -> CliResult<BenchReport> {
    let t_end = p.solver.t_end;
    if !(t_end > 0.0) {
        return Err(CliError::input("bench needs a positive simulated interval"));
    }
    let n_grid = ((t_end / p.ui * a.grid_per_ui as f64).ceil() as usize).max(2);
    let solve = |kind, dt| run_solver(kind, dt, p, init).map_err(|e| CliError::from_model("solver", e));
    let ta = solve(a.solver_a, a.baseline_dt)?;
    let tb = solve(a.solver_b, a.baseline_dt)?;
    let (ra, rb) = (summarize(a.solver_a, a.baseline_dt, &ta), summarize(a.solver_b, a.baseline_dt, &tb));
    let reference = match a.reference_dt {
        Some(dt) => {
            let tr = solve(SolverKind::Baseline, dt)?;
            Some(Reference {
                run: summarize(SolverKind::Baseline, dt, &tr),
                a_vs_reference: accuracy(&ta, &tr, n_grid)?,
                b_vs_reference: accuracy(&tb, &tr, n_grid)?,
            })
        }
        None => None,
    };
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        command: "bench",
        data_rate: sc.data_rate,
        n_ui: sc.n_ui,
        t_end_s: t_end,
        a_vs_b: accuracy(&ta, &tb, n_grid)?,
        step_ratio: ratio(rb.cost as f64, ra.cost as f64),
        wall_clock_ratio: ratio(rb.wall_clock_s, ra.wall_clock_s),
        a: ra,
        b: rb,
        reference,
    })
}

pub fn run(g: &GlobalOpts, a: &BenchArgs) -> CliResult<()> {
    if !(a.baseline_dt > 0.0) || a.reference_dt.is_some_and(|d| !(d > 0.0)) || a.grid_per_ui == 0 {
        return Err(CliError::input("ticks and grid density must be positive"));
    }
    let (sc, p) = prepare(g, &a.config, &a.model)?;
    let init = initial_state(&sc, &p)?;
    if g.dry_run {
        println!("dry run: {} and {} are valid", a.config.display(), a.model.display());
        return Ok(());
    }
    info(g, format!("benchmarking {:?} against {:?}", a.solver_a, a.solver_b));
    let report = bench(a, &sc, &p, init)?;
    ensure_dir(&a.out)?;
    write_json(&a.out, "benchmark.json", &report)?;
    info(g, format!("step ratio {:.2}", report.step_ratio));
    Ok(())
}
