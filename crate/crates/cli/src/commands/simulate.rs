use std::path::Path;

use serde::Serialize;

use ringmod::analysis::{align, eye_metrics, steady_levels, EyeMetrics, LevelStats};
use ringmod::io::{trace_rows, write_trace_csv};
use ringmod::scenario::{Format, InitialCondition, Prepared, Scenario};
use ringmod::solver::{integrate_adaptive, SimState, SolverStats, Trace};

use crate::config::{load_card, load_scenario, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, render_csv, sha256_hex, write_atomic, write_json};
use crate::{info, GlobalOpts, SimulateArgs};

const SAMPLES_PER_UI: usize = 64;

#[derive(Debug, Serialize)]
pub struct FinalState {
    pub t_s: f64,
    pub ax: f64,
    pub ay: f64,
    #[serde(rename = "v1_V")]
    pub v1: f64,
    #[serde(rename = "v_cox_V")]
    pub v_cox: f64,
    #[serde(rename = "v_m_V")]
    pub v_m: f64,
    pub dlambda_m: f64,
    #[serde(rename = "p_out_W")]
    pub p_out: f64,
}

impl FinalState {
    fn of(trace: &Trace) -> Option<Self> {
        trace.last().map(|p| Self {
            t_s: p.t,
            ax: p.a.re,
            ay: p.a.im,
            v1: p.electrical.v1,
            v_cox: p.electrical.v_cox,
            v_m: p.electrical.v_m,
            dlambda_m: p.d_lambda,
            p_out: p.p_out(),
        })
    }

    /// Digest of the exact bit patterns of the final state.
    fn checksum(&self) -> String {
        let mut bytes = Vec::with_capacity(64);
        for x in [self.t_s, self.ax, self.ay, self.v1, self.v_cox, self.v_m, self.dlambda_m, self.p_out] {
            bytes.extend_from_slice(&x.to_le_bytes());
        }
        sha256_hex(&bytes)
    }
}

#[derive(Debug, Serialize)]
pub struct Stats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub derivative_evals: usize,
    pub wall_clock_s: f64,
}

impl From<SolverStats> for Stats {
    fn from(s: SolverStats) -> Self {
        Self {
            accepted_steps: s.accepted_steps,
            rejected_steps: s.rejected_steps,
            derivative_evals: s.derivative_evals,
            wall_clock_s: s.wall_clock_s,
        }
    }
}

#[derive(Debug, Default, Serialize)]
pub struct TraceMetrics {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eye: Option<EyeMetrics>,
    /// Steady optical levels per symbol (PAM4).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<LevelStats>>,
    /// Largest over smallest gap between adjacent optical levels (PAM4).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level_gap_ratio: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    schema_version: u32,
    command: &'static str,
    scenario: &'a Scenario,
    t_end_s: f64,
    ui_s: f64,
    n_points: usize,
    n_rows_written: usize,
    stats: Stats,
    final_state: Option<FinalState>,
    final_state_sha256: Option<String>,
    trace_sha256: String,
    metrics: TraceMetrics,
    warnings: Vec<String>,
}

/// Start-up interval excluded from metrics.
pub fn metrics_skip(n_ui: usize) -> usize {
    (n_ui / 5).min(10)
}

/// Eye metrics (NRZ) or level statistics (PAM4) of a finished run.
pub fn trace_metrics(sc: &Scenario, p: &Prepared, trace: &Trace, warnings: &mut Vec<String>) -> TraceMetrics {
    let n_ui = p.symbols.len();
    if trace.points.len() < 2 || n_ui < 4 {
        return TraceMetrics::default();
    }
    let (t, pw) = (trace.times(), trace.output_power());
    let skip = metrics_skip(n_ui);
    match sc.format {
        Format::Nrz => match eye_metrics(&t, &pw, &p.bits, p.ui, skip) {
            Ok(m) => TraceMetrics { eye: Some(m), ..Default::default() },
            Err(e) => {
                warnings.push(format!("eye metrics unavailable: {e}"));
                TraceMetrics::default()
            }
        },
        Format::Pam4 => match align(&t, &pw, &p.symbols, p.ui, skip, SAMPLES_PER_UI) {
            Ok(al) => {
                let levels = steady_levels(&al, &p.symbols, skip, 4);
                let mut means: Vec<f64> = levels.iter().filter(|l| l.count > 0).map(|l| l.mean).collect();
                means.sort_by(f64::total_cmp);
                let gaps: Vec<f64> = means.windows(2).map(|w| w[1] - w[0]).collect();
                let ratio = (gaps.len() == 3 && gaps.iter().all(|g| *g > 0.0)).then(|| {
                    gaps.iter().cloned().fold(0.0, f64::max) / gaps.iter().cloned().fold(f64::INFINITY, f64::min)
                });
                if ratio.is_none() {
                    warnings.push("fewer than four distinct optical levels resolved".into());
                }
                TraceMetrics { levels: Some(levels), level_gap_ratio: ratio, ..Default::default() }
            }
            Err(e) => {
                warnings.push(format!("level statistics unavailable: {e}"));
                TraceMetrics::default()
            }
        },
    }
}

/// Loads, seeds and prepares a scenario for one model card.
pub fn prepare(g: &GlobalOpts, config: &Path, model: &Path) -> CliResult<(Scenario, Prepared)> {
    let mut sc = load_scenario(config)?;
    let card = load_card(model)?;
    if let Some(seed) = g.seed {
        sc.seed = seed;
    }
    let p = sc.prepare(&card).map_err(|e| CliError::from_model(&config.display().to_string(), e))?;
    Ok((sc, p))
}

pub fn initial_state(sc: &Scenario, p: &Prepared) -> CliResult<Option<SimState>> {
    match sc.initial {
        InitialCondition::Steady => Ok(None),
        InitialCondition::Dark => SimState::dark(&p.model, &p.stimulus)
            .map(Some)
            .map_err(|e| CliError::from_model("initial state", e)),
    }
}

pub fn run(g: &GlobalOpts, a: &SimulateArgs) -> CliResult<()> {
    if a.every == 0 {
        return Err(CliError::input("--every must be at least 1"));
    }
    let (sc, p) = prepare(g, &a.config, &a.model)?;
    let init = initial_state(&sc, &p)?;
    if g.dry_run {
        println!("dry run: {} and {} are valid", a.config.display(), a.model.display());
        return Ok(());
    }
    ensure_dir(&a.out)?;
    let mut warnings = Vec::new();
    let t_end = p.solver.t_end;
    let trace = if t_end == 0.0 {
        warnings.push("t_end is 0: nothing simulated, trace is empty".to_string());
        Trace::default()
    } else {
        info(g, format!("simulating {} UI ({t_end:e} s)", sc.n_ui));
        integrate_adaptive(&p.model, &p.solver, &p.stimulus, init).map_err(|e| CliError::from_model("solver", e))?
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    let rows = trace_rows(&trace);
    let csv = render_csv("trace", |buf| write_trace_csv(buf, &rows, a.every))?;
    write_atomic(&a.out, "trace.csv", &csv)?;
    let n_rows_written = if rows.is_empty() { 0 } else { (rows.len() - 1).div_ceil(a.every) + 1 };

    let metrics = trace_metrics(&sc, &p, &trace, &mut warnings);
    let final_state = FinalState::of(&trace);
    let summary = Summary {
        schema_version: SCHEMA_VERSION,
        command: "simulate",
        scenario: &sc,
        t_end_s: t_end,
        ui_s: p.ui,
        n_points: trace.points.len(),
        n_rows_written,
        stats: trace.stats.into(),
        final_state_sha256: final_state.as_ref().map(FinalState::checksum),
        final_state,
        trace_sha256: sha256_hex(&csv),
        metrics,
        warnings,
    };
    write_json(&a.out, "summary.json", &summary)?;
    info(g, format!("wrote {}", a.out.display()));
    Ok(())
}
