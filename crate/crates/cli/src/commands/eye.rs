use std::fs::File;

use serde::Serialize;

use ringmod::analysis::{eye_metrics, fold_eye, EyeMetrics, EyeSpec};
use ringmod::io::{read_trace_csv, write_eye_csv};
use ringmod::stimulus::prbs_bits;

use crate::config::{EyeConfig, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, render_csv, write_atomic, write_json};
use crate::{EyeArgs, GlobalOpts};

#[derive(Debug, Serialize)]
struct EyeReport {
    schema_version: u32,
    command: &'static str,
    ui_s: f64,
    skip_ui: usize,
    n_t: usize,
    n_p: usize,
    #[serde(rename = "power_range_W")]
    power_range: (f64, f64),
    total_count: u64,
    metrics: Option<EyeMetrics>,
    warnings: Vec<String>,
}

pub fn run(g: &GlobalOpts, a: &EyeArgs) -> CliResult<()> {
    let cfg = EyeConfig::load(&a.config)?;
    let file = File::open(&a.trace).map_err(|e| CliError::input(format!("cannot read {}: {e}", a.trace.display())))?;
    let rows = read_trace_csv(file).map_err(|e| CliError::data(&a.trace, e))?;
    if g.dry_run {
        println!("dry run: {} trace rows readable", rows.len());
        return Ok(());
    }
    let ui = 1.0 / cfg.data_rate;
    let mut spec = EyeSpec::new(ui, cfg.skip_ui);
    spec.samples_per_ui = cfg.samples_per_ui.unwrap_or(spec.samples_per_ui);
    spec.n_t = cfg.n_t.unwrap_or(spec.n_t);
    spec.n_p = cfg.n_p.unwrap_or(spec.n_p);
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let power: Vec<f64> = rows.iter().map(|r| r.p_out).collect();
    let eye = fold_eye(&times, &power, &spec).map_err(|e| CliError::from_model("eye", e))?;

    let mut warnings = Vec::new();
    let metrics = match cfg.prbs_order {
        Some(order) => {
            let seed = g.seed.or(cfg.seed).unwrap_or(1);
            let n_bits = (times.last().copied().unwrap_or(0.0) / ui).ceil() as usize;
            let bits = prbs_bits(order, seed, n_bits).map_err(|e| CliError::from_model("eye pattern", e))?;
            match eye_metrics(&times, &power, &bits, ui, cfg.skip_ui) {
                Ok(m) => Some(m),
                Err(e) => {
                    warnings.push(format!("metrics unavailable: {e}"));
                    None
                }
            }
        }
        None => {
            warnings.push("no prbs_order given: metrics skipped".into());
            None
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }

    ensure_dir(&a.out)?;
    let bytes = render_csv("eye grid", |buf| write_eye_csv(buf, &eye))?;
    write_atomic(&a.out, "eye.csv", &bytes)?;
    let report = EyeReport {
        schema_version: SCHEMA_VERSION,
        command: "eye",
        ui_s: ui,
        skip_ui: cfg.skip_ui,
        n_t: eye.n_t,
        n_p: eye.n_p,
        power_range: eye.power_range,
        total_count: eye.total(),
        metrics,
        warnings,
    };
    write_json(&a.out, "metrics.json", &report)?;
    Ok(())
}
