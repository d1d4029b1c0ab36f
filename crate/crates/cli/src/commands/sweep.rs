use rayon::prelude::*;
use serde::Serialize;

use ringmod::analysis::{sweep_fcm, FcmSweepSpec};
use ringmod::extraction::find_resonance;
use ringmod::io::write_sweep_csv;

use crate::config::{load_card, SweepConfig, SweepPoint, SCHEMA_VERSION};
use crate::error::{CliError, CliResult};
use crate::output::{ensure_dir, render_csv, sha256_hex, write_atomic, write_json};
use crate::{info, GlobalOpts, SweepArgs};

#[derive(Debug, Serialize)]
struct SpectrumEntry {
    file: String,
    #[serde(rename = "bias_V")]
    bias_v: f64,
    #[serde(rename = "heater_mW")]
    heater_mw: f64,
    /// Dip position and amplitude floor of the spectrum, when found.
    lambda0_nm: Option<f64>,
    t0: Option<f64>,
    sha256: String,
    warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
struct Index<'a> {
    schema_version: u32,
    command: &'static str,
    config: &'a SweepConfig,
    spectra: Vec<SpectrumEntry>,
}

fn file_name(i: usize, cfg: &SweepConfig, p: &SweepPoint) -> String {
    if cfg.bias_v.is_some() {
        format!("spectrum_{i:02}_bias_{:+.3}V.csv", p.bias)
    } else {
        format!("spectrum_{i:02}_heater_{:.4}mW.csv", p.heater_power * 1e3)
    }
}

pub fn run(g: &GlobalOpts, a: &SweepArgs) -> CliResult<()> {
    let cfg = SweepConfig::load(&a.config)?;
    let card = load_card(&a.model)?;
    let model = card.modulator().map_err(|e| CliError::from_model("model card", e))?;
    let points = cfg.points().map_err(CliError::input)?;
    let (lo, hi) = model.optical.v_range;
    if let Some(p) = points.iter().find(|p| p.bias < lo || p.bias > hi) {
        return Err(CliError::input(format!(
            "{}: bias {} V outside the card's range [{lo}, {hi}] V",
            a.config.display(),
            p.bias
        )));
    }
    if g.dry_run {
        println!("dry run: {} sweep points valid", points.len());
        return Ok(());
    }
    ensure_dir(&a.out)?;
    info(g, format!("running {} chirped sweeps", points.len()));

    let results: Vec<CliResult<(String, Vec<u8>, SpectrumEntry)>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let spec = FcmSweepSpec {
                bias: p.bias,
                heater_power: p.heater_power,
                laser_power: cfg.laser_power_mw * 1e-3,
                lambda_start: cfg.lambda_start_nm * 1e-9,
                lambda_stop: cfg.lambda_stop_nm * 1e-9,
                duration: cfg.duration_s,
                dwell_tau: cfg.dwell_tau,
                n_samples: cfg.n_samples,
            };
            let ctx = format!("sweep point {i} (bias {} V, heater {} mW)", p.bias, p.heater_power * 1e3);
            let s = sweep_fcm(&model, &spec, cfg.rel_tol).map_err(|e| CliError::from_model(&ctx, e))?;
            let csv = render_csv("spectrum", |buf| write_sweep_csv(buf, &s.sweep, cfg.db))?;
            let mut warnings: Vec<String> = s.warnings.iter().map(|w| w.to_string()).collect();
            let dip = find_resonance(&s.sweep)
                .map_err(|e| warnings.push(format!("no dip located: {e}")))
                .ok();
            let name = file_name(i, &cfg, p);
            let entry = SpectrumEntry {
                file: name.clone(),
                bias_v: p.bias,
                heater_mw: p.heater_power * 1e3,
                lambda0_nm: dip.map(|d| d.0 * 1e9),
                t0: dip.map(|d| d.1),
                sha256: sha256_hex(&csv),
                warnings,
            };
            Ok((name, csv, entry))
        })
        .collect();

    let mut spectra = Vec::with_capacity(results.len());
    for r in results {
        let (name, csv, entry) = r?;
        for w in &entry.warnings {
            eprintln!("warning: {name}: {w}");
        }
        write_atomic(&a.out, &name, &csv)?;
        spectra.push(entry);
    }
    write_json(&a.out, "spectra.json", &Index { schema_version: SCHEMA_VERSION, command: "sweep-fcm", config: &cfg, spectra })?;
    Ok(())
}
