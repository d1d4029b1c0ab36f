use std::fs::File;
use std::path::Path;

use ringmod::extraction::{extract, ExtractOptions, MeasurementSet, S11Data, TransmissionSweep};
use ringmod::io::{read_cv_csv, read_s11_csv, read_sweep_csv};

use crate::config::{FitManifest, SweepFile};
use crate::error::{resolve, CliError, CliResult};
use crate::output::{ensure_dir, write_atomic, write_json};
use crate::{info, FitArgs, GlobalOpts};

fn open(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn read_sweep(base: &Path, f: &SweepFile) -> CliResult<TransmissionSweep> {
    let path = resolve(base, &f.file);
    let s = read_sweep_csv(open(&path)?, f.bias_v, f.heater_mw * 1e-3).map_err(|e| CliError::data(&path, e))?;
    s.validate().map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    Ok(s)
}

/// Reads every file the manifest references.
pub fn load_measurements(path: &Path, m: &FitManifest) -> CliResult<MeasurementSet> {
    let base = path.parent().unwrap_or(Path::new("."));
    let bias_sweeps = m.bias_sweeps.iter().map(|f| read_sweep(base, f)).collect::<CliResult<_>>()?;
    let heater_sweeps = m.heater_sweeps.iter().map(|f| read_sweep(base, f)).collect::<CliResult<_>>()?;
    let s11 = match &m.s11 {
        Some(f) => {
            let p = resolve(base, &f.file);
            let points = read_s11_csv(open(&p)?).map_err(|e| CliError::data(&p, e))?;
            Some(S11Data { bias: f.bias_v, points })
        }
        None => None,
    };
    let cv = match &m.cv {
        Some(f) => {
            let p = resolve(base, f);
            read_cv_csv(open(&p)?).map_err(|e| CliError::data(&p, e))?
        }
        None => Vec::new(),
    };
    Ok(MeasurementSet {
        bias_sweeps,
        heater_sweeps,
        heater_drive: m.heater_drive.iter().map(|d| (d.v, d.p_mw * 1e-3)).collect(),
        s11,
        cv,
        electrical_init: m.electrical_init,
        lambda_ref: m.lambda_ref_nm.map(|l| l * 1e-9),
        heater: m.heater,
    })
}

pub fn run(g: &GlobalOpts, a: &FitArgs) -> CliResult<()> {
    let manifest = FitManifest::load(&a.config)?;
    let set = load_measurements(&a.config, &manifest)?;
    if g.dry_run {
        println!(
            "dry run: {} bias sweeps, {} heater sweeps readable",
            set.bias_sweeps.len(),
            set.heater_sweeps.len()
        );
        return Ok(());
    }
    let o = manifest.options;
    let opts = ExtractOptions {
        lambda0_degree: o.lambda0_degree,
        branch: o.branch,
        s11_mask: o.s11_free,
        resonance_window: o.resonance_window,
    };
    info(g, "extracting");
    let ex = extract(&set, &opts).map_err(|e| CliError::numerical("fit", e))?;
    for w in &ex.report.warnings {
        eprintln!("warning: {w}");
    }
    ensure_dir(&a.out)?;
    let mut card = ex.card.to_json();
    card.push('\n');
    write_atomic(&a.out, "model_card.json", card.as_bytes())?;
    write_json(&a.out, "fit_report.json", &ex.report)?;
    Ok(())
}
