#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ringmod::card::{HeaterSettings, ModelCard};
use ringmod::electrical::ElectricalParams;
use ringmod::extraction::{log_grid, wavelength_grid, TransmissionSweep};
use ringmod::io::{write_cv_csv, write_s11_csv, write_sweep_csv};
use ringmod::model::ResonatorParams;
use serde_json::{json, Value};

pub const BIASES: [f64; 7] = [-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
pub const HEATER_MW: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

pub fn golden_card() -> ModelCard {
    ModelCard::new(
        ResonatorParams {
            lambda_ref: 1566.7e-9,
            lambda0_coeffs: vec![1566.7e-9, 60e-12, 3e-12],
            tau_c_coeffs: [15e-12, 0.5e-12, 0.0],
            tau_l_coeffs: [25e-12, 4e-12, 0.5e-12],
            v_range: (-0.5, 2.5),
            gamma: 251e-9,
        },
        ElectricalParams::reference_device(),
        HeaterSettings::default(),
    )
}

pub fn ringmod() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ringmod"))
}

pub fn run(args: &[&str]) -> Output {
    ringmod().args(args).output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn write(path: &Path, text: &str) -> PathBuf {
    std::fs::write(path, text).unwrap();
    path.to_path_buf()
}

pub fn write_card(dir: &Path, card: &ModelCard) -> PathBuf {
    write(&dir.join("card.json"), &card.to_json())
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Scenario in the JSON schema `simulate` and `bench` read.
pub fn scenario(data_rate: f64, format: &str, n_ui: usize, v_bias: f64, vpp: f64) -> Value {
    json!({
        "schema_version": 1,
        "data_rate": data_rate,
        "format": format,
        "vpp": vpp,
        "v_bias": v_bias,
        "prbs_order": 13,
        "seed": 1,
        "t_edge_ui": 0.25,
        "laser": { "power_mW": 1.0, "lambda_L_nm": 1566.65 },
        "n_ui": n_ui
    })
}

pub fn write_value(path: &Path, v: &Value) -> PathBuf {
    write(path, &serde_json::to_string_pretty(v).unwrap())
}

/// Writes noise-free measurement files generated from `card` and returns
/// the manifest path: 7 bias sweeps, 4 heater sweeps plus an unheated one,
/// 201-point S11 at 0 V and a 3-point C–V.
pub fn write_bundle(dir: &Path, card: &ModelCard, init: &ElectricalParams) -> PathBuf {
    let grid = wavelength_grid(1565.2e-9, 1e-12, 3201);
    let sweep_file = |name: String, bias: f64, mw: f64| {
        let s = TransmissionSweep::synthesize(&card.optical, bias, mw * 1e-3, &grid).unwrap();
        write_sweep_csv(std::fs::File::create(dir.join(&name)).unwrap(), &s, false).unwrap();
        json!({ "file": name, "bias_V": bias, "heater_mW": mw })
    };
    let bias: Vec<Value> = BIASES.iter().enumerate().map(|(i, &v)| sweep_file(format!("bias_{i}.csv"), v, 0.0)).collect();
    let heater: Vec<Value> = std::iter::once(0.0)
        .chain(HEATER_MW)
        .enumerate()
        .map(|(i, p)| sweep_file(format!("heater_{i}.csv"), 0.0, p))
        .collect();
    let ep = card.electrical;
    let s11: Vec<_> = log_grid(0.1e9, 50e9, 201).into_iter().map(|f| (f, ep.s11(0.0, f).unwrap())).collect();
    write_s11_csv(std::fs::File::create(dir.join("s11.csv")).unwrap(), &s11).unwrap();
    let cv: Vec<_> = [-0.4, 0.0, 1.0].iter().map(|&v| (v, ep.junction_capacitance(v).unwrap())).collect();
    write_cv_csv(std::fs::File::create(dir.join("cv.csv")).unwrap(), &cv).unwrap();
    let drive: Vec<Value> = [1.0, 2.0, 3.0].iter().map(|&v| json!({ "v_V": v, "p_mW": v * v / ep.rh * 1e3 })).collect();
    let manifest = json!({
        "schema_version": 1,
        "bias_sweeps": bias,
        "heater_sweeps": heater,
        "heater_drive": drive,
        "s11": { "file": "s11.csv", "bias_V": 0.0 },
        "cv": "cv.csv",
        "electrical_init": serde_json::to_value(init).unwrap(),
        "lambda_ref_nm": card.optical.lambda_ref * 1e9
    });
    write_value(&dir.join("manifest.json"), &manifest)
}

/// Starting point 20-30% away from `ep`.
pub fn perturbed(ep: &ElectricalParams) -> ElectricalParams {
    ElectricalParams { cj0: ep.cj0 * 1.3, rs: ep.rs * 0.75, cox: ep.cox * 1.25, rsi: ep.rsi * 0.7, cpad: ep.cpad * 1.2, ..*ep }
}
