#![allow(dead_code)]

use ringmod::card::{HeaterSettings, ModelCard};
use ringmod::electrical::ElectricalParams;
use ringmod::model::ResonatorParams;
use ringmod::solver::Modulator;

pub const LAMBDA_REF: f64 = 1566.7e-9;
/// Laser 50 pm blue of the unbiased resonance.
pub const LAMBDA_LASER: f64 = 1566.65e-9;

pub fn optical() -> ResonatorParams {
    ResonatorParams {
        lambda_ref: LAMBDA_REF,
        lambda0_coeffs: vec![1566.7e-9, 60e-12, 3e-12],
        tau_c_coeffs: [15e-12, 0.5e-12, 0.0],
        tau_l_coeffs: [25e-12, 4e-12, 0.5e-12],
        v_range: (-0.5, 2.5),
        gamma: 251e-9,
    }
}

pub fn card() -> ModelCard {
    ModelCard::new(optical(), ElectricalParams::reference_device(), HeaterSettings::default())
}

pub fn modulator() -> Modulator {
    card().modulator().unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

use num_complex::Complex64;
use ringmod::extraction::{log_grid, wavelength_grid, MeasurementSet, S11Data, TransmissionSweep};

pub const BIASES: [f64; 7] = [-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
pub const HEATER_POWERS: [f64; 4] = [0.25e-3, 0.5e-3, 0.75e-3, 1e-3];
pub const CV_BIASES: [f64; 3] = [-0.4, 0.0, 1.0];

/// 1 pm grid wide enough for every bias and heater setting.
pub fn sweep_grid() -> Vec<f64> {
    wavelength_grid(1565.2e-9, 1e-12, 3201)
}

/// Noise-free measurement bundle generated from `card`.
pub fn synthetic_set(card: &ModelCard) -> MeasurementSet {
    let grid = sweep_grid();
    let ep = card.electrical;
    let bias_sweeps = BIASES
        .iter()
        .map(|&v| TransmissionSweep::synthesize(&card.optical, v, 0.0, &grid).unwrap())
        .collect();
    let heater_sweeps = std::iter::once(0.0)
        .chain(HEATER_POWERS)
        .map(|p| TransmissionSweep::synthesize(&card.optical, 0.0, p, &grid).unwrap())
        .collect();
    let heater_drive = [1.0, 2.0, 3.0].iter().map(|&v| (v, v * v / ep.rh)).collect();
    let s11 = S11Data {
        bias: 0.0,
        points: log_grid(0.1e9, 50e9, 201).into_iter().map(|f| (f, ep.s11(0.0, f).unwrap())).collect(),
    };
    let cv = CV_BIASES.iter().map(|&v| (v, ep.junction_capacitance(v).unwrap())).collect();
    MeasurementSet {
        bias_sweeps,
        heater_sweeps,
        heater_drive,
        s11: Some(s11),
        cv,
        electrical_init: Some(perturbed(&ep)),
        lambda_ref: Some(card.optical.lambda_ref),
        heater: card.heater,
    }
}

/// Starting point 20-30% away from `ep` in alternating directions.
pub fn perturbed(ep: &ElectricalParams) -> ElectricalParams {
    ElectricalParams {
        cj0: ep.cj0 * 1.3,
        rs: ep.rs * 0.75,
        cox: ep.cox * 1.25,
        rsi: ep.rsi * 0.7,
        cpad: ep.cpad * 1.2,
        ..*ep
    }
}

pub fn add_complex_noise(points: &mut [(f64, Complex64)], sigma: f64, rng: &mut impl rand::Rng) {
    use rand_distr::{Distribution, Normal};
    let n = Normal::new(0.0, sigma).unwrap();
    for p in points {
        p.1 += Complex64::new(n.sample(rng), n.sample(rng));
    }
}
