mod common;

use common::{modulator, LAMBDA_LASER};
use ringmod::extraction::find_resonance;
use ringmod::analysis::{eye_metrics, fold_eye, sweep_fcm, EyeSpec, FcmSweepSpec, DEFAULT_DWELL_TAU};
use ringmod::solver::{integrate_adaptive, Modulator, SolverConfig};
use ringmod::stimulus::{cw_laser, nrz_waveform, prbs_bits, HeaterDrive, Stimulus, VoltageDrive};

fn spec(bias: f64, heater_power: f64, dwell_tau: f64) -> FcmSweepSpec {
    FcmSweepSpec {
        bias,
        heater_power,
        laser_power: 1e-3,
        lambda_start: 1566.15e-9,
        lambda_stop: 1567.25e-9,
        duration: None,
        dwell_tau,
        n_samples: 4001,
    }
}

/// Largest departure from the static curve, as a fraction of the dip depth.
fn deviation(m: &Modulator, s: &FcmSweepSpec) -> f64 {
    let sweep = sweep_fcm(m, s, 1e-8).unwrap().sweep;
    let d_lambda = m.thermal.wavelength_shift_static(s.heater_power);
    let (mut dev, mut floor) = (0.0f64, 1.0f64);
    for &(l, t) in &sweep.points {
        let st = m.optical.static_transmission(s.bias, d_lambda, l).unwrap();
        dev = dev.max((t - st).abs());
        floor = floor.min(st);
    }
    dev / (1.0 - floor)
}

#[test]
fn chirped_spectrum_tracks_static_curve() {
    let m = modulator();
    for bias in [0.0, 2.5] {
        let dev = deviation(&m, &spec(bias, 0.0, DEFAULT_DWELL_TAU));
        assert!(dev < 0.01, "bias {bias}: {dev:.4} of depth");
    }
}

#[test]
fn halving_chirp_rate_halves_distortion() {
    let m = modulator();
    let fast = deviation(&m, &spec(0.0, 0.0, 20.0));
    let slow = deviation(&m, &spec(0.0, 0.0, 40.0));
    let ratio = slow / fast;
    assert!((ratio - 0.5).abs() < 0.1, "{fast:.4} -> {slow:.4}");
}

#[test]
fn heater_power_shifts_chirped_resonance() {
    let m = modulator();
    let l0 = |ph: f64| find_resonance(&sweep_fcm(&m, &spec(0.0, ph, DEFAULT_DWELL_TAU), 1e-8).unwrap().sweep).unwrap().0;
    let shift = l0(1e-3) - l0(0.0);
    assert!((shift - 251e-12).abs() <= 0.02 * 251e-12, "shift {:.2} pm", shift * 1e12);
}

#[test]
fn nrz_eye_of_the_modulator() {
    let m = modulator();
    let ui = 40e-12;
    let n_ui = 300;
    let bits = prbs_bits(13, 1, n_ui).unwrap();
    let stim = Stimulus {
        voltage: VoltageDrive::Pwl(nrz_waveform(&bits, ui, 0.0, 2.0, 0.25 * ui).unwrap()),
        laser: cw_laser(1e-3, LAMBDA_LASER, m.optical.lambda_ref).unwrap(),
        heater: HeaterDrive::off(),
    };
    let trace = integrate_adaptive(&m, &SolverConfig::for_ui(ui, n_ui as f64 * ui), &stim, None).unwrap();
    let (t, p) = (trace.times(), trace.output_power());
    let met = eye_metrics(&t, &p, &bits, ui, 10).unwrap();
    assert!(met.extinction_ratio_db > 4.0, "ER {:.2} dB", met.extinction_ratio_db);
    assert!(met.rise_20_80 < met.fall_80_20, "rise {:e} fall {:e}", met.rise_20_80, met.fall_80_20);
    assert!(met.eye_height > 0.0 && met.eye_width > 0.0);

    let eye = fold_eye(&t, &p, &EyeSpec::new(ui, 10)).unwrap();
    // uniform grid includes both end points; the first 10 UI are dropped
    assert_eq!(eye.total() as usize, (n_ui - 10) * 64 + 1);
}
