mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use common::{card, perturbed, rel_err, synthetic_set, BIASES};
use ringmod::electrical::ElectricalParams;
use ringmod::extraction::{
    extract, find_resonance_window, fit_gamma, fit_s11, fit_sweep, fit_tau, fit_voltage_polys, log_grid,
    wavelength_grid, BiasPoint, CouplingBranch, ExtractOptions, MeasurementSet, S11Mask, TransmissionSweep,
};
use ringmod::model::ResonatorParams;

fn percentile95(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs[(0.95 * (xs.len() - 1) as f64).round() as usize]
}

fn assert_close(name: &str, got: f64, want: f64, tol: f64) {
    assert!(rel_err(got, want) <= tol, "{name}: {got:e} vs {want:e}");
}

fn assert_card_matches(got: &ringmod::card::ModelCard, want: &ringmod::card::ModelCard, tol: f64) {
    let (g, w) = (&got.optical, &want.optical);
    for (k, (a, b)) in g.lambda0_coeffs.iter().zip(&w.lambda0_coeffs).enumerate() {
        assert_close(&format!("lambda0[{k}]"), *a, *b, if k == 0 { 1e-9 } else { tol });
    }
    for (name, a, b) in [("tau_c", g.tau_c_coeffs, w.tau_c_coeffs), ("tau_l", g.tau_l_coeffs, w.tau_l_coeffs)] {
        for k in 0..3 {
            if b[k] == 0.0 {
                assert!(a[k].abs() <= tol * b[0], "{name}[{k}] = {:e}, expected 0", a[k]);
            } else {
                assert_close(&format!("{name}[{k}]"), a[k], b[k], tol);
            }
        }
    }
    assert_close("gamma", g.gamma, w.gamma, tol);
    let (ge, we) = (&got.electrical, &want.electrical);
    for (name, a, b) in [
        ("Cj0", ge.cj0, we.cj0),
        ("Vbi", ge.vbi, we.vbi),
        ("mj", ge.mj, we.mj),
        ("Rs", ge.rs, we.rs),
        ("Cox", ge.cox, we.cox),
        ("RSi", ge.rsi, we.rsi),
        ("Cpad", ge.cpad, we.cpad),
        ("Rh", ge.rh, we.rh),
    ] {
        assert_close(name, a, b, tol);
    }
}

#[test]
fn noise_free_pipeline_round_trip() {
    let truth = card();
    let set = synthetic_set(&truth);
    let ex = extract(&set, &ExtractOptions::default()).unwrap();
    assert_card_matches(&ex.card, &truth, 0.02);
    assert_eq!(ex.card.optical.v_range, (-0.5, 2.5));
    assert!(ex.report.warnings.is_empty(), "{:?}", ex.report.warnings);
    for f in &ex.report.per_bias {
        let t0 = (1.0 / f.tau_l - 1.0 / f.tau_c).abs() / (1.0 / f.tau_l + 1.0 / f.tau_c);
        assert!((t0 - f.t0).abs() < 1e-6);
    }
}

#[test]
fn grating_coupler_envelope_is_removed_before_fitting() {
    let truth = card();
    let mut set = synthetic_set(&truth);
    // insertion loss with a slow tilt and curvature across the window
    for s in set.bias_sweeps.iter_mut().chain(set.heater_sweeps.iter_mut()) {
        for p in &mut s.points {
            let x = (p.0 - 1566.8e-9) / 1.6e-9;
            p.1 *= 0.25 * (1.0 + 0.08 * x - 0.05 * x * x);
        }
    }
    let ex = extract(&set, &ExtractOptions::default()).unwrap();
    assert_card_matches(&ex.card, &truth, 0.02);
}

#[test]
fn missing_heater_sweeps_leave_gamma_unset() {
    let mut set = synthetic_set(&card());
    set.heater_sweeps.clear();
    let ex = extract(&set, &ExtractOptions::default()).unwrap();
    assert_eq!(ex.card.optical.gamma, 0.0);
    assert!(ex.report.heater.is_none());
    assert!(ex.report.warnings.iter().any(|w| w.contains("heater")));
}

#[test]
fn unheated_reference_is_borrowed_from_the_bias_fit() {
    let truth = card();
    let mut set = synthetic_set(&truth);
    set.heater_sweeps.retain(|s| s.heater_power > 0.0);
    let ex = extract(&set, &ExtractOptions::default()).unwrap();
    assert_close("gamma", ex.card.optical.gamma, truth.optical.gamma, 0.02);
    assert!(!ex.report.warnings.is_empty());
}

#[test]
fn first_failing_fit_error_propagates() {
    let mut set = synthetic_set(&card());
    for p in &mut set.bias_sweeps[3].points {
        p.1 = 0.9;
    }
    assert!(matches!(extract(&set, &ExtractOptions::default()), Err(ringmod::Error::NoResonanceFound(_))));
    let empty = MeasurementSet::default();
    assert!(extract(&empty, &ExtractOptions::default()).is_err());
}

#[test]
fn tau_fit_with_transmission_noise() {
    // 40 ps loss, 20 ps coupling, 1 pm grid
    let tau_l = 40e-12;
    let tau_c = 20e-12;
    let params = ResonatorParams {
        lambda_ref: 1566.7e-9,
        lambda0_coeffs: vec![1566.7e-9, 0.0],
        tau_c_coeffs: [tau_c, 0.0, 0.0],
        tau_l_coeffs: [tau_l, 0.0, 0.0],
        v_range: (0.0, 1.0),
        gamma: 0.0,
    };
    let grid = wavelength_grid(1565.7e-9, 1e-12, 2001);
    let clean = TransmissionSweep::synthesize(&params, 0.0, 0.0, &grid).unwrap();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut el, mut ec) = (Vec::new(), Vec::new());
    for _ in 0..100 {
        let mut s = clean.clone();
        for p in &mut s.points {
            p.1 = (p.1 + noise.sample(&mut rng)).max(1e-6);
        }
        let (l0, t0) = find_resonance_window(&s, 25).unwrap();
        let fit = fit_tau(&s, l0, t0, CouplingBranch::CouplingDominated).unwrap();
        el.push(rel_err(fit.tau_l, tau_l));
        ec.push(rel_err(fit.tau_c, tau_c));
    }
    let (pl, pc) = (percentile95(el), percentile95(ec));
    assert!(pl <= 0.05 && pc <= 0.05, "95th percentile errors: tau_l {pl:.3}, tau_c {pc:.3}");
}

#[test]
fn branch_choice_keeps_the_linewidth() {
    let truth = card();
    let grid = common::sweep_grid();
    let s = TransmissionSweep::synthesize(&truth.optical, 1.0, 0.0, &grid).unwrap();
    let d = truth.optical.tau_at(1.0).unwrap();
    let mut taus = Vec::new();
    for branch in [CouplingBranch::CouplingDominated, CouplingBranch::LossDominated] {
        let f = fit_sweep(&s, &ExtractOptions { branch, ..Default::default() }).unwrap();
        let tau = 1.0 / (1.0 / f.tau_l + 1.0 / f.tau_c);
        assert_close("tau", tau, d.tau, 0.01);
        taus.push((f.tau_l, f.tau_c));
    }
    assert_close("swap", taus[0].0, taus[1].1, 1e-9);
    assert_close("swap", taus[0].1, taus[1].0, 1e-9);
}

#[test]
fn bias_polynomials_with_one_percent_noise() {
    let p = common::optical();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut errs = Vec::new();
    for _ in 0..100 {
        let pts: Vec<BiasPoint> = BIASES
            .iter()
            .map(|&v| {
                let d = p.tau_at(v).unwrap();
                let shift = p.resonance_wavelength(v, 0.0).unwrap() - p.lambda0_coeffs[0];
                BiasPoint {
                    v,
                    lambda0: p.lambda0_coeffs[0] + shift * (1.0 + noise.sample(&mut rng)),
                    tau_c: d.tau_c * (1.0 + noise.sample(&mut rng)),
                    tau_l: d.tau_l * (1.0 + noise.sample(&mut rng)),
                }
            })
            .collect();
        let polys = fit_voltage_polys(&pts, 2).unwrap();
        errs.push(rel_err(polys.lambda0_coeffs[1], p.lambda0_coeffs[1]));
    }
    let p95 = percentile95(errs);
    assert!(p95 <= 0.10, "lambda0 slope 95th percentile error {p95:.3}");
}

#[test]
fn heater_efficiency_with_two_percent_noise() {
    let gamma = 251e-9;
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut errs = Vec::new();
    for _ in 0..200 {
        let pts: Vec<(f64, f64)> = std::iter::once(0.0)
            .chain(common::HEATER_POWERS)
            .map(|ph| (ph, 1566.7e-9 + gamma * ph * (1.0 + noise.sample(&mut rng))))
            .collect();
        errs.push(rel_err(fit_gamma(&pts).unwrap(), gamma));
    }
    let p95 = percentile95(errs);
    assert!(p95 <= 0.05, "gamma 95th percentile error {p95:.3}");
}

#[test]
fn s11_fit_at_40db_snr() {
    let truth = ElectricalParams::reference_device();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let clean: Vec<_> = log_grid(0.1e9, 50e9, 201).into_iter().map(|f| (f, truth.s11(0.0, f).unwrap())).collect();
    let rms = (clean.iter().map(|p| p.1.norm_sqr()).sum::<f64>() / clean.len() as f64).sqrt();
    // 40 dB below the signal, split over both quadratures
    let sigma = rms * 1e-2 / 2f64.sqrt();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let mut data = clean.clone();
        common::add_complex_noise(&mut data, sigma, &mut rng);
        let fit = fit_s11(&data, 0.0, &perturbed(&truth), S11Mask::default()).unwrap();
        let p = fit.params;
        for (a, b) in [(p.cj0, truth.cj0), (p.rs, truth.rs), (p.cox, truth.cox), (p.rsi, truth.rsi), (p.cpad, truth.cpad)] {
            worst = worst.max(rel_err(a, b));
        }
    }
    assert!(worst <= 0.10, "worst parameter error {worst:.3}");
}
