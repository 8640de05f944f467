mod common;

use crossover::analysis::{
    randomization_test, residual_rows, write_residuals, RandomizationScheme,
};
use crossover::rng::substream;
use crossover::simulation::{
    simulate_trial, ErrorModel, MissingnessSpec, ModelParams, PatientEffects,
};
use crossover::{
    construct_design, default_weights, fit_model, Error, RngSeed, Transform, TrialDataset,
};

fn simulated(tau: f64, sigma: f64, seed: u64) -> (crossover::Design, TrialDataset) {
    let design = construct_design(4, 2, 10, &default_weights(), RngSeed(seed)).unwrap();
    let params = ModelParams {
        tau,
        pi: [0.4, 0.1, 0.0, -0.3],
        xi: PatientEffects::Normal { sd: 1.0 },
    };
    let mut rng = substream(RngSeed(seed), 0x7e57, 0);
    let data = simulate_trial(
        &design,
        &params,
        &ErrorModel::iid(sigma).unwrap(),
        &MissingnessSpec::none(),
        &mut rng,
    )
    .unwrap();
    (design, data)
}

#[test]
fn residuals_sum_to_zero_and_positions_are_monotone() {
    let (_, data) = simulated(1.0, 1.0, 1);
    let fit = fit_model(&data, Transform::Identity).unwrap();
    let sum: f64 = fit.residuals.iter().map(|r| r.residual).sum();
    assert!(sum.abs() < 1e-8, "{sum}");

    let mut rows = residual_rows(&fit);
    rows.sort_by(|a, b| a.record.residual.total_cmp(&b.record.residual));
    for pair in rows.windows(2) {
        assert!(pair[0].plotting_position < pair[1].plotting_position);
        assert!(pair[0].normal_score < pair[1].normal_score);
    }
    let n = rows.len() as f64;
    assert!((rows[0].plotting_position - 0.625 / (n + 0.25)).abs() < 1e-15);

    let mut buf = Vec::new();
    write_residuals(&fit, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().count(), data.records().len() + 1);
    assert!(text.starts_with(
        "patient_id,week,day,treatment,fitted,residual,plotting_position,normal_score"
    ));
}

#[test]
fn log_shift_preserves_the_sign_of_the_effect() {
    for (seed, tau) in [(2, 0.8), (3, -0.8)] {
        let (_, data) = simulated(tau, 0.3, seed);
        // Monotone positive responses: exponentiate, so log(y + 0) recovers the linear scale.
        let records = data
            .records()
            .iter()
            .cloned()
            .map(|mut r| {
                r.y = r.y.map(f64::exp);
                r
            })
            .collect();
        let positive = TrialDataset::new(records).unwrap();
        let raw = fit_model(&positive, Transform::Identity).unwrap();
        let logged = fit_model(&positive, Transform::LogShift(1.0)).unwrap();
        assert_eq!(raw.tau_hat.signum(), tau.signum());
        assert_eq!(logged.tau_hat.signum(), raw.tau_hat.signum());
    }
}

#[test]
fn log_shift_rejects_non_positive_arguments() {
    let (_, data) = simulated(0.0, 1.0, 4);
    assert!(matches!(
        fit_model(&data, Transform::LogShift(0.0)),
        Err(Error::Transform(_))
    ));
}

#[test]
fn strong_effect_is_detected_by_randomization() {
    // τ = 5 · 5σ/√m with m = 160.
    let tau = 25.0 / 160f64.sqrt();
    let (_, data) = simulated(tau, 1.0, 5);
    let scheme = RandomizationScheme::from_data(&data, default_weights());
    let r = randomization_test(&data, &scheme, Transform::Identity, 500, RngSeed(6)).unwrap();
    assert!(r.p_value < 0.01, "{r:?}");
    assert_eq!(r.failures, 0);
}

#[test]
fn randomization_p_is_in_unit_interval_and_reproducible() {
    let (_, data) = simulated(0.0, 1.0, 7);
    let scheme = RandomizationScheme::from_data(&data, default_weights());
    let a = randomization_test(&data, &scheme, Transform::Identity, 199, RngSeed(8)).unwrap();
    let b = randomization_test(&data, &scheme, Transform::Identity, 199, RngSeed(8)).unwrap();
    assert_eq!(a, b);
    assert!(a.p_value > 0.0 && a.p_value <= 1.0);
    assert_eq!(a.p_value, (1 + a.at_least_as_extreme) as f64 / 200.0);
}

#[test]
fn csv_round_trip_gives_identical_fit() {
    let (_, data) = simulated(0.5, 1.0, 9);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trial.csv");
    data.write_csv(&path).unwrap();
    let back = TrialDataset::read_csv(&path).unwrap();
    let a = fit_model(&data, Transform::Identity).unwrap();
    let b = fit_model(&back, Transform::Identity).unwrap();
    assert!((a.tau_hat - b.tau_hat).abs() < 1e-12);
    assert_eq!(a.dof, b.dof);
}

#[test]
fn kolmogorov_helper_matches_reference_values() {
    for (x, tail) in [
        (0.5, 0.963_945_243_664_875_1),
        (1.0, 0.269_999_671_677_354_6),
        (1.36, 0.049_485_876_755_377_88),
        (1.63, 0.009_846_364_888_486_529),
    ] {
        assert!((common::kolmogorov_sf(x) - tail).abs() < 1e-12, "x = {x}");
    }
    let (d, _) = common::ks_uniform(&[0.05, 0.2, 0.21, 0.5, 0.77, 0.9, 0.93]);
    assert!((d - 0.218_571_428_571_428_56).abs() < 1e-15);
}
