//! Oracle tests for the sharpness witnesses: the frequency-cube main term
//! against its exact polynomial integral, the half-scale exceptional set
//! against closed-form measures, and the strip witness against its exact
//! L2 arithmetic and a full 2-D field evaluation.

use curvemax::propagator::{evolve, SpaceTimePoint};
use curvemax::spectral::{pt1, Symbol};
use curvemax::witnesses::{
    bourgain_growth, cube_main_term, cube_rate_exponent, halfscale_modulus, halfscale_s_set,
    sharp_p_regime_target, sharp_p_threshold, standard_battery, BourgainWitness, CubeRegime,
    CubeWitness, HalfScaleWitness,
};
use curvemax::Error;
use proptest::prelude::*;
use std::time::Duration;

const E_MINUS_2: f64 = std::f64::consts::E - 2.0;

#[test]
fn cube_regimes_and_times() {
    let first = CubeWitness::new(256.0, 1, 2, 0.75).unwrap();
    assert_eq!(first.regime(), CubeRegime::FirstOrder);
    assert_eq!(first.t0(), 256f64.powi(-2) / 100.0);

    // alpha = 1/m sits in the first regime (the inequality is inclusive).
    let edge = CubeWitness::new(256.0, 1, 2, 0.5).unwrap();
    assert_eq!(edge.regime(), CubeRegime::FirstOrder);

    let second = CubeWitness::new(1024.0, 1, 2, 0.25).unwrap();
    assert_eq!(second.regime(), CubeRegime::SecondOrder);
    assert_eq!(second.t0(), 1024f64.powf(-4.0));

    assert!(CubeWitness::new(256.0, 3, 2, 0.5).is_err());
    assert!(CubeWitness::new(256.0, 1, 0, 0.5).is_err());
    assert!(CubeWitness::new(256.0, 1, 2, 1.0).is_err());
    assert!(CubeWitness::new(0.5, 1, 2, 0.5).is_err());
}

/// At x = 0 the main term is the exact integral of the phase polynomial:
/// with a = t0^alpha/1000 and b = t0, m = 2,
///   main = a (R + 1/2) + b ((R+1)^3 - R^3)/3.
#[test]
fn cube_main_term_matches_the_polynomial_oracle_at_the_origin() {
    let w = CubeWitness::new(256.0, 1, 2, 0.75).unwrap();
    let t0 = w.t0();
    let out = cube_main_term(&w, [0.0, 0.0], t0, 512).unwrap();

    let a = t0.powf(0.75) * 1e-3;
    let b = t0;
    let r = 256.0;
    let exact = a * (r + 0.5) + b * (((r + 1.0) as f64).powi(3) - r.powi(3)) / 3.0;
    assert!(
        (out.main - exact).abs() <= 1e-9 * exact,
        "main {} vs exact {}",
        out.main,
        exact
    );

    // Certified inequalities, no tolerance.
    assert!(out.main >= 1.0 / 200.0);
    assert!(out.remainder_bound <= E_MINUS_2 / 625.0);
    assert!(out.pass);

    // The remainder bound is the geometric-series estimate at the actual R.
    let q = t0.powf(0.75) * 257.0 * 1e-3 + t0 * 257.0 * 257.0;
    let rem = q * q * E_MINUS_2;
    assert!((out.remainder_bound - rem).abs() <= 1e-12 * rem);
}

#[test]
fn cube_main_term_meets_the_second_regime_floor() {
    let w = CubeWitness::new(1024.0, 1, 2, 0.25).unwrap();
    let t0 = w.t0();
    let out = cube_main_term(&w, [0.0, 0.0], t0, 512).unwrap();
    assert!(out.main >= 1.0 / 2000.0, "main {}", out.main);
    assert!(out.remainder_bound <= E_MINUS_2 / 250_000.0);
    assert!(out.pass);

    // Frozen from the closed form: main = 1.001442887e-3 to nine digits.
    assert!((out.main - 1.001_442_887e-3).abs() <= 1e-11);
}

#[test]
fn cube_main_term_is_stable_under_quadrature_doubling() {
    for dim in [1usize, 2] {
        let w = CubeWitness::new(256.0, dim, 2, 0.75).unwrap();
        let x = if dim == 1 { [5e-4, 0.0] } else { [5e-4, -4e-4] };
        let coarse = cube_main_term(&w, x, w.t0(), 512).unwrap();
        let fine = cube_main_term(&w, x, w.t0(), 1024).unwrap();
        let drift = (coarse.main - fine.main).abs() / fine.main;
        assert!(drift < 0.04, "dim {dim}: doubling drift {drift}");
    }
}

#[test]
fn cube_main_term_rejects_bad_inputs() {
    // First regime needs (R+1)^m / R^m <= 2; R = 2 gives 2.25.
    let w = CubeWitness::new(2.0, 1, 2, 0.75).unwrap();
    match cube_main_term(&w, [0.0, 0.0], w.t0(), 512) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("exceeds 2"), "{msg}"),
        other => panic!("expected precondition error, got {other:?}"),
    }

    // Second regime needs (R+1)^m / R^(1/alpha) < 1/2000; R = 6 gives 0.038.
    let w = CubeWitness::new(6.0, 1, 2, 0.25).unwrap();
    assert!(matches!(
        cube_main_term(&w, [0.0, 0.0], w.t0(), 512),
        Err(Error::Precondition(_))
    ));

    // The time must match the regime formula.
    let w = CubeWitness::new(256.0, 1, 2, 0.75).unwrap();
    match cube_main_term(&w, [0.0, 0.0], w.t0() * 2.0, 512) {
        Err(Error::Precondition(msg)) => assert!(msg.contains("t0"), "{msg}"),
        other => panic!("expected precondition error, got {other:?}"),
    }

    // Evaluation points come from B(0, 1/1000).
    assert!(cube_main_term(&w, [0.002, 0.0], w.t0(), 512).is_err());
}

#[test]
fn cube_rate_exponent_tracks_both_regimes() {
    let schedule: Vec<f64> = (6..12).map(|j| f64::powi(2.0, j)).collect();

    let first = CubeWitness::new(64.0, 1, 2, 0.75).unwrap();
    let scan = cube_rate_exponent(&first, 0.3, &schedule).unwrap();
    assert_eq!(scan.target, 0.6);
    assert!(
        (scan.fit.slope - 0.6).abs() <= 0.1,
        "regime-1 slope {}",
        scan.fit.slope
    );

    let second = CubeWitness::new(64.0, 1, 2, 0.25).unwrap();
    let scan = cube_rate_exponent(&second, 0.3, &schedule).unwrap();
    assert!((scan.target - 1.2).abs() < 1e-12);
    assert!(
        (scan.fit.slope - 1.2).abs() <= 0.15,
        "regime-2 slope {}",
        scan.fit.slope
    );
}

#[test]
fn cube_rate_zero_weight_is_flat() {
    let schedule: Vec<f64> = (6..12).map(|j| f64::powi(2.0, j)).collect();
    let w = CubeWitness::new(64.0, 1, 2, 0.75).unwrap();
    let scan = cube_rate_exponent(&w, 0.0, &schedule).unwrap();
    assert!(scan.fit.slope.abs() <= 0.05, "slope {}", scan.fit.slope);
    assert!(cube_rate_exponent(&w, 1.0, &schedule).is_err());
    assert!(cube_rate_exponent(&w, -0.1, &schedule).is_err());
}

#[test]
fn halfscale_field_is_the_interval_indicator() {
    let w = HalfScaleWitness::new(64.0, 0.5).unwrap();
    let field = w.field(256).unwrap();
    assert_eq!(field.dim(), 1);
    // Midpoint nodes sit strictly inside the interval: band = 8 - h/2.
    let h = 16.0 / 256.0;
    assert!(field.band() <= 8.0 && field.band() >= 8.0 - h);
    assert!((field.mass_bound() - 16.0).abs() <= 1e-9);
}

/// The rescaled one-dimensional modulus and the evolved indicator field are
/// the same Riemann sum when the node counts match: the substitution
/// xi = sqrt(lambda) * eta maps midpoints to midpoints.
#[test]
fn halfscale_modulus_matches_the_evolved_field() {
    let lambda = 64.0;
    let alpha = 0.5;
    let w = HalfScaleWitness::new(lambda, alpha).unwrap();
    let field = w.field(256).unwrap();
    let symbol = Symbol::Paraboloid;

    for (y, t) in [(0.01, 0.5 / lambda), (0.05, 0.9 / lambda), (0.0, 0.25 / lambda)] {
        let gamma = y - t.powf(alpha);
        let pts = [SpaceTimePoint { x: pt1(gamma), t }];
        let direct = evolve(&field, &symbol, &pts).unwrap()[0].norm();
        let rescaled = halfscale_modulus(lambda, alpha, y, t, 256).unwrap();
        assert!(
            (direct - rescaled).abs() <= 1e-10 * direct.max(1.0),
            "y={y} t={t}: {direct} vs {rescaled}"
        );
    }
}

#[test]
fn halfscale_measures_land_in_the_regime_bands() {
    for (alpha, theory) in [(0.5, 1024f64.powf(-0.5)), (0.3, 1024f64.powf(-0.3))] {
        let w = HalfScaleWitness::new(1024.0, alpha).unwrap();
        let report = halfscale_s_set(&w).unwrap();
        let ratio = report.s_measure / theory;
        assert!(
            (0.5..=4.0).contains(&ratio),
            "alpha {alpha}: measure {} is {ratio} times the regime scale",
            report.s_measure
        );
        // Strict on-S bound: no tolerance.
        assert!(report.on_s_min > 1024f64.sqrt(), "on-S min {}", report.on_s_min);
        assert!(report.strict_pass);
        assert!(report.on_s_samples > 0);

        // Interval structure makes the measure predictable to sweep resolution.
        let margin = w.margin();
        let predicted = 1024f64.powf(-alpha) + 2.0 * margin;
        assert!(
            (report.s_measure - predicted).abs() <= 4.0 * report.sweep_step,
            "alpha {alpha}: measure {} vs predicted {predicted}",
            report.s_measure
        );
    }
}

#[test]
fn halfscale_rejects_small_lambda() {
    let w = HalfScaleWitness::new(32.0, 0.5).unwrap();
    assert!(matches!(halfscale_s_set(&w), Err(Error::Precondition(_))));
}

#[test]
fn halfscale_reports_are_bitwise_reproducible() {
    let w = HalfScaleWitness::new(512.0, 0.4).unwrap();
    let a = halfscale_s_set(&w).unwrap();
    let b = halfscale_s_set(&w).unwrap();
    assert_eq!(a.s_measure.to_bits(), b.s_measure.to_bits());
    assert_eq!(a.on_s_min.to_bits(), b.on_s_min.to_bits());
    assert_eq!(a.s_count, b.s_count);
}

#[test]
fn sharp_p_threshold_matches_the_three_regimes() {
    let schedule: Vec<f64> = (9..14).map(|j| f64::powi(2.0, 2 * j)).collect();
    for (alpha, s, target) in [(0.75, 0.26, 4.0), (0.4, 0.26, 3.2), (0.2, 0.31, 2.0)] {
        assert!((sharp_p_regime_target(alpha) - target).abs() < 1e-12);
        let report = sharp_p_threshold(alpha, s, &schedule).unwrap();
        assert!(
            (report.threshold - target).abs() <= 0.2,
            "alpha {alpha}, s {s}: threshold {} vs {target}",
            report.threshold
        );
        assert!(report.measure_slope < 0.0);
        assert!((report.level_slope - 0.5).abs() <= 0.05);
    }
}

#[test]
fn bourgain_norm_oracle_is_exact_arithmetic() {
    let mut rs = Vec::new();
    let mut norms = Vec::new();
    for j in 8..14 {
        let r = f64::powi(2.0, j);
        let w = BourgainWitness::new(r).unwrap();
        let strips = r.cbrt().ceil();
        let expected = strips * 2.0 * r.sqrt();
        assert_eq!(w.l2_norm_sq().to_bits(), expected.to_bits(), "R = {r}");
        rs.push(r);
        norms.push(w.l2_norm_sq().sqrt());
    }
    let fit = curvemax::fit::exponent_fit(&rs, &norms).unwrap();
    assert!(
        (fit.slope - 5.0 / 12.0).abs() <= 0.02,
        "norm slope {}",
        fit.slope
    );
}

/// The separable evaluator is the tensor factorization of the full 2-D
/// quadrature; with matching node spacing the two sums agree to rounding.
#[test]
fn bourgain_separable_eval_matches_the_2d_field() {
    let r = 64.0;
    let w = BourgainWitness::new(r).unwrap();
    let field = w.field(16).unwrap();
    let symbol = Symbol::Paraboloid;
    for (x1, x2, t) in [(-0.02, 0.1, 0.5 / r), (0.0, 0.0, 0.25 / r), (-0.5, -0.7, 0.9 / r)] {
        let pts = [SpaceTimePoint { x: [x1, x2], t }];
        let full = evolve(&field, &symbol, &pts).unwrap()[0];
        let split = w.eval(x1, x2, t, 1.0 / 16.0);
        let err = (full - split).norm() / full.norm().max(1.0);
        assert!(err <= 1e-10, "({x1},{x2},{t}): {full} vs {split}");
    }
}

#[test]
fn bourgain_growth_reports_and_reproduces() {
    let schedule: Vec<f64> = (6..10).map(|j| f64::powi(2.0, j)).collect();
    let a = bourgain_growth(&schedule, None).unwrap();
    assert_eq!(a.points.len(), 4);
    assert!(!a.truncated);
    let norm_fit = a.norm_fit.as_ref().expect("norm fit");
    let level_fit = a.level_fit.as_ref().expect("level fit");
    assert!(norm_fit.slope > 0.0 && level_fit.slope > 0.0);
    assert!(a.implied_s.is_some());
    for p in &a.points {
        assert!(p.level > 0.0);
        assert!(p.level <= p.global_max * (1.0 + 1e-12));
        assert!(p.measure_above_half >= 0.0);
        assert!(p.level_fraction > 0.0 && p.level_fraction < 1.0);
    }

    let b = bourgain_growth(&schedule, None).unwrap();
    for (pa, pb) in a.points.iter().zip(&b.points) {
        assert_eq!(pa.level.to_bits(), pb.level.to_bits());
        assert_eq!(pa.global_max.to_bits(), pb.global_max.to_bits());
    }
}

#[test]
fn bourgain_budget_truncates_with_flag() {
    let schedule: Vec<f64> = (6..10).map(|j| f64::powi(2.0, j)).collect();
    let out = bourgain_growth(&schedule, Some(Duration::ZERO)).unwrap();
    assert!(out.truncated);
    assert_eq!(out.points.len(), 1);
    assert!(out.norm_fit.is_none());
    assert!(out.level_fit.is_none());
    assert!(out.implied_s.is_none());
}

#[test]
fn standard_battery_members_build() {
    let battery = standard_battery(0.5, 11);
    assert_eq!(battery.len(), 4);
    let mut names: Vec<&str> = battery.iter().map(|m| m.name.as_str()).collect();
    names.sort();
    names.dedup();
    assert_eq!(names.len(), 4);
    for member in &battery {
        let (field, t_max) = (member.make)(4.0).unwrap();
        assert_eq!(field.dim(), 1);
        assert!(t_max > 0.0);
        assert!(field.band() > 0.0 && field.band() <= 17.0, "band {}", field.band());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Certified first-regime inequality across the admissible R range:
    /// main - remainder stays above the regime constant.
    #[test]
    fn cube_certificate_holds_across_r(r in 64f64..4096.0) {
        let w = CubeWitness::new(r, 1, 2, 0.75).unwrap();
        let out = cube_main_term(&w, [0.0, 0.0], w.t0(), 256).unwrap();
        prop_assert!(out.main - out.remainder_bound >= 1.0 / 200.0 - E_MINUS_2 / 625.0);
        prop_assert!(out.pass);
    }

    /// The strict on-S lower bound holds for any admissible (lambda, alpha).
    #[test]
    fn halfscale_on_s_bound_is_always_strict(
        lam_log in 6u32..12,
        alpha in 0.05f64..0.95,
    ) {
        let lambda = f64::powi(2.0, lam_log as i32);
        let w = HalfScaleWitness::new(lambda, alpha).unwrap();
        let report = halfscale_s_set(&w).unwrap();
        prop_assert!(report.on_s_min > lambda.sqrt());
        prop_assert!(report.s_measure > 0.0);
    }
}
