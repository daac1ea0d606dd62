//! Oracles for the convergence-rate module: region membership on rational
//! inputs, exact rescaling between rate exponents, the Gaussian boundary
//! obstruction against its first-order Taylor prediction, and the baseline
//! region certification.

use curvemax::curves::{Curve, CurveSpec};
use curvemax::rate::{
    boundary_obstruction, derivative_field, rate_profile, region_check, RateRegion,
    RegionCheckConfig, RATIO_THRESHOLD,
};
use curvemax::spectral::{
    evaluate_field, make_field, BandlimitedField, FieldRecipe, FrequencyAtom, Provenance, Symbol,
};
use curvemax::C64;
use proptest::prelude::*;

fn gaussian() -> BandlimitedField {
    make_field(&FieldRecipe::Gaussian {
        sigma: 2.0,
        dim: 1,
        half_width: 4.0,
        nodes_per_axis: 512,
    })
    .unwrap()
}

fn model_curve(alpha: f64) -> Curve {
    Curve::Spec(CurveSpec::power_shift([-1.0, 0.0], alpha, 1.0, 1).unwrap())
}

#[test]
fn region_membership_matches_the_set_definitions() {
    // Selection: first-order iff alpha >= 1/m.
    assert_eq!(RateRegion::for_params(2, 0.6).unwrap(), RateRegion::FirstOrder);
    assert_eq!(RateRegion::for_params(2, 0.5).unwrap(), RateRegion::FirstOrder);
    assert_eq!(RateRegion::for_params(2, 0.25).unwrap(), RateRegion::SecondOrder);
    assert_eq!(RateRegion::for_params(1, 0.9).unwrap(), RateRegion::SecondOrder);
    assert!(RateRegion::for_params(0, 0.5).is_err());
    assert!(RateRegion::for_params(2, 1.0).is_err());

    // First-order set: h <= delta/m (inclusive) and h < alpha (strict).
    let r1 = RateRegion::FirstOrder;
    assert!(r1.contains(2, 0.6, 0.5, 0.25)); // h = delta/m exactly
    assert!(r1.contains(2, 0.6, 0.5, 0.0)); // edge h = 0
    assert!(!r1.contains(2, 0.6, 0.5, 0.26)); // above the cap
    assert!(!r1.contains(2, 0.6, 2.0, 0.6)); // h = alpha excluded
    assert!(!r1.contains(2, 0.6, -0.1, 0.0)); // negative delta
    assert!(r1.interior(2, 0.6, 0.6, 0.25));
    assert!(!r1.interior(2, 0.6, 0.5, 0.25)); // boundary is not interior

    // Second-order set: h <= alpha*delta.
    let r2 = RateRegion::SecondOrder;
    assert!(r2.contains(2, 0.25, 0.5, 0.125)); // h = alpha*delta exactly
    assert!(!r2.contains(2, 0.25, 0.5, 0.2)); // the excluded example pair
    assert!(r2.contains(2, 0.25, 1.0, 0.2));
}

#[test]
fn constant_field_has_identically_zero_profile() {
    // A single atom at xi = 0 is a constant in space and a fixed point of the
    // evolution: every ratio is exactly zero.
    let atom = FrequencyAtom::new([0.0, 0.0], 1.0, C64::new(0.7, -0.2));
    let prov = Provenance {
        recipe: "constant".into(),
        params: serde_json::json!({}),
    };
    let field = BandlimitedField::with_provenance(1, vec![atom], None, prov).unwrap();
    let js: Vec<u32> = (1..=8).collect();
    let profile = rate_profile(
        &field,
        &Symbol::Paraboloid,
        &model_curve(0.5),
        0.3,
        [0.0, 0.0],
        1.0,
        0.25,
        &js,
    )
    .unwrap();
    for p in &profile {
        assert_eq!(p.ratio, 0.0, "constant fields are fixed points");
    }
}

#[test]
fn vertical_curve_profile_vanishes_with_t() {
    let field = gaussian();
    let curve = Curve::Spec(CurveSpec::vertical(1));
    let js: Vec<u32> = (1..=14).collect();
    let profile = rate_profile(
        &field,
        &Symbol::Paraboloid,
        &curve,
        0.0,
        [0.0, 0.0],
        1.0,
        1.0 / 16.0,
        &js,
    )
    .unwrap();
    // t strictly decreasing along the profile.
    for pair in profile.windows(2) {
        assert!(pair[1].t < pair[0].t);
    }
    let first = profile[0].ratio;
    let last = profile.last().unwrap().ratio;
    assert!(last <= 1e-3, "ratio at t = 2^-14 is {last}");
    assert!(last < 0.01 * first);
    // Tail is decreasing once the phase is resolved.
    for pair in profile[7..].windows(2) {
        assert!(pair[1].ratio < pair[0].ratio);
    }
}

#[test]
fn changing_the_rate_exponent_rescales_exactly() {
    let field = gaussian();
    let curve = model_curve(0.6);
    let js: Vec<u32> = (2..=10).collect();
    let (h1, h2) = (0.3, 0.55);
    let p1 = rate_profile(&field, &Symbol::Paraboloid, &curve, h1, [0.0, 0.0], 1.0, 0.125, &js).unwrap();
    let p2 = rate_profile(&field, &Symbol::Paraboloid, &curve, h2, [0.0, 0.0], 1.0, 0.125, &js).unwrap();
    for (a, b) in p1.iter().zip(&p2) {
        let rescaled = a.ratio * a.t.powf(h1 - h2);
        assert!(
            (rescaled - b.ratio).abs() <= 1e-12 * b.ratio.max(1e-300),
            "t = {}: {rescaled} vs {}",
            a.t,
            b.ratio
        );
    }
}

#[test]
fn profile_rejects_bad_schedules() {
    let field = gaussian();
    let curve = model_curve(0.5);
    let sym = Symbol::Paraboloid;
    assert!(rate_profile(&field, &sym, &curve, -0.1, [0.0, 0.0], 1.0, 0.25, &[1, 2]).is_err());
    assert!(rate_profile(&field, &sym, &curve, 0.1, [0.0, 0.0], 1.0, 0.25, &[]).is_err());
    assert!(rate_profile(&field, &sym, &curve, 0.1, [0.0, 0.0], 1.0, 0.25, &[3, 3]).is_err());
    assert!(rate_profile(&field, &sym, &curve, 0.1, [0.0, 0.0], 1.0, 0.25, &[5, 2]).is_err());
}

#[test]
fn gaussian_boundary_obstruction_matches_the_taylor_prediction() {
    let field = gaussian();
    let js: Vec<u32> = (1..=14).collect();
    let report = boundary_obstruction(
        &field,
        &Symbol::Paraboloid,
        0.6,
        [0.0, 0.0],
        1.0,
        1.0 / 16.0,
        &js,
    )
    .unwrap();

    // Frozen quadrature value of sup |d_1 f| over the ball grid.
    assert!(
        (report.deriv_sup - 3.039_874_118_150_353_7).abs() <= 1e-9,
        "deriv_sup = {}",
        report.deriv_sup
    );
    // The ratio never drops below half the prediction anywhere on the
    // schedule, and the tail converges to the prediction itself.
    assert!(report.floor_pass);
    assert!(report.min_ratio >= 0.5 * report.deriv_sup);
    let last = report.points.last().unwrap().ratio;
    assert!(
        (last / report.deriv_sup - 1.0).abs() <= 1e-3,
        "tail ratio {last} vs prediction {}",
        report.deriv_sup
    );
}

#[test]
fn first_order_taylor_residual_is_higher_order() {
    // e^{itD^2} f(x - t^a) - f(x) = -t^a d_1 f(x) + O(t^{2a} + t): at
    // t = 2^-12 the normalized residual is far below the derivative scale.
    let field = gaussian();
    let deriv = derivative_field(&field).unwrap();
    let alpha = 0.6;
    let t = (-12.0f64).exp2();
    let curve = model_curve(alpha);
    let n = 32usize;
    let xs: Vec<[f64; 2]> = (0..n)
        .map(|i| [-1.0 + (2.0 * i as f64 + 1.0) / n as f64, 0.0])
        .collect();
    let evolved =
        curvemax::propagator::evolve_along_curve(&field, &Symbol::Paraboloid, &curve, &xs, &[t], None)
            .unwrap();
    let base = evaluate_field(&field, &xs).unwrap();
    let dvals = evaluate_field(&deriv, &xs).unwrap();
    let mut resid = 0.0f64;
    for i in 0..n {
        let linearized = (evolved[i][0] - base[i]) / t.powf(alpha);
        resid = resid.max((linearized + dvals[i]).norm());
    }
    assert!(resid <= 0.3, "residual {resid}");
}

#[test]
fn baseline_region_check_certifies_interior_pairs() {
    let cfg = RegionCheckConfig::baseline(
        2,
        0.6,
        (0..10).collect(),
        vec![(0.6, 0.25), (0.5, 0.2), (0.8, 0.25)],
    );
    let report = region_check(&cfg).unwrap();
    assert_eq!(report.region, RateRegion::FirstOrder);
    assert_eq!(report.ratio_threshold, RATIO_THRESHOLD);
    for out in &report.outcomes {
        assert!(out.in_region, "({}, {}) must be a member", out.delta, out.h);
        assert_eq!(out.trend_decreasing, Some(true));
        let ratio = out.final_over_initial.unwrap();
        assert!(ratio <= RATIO_THRESHOLD, "({}, {}): {ratio}", out.delta, out.h);
        assert!(out.pass);
    }
}

#[test]
fn region_check_excludes_outsiders_without_requirement() {
    // The excluded example: (0.5, 0.2) at m = 2, alpha = 1/4 sits outside the
    // second-order region because 0.2 > alpha*delta = 0.125.
    let mut cfg = RegionCheckConfig::baseline(2, 0.25, vec![7], vec![(0.5, 0.2)]);
    cfg.js = (1..=6).collect(); // outsiders never run profiles; keep it small
    let report = region_check(&cfg).unwrap();
    assert_eq!(report.region, RateRegion::SecondOrder);
    let out = &report.outcomes[0];
    assert!(!out.in_region);
    assert!(out.trend_decreasing.is_none());
    assert!(out.final_over_initial.is_none());
    assert!(out.pass, "outsiders are excluded from the pass requirement");
}

#[test]
fn boundary_obstruction_is_scalar_invariant() {
    let field = gaussian();
    let scale = C64::new(2.0, -3.0);
    let scaled_atoms: Vec<FrequencyAtom> = field
        .atoms()
        .iter()
        .map(|a| FrequencyAtom::new(a.node, a.weight, a.coeff * scale))
        .collect();
    let prov = Provenance {
        recipe: "scaled".into(),
        params: serde_json::json!({}),
    };
    let scaled = BandlimitedField::with_provenance(1, scaled_atoms, field.node_spacing(), prov).unwrap();

    let js: Vec<u32> = (2..=10).collect();
    let a = boundary_obstruction(&field, &Symbol::Paraboloid, 0.6, [0.0, 0.0], 1.0, 0.125, &js).unwrap();
    let b = boundary_obstruction(&scaled, &Symbol::Paraboloid, 0.6, [0.0, 0.0], 1.0, 0.125, &js).unwrap();
    let m = scale.norm();
    assert!((b.deriv_sup - m * a.deriv_sup).abs() <= 1e-9 * a.deriv_sup);
    for (pa, pb) in a.points.iter().zip(&b.points) {
        assert!((pb.ratio - m * pa.ratio).abs() <= 1e-9 * pa.ratio.max(1e-300));
    }
    assert_eq!(a.floor_pass, b.floor_pass);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Membership is consistent: interior implies contains, h >= alpha
    /// excludes from both regions, and scaling delta up never removes a
    /// member (the regions are upward closed in delta).
    #[test]
    fn region_predicates_are_consistent(
        m in 1u32..4,
        alpha in 0.05f64..0.95,
        delta in 0.0f64..2.0,
        h in 0.0f64..1.0,
    ) {
        let r = RateRegion::for_params(m, alpha).unwrap();
        if r.interior(m, alpha, delta, h) {
            prop_assert!(r.contains(m, alpha, delta, h));
        }
        if h >= alpha {
            prop_assert!(!r.contains(m, alpha, delta, h));
        }
        if r.contains(m, alpha, delta, h) {
            prop_assert!(r.contains(m, alpha, delta + 0.5, h));
        }
    }
}
