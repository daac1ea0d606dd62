//! Pointwise convergence rates along tangential curves: dyadic profiles of
//! |e^{itP(D)} f(gamma(x,t)) - f(x)| / t^h, the admissible (delta, h) rate
//! regions per regime, and the t^alpha boundary obstruction that pins the
//! region's upper edge.

use crate::curves::{Curve, CurveSpec};
use crate::error::{Error, Result};
use crate::maximal::ball_grid;
use crate::propagator::evolve_along_curve;
use crate::spectral::{
    evaluate_field, make_field, BandlimitedField, FieldRecipe, FrequencyAtom, Point, Provenance,
    Symbol,
};
use serde::Serialize;

/// Certification threshold: the final profile ratio must be at most this
/// fraction of the initial one.
pub const RATIO_THRESHOLD: f64 = 0.2;
/// How many trailing profile points the decreasing-trend test inspects.
pub const TREND_POINTS: usize = 4;

/// One measured point of a rate profile.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatePoint {
    /// Dyadic time 2^{-j}.
    pub t: f64,
    /// Sup over the spatial ball of |evolved - initial| / t^h.
    pub ratio: f64,
}

/// Admissible (delta, h) pairs for the pointwise rate: the first-order region
/// applies when alpha >= 1/m and caps h at delta/m; the second-order region
/// applies when alpha < 1/m and caps h at alpha*delta. Both require h < alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateRegion {
    /// h <= delta/m and h < alpha.
    FirstOrder,
    /// h <= alpha*delta and h < alpha.
    SecondOrder,
}

impl RateRegion {
    /// Which region applies at (m, alpha): first-order iff alpha >= 1/m.
    pub fn for_params(m: u32, alpha: f64) -> Result<RateRegion> {
        if m == 0 {
            return Err(Error::RejectedInput("symbol order m must be >= 1".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::RejectedInput(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        if alpha >= 1.0 / m as f64 {
            Ok(RateRegion::FirstOrder)
        } else {
            Ok(RateRegion::SecondOrder)
        }
    }

    /// Set membership, with the h-cap inclusive as in the region definitions.
    pub fn contains(self, m: u32, alpha: f64, delta: f64, h: f64) -> bool {
        if !(delta >= 0.0 && h >= 0.0 && h < alpha) {
            return false;
        }
        match self {
            RateRegion::FirstOrder => h <= delta / m as f64,
            RateRegion::SecondOrder => h <= alpha * delta,
        }
    }

    /// Strict interior: every inequality strict and both coordinates positive.
    pub fn interior(self, m: u32, alpha: f64, delta: f64, h: f64) -> bool {
        if !(delta > 0.0 && h > 0.0 && h < alpha) {
            return false;
        }
        match self {
            RateRegion::FirstOrder => h < delta / m as f64,
            RateRegion::SecondOrder => h < alpha * delta,
        }
    }
}

fn check_js(js: &[u32]) -> Result<()> {
    if js.is_empty() {
        return Err(Error::RejectedInput("dyadic schedule must not be empty".into()));
    }
    for pair in js.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::RejectedInput(
                "dyadic schedule must be strictly increasing in j (t strictly decreasing)".into(),
            ));
        }
    }
    if *js.last().unwrap() > 60 {
        return Err(Error::RejectedInput("dyadic exponent j > 60 underflows the profile".into()));
    }
    Ok(())
}

/// Profile of the weighted difference sup_{|x| <= radius} |e^{itP(D)}
/// f(gamma(x,t)) - f(x)| / t^h over the dyadic times t = 2^{-j}.
pub fn rate_profile(
    field: &BandlimitedField,
    symbol: &Symbol,
    curve: &Curve,
    h: f64,
    center: Point,
    radius: f64,
    dx: f64,
    js: &[u32],
) -> Result<Vec<RatePoint>> {
    if !h.is_finite() || h < 0.0 {
        return Err(Error::RejectedInput(format!("rate exponent h = {h} must be >= 0")));
    }
    check_js(js)?;
    let (xs, _cell) = ball_grid(center, radius, dx, field.dim());
    if xs.is_empty() {
        return Err(Error::Configuration("spatial ball grid is empty".into()));
    }
    let ts: Vec<f64> = js.iter().map(|&j| (-(j as f64)).exp2()).collect();
    let evolved = evolve_along_curve(field, symbol, curve, &xs, &ts, None)?;
    let base = evaluate_field(field, &xs)?;
    let mut points = Vec::with_capacity(ts.len());
    for (k, &t) in ts.iter().enumerate() {
        let mut sup = 0.0f64;
        for (row, f0) in evolved.iter().zip(&base) {
            sup = sup.max((row[k] - f0).norm());
        }
        points.push(RatePoint {
            t,
            ratio: sup / t.powf(h),
        });
    }
    Ok(points)
}

/// Parameters of a region certification run.
#[derive(Debug, Clone, Serialize)]
pub struct RegionCheckConfig {
    /// Symbol order.
    pub m: u32,
    /// Curve exponent.
    pub alpha: f64,
    /// Base regularity: fields are drawn in H^{s + delta} with s this value.
    pub base_smoothness: f64,
    /// Frequency truncation of the random fields.
    pub band: f64,
    /// Quadrature nodes per unit frequency.
    pub nodes_per_unit: usize,
    /// Spatial dimension.
    pub dim: usize,
    /// RNG seeds, one field per seed.
    pub seeds: Vec<u64>,
    /// (delta, h) pairs to certify.
    pub pairs: Vec<(f64, f64)>,
    /// Dyadic exponents of the time schedule.
    pub js: Vec<u32>,
    /// Spatial ball radius.
    pub ball_radius: f64,
    /// Spatial grid spacing.
    pub ball_dx: f64,
}

impl RegionCheckConfig {
    /// The pinned baseline: dyadic times 2^{-1}..2^{-14} (deep enough that
    /// both phase contributions are in their asymptotic regime at the tail),
    /// band 16 with 48 nodes per unit, H^{1/2 + delta} fields, and the unit
    /// ball at spacing 1/16.
    pub fn baseline(m: u32, alpha: f64, seeds: Vec<u64>, pairs: Vec<(f64, f64)>) -> Self {
        RegionCheckConfig {
            m,
            alpha,
            base_smoothness: 0.5,
            band: 16.0,
            nodes_per_unit: 48,
            dim: 1,
            seeds,
            pairs,
            js: (1..=14).collect(),
            ball_radius: 1.0,
            ball_dx: 1.0 / 16.0,
        }
    }
}

/// Certification outcome for one (delta, h) pair.
#[derive(Debug, Clone, Serialize)]
pub struct PairOutcome {
    /// Regularity offset.
    pub delta: f64,
    /// Rate exponent.
    pub h: f64,
    /// Whether the pair lies in the applicable region (profiles are only run
    /// for members; outsiders carry no requirement).
    pub in_region: bool,
    /// All seeds decreasing over the last TREND_POINTS profile points.
    pub trend_decreasing: Option<bool>,
    /// Worst (largest) final/initial ratio across seeds.
    pub final_over_initial: Option<f64>,
    /// Members: trend holds and the ratio clears RATIO_THRESHOLD.
    /// Non-members: vacuously true.
    pub pass: bool,
}

/// A full region certification.
#[derive(Debug, Clone, Serialize)]
pub struct RegionCheckReport {
    /// Which region applied.
    pub region: RateRegion,
    /// The pinned final/initial threshold.
    pub ratio_threshold: f64,
    /// Per-pair outcomes, in input order.
    pub outcomes: Vec<PairOutcome>,
}

/// Certify a grid of (delta, h) pairs against the applicable rate region with
/// seeded random fields of matching regularity: members must show a
/// decreasing trend and a final/initial drop below the threshold; outsiders
/// are excluded from the requirement.
pub fn region_check(cfg: &RegionCheckConfig) -> Result<RegionCheckReport> {
    let region = RateRegion::for_params(cfg.m, cfg.alpha)?;
    if cfg.seeds.is_empty() {
        return Err(Error::RejectedInput("at least one seed is required".into()));
    }
    if cfg.pairs.is_empty() {
        return Err(Error::RejectedInput("at least one (delta, h) pair is required".into()));
    }
    check_js(&cfg.js)?;
    if cfg.js.len() < TREND_POINTS {
        return Err(Error::Configuration(format!(
            "schedule needs at least {TREND_POINTS} points for the trend test"
        )));
    }
    let symbol = if cfg.m == 2 {
        Symbol::Paraboloid
    } else {
        Symbol::ModulusPower { m: cfg.m as f64 }
    };
    let curve = Curve::Spec(CurveSpec::power_shift([-1.0, 0.0], cfg.alpha, 1.0, cfg.dim)?);

    let mut outcomes = Vec::with_capacity(cfg.pairs.len());
    for &(delta, h) in &cfg.pairs {
        if !region.contains(cfg.m, cfg.alpha, delta, h) {
            outcomes.push(PairOutcome {
                delta,
                h,
                in_region: false,
                trend_decreasing: None,
                final_over_initial: None,
                pass: true,
            });
            continue;
        }
        let mut all_trend = true;
        let mut worst_ratio = 0.0f64;
        for &seed in &cfg.seeds {
            let field = make_field(&FieldRecipe::SobolevDecay {
                smoothness: cfg.base_smoothness + delta,
                band: cfg.band,
                dim: cfg.dim,
                nodes_per_unit: cfg.nodes_per_unit,
                seed,
            })?;
            let profile = rate_profile(
                &field,
                &symbol,
                &curve,
                h,
                [0.0, 0.0],
                cfg.ball_radius,
                cfg.ball_dx,
                &cfg.js,
            )?;
            let tail = &profile[profile.len() - TREND_POINTS..];
            let decreasing = tail.windows(2).all(|p| p[1].ratio < p[0].ratio);
            all_trend &= decreasing;
            let first = profile[0].ratio;
            let last = profile[profile.len() - 1].ratio;
            if first > 0.0 {
                worst_ratio = worst_ratio.max(last / first);
            }
        }
        outcomes.push(PairOutcome {
            delta,
            h,
            in_region: true,
            trend_decreasing: Some(all_trend),
            final_over_initial: Some(worst_ratio),
            pass: all_trend && worst_ratio <= RATIO_THRESHOLD,
        });
    }
    Ok(RegionCheckReport {
        region,
        ratio_threshold: RATIO_THRESHOLD,
        outcomes,
    })
}

/// The first-coordinate derivative of a field, built atom-by-atom
/// (coefficient times i xi_1).
pub fn derivative_field(field: &BandlimitedField) -> Result<BandlimitedField> {
    let atoms: Vec<FrequencyAtom> = field
        .atoms()
        .iter()
        .map(|a| FrequencyAtom::new(a.node, a.weight, a.coeff * C64_I * a.node[0]))
        .collect();
    let prov = Provenance {
        recipe: "first-derivative".into(),
        params: serde_json::json!({ "of": field.provenance().recipe }),
    };
    BandlimitedField::with_provenance(field.dim(), atoms, field.node_spacing(), prov)
}

const C64_I: crate::C64 = crate::C64::new(0.0, 1.0);

/// Measured obstruction at the region edge h = alpha.
#[derive(Debug, Clone, Serialize)]
pub struct BoundaryReport {
    /// Curve exponent (also the tested rate exponent).
    pub alpha: f64,
    /// Sup over the ball of |d/dx_1 f|: the Taylor prediction for the limit.
    pub deriv_sup: f64,
    /// The h = alpha profile.
    pub points: Vec<RatePoint>,
    /// Smallest ratio over the schedule.
    pub min_ratio: f64,
    /// The certified floor: half the derivative sup.
    pub floor: f64,
    /// min_ratio >= floor: the profile does not converge to zero.
    pub floor_pass: bool,
}

/// Probe the boundary h = alpha along gamma(x,t) = x - e_1 t^alpha: the
/// first-order expansion e^{itP(D)} f(gamma) - f = -t^alpha d_1 f + O(t^{2
/// alpha} + t) keeps the ratio pinned near sup |d_1 f|, so it cannot vanish.
pub fn boundary_obstruction(
    field: &BandlimitedField,
    symbol: &Symbol,
    alpha: f64,
    center: Point,
    radius: f64,
    dx: f64,
    js: &[u32],
) -> Result<BoundaryReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::RejectedInput(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let curve = Curve::Spec(CurveSpec::power_shift([-1.0, 0.0], alpha, 1.0, field.dim())?);
    let points = rate_profile(field, symbol, &curve, alpha, center, radius, dx, js)?;
    let deriv = derivative_field(field)?;
    let (xs, _) = ball_grid(center, radius, dx, field.dim());
    let dvals = evaluate_field(&deriv, &xs)?;
    let deriv_sup = dvals.iter().map(|v| v.norm()).fold(0.0f64, f64::max);
    let min_ratio = points.iter().map(|p| p.ratio).fold(f64::INFINITY, f64::min);
    let floor = 0.5 * deriv_sup;
    Ok(BoundaryReport {
        alpha,
        deriv_sup,
        points,
        min_ratio,
        floor,
        floor_pass: min_ratio >= floor && deriv_sup > 0.0,
    })
}
