//! Constructive sharpness witnesses: a frequency-cube field driven along a
//! shifted power curve, a half-scale interval field with its exceptional set,
//! and a two-scale strip field whose evolution exhibits three-quarter-power
//! growth. Each witness carries its certified inequality or measured exponent.

use crate::curves::{Curve, CurveSpec};
use crate::error::{Error, Result};
use crate::fit::{exponent_fit, ScalingFit};
use crate::maximal::{golden_max, BatteryMember};
use crate::propagator::evolve_along_curve;
use crate::spectral::{evaluate_field, make_field, norm, BandlimitedField, FieldRecipe, Point, Symbol};
use crate::sum::{Compensated, CompensatedC64};
use crate::C64;
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Shift magnitude of the cube witness curve: gamma(x,t) = x + (1/1000, 0) t^alpha.
pub const CUBE_SHIFT: f64 = 1e-3;
/// Radius of the spatial ball on which the cube certificate is claimed.
pub const CUBE_BALL_RADIUS: f64 = 1e-3;
/// Default midpoint-quadrature resolution for witness integrals.
pub const DEFAULT_QUAD_NODES: usize = 512;

const E_MINUS_2: f64 = std::f64::consts::E - 2.0;

// ---------------------------------------------------------------------------
// Frequency-cube witness
// ---------------------------------------------------------------------------

/// Which certified lower bound applies: the first regime holds for
/// alpha >= 1/m (curve slower than the dispersive time scale), the second for
/// alpha < 1/m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CubeRegime {
    /// alpha >= 1/m: t0 = R^{-m}/100, floor 1/200, remainder cap (e-2)/625.
    FirstOrder,
    /// alpha < 1/m: t0 = R^{-1/alpha}, floor 1/2000, remainder cap (e-2)/250000.
    SecondOrder,
}

/// Field with f-hat the indicator of the unit cube based at R, driven along
/// gamma(x, t) = x + (1/1000, 0) t^alpha under the symbol xi_1^m.
#[derive(Debug, Clone, Serialize)]
pub struct CubeWitness {
    /// Lower corner of the frequency cube [R, R+1]^dim.
    pub r: f64,
    /// Spatial dimension (1 or 2).
    pub dim: usize,
    /// Symbol order.
    pub m: u32,
    /// Curve Hölder exponent.
    pub alpha: f64,
}

impl CubeWitness {
    /// Validate parameters: R >= 1, dim in {1,2}, m >= 1, alpha in (0,1).
    pub fn new(r: f64, dim: usize, m: u32, alpha: f64) -> Result<Self> {
        if !r.is_finite() || r < 1.0 {
            return Err(Error::RejectedInput(format!("cube corner R = {r} must be >= 1")));
        }
        if dim != 1 && dim != 2 {
            return Err(Error::RejectedInput(format!("dimension must be 1 or 2, got {dim}")));
        }
        if m == 0 {
            return Err(Error::RejectedInput("symbol order m must be >= 1".into()));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::RejectedInput(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        Ok(CubeWitness { r, dim, m, alpha })
    }

    /// Regime selector: first regime iff alpha >= 1/m.
    pub fn regime(&self) -> CubeRegime {
        if self.alpha >= 1.0 / self.m as f64 {
            CubeRegime::FirstOrder
        } else {
            CubeRegime::SecondOrder
        }
    }

    /// The regime evaluation time: R^{-m}/100 or R^{-1/alpha}.
    pub fn t0(&self) -> f64 {
        match self.regime() {
            CubeRegime::FirstOrder => self.r.powi(-(self.m as i32)) / 100.0,
            CubeRegime::SecondOrder => self.r.powf(-1.0 / self.alpha),
        }
    }

    /// Certified floor for the main term.
    pub fn floor(&self) -> f64 {
        match self.regime() {
            CubeRegime::FirstOrder => 1.0 / 200.0,
            CubeRegime::SecondOrder => 1.0 / 2000.0,
        }
    }

    /// Cap that the remainder bound must not exceed.
    pub fn remainder_cap(&self) -> f64 {
        match self.regime() {
            CubeRegime::FirstOrder => E_MINUS_2 / 625.0,
            CubeRegime::SecondOrder => E_MINUS_2 / 250_000.0,
        }
    }

    /// Check the R-threshold for the active regime; the violated inequality is
    /// named in the error.
    pub fn check_preconditions(&self) -> Result<()> {
        let growth = ((self.r + 1.0) / self.r).powi(self.m as i32);
        match self.regime() {
            CubeRegime::FirstOrder => {
                if growth > 2.0 {
                    return Err(Error::Precondition(format!(
                        "(R+1)^m/R^m = {growth:.6} exceeds 2 at R = {}; increase R",
                        self.r
                    )));
                }
            }
            CubeRegime::SecondOrder => {
                let lin = (self.r + 1.0) / self.r;
                if lin > 1.5 {
                    return Err(Error::Precondition(format!(
                        "(R+1)/R = {lin:.6} exceeds 3/2 at R = {}; increase R",
                        self.r
                    )));
                }
                let cross = (self.r + 1.0).powi(self.m as i32) / self.r.powf(1.0 / self.alpha);
                if cross >= 5e-4 {
                    return Err(Error::Precondition(format!(
                        "(R+1)^m/R^(1/alpha) = {cross:.6e} is not below 1/2000 at R = {}; increase R",
                        self.r
                    )));
                }
            }
        }
        Ok(())
    }

    /// Supremum of the phase t0^alpha xi_1/1000 + t0 xi_1^m over the cube,
    /// attained at xi_1 = R+1.
    pub fn phase_sup(&self) -> f64 {
        let t0 = self.t0();
        let top = self.r + 1.0;
        t0.powf(self.alpha) * top * CUBE_SHIFT + t0 * top.powi(self.m as i32)
    }

    /// The witness field: f-hat = indicator of [R, R+1]^dim.
    pub fn field(&self, nodes_per_axis: usize) -> Result<BandlimitedField> {
        make_field(&FieldRecipe::IndicatorCube {
            r: self.r,
            dim: self.dim,
            nodes_per_axis,
        })
    }

    /// The witness curve gamma(x, t) = x + (1/1000, 0) t^alpha.
    pub fn curve(&self) -> Result<CurveSpec> {
        CurveSpec::power_shift([CUBE_SHIFT, 0.0], self.alpha, 1.0, self.dim)
    }

    /// The witness symbol xi_1^m.
    pub fn symbol(&self) -> Symbol {
        Symbol::FirstCoordPower { m: self.m as f64 }
    }
}

/// Certified decomposition of the evolved-minus-initial difference at t0.
#[derive(Debug, Clone, Serialize)]
pub struct CubeMainTerm {
    /// |∫_{Q_R} e^{ix·xi} (t0^alpha xi_1/1000 + t0 xi_1^m) dxi| by quadrature.
    pub main: f64,
    /// Geometric-series bound q^2 (e-2) with q the phase supremum at actual R.
    pub remainder_bound: f64,
    /// Regime floor the main term is certified against.
    pub floor: f64,
    /// Regime cap the remainder bound must stay below.
    pub remainder_cap: f64,
    /// main - remainder_bound >= floor - remainder_cap.
    pub pass: bool,
    /// Midpoint nodes used per axis.
    pub quad_nodes: usize,
}

/// First-order term of the evolved difference for the cube witness at its
/// regime time, with the certified remainder bound.
pub fn cube_main_term(w: &CubeWitness, x: Point, t0: f64, quad_nodes: usize) -> Result<CubeMainTerm> {
    w.check_preconditions()?;
    if quad_nodes == 0 {
        return Err(Error::Configuration("quad_nodes must be positive".into()));
    }
    crate::spectral::validate_points(w.dim, &[x])?;
    if norm(x) > CUBE_BALL_RADIUS {
        return Err(Error::RejectedInput(format!(
            "x = {x:?} lies outside B(0, {CUBE_BALL_RADIUS})"
        )));
    }
    let want = w.t0();
    if !t0.is_finite() || (t0 - want).abs() > 1e-9 * want {
        return Err(Error::Precondition(format!(
            "t0 = {t0:e} does not match the regime time {want:e} at R = {}",
            w.r
        )));
    }

    let a = t0.powf(w.alpha) * CUBE_SHIFT;
    let b = t0;
    let mi = w.m as i32;
    let h = 1.0 / quad_nodes as f64;

    // First axis carries the phase polynomial; the second (dim 2) is a plain
    // oscillatory indicator integral. The product structure is exact.
    let mut first = CompensatedC64::new();
    for i in 0..quad_nodes {
        let xi = w.r + (i as f64 + 0.5) * h;
        let phi = a * xi + b * xi.powi(mi);
        let (s, c) = (x[0] * xi).sin_cos();
        first.add(C64::new(c * phi * h, s * phi * h));
    }
    let mut main = first.value().norm();
    if w.dim == 2 {
        let mut second = CompensatedC64::new();
        for i in 0..quad_nodes {
            let xi = w.r + (i as f64 + 0.5) * h;
            let (s, c) = (x[1] * xi).sin_cos();
            second.add(C64::new(c * h, s * h));
        }
        main *= second.value().norm();
    }

    let q = w.phase_sup();
    if q > 1.0 {
        return Err(Error::Precondition(format!(
            "phase supremum q = {q:.3e} exceeds 1; the geometric remainder bound needs q <= 1"
        )));
    }
    let remainder_bound = q * q * E_MINUS_2;
    let floor = w.floor();
    let remainder_cap = w.remainder_cap();
    Ok(CubeMainTerm {
        main,
        remainder_bound,
        floor,
        remainder_cap,
        pass: main - remainder_bound >= floor - remainder_cap,
        quad_nodes,
    })
}

/// One divergence-rate scan over a dyadic R-schedule.
#[derive(Debug, Clone, Serialize)]
pub struct CubeRateScan {
    /// Active regime of the template witness.
    pub regime: CubeRegime,
    /// Rate weight delta_1.
    pub delta1: f64,
    /// Regime exponent target: delta_1 * m or delta_1 / alpha.
    pub target: f64,
    /// (R, t0^{-delta_1} L1-difference) per schedule entry.
    pub points: Vec<(f64, f64)>,
    /// Log-log fit of the points.
    pub fit: ScalingFit,
}

/// Weighted L1 divergence of the cube witness across an R-schedule: per R,
/// t0^{-delta_1} ||e^{i t0 P(D)} f_R (gamma(., t0)) - f_R||_{L1(B(0,1/1000))},
/// fitted against R.
pub fn cube_rate_exponent(template: &CubeWitness, delta1: f64, schedule: &[f64]) -> Result<CubeRateScan> {
    if !(0.0..1.0).contains(&delta1) {
        return Err(Error::RejectedInput(format!(
            "rate weight delta1 = {delta1} must lie in [0, 1)"
        )));
    }
    let mut points = Vec::with_capacity(schedule.len());
    for &r in schedule {
        let w = CubeWitness::new(r, template.dim, template.m, template.alpha)?;
        w.check_preconditions()?;
        let t0 = w.t0();
        let field = w.field(DEFAULT_QUAD_NODES)?;
        let curve = Curve::Spec(w.curve()?);
        let symbol = w.symbol();

        let (xs, cell) = crate::maximal::ball_grid([0.0, 0.0], CUBE_BALL_RADIUS, CUBE_BALL_RADIUS / 32.0, w.dim);
        let evolved = evolve_along_curve(&field, &symbol, &curve, &xs, &[t0], None)?;
        let base = evaluate_field(&field, &xs)?;
        let mut acc = Compensated::new();
        for (row, f0) in evolved.iter().zip(&base) {
            acc.add((row[0] - f0).norm() * cell);
        }
        points.push((r, t0.powf(-delta1) * acc.value()));
    }
    let values: Vec<f64> = points.iter().map(|p| p.1).collect();
    let fit = exponent_fit(schedule, &values)?;
    let target = match template.regime() {
        CubeRegime::FirstOrder => delta1 * template.m as f64,
        CubeRegime::SecondOrder => delta1 / template.alpha,
    };
    Ok(CubeRateScan {
        regime: template.regime(),
        delta1,
        target,
        points,
        fit,
    })
}

// ---------------------------------------------------------------------------
// Half-scale interval witness
// ---------------------------------------------------------------------------

/// Smallest admissible frequency scale for the exceptional-set sweep.
pub const HALFSCALE_MIN_LAMBDA: f64 = 64.0;
/// Margin multiplier for the exceptional set when alpha >= 1/2.
pub const HALFSCALE_MARGIN_TANGENT: f64 = 1.2;
/// Margin multiplier when alpha < 1/2 (the curve image already dominates).
pub const HALFSCALE_MARGIN_FLAT: f64 = 0.01;
/// Hard cap on sweep points at large lambda.
const HALFSCALE_SWEEP_CAP: f64 = (1u32 << 21) as f64;

/// One-dimensional field with f-hat the indicator of B(0, sqrt(lambda)),
/// evaluated along gamma(x, t) = x - t^alpha.
#[derive(Debug, Clone, Serialize)]
pub struct HalfScaleWitness {
    /// Frequency scale; the field has band sqrt(lambda).
    pub lambda: f64,
    /// Curve Hölder exponent.
    pub alpha: f64,
}

impl HalfScaleWitness {
    /// Validate lambda >= 1 and alpha in (0, 1).
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 1.0 {
            return Err(Error::RejectedInput(format!("lambda = {lambda} must be >= 1")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::RejectedInput(format!("alpha = {alpha} must lie in (0, 1)")));
        }
        Ok(HalfScaleWitness { lambda, alpha })
    }

    /// The witness field: f-hat = indicator of [-sqrt(lambda), sqrt(lambda)].
    pub fn field(&self, nodes_per_axis: usize) -> Result<BandlimitedField> {
        make_field(&FieldRecipe::IndicatorBall {
            center: [0.0, 0.0],
            radius: self.lambda.sqrt(),
            dim: 1,
            nodes_per_axis,
        })
    }

    /// Width of the membership margin around the curve image. Scaled to keep
    /// the rescaled linear phase at most the multiplier, so the on-S modulus
    /// stays strictly above sqrt(lambda).
    pub fn margin(&self) -> f64 {
        let mult = if self.alpha >= 0.5 {
            HALFSCALE_MARGIN_TANGENT
        } else {
            HALFSCALE_MARGIN_FLAT
        };
        mult / self.lambda.sqrt()
    }

    /// Upper end of the time window (0, 1/lambda).
    pub fn t_window(&self) -> f64 {
        1.0 / self.lambda
    }
}

/// Measured exceptional set of a half-scale witness.
#[derive(Debug, Clone, Serialize)]
pub struct HalfScaleReport {
    /// Frequency scale.
    pub lambda: f64,
    /// Curve exponent.
    pub alpha: f64,
    /// Upper end of the time window.
    pub t_window: f64,
    /// Membership margin used by the sweep.
    pub margin: f64,
    /// Sweep resolution.
    pub sweep_step: f64,
    /// Measure estimate: member count times step.
    pub s_measure: f64,
    /// Number of sweep points in S.
    pub s_count: usize,
    /// Minimum over sampled members of the refined modulus at the defining time.
    pub on_s_min: f64,
    /// How many members were sampled for the modulus bound.
    pub on_s_samples: usize,
    /// on_s_min > sqrt(lambda), strictly.
    pub strict_pass: bool,
}

/// Modulus of the evolved half-scale field along its curve, in rescaled form:
/// sqrt(lambda) |∫_{-1}^{1} e^{i(sqrt(lambda)(y - t^alpha) eta + lambda t eta^2)} d eta|
/// by midpoint quadrature.
pub fn halfscale_modulus(lambda: f64, alpha: f64, y: f64, t: f64, quad_nodes: usize) -> Result<f64> {
    if !lambda.is_finite() || lambda < 1.0 {
        return Err(Error::RejectedInput(format!("lambda = {lambda} must be >= 1")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::RejectedInput(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !y.is_finite() || !t.is_finite() || t < 0.0 {
        return Err(Error::RejectedInput(format!("(y, t) = ({y}, {t}) must be finite with t >= 0")));
    }
    if quad_nodes == 0 {
        return Err(Error::Configuration("quad_nodes must be positive".into()));
    }
    let root = lambda.sqrt();
    let a = root * (y - t.powf(alpha));
    let b = lambda * t;
    let h = 2.0 / quad_nodes as f64;
    let mut acc = CompensatedC64::new();
    for i in 0..quad_nodes {
        let eta = -1.0 + (i as f64 + 0.5) * h;
        let (s, c) = (a * eta + b * eta * eta).sin_cos();
        acc.add(C64::new(c * h, s * h));
    }
    Ok(root * acc.value().norm())
}

/// The defining time for a sweep point: the time in (0, T) whose curve image
/// is nearest y, clamped to the open window. The lower clamp is small enough
/// that its curve image t^alpha stays negligible against any margin even for
/// alpha near zero.
fn halfscale_defining_t(y: f64, alpha: f64, t_window: f64) -> f64 {
    let floor = t_window * 1e-250;
    let ceil = t_window * (1.0 - 1e-12);
    if y <= 0.0 {
        floor
    } else {
        y.powf(1.0 / alpha).clamp(floor, ceil)
    }
}

/// Sweep the exceptional set S = {y : |y - t^alpha| <= margin for some
/// t in (0, 1/lambda)} at fine resolution, measure it, and bound the evolved
/// modulus at each sampled member from below using its defining time.
pub fn halfscale_s_set(w: &HalfScaleWitness) -> Result<HalfScaleReport> {
    if w.lambda < HALFSCALE_MIN_LAMBDA {
        return Err(Error::Precondition(format!(
            "lambda = {} is below the minimum scale {HALFSCALE_MIN_LAMBDA}",
            w.lambda
        )));
    }
    let t_window = w.t_window();
    let margin = w.margin();
    let image_hi = t_window.powf(w.alpha);
    let lo = -2.0 * margin;
    let hi = image_hi + 2.0 * margin;
    let base_step = t_window / 100.0;
    let step = base_step.max((hi - lo) / HALFSCALE_SWEEP_CAP);
    let count = ((hi - lo) / step).ceil() as usize;

    let members: Vec<f64> = (0..count)
        .into_par_iter()
        .filter_map(|i| {
            let y = lo + (i as f64 + 0.5) * step;
            let t = halfscale_defining_t(y, w.alpha, t_window);
            if (y - t.powf(w.alpha)).abs() <= margin {
                Some(y)
            } else {
                None
            }
        })
        .collect();
    if members.is_empty() {
        return Err(Error::Configuration(
            "exceptional-set sweep found no members; resolution too coarse".into(),
        ));
    }
    let s_count = members.len();
    let s_measure = s_count as f64 * step;

    let samples = s_count.min(400);
    let mins: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let y = members[k * s_count / samples];
            let t = halfscale_defining_t(y, w.alpha, t_window);
            let direct = halfscale_modulus(w.lambda, w.alpha, y, t, DEFAULT_QUAD_NODES)?;
            let span = t_window / 50.0;
            let a = (t - span).max(t_window * 1e-12);
            let b = (t + span).min(t_window * (1.0 - 1e-12));
            let (refined, _) = golden_max(a, b, span * 1e-3, &mut |u| {
                halfscale_modulus(w.lambda, w.alpha, y, u, DEFAULT_QUAD_NODES)
            })?;
            Ok(direct.max(refined))
        })
        .collect::<Result<Vec<f64>>>()?;
    let on_s_min = mins.iter().cloned().fold(f64::INFINITY, f64::min);

    Ok(HalfScaleReport {
        lambda: w.lambda,
        alpha: w.alpha,
        t_window,
        margin,
        sweep_step: step,
        s_measure,
        s_count,
        on_s_min,
        on_s_samples: samples,
        strict_pass: on_s_min > w.lambda.sqrt(),
    })
}

/// The integrability threshold claimed per regime: 4 for alpha >= 1/2,
/// 8 alpha for 1/4 < alpha < 1/2, and 2 for alpha <= 1/4.
pub fn sharp_p_regime_target(alpha: f64) -> f64 {
    if alpha >= 0.5 {
        4.0
    } else if alpha > 0.25 {
        8.0 * alpha
    } else {
        2.0
    }
}

/// Measured threshold exponent.
#[derive(Debug, Clone, Serialize)]
pub struct SharpPReport {
    /// Curve exponent.
    pub alpha: f64,
    /// Sobolev regularity of the comparison norm.
    pub s: f64,
    /// Largest p on the grid with nonpositive slope difference.
    pub threshold: f64,
    /// Regime claim: 4, 8 alpha, or 2.
    pub regime_target: f64,
    /// Fitted slope of the exceptional-set measure vs lambda.
    pub measure_slope: f64,
    /// Fitted slope of the on-S modulus floor vs lambda.
    pub level_slope: f64,
}

/// Search p-grid resolution.
const SHARP_P_STEP: f64 = 0.005;

/// Largest p for which lambda^{level} |S|^{1/p} stays dominated by
/// lambda^{1/4 + s/2} across the schedule: the measured slopes of the
/// half-scale witness decide the comparison.
pub fn sharp_p_threshold(alpha: f64, s: f64, schedule: &[f64]) -> Result<SharpPReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::RejectedInput(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::RejectedInput(format!(
            "regularity s = {s} must lie in (0, 1/2) for the comparison slope"
        )));
    }
    let mut measures = Vec::with_capacity(schedule.len());
    let mut levels = Vec::with_capacity(schedule.len());
    for &lambda in schedule {
        let w = HalfScaleWitness::new(lambda, alpha)?;
        let report = halfscale_s_set(&w)?;
        measures.push(report.s_measure);
        levels.push(report.on_s_min);
    }
    let measure_fit = exponent_fit(schedule, &measures)?;
    let level_fit = exponent_fit(schedule, &levels)?;
    if measure_fit.slope >= 0.0 {
        return Err(Error::Configuration(format!(
            "exceptional-set measure did not shrink with lambda (slope {})",
            measure_fit.slope
        )));
    }
    let rhs = 0.25 + s / 2.0;
    let diff = |p: f64| level_fit.slope + measure_fit.slope / p - rhs;
    if diff(1.0) > 0.0 {
        return Err(Error::Configuration(
            "no p >= 1 satisfies the slope comparison; the witness scan is inconsistent".into(),
        ));
    }
    let mut threshold = 1.0;
    let mut p = 1.0;
    while p <= 16.0 {
        if diff(p) <= 0.0 {
            threshold = p;
        } else {
            break;
        }
        p += SHARP_P_STEP;
    }
    Ok(SharpPReport {
        alpha,
        s,
        threshold,
        regime_target: sharp_p_regime_target(alpha),
        measure_slope: measure_fit.slope,
        level_slope: level_fit.slope,
    })
}

// ---------------------------------------------------------------------------
// Two-scale strip witness
// ---------------------------------------------------------------------------

/// Planar field supported on strips [R - sqrt(R), R + sqrt(R)] x
/// [R^{2/3} l, R^{2/3} l + 1] for l in (L, 2L], L = ceil(R^{1/3}): both
/// coordinates stay comparable to R while the strip count is exactly L.
#[derive(Debug, Clone, Serialize)]
pub struct BourgainWitness {
    /// Frequency scale.
    pub r: f64,
}

impl BourgainWitness {
    /// Validate R >= 16 (below that the strips collapse).
    pub fn new(r: f64) -> Result<Self> {
        if !r.is_finite() || r < 16.0 {
            return Err(Error::RejectedInput(format!("strip witness needs R >= 16, got {r}")));
        }
        Ok(BourgainWitness { r })
    }

    /// Number of strips: L = ceil(R^{1/3}).
    pub fn strip_count(&self) -> usize {
        self.r.cbrt().ceil() as usize
    }

    /// Inclusive strip index range (L+1 ..= 2L).
    pub fn strip_range(&self) -> (usize, usize) {
        let l = self.strip_count();
        (l + 1, 2 * l)
    }

    /// Height of the bottom edge of strip l: R^{2/3} l.
    pub fn strip_height(&self, l: usize) -> f64 {
        self.r.powf(2.0 / 3.0) * l as f64
    }

    /// Exact squared L2 norm: strip count times strip area 2 sqrt(R).
    pub fn l2_norm_sq(&self) -> f64 {
        self.strip_count() as f64 * 2.0 * self.r.sqrt()
    }

    /// Full planar field (for cross-checks at small R; the separable
    /// evaluator is the scan path).
    pub fn field(&self, nodes_per_unit: usize) -> Result<BandlimitedField> {
        if nodes_per_unit == 0 {
            return Err(Error::Configuration("nodes_per_unit must be positive".into()));
        }
        let h = 1.0 / nodes_per_unit as f64;
        let width = 2.0 * self.r.sqrt();
        let n1 = (width * nodes_per_unit as f64).ceil() as usize;
        let (lo, hi) = self.strip_range();
        let total = n1 * (hi - lo + 1) * nodes_per_unit;
        if total > 8_000_000 {
            return Err(Error::Configuration(format!(
                "{total} atoms at R = {}; use the separable evaluator at this scale",
                self.r
            )));
        }
        let h1 = width / n1 as f64;
        let x_lo = self.r - self.r.sqrt();
        let mut atoms = Vec::with_capacity(total);
        for i in 0..n1 {
            let xi1 = x_lo + (i as f64 + 0.5) * h1;
            for l in lo..=hi {
                let base = self.strip_height(l);
                for j in 0..nodes_per_unit {
                    let xi2 = base + (j as f64 + 0.5) * h;
                    atoms.push(crate::spectral::FrequencyAtom::new(
                        [xi1, xi2],
                        h1 * h,
                        C64::new(1.0, 0.0),
                    ));
                }
            }
        }
        let prov = crate::spectral::Provenance {
            recipe: "strip-witness".into(),
            params: serde_json::json!({ "r": self.r, "nodes_per_unit": nodes_per_unit }),
        };
        BandlimitedField::with_provenance(2, atoms, Some(h1.max(h)), prov)
    }

    /// Separable evaluation of the evolved field under the paraboloid symbol:
    /// the phase splits as (x1 xi1 + t xi1^2) + (x2 xi2 + t xi2^2), so the
    /// tensor quadrature factorizes into two one-dimensional sums.
    pub fn eval(&self, x1: f64, x2: f64, t: f64, node_h: f64) -> C64 {
        let width = 2.0 * self.r.sqrt();
        let n1 = (width / node_h).ceil() as usize;
        let h1 = width / n1 as f64;
        let x_lo = self.r - self.r.sqrt();
        let mut u = C64::new(0.0, 0.0);
        for i in 0..n1 {
            let xi = x_lo + (i as f64 + 0.5) * h1;
            let (sn, cs) = (x1 * xi + t * xi * xi).sin_cos();
            u += C64::new(cs * h1, sn * h1);
        }
        let n2 = (1.0 / node_h).ceil() as usize;
        let h2 = 1.0 / n2 as f64;
        let (lo, hi) = self.strip_range();
        let mut v = C64::new(0.0, 0.0);
        for l in lo..=hi {
            let base = self.strip_height(l);
            for j in 0..n2 {
                let xi = base + (j as f64 + 0.5) * h2;
                let (sn, cs) = (x2 * xi + t * xi * xi).sin_cos();
                v += C64::new(cs * h2, sn * h2);
            }
        }
        u * v
    }
}

/// Measured growth of one strip witness.
#[derive(Debug, Clone, Serialize)]
pub struct BourgainPoint {
    /// Frequency scale.
    pub r: f64,
    /// Exact L2 norm of the witness.
    pub l2_norm: f64,
    /// Modulus level exceeded on the top R^{-2/3} fraction of scanned points
    /// (about one batch of cells per coherence strip). Small enough to sit
    /// above the Rayleigh bulk of the value distribution, large enough to be
    /// insensitive to isolated grid-coincidence cells near exact resonances.
    pub level: f64,
    /// Largest refined modulus seen anywhere in the scan.
    pub global_max: f64,
    /// Measure of {x : refined sup >= R^{3/4}/2} under the grid cell measure.
    pub measure_above_half: f64,
    /// The exceedance fraction defining `level`.
    pub level_fraction: f64,
}

/// Growth scan across an R-schedule.
#[derive(Debug, Clone, Serialize)]
pub struct BourgainGrowth {
    /// Completed schedule entries.
    pub points: Vec<BourgainPoint>,
    /// Fit of the exact L2 norms (target slope 5/12).
    pub norm_fit: Option<ScalingFit>,
    /// Fit of the exceedance levels (target slope 3/4).
    pub level_fit: Option<ScalingFit>,
    /// level slope minus norm slope (target 1/3).
    pub implied_s: Option<f64>,
    /// True when the budget cut the schedule short.
    pub truncated: bool,
}

/// Node spacing for the strip-witness scan quadratures; the phase-resolution
/// rule h (|x| + 2 t |xi|) <= 1/2 holds with margin for t < 1/R.
const BOURGAIN_NODE_H: f64 = 1.0 / 16.0;

/// Scan one strip witness over B(0,1) x (0, 1/R): coarse maxima over a grid
/// of times seeded at the constructive foci, then golden refinement of the
/// top slice. Returns per-point values and the grid cell measure.
fn bourgain_scan(w: &BourgainWitness) -> (Vec<f64>, f64) {
    let r = w.r;
    let t_window = 1.0 / r;

    // Spatial grid: coarse along x1 (the stationary time varies slowly), and
    // at tube resolution 1/R along x2, capped.
    let n1x = 33usize;
    let step1 = 2.0 / n1x as f64;
    let x1s: Vec<f64> = (0..n1x).map(|i| -1.0 + (i as f64 + 0.5) * step1).collect();
    let n2x = ((2.0 * r).ceil() as usize).clamp(64, 1 << 15);
    let step2 = 2.0 / n2x as f64;
    let x2s: Vec<f64> = (0..n2x).map(|j| -1.0 + (j as f64 + 0.5) * step2).collect();
    let cell = step1 * step2;

    // Time candidates: a uniform grid, the quadratic-coherence foci
    // 2 pi k R^{-4/3}, and the stationary times -x1/(2R) of the grid points.
    let mut ts: Vec<f64> = (0..48).map(|i| (i as f64 + 0.5) * t_window / 48.0).collect();
    let mut k = 1.0;
    loop {
        let t = 2.0 * std::f64::consts::PI * k * r.powf(-4.0 / 3.0);
        if t >= t_window {
            break;
        }
        ts.push(t);
        k += 1.0;
    }
    for &x1 in &x1s {
        if x1 < 0.0 {
            ts.push(-x1 / (2.0 * r));
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup_by(|a, b| a.to_bits() == b.to_bits());

    // Per time, the two factor moduli on their axes; transposed for the
    // combine pass.
    let factors: Vec<(Vec<f64>, Vec<f64>)> = ts
        .par_iter()
        .map(|&t| {
            let us: Vec<f64> = x1s
                .iter()
                .map(|&x1| w.eval(x1, 0.0, t, BOURGAIN_NODE_H).norm() / strip_factor(w, t))
                .collect();
            let vs: Vec<f64> = x2s.iter().map(|&x2| strip_modulus(w, x2, t)).collect();
            (us, vs)
        })
        .collect();

    let n_t = ts.len();
    let mut u_cols = vec![0.0f64; n1x * n_t];
    let mut v_cols = vec![0.0f64; n2x * n_t];
    for (ti, (us, vs)) in factors.iter().enumerate() {
        for (i, &u) in us.iter().enumerate() {
            u_cols[i * n_t + ti] = u;
        }
        for (j, &v) in vs.iter().enumerate() {
            v_cols[j * n_t + ti] = v;
        }
    }

    // Coarse per-point suprema over the candidate times, ball-masked.
    struct Coarse {
        value: f64,
        x1: f64,
        x2: f64,
        t: f64,
    }
    let ts_ref = &ts;
    let u_ref = &u_cols;
    let x1s_ref = &x1s;
    let mut coarse: Vec<Coarse> = x2s
        .par_iter()
        .enumerate()
        .flat_map_iter(|(j, &x2)| {
            let vj = &v_cols[j * n_t..(j + 1) * n_t];
            x1s_ref.iter().enumerate().filter_map(move |(i, &x1)| {
                if x1 * x1 + x2 * x2 > 1.0 {
                    return None;
                }
                let ui = &u_ref[i * n_t..(i + 1) * n_t];
                let mut best = f64::NEG_INFINITY;
                let mut best_t = 0;
                for ti in 0..n_t {
                    let val = ui[ti] * vj[ti];
                    if val > best {
                        best = val;
                        best_t = ti;
                    }
                }
                Some(Coarse {
                    value: best,
                    x1,
                    x2,
                    t: ts_ref[best_t],
                })
            })
        })
        .collect();

    let n_ball = coarse.len();
    // The refined slice is deliberately much larger (fraction R^{-1/3}) than
    // the reported quantile (fraction R^{-2/3}), so the quantile is far from
    // the refinement boundary and insensitive to it.
    let refine_fraction = r.cbrt().recip();
    let k_refine = ((refine_fraction * n_ball as f64).ceil() as usize).max(1);
    let refine_k = (k_refine + k_refine / 2 + 8).min(n_ball);

    // Refine only the top slice: golden search can only raise values, and the
    // exceedance level lives well inside the refined slice.
    coarse.sort_by(|a, b| b.value.total_cmp(&a.value));
    let dt = t_window / 48.0;
    let refined: Vec<f64> = coarse[..refine_k]
        .par_iter()
        .map(|c| {
            let a = (c.t - dt).max(t_window * 1e-9);
            let b = (c.t + dt).min(t_window * (1.0 - 1e-12));
            let got = golden_max(a, b, dt * 1e-3, &mut |t| {
                Ok(w.eval(c.x1, c.x2, t, BOURGAIN_NODE_H).norm())
            });
            match got {
                Ok((val, _)) => val.max(c.value),
                Err(_) => c.value,
            }
        })
        .collect();

    let mut values: Vec<f64> = refined;
    values.extend(coarse[refine_k..].iter().map(|c| c.value));
    values.sort_by(|a, b| b.total_cmp(a));
    (values, cell)
}

/// |V| factor of the separable evaluation (strips only), used for the
/// per-axis tables of the scan.
fn strip_modulus(w: &BourgainWitness, x2: f64, t: f64) -> f64 {
    let n2 = (1.0 / BOURGAIN_NODE_H).ceil() as usize;
    let h2 = 1.0 / n2 as f64;
    let (lo, hi) = w.strip_range();
    let mut v = C64::new(0.0, 0.0);
    for l in lo..=hi {
        let base = w.strip_height(l);
        for j in 0..n2 {
            let xi = base + (j as f64 + 0.5) * h2;
            let (sn, cs) = (x2 * xi + t * xi * xi).sin_cos();
            v += C64::new(cs * h2, sn * h2);
        }
    }
    v.norm()
}

/// |V(0, t)| normalization used to extract |U| from the full separable
/// evaluation without duplicating the U quadrature.
fn strip_factor(w: &BourgainWitness, t: f64) -> f64 {
    strip_modulus(w, 0.0, t)
}

/// Growth of the strip witness across an R-schedule: exact L2 norms, scanned
/// exceedance levels, and the implied regularity threshold. An optional wall
/// budget truncates the schedule (flagged, never an error).
pub fn bourgain_growth(schedule: &[f64], budget: Option<Duration>) -> Result<BourgainGrowth> {
    if schedule.is_empty() {
        return Err(Error::RejectedInput("R-schedule must not be empty".into()));
    }
    for pair in schedule.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::RejectedInput("R-schedule must be strictly increasing".into()));
        }
    }
    let start = Instant::now();
    let mut points = Vec::with_capacity(schedule.len());
    let mut truncated = false;
    for (idx, &r) in schedule.iter().enumerate() {
        if idx > 0 {
            if let Some(limit) = budget {
                if start.elapsed() > limit {
                    truncated = true;
                    break;
                }
            }
        }
        let w = BourgainWitness::new(r)?;
        let (values, cell) = bourgain_scan(&w);
        let fraction = r.powf(-2.0 / 3.0);
        let k_level = ((fraction * values.len() as f64).ceil() as usize).max(1);
        let level = values[k_level - 1];
        let global_max = values[0];
        let half = 0.5 * r.powf(0.75);
        let above = values.partition_point(|&v| v >= half);
        points.push(BourgainPoint {
            r,
            l2_norm: w.l2_norm_sq().sqrt(),
            level,
            global_max,
            measure_above_half: above as f64 * cell,
            level_fraction: fraction,
        });
    }

    let (norm_fit, level_fit, implied_s) = if points.len() >= 4 {
        let rs: Vec<f64> = points.iter().map(|p| p.r).collect();
        let norms: Vec<f64> = points.iter().map(|p| p.l2_norm).collect();
        let levels: Vec<f64> = points.iter().map(|p| p.level).collect();
        let nf = exponent_fit(&rs, &norms)?;
        let lf = exponent_fit(&rs, &levels)?;
        let s = lf.slope - nf.slope;
        (Some(nf), Some(lf), Some(s))
    } else {
        (None, None, None)
    };
    Ok(BourgainGrowth {
        points,
        norm_fit,
        level_fit,
        implied_s,
        truncated,
    })
}

// ---------------------------------------------------------------------------
// Witness battery for maximal-operator scans
// ---------------------------------------------------------------------------

/// The standard four-member witness battery at a given curve exponent: the
/// frequency cube, the half-scale interval, a random-phase annulus, and a
/// refocusing chirp. Each member maps a scan scale to (field, time window).
pub fn standard_battery(alpha: f64, seed: u64) -> Vec<BatteryMember> {
    let _ = alpha;
    vec![
        BatteryMember {
            name: "cube".into(),
            make: Arc::new(|lam: f64| {
                let r = lam.max(4.0);
                let field = make_field(&FieldRecipe::IndicatorCube {
                    r,
                    dim: 1,
                    nodes_per_axis: 128,
                })?;
                Ok((field, r.powi(-2) / 100.0))
            }),
        },
        BatteryMember {
            name: "half-scale".into(),
            make: Arc::new(|lam: f64| {
                if !(lam >= 2.0) {
                    return Err(Error::RejectedInput(format!("scale {lam} must be >= 2")));
                }
                let nodes = ((32.0 * lam).ceil() as usize).max(8);
                let field = make_field(&FieldRecipe::IndicatorBall {
                    center: [0.0, 0.0],
                    radius: lam,
                    dim: 1,
                    nodes_per_axis: nodes,
                })?;
                Ok((field, lam.powi(-2)))
            }),
        },
        BatteryMember {
            name: "annulus".into(),
            make: Arc::new(move |lam: f64| {
                let field = make_field(&FieldRecipe::RandomPhaseAnnulus {
                    lambda: lam,
                    dim: 1,
                    nodes_per_unit: 16,
                    seed,
                })?;
                Ok((field, lam.powi(-2)))
            }),
        },
        BatteryMember {
            name: "chirp".into(),
            make: Arc::new(|lam: f64| {
                let field = make_field(&FieldRecipe::ChirpAnnulus {
                    lambda: lam,
                    dim: 1,
                    nodes_per_unit: 16,
                    focus_time: lam.powi(-2) / 2.0,
                })?;
                Ok((field, lam.powi(-2)))
            }),
        },
    ]
}
