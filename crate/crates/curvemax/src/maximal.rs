//! Discretized maximal functions along curves, localized L^p norms, operator
//! ratios against Sobolev data, and witness-battery scaling scans.
//!
//! The maximal function is measured on a product grid: cell-centered spatial
//! points covering a ball, a uniform time grid over (0, T] sized so that one
//! step can move |e^{itP(D)}f| by at most the configured absolute tolerance,
//! and (for curve families) a deterministic parameter sample drawn from the
//! diameter-bounded decomposition of the parameter set. A golden-section pass
//! then refines the time argmax per spatial point, so both the raw grid sup
//! and the refined sup are reported.

use crate::curves::{eval_curve, Curve};
use crate::fit::{exponent_fit, ScalingFit};
use crate::spectral::{eval_at, norm, pt1, sobolev_norm, BandlimitedField, Point, Symbol};
use crate::sum::Compensated;
use crate::theta::theta_decompose;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::sync::Arc;

/// Hard cap on the number of uniform time steps per scan. The time-continuity
/// bound step * mass * sup|grad P| quantifies how far below the true sup a
/// capped grid can sit.
pub const MAX_TIME_STEPS: usize = 200_000;

/// Golden-section stopping width, relative to the coarse time step.
pub const REFINE_REL_TOL: f64 = 1e-3;

/// Deterministic seed for the per-piece parameter samples of a curve family.
const THETA_SEED: u64 = 0x7e7a;

/// Parameter samples requested per decomposition piece. Interval pieces
/// contribute their endpoints plus seeded interior draws; finite pieces
/// contribute all of their points.
const THETA_SAMPLES_PER_PIECE: usize = 3;

/// Space-time-parameter grid on which a maximal function is measured.
#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    /// Center of the spatial ball.
    pub center: Point,
    /// Radius of the spatial ball.
    pub radius: f64,
    /// Requested spatial step; must satisfy dx <= 1/(2 band(f)).
    pub dx: f64,
    /// Upper end of the time window (0, T]; zero collapses the window to {0}.
    pub t_max: f64,
    /// Absolute tolerance driving the uniform time step.
    pub eps_abs: f64,
    /// Explicit parameter sample for a curve family; `None` lets the scan draw
    /// one from the decomposition of the family's parameter set.
    pub theta_samples: Option<Vec<f64>>,
}

/// Per-point suprema of |e^{itP(D)}f(gamma(x,t))| over the grid.
#[derive(Debug, Clone, Serialize)]
pub struct MaximalResult {
    /// Spatial grid points (cell centers inside the ball).
    pub xs: Vec<Point>,
    /// Sup over the raw product grid, per spatial point.
    pub coarse: Vec<f64>,
    /// Sup after golden-section refinement in time, per spatial point.
    pub refined: Vec<f64>,
    /// Refined argmax time, per spatial point.
    pub argmax_t: Vec<f64>,
    /// Parameter value attaining the sup, per spatial point (families only).
    pub argmax_theta: Vec<Option<f64>>,
    /// Uniform time step actually used (zero for a degenerate window).
    pub dt: f64,
    /// Number of time-grid steps.
    pub time_steps: usize,
    /// Volume of one spatial cell.
    pub cell: f64,
    /// Parameter values scanned (empty for a single curve).
    pub thetas: Vec<f64>,
}

/// Cell-centered grid covering the ball B(center, radius); returns the points
/// and the volume of one cell.
pub(crate) fn ball_grid(center: Point, radius: f64, dx: f64, dim: usize) -> (Vec<Point>, f64) {
    let n = ((2.0 * radius / dx).ceil() as usize).max(1);
    let step = 2.0 * radius / n as f64;
    if dim == 1 {
        let xs = (0..n)
            .map(|i| pt1(center[0] - radius + (i as f64 + 0.5) * step))
            .collect();
        (xs, step)
    } else {
        let mut xs = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let p = [
                    center[0] - radius + (i as f64 + 0.5) * step,
                    center[1] - radius + (j as f64 + 0.5) * step,
                ];
                if (p[0] - center[0]).hypot(p[1] - center[1]) <= radius {
                    xs.push(p);
                }
            }
        }
        (xs, step * step)
    }
}

/// Number of uniform time steps for a window of length `t_max`: the step is
/// sized so one step moves the modulus by at most eps_abs, then capped.
fn time_steps(field: &BandlimitedField, symbol: &Symbol, eps_abs: f64) -> usize {
    let lam_m = field.band().max(1.0).powf(symbol.order());
    let raw = 8.0 * (lam_m * field.mass_bound() / eps_abs).ceil();
    if !raw.is_finite() || raw >= MAX_TIME_STEPS as f64 {
        MAX_TIME_STEPS
    } else {
        (raw as usize).max(1)
    }
}

/// Golden-section maximization of `g` on [a, b]; returns the best probed
/// (value, argument). `g` must be continuous; the bracket shrinks until its
/// width is below `tol`.
pub(crate) fn golden_max<F>(mut a: f64, mut b: f64, tol: f64, g: &mut F) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    if !(b > a) {
        let v = g(a)?;
        return Ok((v, a));
    }
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = g(c)?;
    let mut fd = g(d)?;
    let mut best = if fc >= fd { (fc, c) } else { (fd, d) };
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = g(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = g(d)?;
        }
        let cand = if fc >= fd { (fc, c) } else { (fd, d) };
        if cand.0 > best.0 {
            best = cand;
        }
    }
    Ok(best)
}

/// Parameter values to scan for `curve` on `grid`: none for a single curve, an
/// explicit validated list, or a deterministic draw from the decomposition of
/// the family's parameter set (endpoints of every piece are always included).
fn theta_list(
    field: &BandlimitedField,
    curve: &Curve,
    grid: &GridSpec,
) -> Result<(Vec<Option<f64>>, Vec<f64>)> {
    match (curve, &grid.theta_samples) {
        (Curve::Spec(_), None) => Ok((vec![None], Vec::new())),
        (Curve::Spec(_), Some(_)) => Err(Error::Usage(
            "theta samples were given, but the curve is not a parameterized family".into(),
        )),
        (Curve::Family(fam), samples) => {
            let mut thetas = match samples {
                Some(list) => {
                    if list.is_empty() {
                        return Err(Error::Usage("explicit theta sample is empty".into()));
                    }
                    let (lo, hi) = fam.theta_domain.bounds();
                    for &th in list {
                        if !th.is_finite() || th < lo - 1e-12 || th > hi + 1e-12 {
                            return Err(Error::Usage(format!(
                                "theta = {th} lies outside the parameter domain [{lo}, {hi}]"
                            )));
                        }
                    }
                    list.clone()
                }
                None => {
                    let lambda = field.band().max(2.0);
                    let dec = theta_decompose(&fam.theta_domain, lambda, fam.alpha)?;
                    let mut all = Vec::new();
                    for (i, piece) in dec.pieces.iter().enumerate() {
                        all.extend(piece.sample(THETA_SAMPLES_PER_PIECE, THETA_SEED ^ i as u64));
                    }
                    all
                }
            };
            thetas.sort_by(f64::total_cmp);
            thetas.dedup();
            Ok((thetas.iter().map(|&t| Some(t)).collect(), thetas))
        }
    }
}

/// Sup of |e^{itP(D)}f| along the curve over the discretized window, per
/// spatial grid point, with a golden-section refinement of the time argmax.
///
/// The spatial step must resolve the field (dx <= 1/(2 band)); recipe-built
/// fields additionally enforce their quadrature spacing rule at every visited
/// space-time point. Violations surface as configuration errors.
pub fn maximal_function(
    field: &BandlimitedField,
    symbol: &Symbol,
    curve: &Curve,
    grid: &GridSpec,
) -> Result<MaximalResult> {
    symbol.validate()?;
    for (name, v) in [
        ("radius", grid.radius),
        ("dx", grid.dx),
        ("t_max", grid.t_max),
        ("eps_abs", grid.eps_abs),
    ] {
        if !v.is_finite() {
            return Err(Error::Usage(format!("grid {name} = {v} must be finite")));
        }
    }
    if !(grid.radius > 0.0) || !(grid.dx > 0.0) || !(grid.eps_abs > 0.0) || grid.t_max < 0.0 {
        return Err(Error::Usage(format!(
            "grid needs radius > 0, dx > 0, eps_abs > 0, t_max >= 0; got radius = {}, dx = {}, \
             eps_abs = {}, t_max = {}",
            grid.radius, grid.dx, grid.eps_abs, grid.t_max
        )));
    }
    if curve.dim() != field.dim() {
        return Err(Error::Usage(format!(
            "curve dimension {} does not match field dimension {}",
            curve.dim(),
            field.dim()
        )));
    }
    let band = field.band();
    if band > 0.0 && grid.dx > 1.0 / (2.0 * band) + 1e-15 {
        return Err(Error::Configuration(format!(
            "spatial step {} exceeds the half-wavelength bound {} for a field of band {}",
            grid.dx,
            1.0 / (2.0 * band),
            band
        )));
    }

    let (thetas, theta_values) = theta_list(field, curve, grid)?;
    let (xs, cell) = ball_grid(grid.center, grid.radius, grid.dx, field.dim());

    let (dt, steps) = if grid.t_max == 0.0 {
        (0.0, 0usize)
    } else {
        let n = time_steps(field, symbol, grid.eps_abs);
        let dt = grid.t_max.min(1.0) / n as f64;
        let total = (grid.t_max / dt - 1e-9).ceil() as usize;
        (dt, total.max(1))
    };

    let grad = symbol.grad_sup(band);
    let spacing = field.node_spacing();

    struct PerX {
        coarse: f64,
        refined: f64,
        t_star: f64,
        theta_star: Option<f64>,
    }

    let eval_one = |x: Point, t: f64, theta: Option<f64>| -> Result<f64> {
        let g = eval_curve(curve, x, t, theta)?;
        if let Some(h) = spacing {
            let reach = norm(g) + t * grad;
            if h * reach > crate::spectral::MAX_NODE_SPACING {
                return Err(Error::Configuration(format!(
                    "node spacing {h} cannot resolve the phase at x = ({}, {}), t = {t}: \
                     spacing * (|x| + t sup|grad P|) = {} exceeds {}",
                    g[0],
                    g[1],
                    h * reach,
                    crate::spectral::MAX_NODE_SPACING
                )));
            }
        }
        Ok(eval_at(field, g, Some(symbol), t).norm())
    };

    let per_x: Vec<PerX> = xs
        .par_iter()
        .map(|&x| -> Result<PerX> {
            let mut best_v = f64::NEG_INFINITY;
            let mut best_t = 0.0;
            let mut best_theta = None;
            for &theta in &thetas {
                // t = 0 enters as the limit point of the open window.
                let v0 = eval_one(x, 0.0, theta)?;
                if v0 > best_v {
                    best_v = v0;
                    best_t = 0.0;
                    best_theta = theta;
                }
                for j in 1..=steps {
                    let t = (j as f64 * dt).min(grid.t_max);
                    let v = eval_one(x, t, theta)?;
                    if v > best_v {
                        best_v = v;
                        best_t = t;
                        best_theta = theta;
                    }
                }
            }
            let coarse = best_v;
            let mut refined = coarse;
            let mut t_star = best_t;
            if dt > 0.0 {
                let a = (best_t - dt).max(0.0);
                let b = (best_t + dt).min(grid.t_max);
                let mut g = |t: f64| eval_one(x, t, best_theta);
                let (v, t) = golden_max(a, b, REFINE_REL_TOL * dt, &mut g)?;
                if v > refined {
                    refined = v;
                    t_star = t;
                }
            }
            Ok(PerX {
                coarse,
                refined,
                t_star,
                theta_star: best_theta,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MaximalResult {
        xs,
        coarse: per_x.iter().map(|p| p.coarse).collect(),
        refined: per_x.iter().map(|p| p.refined).collect(),
        argmax_t: per_x.iter().map(|p| p.t_star).collect(),
        argmax_theta: per_x.iter().map(|p| p.theta_star).collect(),
        dt,
        time_steps: steps,
        cell,
        thetas: theta_values,
    })
}

/// Riemann L^p norm of grid values with a fixed cell volume:
/// (sum |v|^p cell)^{1/p}.
pub fn lp_norm(values: &[f64], p: f64, cell_volume: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Usage("no values to take an L^p norm of".into()));
    }
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Usage(format!("L^p norm needs finite p >= 1, got {p}")));
    }
    if !(cell_volume > 0.0) || !cell_volume.is_finite() {
        return Err(Error::Usage(format!(
            "cell volume {cell_volume} must be positive and finite"
        )));
    }
    let mut acc = Compensated::new();
    for &v in values {
        if !v.is_finite() {
            return Err(Error::RejectedInput(format!("non-finite value {v} in L^p data")));
        }
        acc.add(v.abs().powf(p) * cell_volume);
    }
    Ok(acc.value().powf(1.0 / p))
}

/// Ratio of the localized L^p norm of the refined maximal function to the
/// H^s norm of the datum.
#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    /// L^p norm of the refined sup over the spatial ball.
    pub numerator: f64,
    /// Sobolev H^s norm of the datum.
    pub denominator: f64,
    /// numerator / denominator.
    pub ratio: f64,
    /// The underlying per-point suprema.
    pub maximal: MaximalResult,
}

/// Measure ||sup_t |e^{itP(D)}f(gamma)|||_{L^p(B)} / ||f||_{H^s}.
pub fn operator_ratio(
    field: &BandlimitedField,
    symbol: &Symbol,
    curve: &Curve,
    grid: &GridSpec,
    p: f64,
    s: f64,
) -> Result<RatioReport> {
    if !s.is_finite() {
        return Err(Error::Usage(format!("Sobolev index {s} must be finite")));
    }
    let denominator = sobolev_norm(field, s);
    if !(denominator > 0.0) {
        return Err(Error::RejectedInput(
            "field has zero Sobolev mass; the operator ratio is undefined".into(),
        ));
    }
    let maximal = maximal_function(field, symbol, curve, grid)?;
    let numerator = lp_norm(&maximal.refined, p, maximal.cell)?;
    Ok(RatioReport {
        numerator,
        denominator,
        ratio: numerator / denominator,
        maximal,
    })
}

/// One witness in a scaling battery: a named constructor mapping the scale
/// to a datum and the time window on which its maximal function is scanned.
#[derive(Clone)]
pub struct BatteryMember {
    /// Name used in reports.
    pub name: String,
    /// scale -> (field, t_max).
    pub make: Arc<dyn Fn(f64) -> Result<(BandlimitedField, f64)> + Send + Sync>,
}

impl std::fmt::Debug for BatteryMember {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BatteryMember").field("name", &self.name).finish_non_exhaustive()
    }
}

/// Scaling measurements for one battery member.
#[derive(Debug, Clone, Serialize)]
pub struct WitnessScan {
    /// Member name.
    pub name: String,
    /// (scale, operator ratio) pairs along the schedule.
    pub points: Vec<(f64, f64)>,
    /// Log-log fit of ratio against scale.
    pub fit: ScalingFit,
}

/// Battery scan: per-member fits plus the pointwise-max envelope.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryScan {
    /// Per-member measurements.
    pub witnesses: Vec<WitnessScan>,
    /// (scale, max over members of the ratio) pairs.
    pub envelope_points: Vec<(f64, f64)>,
    /// Log-log fit of the envelope.
    pub envelope_fit: ScalingFit,
}

/// Run every battery member along a scale schedule and fit growth exponents,
/// for the member curves and for their pointwise-max envelope.
///
/// Each member is measured with `operator_ratio` on a grid derived from its
/// own field: spatial step min(1/(2 band), radius/2) over the given ball, and
/// absolute time tolerance `eps_rel` times the field's coefficient mass.
#[allow(clippy::too_many_arguments)]
pub fn battery_scan(
    symbol: &Symbol,
    curve: &Curve,
    p: f64,
    s: f64,
    schedule: &[f64],
    battery: &[BatteryMember],
    ball: (Point, f64),
    eps_rel: f64,
) -> Result<BatteryScan> {
    if battery.is_empty() {
        return Err(Error::Usage("battery has no members".into()));
    }
    if schedule.len() < 4 {
        return Err(Error::Usage(format!(
            "battery scan needs at least 4 scales, got {}",
            schedule.len()
        )));
    }
    if !(eps_rel > 0.0 && eps_rel < 1.0) {
        return Err(Error::Usage(format!(
            "relative time tolerance {eps_rel} must lie in (0, 1)"
        )));
    }
    let mut witnesses = Vec::with_capacity(battery.len());
    for member in battery {
        let mut points = Vec::with_capacity(schedule.len());
        for &lambda in schedule {
            let (field, t_max) = (member.make)(lambda)?;
            let band = field.band().max(1.0);
            let grid = GridSpec {
                center: ball.0,
                radius: ball.1,
                dx: (1.0 / (2.0 * band)).min(ball.1 / 2.0),
                t_max,
                eps_abs: eps_rel * field.mass_bound(),
                theta_samples: None,
            };
            let rep = operator_ratio(&field, symbol, curve, &grid, p, s)?;
            points.push((lambda, rep.ratio));
        }
        let values: Vec<f64> = points.iter().map(|&(_, r)| r).collect();
        let fit = exponent_fit(schedule, &values)?;
        witnesses.push(WitnessScan {
            name: member.name.clone(),
            points,
            fit,
        });
    }
    let envelope_points: Vec<(f64, f64)> = schedule
        .iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let top = witnesses
                .iter()
                .map(|w| w.points[i].1)
                .fold(f64::NEG_INFINITY, f64::max);
            (lambda, top)
        })
        .collect();
    let env_values: Vec<f64> = envelope_points.iter().map(|&(_, r)| r).collect();
    let envelope_fit = exponent_fit(schedule, &env_values)?;
    Ok(BatteryScan {
        witnesses,
        envelope_points,
        envelope_fit,
    })
}

/// Threshold bookkeeping for a battery scan.
#[derive(Debug, Clone, Serialize)]
pub struct ThresholdReport {
    /// The growth exponent the envelope is expected to reach.
    pub threshold: f64,
    /// Fitted envelope slope.
    pub envelope_slope: f64,
    /// Whether the envelope reaches the threshold from below within 0.1.
    pub reached_from_below: bool,
    /// Members whose own slope exceeds threshold + 0.15 (flagged, not failed).
    pub flagged: Vec<String>,
}

/// Compare a battery scan against a theoretical growth threshold: the
/// envelope should reach it from below within 0.1, and no member should
/// overshoot it by more than 0.15.
pub fn battery_thresholds(scan: &BatteryScan, threshold: f64) -> ThresholdReport {
    ThresholdReport {
        threshold,
        envelope_slope: scan.envelope_fit.slope,
        reached_from_below: scan.envelope_fit.slope >= threshold - 0.1,
        flagged: scan
            .witnesses
            .iter()
            .filter(|w| w.fit.slope > threshold + 0.15)
            .map(|w| w.name.clone())
            .collect(),
    }
}
