//! Compact parameter sets on the line: minimal covers by balls of a given
//! diameter, box-counting dimension fits, and decomposition into
//! small-diameter pieces.
//!
//! Everything reduces to a one-dimensional greedy sweep: represent the set as
//! finitely many closed segments (points are degenerate segments), walk left
//! to right, and start a new ball at the leftmost uncovered point. In one
//! dimension this greedy cover is minimal.

use crate::fit::{exponent_fit, ScalingFit};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

/// Callback form of a set: for a resolution `delta` it returns representative
/// points that are dense in the set at scale `delta/4`.
#[derive(Clone)]
pub struct CoverFn(pub Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>);

impl std::fmt::Debug for CoverFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("CoverFn(<callback>)")
    }
}

/// A compact subset of the line.
#[derive(Debug, Clone, Serialize)]
pub enum ThetaSet {
    /// Finite point set, stored sorted ascending.
    Finite(Vec<f64>),
    /// Closed interval [a, b].
    Interval {
        /// Left endpoint.
        a: f64,
        /// Right endpoint.
        b: f64,
    },
    /// The convergent sequence {1/2 + 1/(k+1) : k >= 1} together with its
    /// limit point 1/2 (so the set is compact).
    SequenceWithLimit,
    /// Set given by a point-cloud callback plus explicit bounds.
    Custom {
        /// Bounding interval.
        bounds: (f64, f64),
        /// Resolution-indexed representative points.
        #[serde(skip)]
        points: CoverFn,
    },
}

impl ThetaSet {
    /// Finite set; input may be unsorted but must be nonempty and finite.
    pub fn finite(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::RejectedInput("finite parameter set needs at least one point".into()));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::RejectedInput("parameter points must be finite".into()));
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        Ok(ThetaSet::Finite(points))
    }

    /// Closed interval [a, b], a <= b.
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        if !a.is_finite() || !b.is_finite() || a > b {
            return Err(Error::RejectedInput(format!("invalid interval [{a}, {b}]")));
        }
        Ok(ThetaSet::Interval { a, b })
    }

    /// The sequence 1, 5/6, 3/4, ..., 1/2 + 1/(k+1), ... with limit 1/2.
    pub fn sequence_with_limit() -> Self {
        ThetaSet::SequenceWithLimit
    }

    /// Custom set from a resolution-indexed point cloud.
    pub fn custom(bounds: (f64, f64), points: Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>) -> Result<Self> {
        if !bounds.0.is_finite() || !bounds.1.is_finite() || bounds.0 > bounds.1 {
            return Err(Error::RejectedInput(format!("invalid bounds {bounds:?}")));
        }
        Ok(ThetaSet::Custom {
            bounds,
            points: CoverFn(points),
        })
    }

    /// Bounding interval (min, max).
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            ThetaSet::Finite(p) => (p[0], *p.last().unwrap()),
            ThetaSet::Interval { a, b } => (*a, *b),
            ThetaSet::SequenceWithLimit => (0.5, 1.0),
            ThetaSet::Custom { bounds, .. } => *bounds,
        }
    }

    /// Closed segments (points are degenerate) that represent the set at
    /// resolution `delta`: their union contains the set and has the same
    /// minimal covers at scales >= `delta`.
    fn segments(&self, delta: f64) -> Vec<(f64, f64)> {
        match self {
            ThetaSet::Finite(p) => p.iter().map(|&x| (x, x)).collect(),
            ThetaSet::Interval { a, b } => vec![(*a, *b)],
            ThetaSet::SequenceWithLimit => {
                // Points with index beyond k_tail sit within delta/4 of each
                // other, so replacing them by the interval down to the limit
                // point changes no cover at scale delta.
                let k_tail = ((2.0 / delta).ceil() as usize).max(8);
                let mut segs = vec![(0.5, 0.5 + 1.0 / (k_tail as f64 + 2.0))];
                for k in (1..=k_tail).rev() {
                    segs.push((0.5 + 1.0 / (k as f64 + 1.0), 0.5 + 1.0 / (k as f64 + 1.0)));
                }
                segs
            }
            ThetaSet::Custom { points, .. } => {
                let mut p = (points.0)(delta);
                p.retain(|x| x.is_finite());
                p.sort_by(f64::total_cmp);
                p.dedup();
                p.into_iter().map(|x| (x, x)).collect()
            }
        }
    }

    /// Deterministic member sample (for cover-soundness checks and for
    /// taking suprema over the set downstream).
    pub fn sample(&self, count: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        match self {
            ThetaSet::Finite(p) => {
                out.extend_from_slice(p);
                while out.len() < count {
                    out.push(p[rng.gen_range(0..p.len())]);
                }
                out.truncate(count.max(p.len()));
            }
            ThetaSet::Interval { a, b } => {
                out.push(*a);
                out.push(*b);
                while out.len() < count {
                    out.push(rng.gen_range(*a..=*b));
                }
            }
            ThetaSet::SequenceWithLimit => {
                out.push(0.5);
                out.push(1.0);
                while out.len() < count {
                    // Log-uniform index reaches deep into the tail.
                    let k = (2f64.powf(rng.gen_range(0.0..14.0)).floor()) as u64;
                    out.push(0.5 + 1.0 / (k as f64 + 1.0));
                }
            }
            ThetaSet::Custom { points, .. } => {
                let p = (points.0)(1e-3);
                if p.is_empty() {
                    return out;
                }
                while out.len() < count {
                    out.push(p[rng.gen_range(0..p.len())]);
                }
            }
        }
        out
    }
}

/// A cover of a parameter set by closed balls of equal diameter.
#[derive(Debug, Clone, Serialize)]
pub struct CoverResult {
    /// Ball diameter.
    pub delta: f64,
    /// Number of balls (minimal for the greedy-from-left scheme).
    pub count: usize,
    /// Ball centers; each ball is [c - delta/2, c + delta/2].
    pub centers: Vec<f64>,
}

/// Slack used when deciding whether a segment is already covered, so that
/// exact-arithmetic ties (interval endpoints landing on ball boundaries) do
/// not spawn spurious extra balls.
const COVER_TIE_EPS: f64 = 1e-12;

/// Minimal cover of `theta` by closed balls of diameter `delta`,
/// greedy from the left.
pub fn box_count(theta: &ThetaSet, delta: f64) -> Result<CoverResult> {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::RejectedInput(format!("cover diameter {delta} must be positive")));
    }
    let mut centers = Vec::new();
    let mut covered_to = f64::NEG_INFINITY;
    for (lo, hi) in theta.segments(delta) {
        if hi <= covered_to + COVER_TIE_EPS {
            continue;
        }
        // Leftmost uncovered material: the segment start, or the covered
        // frontier if the segment is already partially covered.
        let start = if lo > covered_to { lo } else { covered_to };
        let span = hi - start;
        let balls = if span <= COVER_TIE_EPS {
            1
        } else {
            ((span / delta) - COVER_TIE_EPS).ceil().max(1.0) as usize
        };
        for i in 0..balls {
            centers.push(start + (i as f64 + 0.5) * delta);
        }
        covered_to = start + balls as f64 * delta;
    }
    Ok(CoverResult {
        delta,
        count: centers.len(),
        centers,
    })
}

/// Box-counting dimension estimate over a dyadic resolution schedule.
#[derive(Debug, Clone, Serialize)]
pub struct DimensionEstimate {
    /// Fitted dimension: slope of log N(delta) against -log delta.
    pub slope: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// The (delta, N) table the fit used.
    pub counts: Vec<(f64, usize)>,
    /// True when every N equals 1 (the fit is vacuous and slope is 0).
    pub degenerate: bool,
    /// Underlying least-squares fit.
    pub fit: ScalingFit,
}

/// Fit the box-counting dimension over the schedule delta = 2^{-j}, j = 4..=j_max.
pub fn minkowski_dim(theta: &ThetaSet, j_max: u32) -> Result<DimensionEstimate> {
    if j_max < 8 {
        return Err(Error::Usage(format!(
            "dimension schedule must reach j = 8 (got j_max = {j_max}); \
             shorter schedules fit noise"
        )));
    }
    let mut counts = Vec::new();
    for j in 4..=j_max {
        let delta = 2f64.powi(-(j as i32));
        counts.push((delta, box_count(theta, delta)?.count));
    }
    let degenerate = counts.iter().all(|&(_, n)| n == 1);
    // Fit against inverse resolution so the slope is the dimension itself.
    let scales: Vec<f64> = counts.iter().map(|&(d, _)| 1.0 / d).collect();
    let values: Vec<f64> = counts.iter().map(|&(_, n)| n as f64).collect();
    let fit = exponent_fit(&scales, &values)?;
    Ok(DimensionEstimate {
        slope: if degenerate { 0.0 } else { fit.slope },
        stderr: fit.stderr,
        counts,
        degenerate,
        fit,
    })
}

/// Decomposition of a parameter set into pieces of small diameter.
#[derive(Debug, Clone, Serialize)]
pub struct ThetaDecomposition {
    /// Piece diameter bound lambda^{-mu}.
    pub delta: f64,
    /// Exponent mu = min(1, 2 alpha).
    pub mu: f64,
    /// The pieces; their union covers the set with overlap at most 2.
    pub pieces: Vec<ThetaSet>,
}

/// Split `theta` into pieces of diameter <= lambda^{-mu}, mu = min(1, 2 alpha),
/// one piece per ball of the minimal cover at that diameter.
pub fn theta_decompose(theta: &ThetaSet, lambda: f64, alpha: f64) -> Result<ThetaDecomposition> {
    if !(lambda > 1.0) || !lambda.is_finite() {
        return Err(Error::RejectedInput(format!("lambda = {lambda} must exceed 1")));
    }
    if !(alpha > 0.0) || !(alpha <= 1.0) {
        return Err(Error::RejectedInput(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    let mu = (2.0 * alpha).min(1.0);
    let delta = lambda.powf(-mu);
    let cover = box_count(theta, delta)?;
    let mut pieces = Vec::with_capacity(cover.count);
    for &c in &cover.centers {
        let (lo, hi) = (c - delta / 2.0, c + delta / 2.0);
        let piece = match theta {
            ThetaSet::Interval { a, b } => {
                let (pa, pb) = (lo.max(*a), hi.min(*b));
                if pa > pb {
                    continue;
                }
                ThetaSet::Interval { a: pa, b: pb }
            }
            _ => {
                // Point-like representation dense well below the piece scale.
                let mut pts: Vec<f64> = theta
                    .segments(delta / 16.0)
                    .into_iter()
                    .flat_map(|(slo, shi)| {
                        if slo == shi {
                            vec![slo]
                        } else {
                            // Flatten a residual segment to its endpoints plus
                            // fine midpoints.
                            let n = ((shi - slo) / (delta / 16.0)).ceil() as usize + 1;
                            (0..=n)
                                .map(|i| slo + (shi - slo) * i as f64 / n as f64)
                                .collect()
                        }
                    })
                    .filter(|&x| x >= lo - COVER_TIE_EPS && x <= hi + COVER_TIE_EPS)
                    .collect();
                pts.sort_by(f64::total_cmp);
                pts.dedup();
                if pts.is_empty() {
                    continue;
                }
                ThetaSet::Finite(pts)
            }
        };
        pieces.push(piece);
    }
    Ok(ThetaDecomposition { delta, mu, pieces })
}
