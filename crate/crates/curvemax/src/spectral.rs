//! Frequency-side representation of band-limited fields.
//!
//! A field is a finite list of quadrature atoms `(node, weight, coeff)` standing
//! for the integral `f(x) = ∫ e^{i x·ξ} f̂(ξ) dξ`: evaluation sums
//! `weight * coeff * e^{i x·node}` over the atoms. Atom order is part of the
//! value — sums run compensated, in stored order, so results reproduce bitwise.
//!
//! Dimensions 1 and 2 are supported; nodes are stored as `[f64; 2]` with the
//! second coordinate pinned to zero in dimension 1.

use crate::sum::{Compensated, CompensatedC64};
use crate::{Error, Result, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Spatial/frequency point; dimension-1 data keeps the second slot at zero.
pub type Point = [f64; 2];

/// Convenience constructor for 1-dimensional points.
pub fn pt1(x: f64) -> Point {
    [x, 0.0]
}

/// Euclidean norm of a point.
pub fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

/// One frequency-side quadrature atom.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyAtom {
    /// Frequency node ξ.
    pub node: Point,
    /// Quadrature weight; strictly positive.
    pub weight: f64,
    /// Complex amplitude f̂(ξ) at the node.
    pub coeff: C64,
}

impl FrequencyAtom {
    /// Bundle a node, weight, and coefficient.
    pub fn new(node: Point, weight: f64, coeff: C64) -> Self {
        Self { node, weight, coeff }
    }
}

/// How a field was built; serialized into run artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    /// Recipe name ("gaussian", "indicator-cube", "custom", ...).
    pub recipe: String,
    /// Recipe parameters as JSON (seeds, resolutions, windows).
    pub params: serde_json::Value,
}

/// A band-limited field: finite atom list plus cached band and metadata.
#[derive(Debug, Clone)]
pub struct BandlimitedField {
    dim: usize,
    atoms: Vec<FrequencyAtom>,
    band: f64,
    node_spacing: Option<f64>,
    provenance: Provenance,
}

impl BandlimitedField {
    /// Build a field from explicit atoms, validating every invariant.
    ///
    /// Atoms keep their given order; weights must be positive and finite,
    /// coefficients finite, and nodes pairwise distinct.
    pub fn from_atoms(dim: usize, atoms: Vec<FrequencyAtom>) -> Result<Self> {
        Self::with_provenance(
            dim,
            atoms,
            None,
            Provenance {
                recipe: "custom".into(),
                params: serde_json::Value::Null,
            },
        )
    }

    /// Build a field with explicit quadrature spacing and provenance.
    pub fn with_provenance(
        dim: usize,
        atoms: Vec<FrequencyAtom>,
        node_spacing: Option<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::RejectedInput(format!("dimension must be 1 or 2, got {dim}")));
        }
        if atoms.is_empty() {
            return Err(Error::RejectedInput("field needs at least one atom".into()));
        }
        let mut band: f64 = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if !a.node[0].is_finite() || !a.node[1].is_finite() {
                return Err(Error::RejectedInput(format!("atom {i} has non-finite node")));
            }
            if dim == 1 && a.node[1] != 0.0 {
                return Err(Error::RejectedInput(format!(
                    "atom {i} has nonzero second coordinate {} in dimension 1",
                    a.node[1]
                )));
            }
            if !(a.weight > 0.0) || !a.weight.is_finite() {
                return Err(Error::RejectedInput(format!(
                    "atom {i} has weight {}; weights must be positive and finite",
                    a.weight
                )));
            }
            if !a.coeff.re.is_finite() || !a.coeff.im.is_finite() {
                return Err(Error::RejectedInput(format!("atom {i} has non-finite coefficient")));
            }
            band = band.max(norm(a.node));
        }
        // Distinct nodes: sort indices lexicographically and compare neighbors.
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by(|&a, &b| {
            let (na, nb) = (atoms[a].node, atoms[b].node);
            na[0].total_cmp(&nb[0]).then(na[1].total_cmp(&nb[1]))
        });
        for w in order.windows(2) {
            if atoms[w[0]].node == atoms[w[1]].node {
                return Err(Error::RejectedInput(format!(
                    "duplicate frequency node {:?}",
                    atoms[w[0]].node
                )));
            }
        }
        if let Some(h) = node_spacing {
            if !(h > 0.0) || !h.is_finite() {
                return Err(Error::RejectedInput(format!("node spacing {h} must be positive")));
            }
        }
        Ok(Self {
            dim,
            atoms,
            band,
            node_spacing,
            provenance,
        })
    }

    /// Spatial dimension (1 or 2).
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Atom list in stored (summation) order.
    pub fn atoms(&self) -> &[FrequencyAtom] {
        &self.atoms
    }

    /// Band limit: max |ξ| over atoms.
    pub fn band(&self) -> f64 {
        self.band
    }

    /// Node spacing of the underlying quadrature, if the field came from one.
    pub fn node_spacing(&self) -> Option<f64> {
        self.node_spacing
    }

    /// Construction record.
    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Total absolute mass Σ weight·|coeff| — an a-priori bound for any
    /// modulus the field (or its propagated versions) can attain.
    pub fn mass_bound(&self) -> f64 {
        let mut acc = Compensated::new();
        for a in &self.atoms {
            acc.add(a.weight * a.coeff.norm());
        }
        acc.value()
    }
}

/// Fourier-multiplier symbols P(ξ) for the propagator `e^{itP(D)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Symbol {
    /// P(ξ) = |ξ|².
    Paraboloid,
    /// P(ξ) = |ξ|^m, m ≥ 1.
    ModulusPower {
        /// Homogeneity order.
        m: f64,
    },
    /// P(ξ) = ξ₁^m, m ≥ 1. Integer m keeps the sign of ξ₁; fractional m is
    /// evaluated as |ξ₁|^m (even extension).
    FirstCoordPower {
        /// Homogeneity order.
        m: f64,
    },
}

impl Symbol {
    /// Homogeneity order m, with |P(ξ)| ≤ |ξ|^m for |ξ| ≥ 1.
    pub fn order(&self) -> f64 {
        match self {
            Symbol::Paraboloid => 2.0,
            Symbol::ModulusPower { m } | Symbol::FirstCoordPower { m } => *m,
        }
    }

    /// Check the order parameter.
    pub fn validate(&self) -> Result<()> {
        let m = self.order();
        if !(m >= 1.0) || !m.is_finite() {
            return Err(Error::RejectedInput(format!(
                "symbol order must satisfy m >= 1, got {m}"
            )));
        }
        Ok(())
    }

    /// Evaluate P at a frequency node.
    pub fn eval(&self, node: Point, dim: usize) -> f64 {
        match self {
            Symbol::Paraboloid => {
                if dim == 1 {
                    node[0] * node[0]
                } else {
                    node[0] * node[0] + node[1] * node[1]
                }
            }
            Symbol::ModulusPower { m } => {
                let r = if dim == 1 { node[0].abs() } else { norm(node) };
                r.powf(*m)
            }
            Symbol::FirstCoordPower { m } => {
                let x = node[0];
                if (m - m.round()).abs() < 1e-12 {
                    x.powi(m.round() as i32)
                } else {
                    x.abs().powf(*m)
                }
            }
        }
    }

    /// Upper bound for |∇P| on the ball |ξ| ≤ band (used by the node-spacing rule).
    pub fn grad_sup(&self, band: f64) -> f64 {
        let b = band.max(0.0);
        match self {
            Symbol::Paraboloid => 2.0 * b,
            Symbol::ModulusPower { m } | Symbol::FirstCoordPower { m } => {
                if b == 0.0 {
                    0.0
                } else {
                    m * b.powf(m - 1.0)
                }
            }
        }
    }
}

/// Ready-made field constructions.
#[derive(Debug, Clone, Serialize)]
pub enum FieldRecipe {
    /// f̂ = indicator of the cube [r, r+1]^dim, midpoint quadrature.
    IndicatorCube {
        /// Lower corner coordinate.
        r: f64,
        /// Dimension (1 or 2).
        dim: usize,
        /// Midpoint nodes per axis over the unit side.
        nodes_per_axis: usize,
    },
    /// f̂ = indicator of a ball (interval in 1D), midpoint quadrature.
    IndicatorBall {
        /// Ball center.
        center: Point,
        /// Ball radius.
        radius: f64,
        /// Dimension (1 or 2).
        dim: usize,
        /// Midpoint nodes per axis across the diameter.
        nodes_per_axis: usize,
    },
    /// f̂(ξ) = exp(-|ξ|²/σ²) sampled on [-half_width·σ, half_width·σ]^dim.
    Gaussian {
        /// Width parameter; σ = 1 gives exp(-|ξ|²).
        sigma: f64,
        /// Dimension (1 or 2).
        dim: usize,
        /// Truncation half-width in units of σ.
        half_width: f64,
        /// Midpoint nodes per axis.
        nodes_per_axis: usize,
    },
    /// Unit-modulus random phases on the annulus lambda ≤ |ξ| < 2·lambda.
    RandomPhaseAnnulus {
        /// Inner radius of the annulus.
        lambda: f64,
        /// Dimension (1 or 2).
        dim: usize,
        /// Quadrature nodes per unit frequency per axis.
        nodes_per_unit: usize,
        /// RNG seed (ChaCha8).
        seed: u64,
    },
    /// Random phases with |f̂(ξ)| = (1+|ξ|²)^{-smoothness/2 - 1/4} up to `band`.
    SobolevDecay {
        /// Decay order: the field lies in H^s for every s < smoothness.
        smoothness: f64,
        /// Frequency truncation.
        band: f64,
        /// Dimension (1 or 2).
        dim: usize,
        /// Quadrature nodes per unit frequency per axis.
        nodes_per_unit: usize,
        /// RNG seed (ChaCha8).
        seed: u64,
    },
    /// Annulus weighted by e^{-i·focus_time·|ξ|²}: refocuses under the
    /// paraboloid propagator at t = focus_time.
    ChirpAnnulus {
        /// Inner radius of the annulus.
        lambda: f64,
        /// Dimension (1 or 2).
        dim: usize,
        /// Quadrature nodes per unit frequency per axis.
        nodes_per_unit: usize,
        /// Refocusing time.
        focus_time: f64,
    },
}

/// Coarsest admissible node spacing: the spacing rule
/// h · (X + T·sup|∇P|) ≤ 1/2 needs h ≤ 1/2 even for a unit window.
pub(crate) const MAX_NODE_SPACING: f64 = 0.5;

fn check_dim(dim: usize) -> Result<()> {
    if dim != 1 && dim != 2 {
        return Err(Error::RejectedInput(format!("dimension must be 1 or 2, got {dim}")));
    }
    Ok(())
}

fn check_spacing(h: f64, what: &str) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Configuration(format!("{what}: node spacing {h} is not positive")));
    }
    if h > MAX_NODE_SPACING {
        return Err(Error::Configuration(format!(
            "{what}: node spacing {h} exceeds {MAX_NODE_SPACING}; the spacing rule \
             h·(X_max + T_max·sup|∇P|) ≤ 1/2 cannot hold on any unit window"
        )));
    }
    Ok(())
}

/// Midpoints of `n` equal cells over [lo, hi].
fn midpoints(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> {
    let h = (hi - lo) / n as f64;
    (0..n).map(move |i| lo + (i as f64 + 0.5) * h)
}

/// Build a field from a recipe. See [`FieldRecipe`] for the constructions.
pub fn make_field(recipe: &FieldRecipe) -> Result<BandlimitedField> {
    let provenance = Provenance {
        recipe: match recipe {
            FieldRecipe::IndicatorCube { .. } => "indicator-cube",
            FieldRecipe::IndicatorBall { .. } => "indicator-ball",
            FieldRecipe::Gaussian { .. } => "gaussian",
            FieldRecipe::RandomPhaseAnnulus { .. } => "random-phase-annulus",
            FieldRecipe::SobolevDecay { .. } => "sobolev-decay",
            FieldRecipe::ChirpAnnulus { .. } => "chirp-annulus",
        }
        .into(),
        params: serde_json::to_value(recipe).unwrap_or(serde_json::Value::Null),
    };

    match *recipe {
        FieldRecipe::IndicatorCube { r, dim, nodes_per_axis } => {
            check_dim(dim)?;
            if !r.is_finite() || r < 0.0 {
                return Err(Error::RejectedInput(format!("cube corner r = {r} must be >= 0")));
            }
            if nodes_per_axis == 0 {
                return Err(Error::Configuration("nodes_per_axis must be positive".into()));
            }
            let h = 1.0 / nodes_per_axis as f64;
            check_spacing(h, "indicator-cube")?;
            let axis: Vec<f64> = midpoints(r, r + 1.0, nodes_per_axis).collect();
            let mut atoms = Vec::new();
            if dim == 1 {
                for &x in &axis {
                    atoms.push(FrequencyAtom::new([x, 0.0], h, C64::new(1.0, 0.0)));
                }
            } else {
                for &x in &axis {
                    for &y in &axis {
                        atoms.push(FrequencyAtom::new([x, y], h * h, C64::new(1.0, 0.0)));
                    }
                }
            }
            BandlimitedField::with_provenance(dim, atoms, Some(h), provenance)
        }
        FieldRecipe::IndicatorBall {
            center,
            radius,
            dim,
            nodes_per_axis,
        } => {
            check_dim(dim)?;
            if !(radius > 0.0) || !radius.is_finite() {
                return Err(Error::RejectedInput(format!("ball radius {radius} must be positive")));
            }
            if nodes_per_axis == 0 {
                return Err(Error::Configuration("nodes_per_axis must be positive".into()));
            }
            let h = 2.0 * radius / nodes_per_axis as f64;
            check_spacing(h, "indicator-ball")?;
            let mut atoms = Vec::new();
            if dim == 1 {
                for x in midpoints(center[0] - radius, center[0] + radius, nodes_per_axis) {
                    atoms.push(FrequencyAtom::new([x, 0.0], h, C64::new(1.0, 0.0)));
                }
            } else {
                let xs: Vec<f64> = midpoints(center[0] - radius, center[0] + radius, nodes_per_axis).collect();
                let ys: Vec<f64> = midpoints(center[1] - radius, center[1] + radius, nodes_per_axis).collect();
                for &x in &xs {
                    for &y in &ys {
                        let d = (x - center[0]).hypot(y - center[1]);
                        if d <= radius {
                            atoms.push(FrequencyAtom::new([x, y], h * h, C64::new(1.0, 0.0)));
                        }
                    }
                }
                if atoms.is_empty() {
                    return Err(Error::Configuration(
                        "ball resolution too coarse: no node centers fall inside".into(),
                    ));
                }
            }
            BandlimitedField::with_provenance(dim, atoms, Some(h), provenance)
        }
        FieldRecipe::Gaussian {
            sigma,
            dim,
            half_width,
            nodes_per_axis,
        } => {
            check_dim(dim)?;
            if !(sigma > 0.0) || !sigma.is_finite() {
                return Err(Error::RejectedInput(format!("sigma = {sigma} must be positive")));
            }
            if !(half_width > 0.0) || nodes_per_axis == 0 {
                return Err(Error::Configuration(
                    "gaussian recipe needs positive half_width and nodes_per_axis".into(),
                ));
            }
            let extent = half_width * sigma;
            let h = 2.0 * extent / nodes_per_axis as f64;
            check_spacing(h, "gaussian")?;
            let amp = |r2: f64| (-r2 / (sigma * sigma)).exp();
            let mut atoms = Vec::new();
            if dim == 1 {
                for x in midpoints(-extent, extent, nodes_per_axis) {
                    atoms.push(FrequencyAtom::new([x, 0.0], h, C64::new(amp(x * x), 0.0)));
                }
            } else {
                let xs: Vec<f64> = midpoints(-extent, extent, nodes_per_axis).collect();
                for &x in &xs {
                    for &y in &xs {
                        atoms.push(FrequencyAtom::new([x, y], h * h, C64::new(amp(x * x + y * y), 0.0)));
                    }
                }
            }
            BandlimitedField::with_provenance(dim, atoms, Some(h), provenance)
        }
        FieldRecipe::RandomPhaseAnnulus {
            lambda,
            dim,
            nodes_per_unit,
            seed,
        } => {
            check_dim(dim)?;
            if !(lambda > 0.0) || !lambda.is_finite() {
                return Err(Error::RejectedInput(format!("lambda = {lambda} must be positive")));
            }
            if nodes_per_unit == 0 {
                return Err(Error::Configuration("nodes_per_unit must be positive".into()));
            }
            let h = 1.0 / nodes_per_unit as f64;
            check_spacing(h, "random-phase-annulus")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut atoms = Vec::new();
            let n_axis = (lambda / h).ceil() as usize; // nodes across [lambda, 2·lambda)
            if dim == 1 {
                for side in [-1.0, 1.0] {
                    for u in midpoints(lambda, 2.0 * lambda, n_axis.max(1)) {
                        let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                        atoms.push(FrequencyAtom::new(
                            [side * u, 0.0],
                            lambda / n_axis.max(1) as f64,
                            C64::from_polar(1.0, phase),
                        ));
                    }
                }
            } else {
                let n_axis = (4.0 * lambda / h).ceil() as usize;
                let cells: Vec<f64> = midpoints(-2.0 * lambda, 2.0 * lambda, n_axis).collect();
                let cell = 4.0 * lambda / n_axis as f64;
                for &x in &cells {
                    for &y in &cells {
                        let r = x.hypot(y);
                        if r >= lambda && r < 2.0 * lambda {
                            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                            atoms.push(FrequencyAtom::new([x, y], cell * cell, C64::from_polar(1.0, phase)));
                        }
                    }
                }
            }
            BandlimitedField::with_provenance(dim, atoms, Some(h), provenance)
        }
        FieldRecipe::SobolevDecay {
            smoothness,
            band,
            dim,
            nodes_per_unit,
            seed,
        } => {
            check_dim(dim)?;
            if !(band > 0.0) || !band.is_finite() {
                return Err(Error::RejectedInput(format!("band = {band} must be positive")));
            }
            if !smoothness.is_finite() {
                return Err(Error::RejectedInput("smoothness must be finite".into()));
            }
            if nodes_per_unit == 0 {
                return Err(Error::Configuration("nodes_per_unit must be positive".into()));
            }
            let h = 1.0 / nodes_per_unit as f64;
            check_spacing(h, "sobolev-decay")?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let expo = -smoothness / 2.0 - 0.25;
            let mut atoms = Vec::new();
            let n_axis = ((2.0 * band) / h).ceil() as usize;
            if dim == 1 {
                for x in midpoints(-band, band, n_axis) {
                    let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                    let mag = (1.0 + x * x).powf(expo);
                    atoms.push(FrequencyAtom::new(
                        [x, 0.0],
                        2.0 * band / n_axis as f64,
                        C64::from_polar(mag, phase),
                    ));
                }
            } else {
                let cells: Vec<f64> = midpoints(-band, band, n_axis).collect();
                let cell = 2.0 * band / n_axis as f64;
                for &x in &cells {
                    for &y in &cells {
                        if x.hypot(y) <= band {
                            let phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                            let mag = (1.0 + x * x + y * y).powf(expo);
                            atoms.push(FrequencyAtom::new([x, y], cell * cell, C64::from_polar(mag, phase)));
                        }
                    }
                }
            }
            BandlimitedField::with_provenance(dim, atoms, Some(h), provenance)
        }
        FieldRecipe::ChirpAnnulus {
            lambda,
            dim,
            nodes_per_unit,
            focus_time,
        } => {
            check_dim(dim)?;
            if !(lambda > 0.0) || !lambda.is_finite() || !focus_time.is_finite() {
                return Err(Error::RejectedInput(
                    "chirp annulus needs positive lambda and finite focus_time".into(),
                ));
            }
            if nodes_per_unit == 0 {
                return Err(Error::Configuration("nodes_per_unit must be positive".into()));
            }
            let h = 1.0 / nodes_per_unit as f64;
            check_spacing(h, "chirp-annulus")?;
            let mut atoms = Vec::new();
            if dim == 1 {
                let n_axis = ((lambda / h).ceil() as usize).max(1);
                for side in [-1.0, 1.0] {
                    for u in midpoints(lambda, 2.0 * lambda, n_axis) {
                        let xi = side * u;
                        atoms.push(FrequencyAtom::new(
                            [xi, 0.0],
                            lambda / n_axis as f64,
                            C64::from_polar(1.0, -focus_time * xi * xi),
                        ));
                    }
                }
            } else {
                let n_axis = ((4.0 * lambda / h).ceil() as usize).max(1);
                let cells: Vec<f64> = midpoints(-2.0 * lambda, 2.0 * lambda, n_axis).collect();
                let cell = 4.0 * lambda / n_axis as f64;
                for &x in &cells {
                    for &y in &cells {
                        let r2 = x * x + y * y;
                        let r = r2.sqrt();
                        if r >= lambda && r < 2.0 * lambda {
                            atoms.push(FrequencyAtom::new(
                                [x, y],
                                cell * cell,
                                C64::from_polar(1.0, -focus_time * r2),
                            ));
                        }
                    }
                }
            }
            BandlimitedField::with_provenance(dim, atoms, Some(h), provenance)
        }
    }
}

/// Evaluate `f(x) = Σ weight·coeff·e^{i x·node}` at each point.
///
/// Deterministic: compensated accumulation in stored atom order; the point
/// loop parallelizes without affecting per-point results.
pub fn evaluate_field(field: &BandlimitedField, points: &[Point]) -> Result<Vec<C64>> {
    validate_points(field.dim(), points)?;
    Ok(points
        .par_iter()
        .map(|&x| eval_at(field, x, None, 0.0))
        .collect())
}

pub(crate) fn validate_points(dim: usize, points: &[Point]) -> Result<()> {
    for (i, p) in points.iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::RejectedInput(format!("point {i} is not finite: {p:?}")));
        }
        if dim == 1 && p[1] != 0.0 {
            return Err(Error::RejectedInput(format!(
                "point {i} has nonzero second coordinate {} in dimension 1",
                p[1]
            )));
        }
    }
    Ok(())
}

/// Core oscillatory sum shared by evaluation and propagation.
///
/// With `symbol = None` or `t == 0` the phase is exactly `x·ξ`, so evaluating
/// and propagating-at-zero agree bitwise.
pub(crate) fn eval_at(field: &BandlimitedField, x: Point, symbol: Option<&Symbol>, t: f64) -> C64 {
    let mut acc = CompensatedC64::new();
    match symbol {
        Some(sym) if t != 0.0 => {
            for a in field.atoms() {
                let phase = x[0] * a.node[0] + x[1] * a.node[1] + t * sym.eval(a.node, field.dim());
                let (s, c) = phase.sin_cos();
                acc.add(a.coeff * C64::new(c, s) * a.weight);
            }
        }
        _ => {
            for a in field.atoms() {
                let phase = x[0] * a.node[0] + x[1] * a.node[1];
                let (s, c) = phase.sin_cos();
                acc.add(a.coeff * C64::new(c, s) * a.weight);
            }
        }
    }
    acc.value()
}

/// Sobolev norm surrogate `(Σ weight·(1+|ξ|²)^s·|coeff|²)^{1/2}`.
pub fn sobolev_norm(field: &BandlimitedField, s: f64) -> f64 {
    let mut acc = Compensated::new();
    for a in field.atoms() {
        let r2 = a.node[0] * a.node[0] + a.node[1] * a.node[1];
        acc.add(a.weight * (1.0 + r2).powf(s) * a.coeff.norm_sqr());
    }
    acc.value().max(0.0).sqrt()
}

/// Dyadic frequency index: piece 0 holds |ξ| < 2, piece k ≥ 1 holds
/// 2^k ≤ |ξ| < 2^{k+1}.
fn dyadic_piece(r: f64) -> u32 {
    if r < 2.0 {
        0
    } else {
        r.log2().floor() as u32
    }
}

/// Split a field into its dyadic frequency pieces, empty pieces omitted,
/// atoms keeping their relative order. Pieces are returned by ascending index;
/// their concatenation carries exactly the original atoms.
pub fn littlewood_paley_split(field: &BandlimitedField) -> Vec<(u32, BandlimitedField)> {
    use std::collections::BTreeMap;
    let mut buckets: BTreeMap<u32, Vec<FrequencyAtom>> = BTreeMap::new();
    for a in field.atoms() {
        buckets.entry(dyadic_piece(norm(a.node))).or_default().push(*a);
    }
    buckets
        .into_iter()
        .map(|(k, atoms)| {
            let prov = Provenance {
                recipe: format!("lp-piece({k}) of {}", field.provenance().recipe),
                params: field.provenance().params.clone(),
            };
            let piece = BandlimitedField::with_provenance(field.dim(), atoms, field.node_spacing(), prov)
                .expect("atoms of a valid field stay valid");
            (k, piece)
        })
        .collect()
}
