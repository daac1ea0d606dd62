//! Scaling-exponent fits on dyadic schedules.
//!
//! Growth rates are measured as least-squares slopes of `log2(value)` against
//! `log2(scale)`. The fit reports its own slope standard error so callers can
//! tell a clean power law from noise.

use crate::{Error, Result};
use serde::Serialize;

/// Result of a log-log least-squares fit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScalingFit {
    /// Fitted exponent: d log2(value) / d log2(scale).
    pub slope: f64,
    /// Fitted log2(value) at log2(scale) = 0.
    pub intercept: f64,
    /// Standard error of the slope estimate.
    pub stderr: f64,
    /// Number of samples used.
    pub samples: usize,
}

/// Least-squares fit of `log2(values)` against `log2(scales)`.
///
/// Requires at least 4 samples, strictly increasing positive scales, and
/// strictly positive values.
pub fn exponent_fit(scales: &[f64], values: &[f64]) -> Result<ScalingFit> {
    if scales.len() != values.len() {
        return Err(Error::Usage(format!(
            "scale/value length mismatch: {} vs {}",
            scales.len(),
            values.len()
        )));
    }
    if scales.len() < 4 {
        return Err(Error::Usage(format!(
            "exponent fit needs at least 4 samples, got {}",
            scales.len()
        )));
    }
    for w in scales.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Usage(format!(
                "scales must be strictly increasing, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    if scales[0] <= 0.0 || !scales[0].is_finite() {
        return Err(Error::Usage(format!("scales must be positive, got {}", scales[0])));
    }
    for (i, &v) in values.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::RejectedInput(format!(
                "value at index {i} is {v}; exponent fits need positive finite values"
            )));
        }
    }

    let xs: Vec<f64> = scales.iter().map(|s| s.log2()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.log2()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let dof = (xs.len() - 2).max(1) as f64;
    let stderr = (ss_res / dof / sxx).sqrt();

    Ok(ScalingFit {
        slope,
        intercept,
        stderr,
        samples: xs.len(),
    })
}
