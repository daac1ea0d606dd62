//! Compensated (Neumaier) summation.
//!
//! Quadrature sums over many oscillatory atoms suffer heavy cancellation, and
//! reproducibility requires a fixed accumulation order. Every reduction in the
//! crate routes through these accumulators, always in stored atom order.

use crate::C64;

/// Neumaier-compensated scalar accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    /// Fresh accumulator at zero.
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one term.
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    /// Finished value (sum plus carry).
    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Compensated complex accumulator (independent real/imaginary parts).
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedC64 {
    re: Compensated,
    im: Compensated,
}

impl CompensatedC64 {
    /// Fresh accumulator at zero.
    pub fn new() -> Self {
        Self::default()
    }

    /// Add one complex term.
    #[inline]
    pub fn add(&mut self, v: C64) {
        self.re.add(v.re);
        self.im.add(v.im);
    }

    /// Finished value.
    #[inline]
    pub fn value(&self) -> C64 {
        C64::new(self.re.value(), self.im.value())
    }
}

/// Compensated sum of a slice in its stored order.
pub fn sum_slice(values: &[f64]) -> f64 {
    let mut acc = Compensated::new();
    for &v in values {
        acc.add(v);
    }
    acc.value()
}
