//! Numerical laboratory for dispersive propagators sampled along tangential curves.
//!
//! The crate represents band-limited functions as explicit quadrature atoms on the
//! frequency side, applies Fourier-multiplier propagators `e^{itP(D)}` by direct
//! summation, and samples the result along curves `(x, t) -> gamma(x, t, theta)`
//! that are Hölder-continuous in time. On top of that sit the measurement tools:
//! maximal functions with scaling-exponent fits, box-counting dimension of
//! parameter sets, lower-bound witness families, convergence-rate profiles,
//! wave-packet (Gabor) decompositions with tube localization, and oscillatory
//! kernel envelopes.
//!
//! Everything is deterministic: random inputs are seeded, quadrature sums are
//! compensated and accumulated in stored atom order, and parallelism never
//! changes results.

pub mod curves;
pub mod error;
pub mod fit;
pub mod kernel;
pub mod maximal;
pub mod propagator;
pub mod rate;
pub mod spectral;
pub mod sum;
pub mod theta;
pub mod wavepacket;
pub mod witnesses;

pub use error::{Error, Result};

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex64;
