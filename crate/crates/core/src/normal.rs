//! Standard normal distribution function.
//!
//! `Phi(x) = erfc(-x / sqrt 2) / 2`, using the FreeBSD-derived `erfc` from
//! `libm`, which keeps full relative precision in the lower tail.

use std::f64::consts::FRAC_1_SQRT_2;

/// Standard normal CDF. `Phi(-inf) = 0`, `Phi(+inf) = 1`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Phi(x)` without cancellation.
pub fn normal_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}
