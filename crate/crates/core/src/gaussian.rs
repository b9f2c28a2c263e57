//! Standard-normal helpers shared across modules.

use statrs::function::gamma::gamma;

const SQRT_2PI: f64 = 2.5066282746310002;

/// Standard normal density.
#[inline]
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Standard normal CDF via erfc, accurate in both tails.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Absolute moment `E|G|^theta` of a standard Gaussian for real `theta > -1`:
/// `2^{theta/2} Gamma((theta+1)/2) / sqrt(pi)`.
pub fn gaussian_abs_moment(theta: f64) -> f64 {
    2f64.powf(theta / 2.0) * gamma((theta + 1.0) / 2.0) / std::f64::consts::PI.sqrt()
}
