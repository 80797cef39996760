use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Standard normal upper tail `Q(x) = P(Z > x)`.
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// Standard normal CDF `Φ(x) = Q(-x)`.
pub fn gaussian_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Inverse of [`gaussian_q`]: returns `x` with `Q(x) = p`.
///
/// Starts from the `statrs` rational approximation and polishes with one
/// Halley step against [`gaussian_q`].
pub fn gaussian_q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "gaussian_q_inverse",
            format!("p = {p} not in (0, 1)"),
        ));
    }
    if p > 0.5 {
        return Ok(-gaussian_q_inverse(1.0 - p)?);
    }
    let mut x = SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p);
    for _ in 0..2 {
        let density = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        if density == 0.0 {
            break;
        }
        // f(x) = Q(x) - p, f' = -φ(x), f'' = x φ(x)
        let u = (gaussian_q(x) - p) / density;
        x += u / (1.0 - 0.5 * x * u);
    }
    Ok(x)
}
