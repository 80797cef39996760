use super::gamma::ln_gamma;
use crate::error::{Error, Result};

/// Natural log of the modified Bessel function of the first kind, `ln I_ν(x)`.
///
/// Accepts any real order `ν > -1` and `x > 0`. Large arguments use the
/// Hankel asymptotic expansion of `e^{-x} I_ν(x)`; everything else sums the
/// ascending power series in log space, so neither path overflows.
pub fn ln_bessel_i(order: f64, x: f64) -> Result<f64> {
    const OP: &str = "bessel_i";
    if !(order > -1.0) || !order.is_finite() {
        return Err(Error::domain(OP, format!("order {order} must be > -1")));
    }
    if !(x > 0.0) || x.is_nan() {
        return Err(Error::domain(OP, format!("x = {x} must be positive")));
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    if x > 40.0 && x > 2.0 * order * order {
        if let Some(scaled) = hankel_scaled(order, x) {
            return Ok(scaled.ln() + x);
        }
    }
    Ok(ln_power_series(order, x))
}

/// `I_ν(x)`; reports overflow instead of returning infinity.
pub fn bessel_i(order: f64, x: f64) -> Result<f64> {
    let ln = ln_bessel_i(order, x)?;
    let v = ln.exp();
    if v.is_infinite() {
        return Err(Error::Overflow { op: "bessel_i", arg: x });
    }
    Ok(v)
}

/// `Σ_k (x/2)^{2k+ν} / (k! Γ(k+ν+1))`, accumulated as a running log-sum-exp.
fn ln_power_series(order: f64, x: f64) -> f64 {
    let half = 0.5 * x;
    let quarter_sq = half * half;
    let mut ln_term = order * half.ln() - ln_gamma(order + 1.0);
    let mut ln_max = ln_term;
    let mut sum = 1.0;
    let peak = half;
    let mut k = 0.0_f64;
    loop {
        k += 1.0;
        ln_term += (quarter_sq / (k * (k + order))).ln();
        if ln_term > ln_max {
            sum = sum * (ln_max - ln_term).exp() + 1.0;
            ln_max = ln_term;
        } else {
            let rel = (ln_term - ln_max).exp();
            sum += rel;
            if k > peak && rel < 1e-17 * sum {
                break;
            }
        }
    }
    ln_max + sum.ln()
}

/// `e^{-x} I_ν(x) ≈ (2πx)^{-1/2} Σ_k (-1)^k a_k(ν) / x^k`. Returns `None` if
/// the terms start growing before reaching double precision.
fn hankel_scaled(order: f64, x: f64) -> Option<f64> {
    let mu = 4.0 * order * order;
    let mut term = 1.0_f64;
    let mut sum = 1.0_f64;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        let next = -term * (mu - odd * odd) / (8.0 * kf * x);
        if next.abs() > term.abs() {
            return None;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            return Some(sum / (2.0 * std::f64::consts::PI * x).sqrt());
        }
    }
    None
}
