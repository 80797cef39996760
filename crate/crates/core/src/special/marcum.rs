use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Poisson, StandardNormal};

use super::bessel::ln_bessel_i;
use super::gamma::{ln_gamma, regularized_gamma_p, regularized_gamma_q};
use super::Tolerance;
use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq)]
enum Tail {
    Upper,
    Lower,
}

/// `Σ_k Pois(k; λ) · T(shape + k, x)` with `T` the upper (`Q`) or lower (`P`)
/// regularized gamma. Summation starts at the Poisson mode and walks both
/// ways with the recurrence `Q(s+1,x) = Q(s,x) + x^s e^{-x} / Γ(s+1)`. Each
/// direction stops once a geometric bound on the discarded mass drops below
/// `abs_tol / 2`.
fn poisson_gamma_mixture(
    op: &'static str,
    shape: f64,
    lambda: f64,
    x: f64,
    tail: Tail,
    tol: &Tolerance,
) -> Result<f64> {
    let gamma_at = |s: f64| -> Result<f64> {
        match tail {
            Tail::Upper => regularized_gamma_q(s, x),
            Tail::Lower => regularized_gamma_p(s, x),
        }
    };
    if lambda == 0.0 {
        return gamma_at(shape);
    }

    let half_tol = 0.5 * tol.abs_tol;
    let k0 = lambda.floor();
    let ln_lambda = lambda.ln();
    let ln_x = x.ln();
    let ln_w0 = -lambda + k0 * ln_lambda - ln_gamma(k0 + 1.0);
    let s0 = shape + k0;
    let t0 = gamma_at(s0)?;
    // ln of x^s e^{-x} / Γ(s+1) at s = s0
    let ln_g0 = s0 * ln_x - x - ln_gamma(s0 + 1.0);

    let mut total = ln_w0.exp() * t0;
    let mut terms = 1usize;

    // Upward: k = k0+1, k0+2, ...
    {
        let mut ln_w = ln_w0;
        let mut t = t0;
        let mut ln_g = ln_g0;
        let mut k = k0;
        let mut s = s0;
        loop {
            // advance from (k, s) to (k+1, s+1)
            let g = ln_g.exp();
            t = match tail {
                Tail::Upper => t + g,
                Tail::Lower => t - g,
            }
            .clamp(0.0, 1.0);
            ln_g += ln_x - (s + 1.0).ln();
            ln_w += ln_lambda - (k + 1.0).ln();
            k += 1.0;
            s += 1.0;
            total += ln_w.exp() * t;
            terms += 1;

            let ratio = lambda / (k + 2.0);
            if ratio < 1.0 {
                let w_next = (ln_w + ln_lambda - (k + 1.0).ln()).exp();
                let value_cap = match tail {
                    Tail::Upper => 1.0,
                    Tail::Lower => t,
                };
                if w_next / (1.0 - ratio) * value_cap < half_tol {
                    break;
                }
            }
            if terms >= tol.max_terms {
                return Err(Error::Convergence {
                    op,
                    terms: tol.max_terms,
                });
            }
        }
    }

    // Downward: k = k0-1, ..., 0
    {
        let mut ln_w = ln_w0;
        let mut t = t0;
        let mut ln_g = ln_g0;
        let mut k = k0;
        let mut s = s0;
        while k >= 1.0 {
            // move g from s to s-1: g(s-1) = g(s) * s / x
            ln_g += s.ln() - ln_x;
            let g = ln_g.exp();
            t = match tail {
                Tail::Upper => t - g,
                Tail::Lower => t + g,
            }
            .clamp(0.0, 1.0);
            ln_w += k.ln() - ln_lambda;
            k -= 1.0;
            s -= 1.0;
            total += ln_w.exp() * t;
            terms += 1;

            if k >= 1.0 {
                let ratio = (k - 1.0) / lambda;
                if ratio < 1.0 {
                    let w_prev = (ln_w + k.ln() - ln_lambda).exp();
                    let value_cap = match tail {
                        Tail::Upper => t,
                        Tail::Lower => 1.0,
                    };
                    if w_prev / (1.0 - ratio) * value_cap < half_tol {
                        break;
                    }
                }
            }
            if terms >= tol.max_terms {
                return Err(Error::Convergence {
                    op,
                    terms: tol.max_terms,
                });
            }
        }
    }

    Ok(total.clamp(0.0, 1.0))
}

fn check_finite_nonneg(op: &'static str, name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::domain(op, format!("{name} = {v} must be finite and >= 0")));
    }
    Ok(())
}

/// Generalized Marcum Q-function `Q_ν(a, b)` with default [`Tolerance`].
///
/// For `ν = dof/2` it is the upper tail of the noncentral chi-square law:
/// `Q_{k/2}(√λ, √x) = P(χ²_k(λ) > x)`.
pub fn marcum_q(order: f64, a: f64, b: f64) -> Result<f64> {
    marcum_q_with(order, a, b, &Tolerance::default())
}

pub fn marcum_q_with(order: f64, a: f64, b: f64, tol: &Tolerance) -> Result<f64> {
    const OP: &str = "marcum_q";
    if !(order > 0.0) || !order.is_finite() {
        return Err(Error::domain(OP, format!("order {order} must be positive")));
    }
    check_finite_nonneg(OP, "a", a)?;
    if !(b >= 0.0) {
        return Err(Error::domain(OP, format!("b = {b} must be >= 0")));
    }
    if b == 0.0 {
        return Ok(1.0);
    }
    if b.is_infinite() {
        return Ok(0.0);
    }
    if a == 0.0 {
        return regularized_gamma_q(order, 0.5 * b * b);
    }
    poisson_gamma_mixture(OP, order, 0.5 * a * a, 0.5 * b * b, Tail::Upper, tol)
}

fn check_ncx2(op: &'static str, dof: f64, nc: f64) -> Result<()> {
    if !(dof > 0.0) || !dof.is_finite() {
        return Err(Error::domain(op, format!("dof {dof} must be positive")));
    }
    check_finite_nonneg(op, "noncentrality", nc)
}

/// CDF of the noncentral chi-square law `χ²_dof(nc)`.
pub fn noncentral_chisq_cdf(x: f64, dof: f64, nc: f64) -> Result<f64> {
    noncentral_chisq_cdf_with(x, dof, nc, &Tolerance::default())
}

/// CDF with explicit tolerance. Sums the lower-tail mixture directly rather
/// than forming `1 - Q`, so small left-tail probabilities keep precision.
pub fn noncentral_chisq_cdf_with(x: f64, dof: f64, nc: f64, tol: &Tolerance) -> Result<f64> {
    const OP: &str = "noncentral_chisq_cdf";
    check_ncx2(OP, dof, nc)?;
    if x.is_nan() {
        return Err(Error::domain(OP, "x is NaN"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(1.0);
    }
    poisson_gamma_mixture(OP, 0.5 * dof, 0.5 * nc, 0.5 * x, Tail::Lower, tol)
}

/// Survival function `P(χ²_dof(nc) > x)`.
pub fn noncentral_chisq_sf(x: f64, dof: f64, nc: f64) -> Result<f64> {
    check_ncx2("noncentral_chisq_sf", dof, nc)?;
    if x <= 0.0 {
        return Ok(1.0);
    }
    marcum_q(0.5 * dof, nc.sqrt(), x.sqrt())
}

/// Log-density of `χ²_dof(nc)` at `x > 0`.
///
/// Noncentrality roots below `1e-8` use the central density, the removable
/// limit of the Bessel form.
pub fn noncentral_chisq_ln_pdf(x: f64, dof: f64, nc: f64) -> Result<f64> {
    const OP: &str = "noncentral_chisq_ln_pdf";
    check_ncx2(OP, dof, nc)?;
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(OP, format!("x = {x} must be positive")));
    }
    let half = 0.5 * dof;
    if nc.sqrt() < 1e-8 {
        return Ok((half - 1.0) * x.ln() - 0.5 * x - half * std::f64::consts::LN_2 - ln_gamma(half));
    }
    let order = half - 1.0;
    Ok(-std::f64::consts::LN_2 - 0.5 * (x + nc)
        + (0.5 * order) * (x / nc).ln()
        + ln_bessel_i(order, (nc * x).sqrt())?)
}

/// Quantile of `χ²_dof(nc)`: the `x` with `CDF(x) = p`, by bracketed bisection.
pub fn noncentral_chisq_quantile(p: f64, dof: f64, nc: f64) -> Result<f64> {
    const OP: &str = "noncentral_chisq_quantile";
    check_ncx2(OP, dof, nc)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(OP, format!("p = {p} not in (0, 1)")));
    }
    let mut lo = 0.0_f64;
    let mut hi = (dof + nc).max(1.0);
    while noncentral_chisq_cdf(hi, dof, nc)? < p {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Convergence { op: OP, terms: 0 });
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if noncentral_chisq_cdf(mid, dof, nc)? < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// One draw from `χ²_dof(nc)`.
///
/// Integer `dof`: `dof - 1` squared standard normals plus one squared normal
/// shifted by `√nc`. Fractional `dof`: a Poisson(nc/2) mixture of central
/// chi-squares with `dof + 2K` degrees of freedom.
pub fn noncentral_chisq_sample<R: Rng + ?Sized>(dof: f64, nc: f64, rng: &mut R) -> Result<f64> {
    const OP: &str = "noncentral_chisq_sample";
    check_ncx2(OP, dof, nc)?;
    if dof.fract() == 0.0 && dof <= 1e6 {
        let k = dof as usize;
        let mut acc = 0.0;
        for _ in 1..k {
            let z: f64 = StandardNormal.sample(rng);
            acc += z * z;
        }
        let z: f64 = StandardNormal.sample(rng);
        let shifted = z + nc.sqrt();
        return Ok(acc + shifted * shifted);
    }
    let extra = if nc > 0.0 {
        let pois = Poisson::new(0.5 * nc).map_err(|e| Error::domain(OP, e.to_string()))?;
        pois.sample(rng)
    } else {
        0.0
    };
    let chi = ChiSquared::new(dof + 2.0 * extra).map_err(|e| Error::domain(OP, e.to_string()))?;
    Ok(chi.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{ks_critical_value, ks_statistic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Term-by-term Poisson mixture with every gamma tail evaluated directly.
    fn mixture_oracle(order: f64, a: f64, b: f64) -> f64 {
        let lambda = 0.5 * a * a;
        let x = 0.5 * b * b;
        let mut total = 0.0;
        for k in 0..400 {
            let kf = k as f64;
            let w = (-lambda + kf * lambda.ln() - ln_gamma(kf + 1.0)).exp();
            total += w * statrs::function::gamma::gamma_ur(order + kf, x);
        }
        total
    }

    /// First-order Marcum Q through its Bessel series
    /// `e^{-(a²+b²)/2} Σ_k (a/b)^k I_k(ab)`, valid for a < b.
    fn bessel_series_oracle(a: f64, b: f64) -> f64 {
        let mut total = 0.0;
        for k in 0..200 {
            let kf = k as f64;
            let ln_term = kf * (a / b).ln() + ln_bessel_i(kf, a * b).unwrap() - 0.5 * (a * a + b * b);
            total += ln_term.exp();
        }
        total
    }

    #[test]
    fn closed_form_zero_noncentrality() {
        let q = marcum_q(1.0, 0.0, 2.0).unwrap();
        assert!((q - (-2.0f64).exp()).abs() < 1e-6);
    }

    #[test]
    fn zero_boundary_gives_one() {
        for &(nu, a) in &[(0.5, 0.0), (1.0, 3.0), (7.5, 12.0)] {
            assert_eq!(marcum_q(nu, a, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn matches_series_oracles() {
        let q = marcum_q(1.0, 1.0, 2.0).unwrap();
        let oracle = mixture_oracle(1.0, 1.0, 2.0);
        assert!((q - oracle).abs() < 1e-12, "{q} vs {oracle}");
        assert!((q - bessel_series_oracle(1.0, 2.0)).abs() < 1e-12);
        for &(nu, a, b) in &[(1.5, 2.0, 3.5), (0.5, 0.3, 1.1), (4.0, 5.0, 4.0), (2.5, 8.0, 9.0)] {
            let q = marcum_q(nu, a, b).unwrap();
            let o = mixture_oracle(nu, a, b);
            assert!((q - o).abs() < 1e-12, "Q_{nu}({a},{b}) = {q} vs {o}");
        }
    }

    #[test]
    fn large_noncentrality_is_stable() {
        // λ = 5000: the mass sits far from k = 0.
        let a = 100.0;
        let below = marcum_q(2.0, a, 80.0).unwrap();
        let above = marcum_q(2.0, a, 120.0).unwrap();
        assert!(below > 0.999_999);
        assert!(above < 1e-6);
        let mid = marcum_q(2.0, a, a).unwrap();
        assert!(mid > 0.45 && mid < 0.6, "{mid}");
    }

    #[test]
    fn term_cap_is_reported() {
        let tol = Tolerance::new(1e-12, 1e-10, 3).unwrap();
        assert!(matches!(
            marcum_q_with(1.0, 20.0, 20.0, &tol),
            Err(Error::Convergence { .. })
        ));
    }

    #[test]
    fn monotone_in_both_arguments() {
        for &nu in &[0.5, 1.0, 3.5] {
            for i in 0..20 {
                let a = i as f64 * 0.4;
                let mut prev = 1.0 + 1e-15;
                for j in 0..40 {
                    let b = j as f64 * 0.25;
                    let q = marcum_q(nu, a, b).unwrap();
                    // slack is the series truncation tolerance
                    assert!(q <= prev + 1e-12);
                    prev = q;
                    let q_next_a = marcum_q(nu, a + 0.4, b).unwrap();
                    assert!(q_next_a >= q - 1e-12);
                }
            }
        }
    }

    #[test]
    fn cdf_special_values() {
        let p = noncentral_chisq_cdf(5.991, 2.0, 0.0).unwrap();
        assert!((p - 0.95).abs() < 1e-3);
        assert!((p - (1.0 - (-5.991f64 / 2.0).exp())).abs() < 1e-13);
        assert_eq!(noncentral_chisq_cdf(0.0, 3.0, 2.0).unwrap(), 0.0);
        assert_eq!(noncentral_chisq_cdf(0.0, 0.5, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn cdf_and_sf_are_complementary() {
        for &(x, k, nc) in &[(4.0, 3.0, 2.0), (0.3, 1.0, 0.5), (40.0, 15.0, 12.0), (2.0, 2.5, 0.0)] {
            let c = noncentral_chisq_cdf(x, k, nc).unwrap();
            let s = noncentral_chisq_sf(x, k, nc).unwrap();
            assert!((c + s - 1.0).abs() < 1e-11, "{x} {k} {nc}");
        }
    }

    #[test]
    fn cdf_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let n = 10_000_000usize;
        let hits = (0..n)
            .filter(|_| noncentral_chisq_sample(3.0, 2.0, &mut rng).unwrap() <= 4.0)
            .count();
        let p_hat = hits as f64 / n as f64;
        let p = noncentral_chisq_cdf(4.0, 3.0, 2.0).unwrap();
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p_hat - p).abs() < 3.0 * se, "{p_hat} vs {p} (se {se})");
    }

    #[test]
    fn cdf_is_monotone_with_limits() {
        let mut prev = 0.0;
        for i in 0..400 {
            let x = i as f64 * 0.2;
            let c = noncentral_chisq_cdf(x, 4.0, 6.0).unwrap();
            assert!(c >= prev - 1e-14);
            prev = c;
        }
        assert!(noncentral_chisq_cdf(1e-12, 4.0, 6.0).unwrap() < 1e-12);
        assert!(noncentral_chisq_cdf(500.0, 4.0, 6.0).unwrap() > 1.0 - 1e-12);
    }

    #[test]
    fn ln_pdf_integrates_to_cdf() {
        // Trapezoid integral of the density against the CDF.
        let (k, nc) = (5.0, 3.0);
        let n = 200_000;
        let upper = 12.0;
        let h = upper / n as f64;
        let mut acc = 0.0;
        for i in 1..=n {
            let x0 = (i - 1) as f64 * h;
            let x1 = i as f64 * h;
            let f0 = if x0 > 0.0 { noncentral_chisq_ln_pdf(x0, k, nc).unwrap().exp() } else { 0.0 };
            let f1 = noncentral_chisq_ln_pdf(x1, k, nc).unwrap().exp();
            acc += 0.5 * h * (f0 + f1);
        }
        let c = noncentral_chisq_cdf(upper, k, nc).unwrap();
        assert!((acc - c).abs() < 1e-8, "{acc} vs {c}");
    }

    #[test]
    fn ln_pdf_small_noncentrality_limit() {
        let central = noncentral_chisq_ln_pdf(2.0, 3.0, 0.0).unwrap();
        let tiny = noncentral_chisq_ln_pdf(2.0, 3.0, 1e-10).unwrap();
        assert!((central - tiny).abs() < 1e-9);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for &(p, k, nc) in &[(0.05, 3.0, 0.0), (0.5, 7.0, 4.0), (0.99, 1.0, 9.0)] {
            let x = noncentral_chisq_quantile(p, k, nc).unwrap();
            let back = noncentral_chisq_cdf(x, k, nc).unwrap();
            assert!((back - p).abs() < 1e-9 * p.max(1e-3), "{p} {k} {nc}");
        }
    }

    #[test]
    fn sample_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 1_000_000;
        let m5: f64 = (0..n)
            .map(|_| noncentral_chisq_sample(5.0, 0.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((m5 - 5.0).abs() < 0.02, "{m5}");
        let m7: f64 = (0..n)
            .map(|_| noncentral_chisq_sample(3.0, 4.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((m7 - 7.0).abs() < 0.03, "{m7}");
    }

    #[test]
    fn sample_variance_fractional_dof() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n)
            .map(|_| noncentral_chisq_sample(2.5, 1.5, &mut rng).unwrap())
            .collect();
        let (mean, var) = crate::stats::mean_variance(&xs);
        assert!((mean - 4.0).abs() < 0.02, "{mean}");
        assert!((var - 11.0).abs() < 0.15, "{var}");
    }

    #[test]
    fn samples_pass_ks_against_own_cdf() {
        let n = 100_000;
        for (seed, &(k, nc)) in [(3.0, 4.0), (2.5, 1.5), (1.0, 0.0), (0.7, 2.0)].iter().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed as u64);
            let xs: Vec<f64> = (0..n)
                .map(|_| noncentral_chisq_sample(k, nc, &mut rng).unwrap())
                .collect();
            let d = ks_statistic(xs, |x| noncentral_chisq_cdf(x, k, nc).unwrap());
            assert!(d < ks_critical_value(n, 0.01), "dof {k} nc {nc}: D = {d}");
        }
    }
}
