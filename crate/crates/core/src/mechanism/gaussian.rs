use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Mechanism, NoisyRelease, PrivacyParams};
use crate::error::{Error, Result};
use crate::estimation::ResidualLaw;
use crate::model::MeasurementModel;
use crate::rng::{SeedRecord, SeedStream};
use crate::special::gaussian_cdf;

/// `q̃ = q + ν`, `ν ~ N(nu_mean, nu_sigma²)`.
pub fn gaussian_output_release(
    law: &ResidualLaw,
    q: f64,
    params: &PrivacyParams,
    rng: &mut SeedStream,
) -> Result<NoisyRelease> {
    let Mechanism::GaussianOutput { nu_mean, nu_sigma } = params.mechanism else {
        return Err(Error::Regime("Gaussian release needs the Gaussian output mechanism".into()));
    };
    let ResidualLaw::Gaussian { mean, variance } = *law else {
        return Err(Error::Regime("Gaussian release needs a Gaussian law".into()));
    };
    let seed = rng.record();
    let nu = nu_mean + nu_sigma * rng.sample::<f64, _>(StandardNormal);
    Ok(NoisyRelease {
        value: q + nu,
        params: *params,
        law: ResidualLaw::gaussian(mean + nu_mean, variance + nu_sigma * nu_sigma)?,
        seed,
    })
}

fn gaussian_parts(law: &ResidualLaw) -> Result<(f64, f64)> {
    match *law {
        ResidualLaw::Gaussian { mean, variance } => Ok((mean, variance)),
        _ => Err(Error::Regime("Gaussian leakage needs Gaussian laws".into())),
    }
}

/// `L(q) = ln N(q; μ₀, s₀²) − ln N(q; μ₁, s₁²)` as coefficients of
/// `A q² + B q + C`.
fn leakage_quadratic(m0: f64, v0: f64, m1: f64, v1: f64) -> [f64; 3] {
    [
        0.5 / v1 - 0.5 / v0,
        m0 / v0 - m1 / v1,
        -0.5 * m0 * m0 / v0 + 0.5 * m1 * m1 / v1 + 0.5 * (v1 / v0).ln(),
    ]
}

/// Leakage between the Gaussian release laws of `z` and its neighbor `z′`,
/// each inflated by noise variance `nu_sigma²`.
pub fn gaussian_leakage(
    q: f64,
    law_z: &ResidualLaw,
    law_zp: &ResidualLaw,
    nu_sigma: f64,
) -> Result<f64> {
    let (m0, v0) = gaussian_parts(law_z)?;
    let (m1, v1) = gaussian_parts(law_zp)?;
    let s2 = nu_sigma * nu_sigma;
    let [a, b, c] = leakage_quadratic(m0, v0 + s2, m1, v1 + s2);
    Ok((a * q + b) * q + c)
}

fn real_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = b.abs().max(c.abs()).max(1.0);
    if a.abs() <= 1e-14 * scale {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let t = -0.5 * (b + b.signum() * disc.sqrt());
    if t == 0.0 {
        return vec![0.0];
    }
    vec![t / a, c / t]
}

/// `Pr(|L| ≤ ε)` under the `z` release law, computed exactly: `L` is a
/// quadratic in `q`, so `{|L| ≤ ε}` is a finite union of intervals.
fn leakage_probability_one_way(epsilon: f64, m0: f64, v0: f64, m1: f64, v1: f64) -> f64 {
    let [a, b, c] = leakage_quadratic(m0, v0, m1, v1);
    let l = |q: f64| (a * q + b) * q + c;
    let mut cuts: Vec<f64> = real_roots(a, b, c - epsilon)
        .into_iter()
        .chain(real_roots(a, b, c + epsilon))
        .filter(|r| r.is_finite())
        .collect();
    cuts.sort_by(f64::total_cmp);
    let sd = v0.sqrt();
    let cdf = |q: f64| gaussian_cdf((q - m0) / sd);
    let mut edges = vec![f64::NEG_INFINITY];
    edges.extend(cuts);
    edges.push(f64::INFINITY);
    edges
        .windows(2)
        .map(|w| {
            let (lo, hi) = (w[0], w[1]);
            let probe = match (lo.is_finite(), hi.is_finite()) {
                (true, true) => 0.5 * (lo + hi),
                (false, true) => hi - 1.0 - hi.abs(),
                (true, false) => lo + 1.0 + lo.abs(),
                (false, false) => m0,
            };
            if l(probe).abs() <= epsilon {
                cdf(hi) - cdf(lo)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// `min` over both orders of `Pr(|L| ≤ ε)` for the two release laws with
/// added noise `N(·, nu_sigma²)`.
pub fn gaussian_leakage_probability(
    epsilon: f64,
    law_z: &ResidualLaw,
    law_zp: &ResidualLaw,
    nu_sigma: f64,
) -> Result<f64> {
    let (m0, v0) = gaussian_parts(law_z)?;
    let (m1, v1) = gaussian_parts(law_zp)?;
    let s2 = nu_sigma * nu_sigma;
    let (v0, v1) = (v0 + s2, v1 + s2);
    Ok(leakage_probability_one_way(epsilon, m0, v0, m1, v1)
        .min(leakage_probability_one_way(epsilon, m1, v1, m0, v0)))
}

fn bisect_increasing<F: Fn(f64) -> bool>(ok: F, op: &'static str) -> Result<f64> {
    let mut hi = 1e-6;
    let mut n = 0;
    while !ok(hi) {
        hi *= 2.0;
        n += 1;
        if n > 200 {
            return Err(Error::Convergence { op, terms: n });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    Ok(hi)
}

/// Smallest noise scale with `Pr(|L| ≤ ε) ≥ 1 − δ` for both orders of the
/// neighbor pair. Returns 0 when the clean laws already satisfy it.
///
/// This is a numerical calibration, not a closed-form guarantee.
pub fn calibrate_nu_sigma(
    epsilon: f64,
    delta: f64,
    law_z: &ResidualLaw,
    law_zp: &ResidualLaw,
) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1)"));
    }
    let target = 1.0 - delta;
    let ok = |s: f64| {
        gaussian_leakage_probability(epsilon, law_z, law_zp, s).is_ok_and(|p| p >= target)
    };
    gaussian_leakage_probability(epsilon, law_z, law_zp, 0.0)?;
    if ok(0.0) {
        return Ok(0.0);
    }
    bisect_increasing(ok, "calibrate_nu_sigma")
}

/// Smallest ε with `Pr(|L| ≤ ε) ≥ 1 − δ` at noise scale `nu_sigma`.
pub fn epsilon_for_nu_sigma(
    delta: f64,
    law_z: &ResidualLaw,
    law_zp: &ResidualLaw,
    nu_sigma: f64,
) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1)"));
    }
    gaussian_leakage_probability(1.0, law_z, law_zp, nu_sigma)?;
    let target = 1.0 - delta;
    bisect_increasing(
        |e| gaussian_leakage_probability(e, law_z, law_zp, nu_sigma).is_ok_and(|p| p >= target),
        "epsilon_for_nu_sigma",
    )
}

/// Classic Gaussian-mechanism scale `Δ √(2 ln(1.25/δ)) / ε`.
pub fn gaussian_mechanism_sigma(epsilon: f64, delta: f64, sensitivity: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be > 0"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("delta", "must lie in (0, 1)"));
    }
    if !(sensitivity > 0.0) {
        return Err(Error::param("sensitivity", "must be > 0"));
    }
    Ok(sensitivity * (2.0 * (1.25 / delta).ln()).sqrt() / epsilon)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InputRelease {
    pub z: DVector<f64>,
    pub sigma_w: f64,
    /// `σ_w² / σ²`.
    pub k: f64,
    pub epsilon_per_element: f64,
    pub seed: Option<SeedRecord>,
}

/// `z̃ = z + w`, `w ~ N(0, σ_w²I)`, with `σ_w` from the Gaussian mechanism at
/// per-element budget `ε/m` and sensitivity 1.
pub fn input_perturbation_release(
    model: &MeasurementModel,
    z: &DVector<f64>,
    epsilon: f64,
    delta: f64,
    rng: &mut SeedStream,
) -> Result<InputRelease> {
    if z.len() != model.m() {
        return Err(Error::DimensionMismatch {
            op: "input_perturbation_release",
            expected: model.m(),
            got: z.len(),
        });
    }
    let eps_o = epsilon / model.m() as f64;
    let sigma_w = if epsilon.is_infinite() {
        0.0
    } else {
        gaussian_mechanism_sigma(eps_o, delta, 1.0)?
    };
    let seed = rng.record();
    let w = DVector::from_fn(z.len(), |_, _| sigma_w * rng.sample::<f64, _>(StandardNormal));
    Ok(InputRelease {
        z: z + w,
        sigma_w,
        k: (sigma_w / model.sigma()).powi(2),
        epsilon_per_element: eps_o,
        seed,
    })
}
