//! State estimation, the WSSR statistic and its distribution.
//!
//! The exact WSSR law is a chi-square-type mixture `Σ dᵢ z²_{U,i}` built from
//! the SVD of `H`. For `λ = 0` it collapses to `χ²_{m−n}(σ⁻²‖Pa‖²)`. For large
//! `m` the mixture is summarized by its first two cumulants and a normal law,
//! together with a Berry-Esseen-type sup-density bound that tells callers
//! whether the approximation is trustworthy.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{check_dims, AttackVector, MeasurementModel, Projection, StateVector};
use crate::special::{
    gaussian_cdf, noncentral_chisq_cdf, noncentral_chisq_sample, noncentral_chisq_sf,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    ChiSquare,
    Gaussian,
}

/// Distribution of a (possibly privatized) residual statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualLaw {
    /// `χ²_dof(noncentrality)`.
    ChiSquare { dof: f64, noncentrality: f64 },
    /// `N(mean, variance)`.
    Gaussian { mean: f64, variance: f64 },
}

impl ResidualLaw {
    pub fn chi_square(dof: f64, noncentrality: f64) -> Result<Self> {
        if !(dof >= 0.0) || !dof.is_finite() {
            return Err(Error::param("dof", format!("{dof} must be >= 0")));
        }
        if !(noncentrality >= 0.0) || !noncentrality.is_finite() {
            return Err(Error::param(
                "noncentrality",
                format!("{noncentrality} must be >= 0"),
            ));
        }
        Ok(Self::ChiSquare { dof, noncentrality })
    }

    pub fn gaussian(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::param("mean", "must be finite"));
        }
        if !(variance > 0.0) || !variance.is_finite() {
            return Err(Error::param("variance", format!("{variance} must be > 0")));
        }
        Ok(Self::Gaussian { mean, variance })
    }

    pub fn regime(&self) -> Regime {
        match self {
            Self::ChiSquare { .. } => Regime::ChiSquare,
            Self::Gaussian { .. } => Regime::Gaussian,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::ChiSquare { dof, noncentrality } => dof + noncentrality,
            Self::Gaussian { mean, .. } => mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::ChiSquare { dof, noncentrality } => 2.0 * dof + 4.0 * noncentrality,
            Self::Gaussian { variance, .. } => variance,
        }
    }

    fn positive_dof(&self) -> Result<()> {
        match *self {
            Self::ChiSquare { dof, .. } if dof <= 0.0 => Err(Error::NoResiduals),
            _ => Ok(()),
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        self.positive_dof()?;
        match *self {
            Self::ChiSquare { dof, noncentrality } => {
                noncentral_chisq_cdf(x.max(0.0), dof, noncentrality)
            }
            Self::Gaussian { mean, variance } => Ok(gaussian_cdf((x - mean) / variance.sqrt())),
        }
    }

    /// `Pr(X > x)`.
    pub fn sf(&self, x: f64) -> Result<f64> {
        self.positive_dof()?;
        match *self {
            Self::ChiSquare { dof, noncentrality } => {
                noncentral_chisq_sf(x.max(0.0), dof, noncentrality)
            }
            Self::Gaussian { mean, variance } => Ok(gaussian_cdf((mean - x) / variance.sqrt())),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.positive_dof()?;
        match *self {
            Self::ChiSquare { dof, noncentrality } => {
                noncentral_chisq_sample(dof, noncentrality, rng)
            }
            Self::Gaussian { mean, variance } => {
                Ok(mean + variance.sqrt() * rng.sample::<f64, _>(StandardNormal))
            }
        }
    }
}

/// RWLS estimate `x⋆ = argmin σ⁻²‖z − Hx‖² + λ‖x‖²`, solved as the augmented
/// least-squares problem `[H; σ√λ I] x ≈ [z; 0]` by QR.
pub fn wls_estimate(model: &MeasurementModel, z: &DVector<f64>) -> Result<StateVector> {
    let (m, n) = (model.m(), model.n());
    if z.len() != m {
        return Err(Error::DimensionMismatch {
            op: "wls_estimate",
            expected: m,
            got: z.len(),
        });
    }
    let (a, b) = if model.lambda() == 0.0 {
        (model.h().clone(), z.clone())
    } else {
        let mut a = DMatrix::zeros(m + n, n);
        a.view_mut((0, 0), (m, n)).copy_from(model.h());
        let ridge = model.sigma() * model.lambda().sqrt();
        for j in 0..n {
            a[(m + j, j)] = ridge;
        }
        let mut b = DVector::zeros(m + n);
        b.rows_mut(0, m).copy_from(z);
        (a, b)
    };
    let qr = a.qr();
    let rhs = qr.q().transpose() * b;
    qr.r()
        .solve_upper_triangular(&rhs)
        .ok_or(Error::RankDeficient {
            rank: model.rank(),
            cols: n,
        })
}

/// WSSR `σ⁻²‖z − Hx⋆‖²`, which equals `zᵀP_λ²z/σ²`.
pub fn wssr(model: &MeasurementModel, z: &DVector<f64>) -> Result<f64> {
    let x = wls_estimate(model, z)?;
    Ok((z - model.h() * x).norm_squared() / model.sigma().powi(2))
}

/// Chi-square law of the WSSR for state `x` and attack `a`: degrees of freedom
/// `rank(P_λ)` and noncentrality `‖P_λ(Hx + a)‖²/σ²`. For `λ = 0` the state
/// drops out and this is `σ⁻²‖Pa‖²`.
pub fn residual_law(
    model: &MeasurementModel,
    x: &StateVector,
    attack: &AttackVector,
) -> Result<ResidualLaw> {
    check_dims(model, x, attack)?;
    let p = Projection::of(model)?;
    let mean = model.h() * x + attack.dense();
    ResidualLaw::chi_square(p.rank as f64, p.quadratic_form(&mean, model.sigma()))
}

/// The analyst's view of [`residual_law`]: the unknown state is replaced by its
/// estimate from `z`.
pub fn plugin_residual_law(
    model: &MeasurementModel,
    z: &DVector<f64>,
    attack: &AttackVector,
) -> Result<ResidualLaw> {
    let x = wls_estimate(model, z)?;
    residual_law(model, &x, attack)
}

/// WSSR as `Σ dᵢ z²_{U,i}` with independent `z²_{U,i} ~ χ²₁(θᵢ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChiMixture {
    /// Diagonal of `D = (I − Σ(λσ²I + ΣᵀΣ)⁻¹Σᵀ)²`.
    pub d: DVector<f64>,
    /// `θ = Uᵀ(Hx + a)/σ`.
    pub theta: DVector<f64>,
    /// Full m×m left singular basis.
    pub u: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl ChiMixture {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.d
            .iter()
            .zip(self.theta.iter())
            .filter(|(d, _)| **d > 0.0)
            .map(|(d, t)| d * (t + rng.sample::<f64, _>(StandardNormal)).powi(2))
            .sum()
    }
}

pub fn chi_mixture(
    model: &MeasurementModel,
    x: &StateVector,
    attack: &AttackVector,
) -> Result<ChiMixture> {
    check_dims(model, x, attack)?;
    let (m, n) = (model.m(), model.n());
    let k = m.min(n);
    let svd = model.h().clone().svd(true, true);
    let u_thin = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let sv = svd.singular_values;

    let mut stacked = DMatrix::zeros(m, k + m);
    stacked.view_mut((0, 0), (m, k)).copy_from(&u_thin);
    stacked
        .view_mut((0, k), (m, m))
        .copy_from(&DMatrix::identity(m, m));
    let q = stacked.qr().q();
    let mut u = q;
    u.view_mut((0, 0), (m, k)).copy_from(&u_thin);

    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = m.max(n) as f64 * f64::EPSILON * smax;
    let shift = model.lambda() * model.sigma().powi(2);
    let d = DVector::from_fn(m, |i, _| {
        if i >= k {
            return 1.0;
        }
        let s = sv[i];
        if model.lambda() == 0.0 {
            if s > tol {
                0.0
            } else {
                1.0
            }
        } else {
            (shift / (s * s + shift)).powi(2)
        }
    });
    let theta = u.transpose() * (model.h() * x + attack.dense()) / model.sigma();
    Ok(ChiMixture {
        d,
        theta,
        u,
        singular_values: sv,
        v_t,
    })
}

/// Cumulants `𝒦₁..𝒦₄` of a [`ChiMixture`] with the shape summaries
/// `ζ = 8𝒦₂³/𝒦₃²` and `ρ = maxᵢ 2dᵢ²(1 + 2θᵢ²)/𝒦₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cumulants {
    pub k: [f64; 4],
    /// `None` when `𝒦₃ = 0`.
    pub zeta: Option<f64>,
    pub rho: f64,
}

/// `𝒦_ℓ = 2^{ℓ−1}(ℓ−1)! Σ dᵢ^ℓ(1 + ℓθᵢ²)` for `ℓ` in 1..=4.
pub fn cumulant(mix: &ChiMixture, order: u32) -> Result<f64> {
    if !(1..=4).contains(&order) {
        return Err(Error::param("order", format!("{order} not in 1..=4")));
    }
    let l = order as i32;
    let factorial: f64 = (1..order).map(f64::from).product();
    let sum: f64 = mix
        .d
        .iter()
        .zip(mix.theta.iter())
        .map(|(d, t)| d.powi(l) * (1.0 + f64::from(order) * t * t))
        .sum();
    Ok(2f64.powi(l - 1) * factorial * sum)
}

pub fn cumulants(mix: &ChiMixture) -> Cumulants {
    let mut k = [0.0; 4];
    for (i, slot) in k.iter_mut().enumerate() {
        *slot = cumulant(mix, i as u32 + 1).expect("order in range");
    }
    let zeta = (k[2] != 0.0).then(|| 8.0 * k[1].powi(3) / (k[2] * k[2]));
    let rho = mix
        .d
        .iter()
        .zip(mix.theta.iter())
        .map(|(d, t)| 2.0 * d * d * (1.0 + 2.0 * t * t) / k[1])
        .fold(0.0, f64::max);
    Cumulants { k, zeta, rho }
}

/// Standardized WSSR `(q − 𝒦₁)/√𝒦₂`.
pub fn normalized_wssr(q: f64, c: &Cumulants) -> f64 {
    (q - c.k[0]) / c.k[1].sqrt()
}

/// When the normal approximation counts as asymptotically exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalityThresholds {
    pub rho_max: f64,
    pub zeta_min: f64,
}

impl Default for NormalityThresholds {
    fn default() -> Self {
        Self {
            rho_max: 0.01,
            zeta_min: 1e4,
        }
    }
}

/// Normal approximation of a [`ChiMixture`] with its validity diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianApprox {
    pub law: ResidualLaw,
    pub rho: f64,
    pub zeta: Option<f64>,
    /// Sup-distance bound between the standardized density and `N(0, 1)`;
    /// only available for `ρ < 1/8`.
    pub density_bound: Option<f64>,
    pub asymptotically_normal: bool,
}

impl GaussianApprox {
    /// Gaussian when the density bound exists and is below `max_bound`.
    pub fn regime(&self, max_bound: f64) -> Regime {
        match self.density_bound {
            Some(b) if b < max_bound => Regime::Gaussian,
            _ => Regime::ChiSquare,
        }
    }
}

/// Default `max_bound` for [`GaussianApprox::regime`].
pub const DEFAULT_MAX_DENSITY_BOUND: f64 = 0.05;

/// `0.1323 (4 + 0.2503/(1 − 8ρ)²) ζ^{−1/2}`, defined for `ρ < 1/8`.
pub fn normality_bound(rho: f64, zeta: f64) -> Option<f64> {
    (rho < 0.125 && zeta > 0.0)
        .then(|| 0.1323 * (4.0 + 0.2503 / (1.0 - 8.0 * rho).powi(2)) / zeta.sqrt())
}

pub fn gaussian_law(mix: &ChiMixture) -> Result<GaussianApprox> {
    gaussian_law_with(mix, &NormalityThresholds::default())
}

/// `θ_z = Tr(D) + θᵀDθ`, `σ_z² = 2Tr(D²) + 4θᵀD²θ`.
pub fn gaussian_law_with(mix: &ChiMixture, thr: &NormalityThresholds) -> Result<GaussianApprox> {
    let d = &mix.d;
    let d2 = d.component_mul(d);
    let t2 = mix.theta.component_mul(&mix.theta);
    let mean = d.sum() + d.dot(&t2);
    let variance = 2.0 * d2.sum() + 4.0 * d2.dot(&t2);
    let law = ResidualLaw::gaussian(mean, variance)?;
    let c = cumulants(mix);
    let density_bound = c.zeta.and_then(|z| normality_bound(c.rho, z));
    let asymptotically_normal =
        c.rho <= thr.rho_max || c.zeta.is_some_and(|z| z >= thr.zeta_min);
    Ok(GaussianApprox {
        law,
        rho: c.rho,
        zeta: c.zeta,
        density_bound,
        asymptotically_normal,
    })
}
