//! Detection analytics for the WSSR test `q > τ`.
//!
//! Thresholds are set on the clean null law. With a mechanism attached the
//! same threshold is applied to the released statistic, so privacy shows up
//! as a change in both Pfa and Pd; `recalibrate_threshold` instead sets `τ`
//! on the released null law.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::ResidualLaw;
use crate::mechanism::{Mechanism, PrivacyParams};
use crate::model::{check_dims, AttackVector, MeasurementModel, Projection, StateVector};
use crate::rng::SeedStream;
use crate::special::{
    gaussian_q_inverse, noncentral_chisq_quantile, noncentral_chisq_sample,
    regularized_gamma_q_inverse,
};
use crate::stats::binomial_se;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSpec {
    /// Target false-alarm rate of the clean test.
    pub alpha: f64,
    pub law0: ResidualLaw,
    pub law1: ResidualLaw,
    pub dp: Option<PrivacyParams>,
    pub recalibrate_threshold: bool,
}

impl TestSpec {
    pub fn new(alpha: f64, law0: ResidualLaw, law1: ResidualLaw) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("{alpha} not in (0, 1)")));
        }
        if law0.regime() != law1.regime() {
            return Err(Error::Regime("H0 and H1 laws must share a regime".into()));
        }
        Ok(Self {
            alpha,
            law0,
            law1,
            dp: None,
            recalibrate_threshold: false,
        })
    }

    pub fn with_dp(mut self, params: PrivacyParams) -> Self {
        self.dp = Some(params);
        self
    }

    pub fn recalibrated(mut self) -> Self {
        self.recalibrate_threshold = true;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::param("alpha", format!("{alpha} not in (0, 1)")));
        }
        self.alpha = alpha;
        Ok(self)
    }
}

/// Law of the statistic the test actually sees under a mechanism.
pub fn released_law(law: &ResidualLaw, base: &ResidualLaw, dp: Option<&PrivacyParams>) -> Result<ResidualLaw> {
    let Some(p) = dp else { return Ok(*law) };
    match (p.mechanism, *law) {
        (Mechanism::ChiSquare { r_prime }, ResidualLaw::ChiSquare { dof, noncentrality }) => {
            ResidualLaw::chi_square(dof + f64::from(r_prime), noncentrality)
        }
        (Mechanism::ChiSquare { r_prime }, ResidualLaw::Gaussian { mean, variance }) => {
            let r = f64::from(r_prime);
            ResidualLaw::gaussian(mean + r, variance + 2.0 * r)
        }
        (Mechanism::GaussianOutput { nu_mean, nu_sigma }, ResidualLaw::Gaussian { mean, variance }) => {
            ResidualLaw::gaussian(mean + nu_mean, variance + nu_sigma * nu_sigma)
        }
        (Mechanism::GaussianOutput { .. }, ResidualLaw::ChiSquare { .. }) => Err(Error::Regime(
            "Gaussian output noise needs Gaussian-regime laws".into(),
        )),
        // The perturbed WSSR divided by (1 + k) keeps the clean null law and
        // shrinks the signal by 1/(1 + k).
        (Mechanism::GaussianInput { k }, ResidualLaw::ChiSquare { dof, noncentrality }) => {
            ResidualLaw::chi_square(dof, noncentrality / (1.0 + k))
        }
        (Mechanism::GaussianInput { k }, ResidualLaw::Gaussian { mean, variance }) => {
            let (m0, v0) = (base.mean(), base.variance());
            ResidualLaw::gaussian(m0 + (mean - m0) / (1.0 + k), v0 + (variance - v0) / (1.0 + k))
        }
    }
}

fn laws(spec: &TestSpec) -> Result<(ResidualLaw, ResidualLaw)> {
    let dp = spec.dp.as_ref();
    Ok((
        released_law(&spec.law0, &spec.law0, dp)?,
        released_law(&spec.law1, &spec.law0, dp)?,
    ))
}

fn threshold_for(law0: &ResidualLaw, alpha: f64) -> Result<f64> {
    match *law0 {
        ResidualLaw::ChiSquare { dof, .. } if dof <= 0.0 => Err(Error::NoResiduals),
        ResidualLaw::ChiSquare { dof, noncentrality: 0.0 } => {
            Ok(2.0 * regularized_gamma_q_inverse(alpha, 0.5 * dof)?)
        }
        ResidualLaw::ChiSquare { dof, noncentrality } => {
            noncentral_chisq_quantile(1.0 - alpha, dof, noncentrality)
        }
        ResidualLaw::Gaussian { mean, variance } => {
            Ok(mean + variance.sqrt() * gaussian_q_inverse(alpha)?)
        }
    }
}

/// `τ = 2𝒬⁻¹(α, r/2)` (chi) or `θ_{z,0} + σ_{z,0}Q⁻¹(α)` (Gaussian) on the
/// clean null law. A null law with nonzero noncentrality (regularized models)
/// uses its own upper quantile.
pub fn threshold(spec: &TestSpec) -> Result<f64> {
    if spec.recalibrate_threshold {
        threshold_for(&laws(spec)?.0, spec.alpha)
    } else {
        threshold_for(&spec.law0, spec.alpha)
    }
}

/// Analytic `(Pfa, Pd)` of the (possibly privatized) test.
pub fn pfa_pd(spec: &TestSpec) -> Result<(f64, f64)> {
    let tau = threshold(spec)?;
    let (l0, l1) = laws(spec)?;
    Ok((l0.sf(tau)?, l1.sf(tau)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub alpha: f64,
    pub pfa: f64,
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// Strictly increasing in `pfa`.
    pub points: Vec<RocPoint>,
    pub auroc: f64,
}

/// `n` points log-spaced toward both tails: `α` and `1 − α` for `α` from
/// `1e-10` up to (not including) `1/2`.
pub fn alpha_grid(n: usize) -> Vec<f64> {
    let half = n / 2;
    let (lo, hi) = (-10.0, 0.5f64.log10());
    let lower: Vec<f64> = (0..half)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / half as f64))
        .collect();
    let mut grid = lower.clone();
    grid.extend(lower.iter().rev().map(|a| 1.0 - a));
    grid
}

pub const DEFAULT_ROC_POINTS: usize = 512;

pub fn default_alpha_grid() -> Vec<f64> {
    alpha_grid(DEFAULT_ROC_POINTS)
}

/// ROC over `grid` with AUROC by the trapezoid rule, endpoints `(0, 0)` and
/// `(1, 1)` included. Points whose Pfa does not strictly increase (tail
/// saturation) are dropped.
pub fn roc(spec: &TestSpec, grid: &[f64]) -> Result<RocCurve> {
    if grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(Error::param("alpha_grid", "entries must lie in (0, 1)"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("alpha_grid", "must be strictly increasing"));
    }
    let mut points: Vec<RocPoint> = Vec::with_capacity(grid.len());
    for &alpha in grid {
        let (pfa, pd) = pfa_pd(&spec.with_alpha(alpha)?)?;
        if points.last().is_none_or(|p| pfa > p.pfa) && pfa > 0.0 && pfa < 1.0 {
            points.push(RocPoint { alpha, pfa, pd });
        }
    }
    let mut auroc = 0.0;
    let mut prev = (0.0, 0.0);
    for p in points.iter().map(|p| (p.pfa, p.pd)).chain(std::iter::once((1.0, 1.0))) {
        auroc += 0.5 * (p.0 - prev.0) * (p.1 + prev.1);
        prev = p;
    }
    Ok(RocCurve {
        points,
        auroc: auroc.clamp(0.0, 1.0),
    })
}

/// Empirical and analytic error rates from a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McReport {
    pub trials: usize,
    pub threshold: f64,
    pub pfa_hat: f64,
    pub pd_hat: f64,
    pub pfa: f64,
    pub pd: f64,
    /// Binomial SEs at the analytic rates.
    pub pfa_se: f64,
    pub pd_se: f64,
}

impl McReport {
    /// Errors with the worst-offending rate if either misses by more than
    /// `k_se` standard errors.
    pub fn check(&self, k_se: f64) -> Result<()> {
        let score = |emp: f64, ana: f64, se: f64| {
            let d = (emp - ana).abs();
            if se > 0.0 {
                d / se
            } else if d == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        };
        let fa = score(self.pfa_hat, self.pfa, self.pfa_se);
        let d = score(self.pd_hat, self.pd, self.pd_se);
        let (quantity, empirical, analytic, se, worst) = if fa >= d {
            ("pfa", self.pfa_hat, self.pfa, self.pfa_se, fa)
        } else {
            ("pd", self.pd_hat, self.pd, self.pd_se, d)
        };
        if worst > k_se {
            return Err(Error::Validation {
                quantity,
                empirical,
                analytic,
                se,
                k_se,
            });
        }
        Ok(())
    }
}

/// Trials per independent RNG stream.
const BLOCK: usize = 1024;

/// Simulates the full pipeline under H0 (no attack) and H1 (`attack`):
/// measurements, WSSR, optional release, threshold test.
///
/// Block `b` of trials draws from stream `b` of `seed`, so results do not
/// depend on `workers`.
pub fn monte_carlo_rates(
    model: &MeasurementModel,
    x_true: &StateVector,
    attack: &AttackVector,
    spec: &TestSpec,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<McReport> {
    check_dims(model, x_true, attack)?;
    if trials == 0 {
        return Err(Error::param("trials", "must be >= 1"));
    }
    let tau = threshold(spec)?;
    let (pfa, pd) = pfa_pd(spec)?;
    let p = Projection::of(model)?.matrix;
    let hx = model.h() * x_true;
    let a = attack.dense();
    let sim = Simulator {
        p: &p,
        hx: &hx,
        sigma: model.sigma(),
        dp: spec.dp,
        tau,
    };
    let blocks = trials.div_ceil(BLOCK);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::param("workers", e.to_string()))?;
    let counts: Vec<(usize, usize)> = pool.install(|| {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let n = BLOCK.min(trials - b * BLOCK);
                let mut rng = SeedStream::new(seed, b as u64);
                let mut fa = 0;
                let mut det = 0;
                for _ in 0..n {
                    fa += usize::from(sim.rejects(None, &mut rng)?);
                    det += usize::from(sim.rejects(Some(&a), &mut rng)?);
                }
                Ok((fa, det))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let (fa, det) = counts
        .iter()
        .fold((0, 0), |acc, c| (acc.0 + c.0, acc.1 + c.1));
    Ok(McReport {
        trials,
        threshold: tau,
        pfa_hat: fa as f64 / trials as f64,
        pd_hat: det as f64 / trials as f64,
        pfa,
        pd,
        pfa_se: binomial_se(pfa, trials),
        pd_se: binomial_se(pd, trials),
    })
}

/// [`monte_carlo_rates`] followed by a 3-SE agreement check.
pub fn monte_carlo_validate(
    model: &MeasurementModel,
    x_true: &StateVector,
    attack: &AttackVector,
    spec: &TestSpec,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<McReport> {
    if trials < 1000 {
        return Err(Error::param("trials", "validation needs at least 1000 trials"));
    }
    let report = monte_carlo_rates(model, x_true, attack, spec, trials, seed, workers)?;
    report.check(3.0)?;
    Ok(report)
}

struct Simulator<'a> {
    p: &'a DMatrix<f64>,
    hx: &'a DVector<f64>,
    sigma: f64,
    dp: Option<PrivacyParams>,
    tau: f64,
}

impl Simulator<'_> {
    fn rejects(&self, attack: Option<&DVector<f64>>, rng: &mut SeedStream) -> Result<bool> {
        let input_k = match self.dp.map(|d| d.mechanism) {
            Some(Mechanism::GaussianInput { k }) => k,
            _ => 0.0,
        };
        let sd = self.sigma * (1.0 + input_k).sqrt();
        let mut z = DVector::from_fn(self.hx.len(), |_, _| sd * rng.sample::<f64, _>(StandardNormal));
        z += self.hx;
        if let Some(a) = attack {
            z += a;
        }
        let mut q = (self.p * z).norm_squared() / (self.sigma * self.sigma);
        match self.dp.map(|d| d.mechanism) {
            Some(Mechanism::ChiSquare { r_prime }) => {
                q += noncentral_chisq_sample(f64::from(r_prime), 0.0, rng)?;
            }
            Some(Mechanism::GaussianOutput { nu_mean, nu_sigma }) => {
                q += nu_mean + nu_sigma * rng.sample::<f64, _>(StandardNormal);
            }
            Some(Mechanism::GaussianInput { k }) => q /= 1.0 + k,
            None => {}
        }
        Ok(q > self.tau)
    }
}
