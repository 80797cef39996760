//! Gaussian-regime experiments on abstract `(θ_z, σ_z)` parameters.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::FigureConfig;
use crate::detection::{default_alpha_grid, pfa_pd, roc, threshold, RocPoint, TestSpec};
use crate::error::Result;
use crate::estimation::ResidualLaw;
use crate::mechanism::{
    calibrate_nu_sigma, epsilon_for_nu_sigma, gaussian_mechanism_sigma, Mechanism, PrivacyParams,
};
use crate::rng::SeedStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

fn gauss(mean: f64, sd: f64) -> Result<ResidualLaw> {
    ResidualLaw::gaussian(mean, sd * sd)
}

/// The neighbor of a query law: the mean moves by the unit sensitivity.
fn neighbor(law: &ResidualLaw) -> Result<ResidualLaw> {
    ResidualLaw::gaussian(law.mean() + 1.0, law.variance())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig3Point {
    pub delta_theta: f64,
    pub alpha: f64,
    pub pfa: f64,
    pub pd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig3Auroc {
    pub delta_theta: f64,
    pub auroc: f64,
}

/// ROC for each attack strength `Δθ` with `σ_{z,1}` from `sigma_z1_fig3`.
pub fn fig3(f: &FigureConfig) -> Result<(Vec<Fig3Point>, Vec<Fig3Auroc>)> {
    let grid = default_alpha_grid();
    let law0 = gauss(f.theta_z0, f.sigma_z0)?;
    let mut points = Vec::new();
    let mut summary = Vec::new();
    for &dt in &f.fig3_delta_thetas {
        let law1 = gauss(f.theta_z0 + dt, f.sigma_z1_fig3)?;
        let curve = roc(&TestSpec::new(0.05, law0, law1)?, &grid)?;
        points.extend(curve.points.iter().map(|p: &RocPoint| Fig3Point {
            delta_theta: dt,
            alpha: p.alpha,
            pfa: p.pfa,
            pd: p.pd,
        }));
        summary.push(Fig3Auroc {
            delta_theta: dt,
            auroc: curve.auroc,
        });
    }
    Ok((points, summary))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig4Row {
    pub delta_theta: f64,
    pub epsilon_o: f64,
    pub epsilon: f64,
    pub k: f64,
    pub auroc_input: f64,
    pub nu_sigma_output: f64,
    pub auroc_output: f64,
}

/// AUROC under input perturbation against the per-element budget `ε_o`,
/// alongside the output mechanism at the same total budget `ε = m ε_o`.
pub fn fig4(f: &FigureConfig) -> Result<Vec<Fig4Row>> {
    let grid = default_alpha_grid();
    let law0 = gauss(f.theta_z0, f.sigma_z0)?;
    let mut rows = Vec::new();
    for &dt in &f.fig4_delta_thetas {
        let law1 = gauss(f.theta_z0 + dt, f.sigma_z1)?;
        let clean = TestSpec::new(0.05, law0, law1)?;
        for &eps_o in &f.fig4_epsilon_o {
            let epsilon = eps_o * f.m as f64;
            let sigma_w = gaussian_mechanism_sigma(eps_o, f.delta, 1.0)?;
            let k = sigma_w * sigma_w;
            let input = PrivacyParams::new(epsilon, f.delta, Mechanism::GaussianInput { k })?;
            let auroc_input = roc(&clean.with_dp(input), &grid)?.auroc;
            let nu = calibrate_nu_sigma(epsilon, f.delta, &law0, &neighbor(&law0)?)?;
            let output = PrivacyParams::gaussian_output(epsilon, f.delta, 0.0, nu)?;
            let auroc_output = roc(&clean.with_dp(output), &grid)?.auroc;
            rows.push(Fig4Row {
                delta_theta: dt,
                epsilon_o: eps_o,
                epsilon,
                k,
                auroc_input,
                nu_sigma_output: nu,
                auroc_output,
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig5Row {
    pub delta_theta: f64,
    pub sigma_nu: f64,
    pub epsilon: f64,
    pub auroc: f64,
}

/// AUROC of the output mechanism against `σ_{ν|z}`, with the privacy budget
/// each noise level buys at `δ`.
pub fn fig5(f: &FigureConfig) -> Result<Vec<Fig5Row>> {
    let grid = default_alpha_grid();
    let law0 = gauss(f.theta_z0, f.sigma_z0)?;
    let law1 = gauss(f.theta_ratio * f.theta_z0, f.sigma_z1)?;
    let clean = TestSpec::new(0.05, law0, law1)?;
    let nb = neighbor(&law0)?;
    f.nu_sigma_grid
        .iter()
        .map(|&s| {
            let epsilon = epsilon_for_nu_sigma(f.delta, &law0, &nb, s)?;
            let dp = PrivacyParams::gaussian_output(epsilon, f.delta, 0.0, s)?;
            Ok(Fig5Row {
                delta_theta: law1.mean() - law0.mean(),
                sigma_nu: s,
                epsilon,
                auroc: roc(&clean.with_dp(dp), &grid)?.auroc,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fig6Row {
    pub sigma_nu: f64,
    pub threshold: f64,
    pub pfa: f64,
    pub pd: f64,
    pub pfa_mc: f64,
    pub pd_mc: f64,
    pub trials: usize,
}

/// Pfa and Pd at the clean threshold for `fig6_alpha`, analytic and by
/// sampling the release laws.
pub fn fig6(f: &FigureConfig, trials: usize, seed: u64) -> Result<Vec<Fig6Row>> {
    let law0 = gauss(f.theta_z0, f.sigma_z0)?;
    let law1 = gauss(f.theta_ratio * f.theta_z0, f.sigma_z1)?;
    let clean = TestSpec::new(f.fig6_alpha, law0, law1)?;
    f.nu_sigma_grid
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let dp = PrivacyParams::gaussian_output(1.0, f.delta, 0.0, s)?;
            let spec = clean.with_dp(dp);
            let tau = threshold(&spec)?;
            let (pfa, pd) = pfa_pd(&spec)?;
            let mut rng = SeedStream::new(seed, i as u64);
            let mut hits = [0usize; 2];
            for (h, law) in [law0, law1].iter().enumerate() {
                let sd = (law.variance() + s * s).sqrt();
                for _ in 0..trials {
                    if law.mean() + sd * rng.sample::<f64, _>(StandardNormal) > tau {
                        hits[h] += 1;
                    }
                }
            }
            Ok(Fig6Row {
                sigma_nu: s,
                threshold: tau,
                pfa,
                pd,
                pfa_mc: hits[0] as f64 / trials as f64,
                pd_mc: hits[1] as f64 / trials as f64,
                trials,
            })
        })
        .collect()
}
