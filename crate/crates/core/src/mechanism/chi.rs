use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::{Mechanism, NoisyRelease, PrivacyParams};
use crate::error::{Error, Result};
use crate::estimation::ResidualLaw;
use crate::model::{
    AttackVector, MeasurementModel, NeighborPerturbation, Projection, ProjectionUpdater,
    UpdatePath,
};
use crate::rng::SeedStream;
use crate::special::{ln_bessel_i, marcum_q, noncentral_chisq_ln_pdf, noncentral_chisq_sample};

/// `q̃ = q + ν`, `ν ~ χ²_{r′}(0)`. The release law is `χ²_{r+r′}(θ²)`.
pub fn chi_square_release(
    law: &ResidualLaw,
    q: f64,
    params: &PrivacyParams,
    rng: &mut SeedStream,
) -> Result<NoisyRelease> {
    let Mechanism::ChiSquare { r_prime } = params.mechanism else {
        return Err(Error::Regime("chi-square release needs the chi-square mechanism".into()));
    };
    let ResidualLaw::ChiSquare { dof, noncentrality } = *law else {
        return Err(Error::Regime("chi-square release needs a chi-square law".into()));
    };
    if !(q >= 0.0) {
        return Err(Error::param("q", format!("{q} must be >= 0")));
    }
    let seed = rng.record();
    let nu = noncentral_chisq_sample(f64::from(r_prime), 0.0, rng)?;
    Ok(NoisyRelease {
        value: q + nu,
        params: *params,
        law: ResidualLaw::chi_square(dof + f64::from(r_prime), noncentrality)?,
        seed,
    })
}

/// `δ(ε)` for the chi-square mechanism between the laws `χ²_{r̃}(θ²)` and
/// `χ²_{r̃}(θ′²)`, with probabilities taken under the `θ` law:
///
/// `δ = Q_{r̃/2}(θ, b₁) + Q_{r̃/2}(θ, b₂)`,
/// `b₁,₂ = ε/|θ′ − θ| ∓ (θ′ + θ)/2`.
///
/// When `b₁ ≤ 0` the first event is empty and `δ = 1`.
pub fn delta_for_epsilon(epsilon: f64, r_tilde: f64, theta: f64, theta_prime: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", format!("{epsilon} must be > 0")));
    }
    if !(r_tilde > 0.0) {
        return Err(Error::param("r_tilde", format!("{r_tilde} must be > 0")));
    }
    if !(theta >= 0.0 && theta_prime >= 0.0) {
        return Err(Error::param("theta", "noncentrality roots must be >= 0"));
    }
    let gap = (theta_prime - theta).abs();
    if gap == 0.0 {
        return Ok(0.0);
    }
    let centre = epsilon / gap;
    let half_sum = 0.5 * (theta + theta_prime);
    let b1 = centre - half_sum;
    if b1 <= 0.0 {
        return Ok(1.0);
    }
    let order = 0.5 * r_tilde;
    let delta = marcum_q(order, theta, b1)? + marcum_q(order, theta, centre + half_sum)?;
    Ok(delta.min(1.0))
}

const CENTRAL_THETA: f64 = 1e-8;

/// Privacy leakage `L = ln f_θ(q̃) − ln f_θ′(q̃)` between the densities of
/// `χ²_{r̃}(θ²)` and `χ²_{r̃}(θ′²)`.
pub fn leakage(q_tilde: f64, r_tilde: f64, theta: f64, theta_prime: f64) -> Result<f64> {
    if !(q_tilde > 0.0) {
        return Err(Error::param("q_tilde", format!("{q_tilde} must be > 0")));
    }
    if !(r_tilde > 0.0) {
        return Err(Error::param("r_tilde", format!("{r_tilde} must be > 0")));
    }
    if !(theta >= 0.0 && theta_prime >= 0.0) {
        return Err(Error::param("theta", "noncentrality roots must be >= 0"));
    }
    if theta == theta_prime {
        return Ok(0.0);
    }
    if theta < CENTRAL_THETA || theta_prime < CENTRAL_THETA {
        let l = noncentral_chisq_ln_pdf(q_tilde, r_tilde, theta * theta)?
            - noncentral_chisq_ln_pdf(q_tilde, r_tilde, theta_prime * theta_prime)?;
        return finite("leakage", l, q_tilde);
    }
    let s = r_tilde;
    let order = 0.5 * s - 1.0;
    let root = q_tilde.sqrt();
    let l = 0.5 * (theta_prime * theta_prime - theta * theta)
        + (0.25 * s - 0.5) * (theta_prime * theta_prime / (theta * theta)).ln()
        + ln_bessel_i(order, theta * root)?
        - ln_bessel_i(order, theta_prime * root)?;
    finite("leakage", l, q_tilde)
}

fn finite(op: &'static str, v: f64, arg: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { op, arg })
    }
}

/// Which neighbors `H' = H + eΔ_hᵀ` the δ maximization ranges over.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeighborhoodSpec {
    /// Row perturbations are drawn on the sphere `‖Δ_h‖ = delta_h_bound`.
    pub delta_h_bound: f64,
    pub scan_count: usize,
    /// Optional `[lo, hi]` for an extra deterministic grid over `(θ, θ′)`.
    pub theta_domain: Option<(f64, f64)>,
    pub grid_points: usize,
}

impl NeighborhoodSpec {
    pub fn new(delta_h_bound: f64, scan_count: usize) -> Result<Self> {
        let spec = Self {
            delta_h_bound,
            scan_count,
            theta_domain: None,
            grid_points: 17,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_theta_domain(mut self, lo: f64, hi: f64) -> Result<Self> {
        self.theta_domain = Some((lo, hi));
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if !(self.delta_h_bound > 0.0) || !self.delta_h_bound.is_finite() {
            return Err(Error::param("delta_h_bound", "must be positive"));
        }
        if self.scan_count == 0 {
            return Err(Error::param("scan_count", "must be >= 1"));
        }
        if let Some((lo, hi)) = self.theta_domain {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::param("theta_domain", format!("[{lo}, {hi}] is empty")));
            }
            if self.grid_points < 2 {
                return Err(Error::param("grid_points", "must be >= 2"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScannedNeighbor {
    pub perturbation: NeighborPerturbation,
    pub theta_prime: f64,
    pub path: UpdatePath,
}

/// The reachable `θ′ = ‖P′a‖/σ` for a scan of random neighbors.
///
/// Built once and reused across an ε grid, so `δ(ε)` along a curve is
/// computed against the same neighbor set.
#[derive(Debug, Clone)]
pub struct NeighborScan {
    pub theta: f64,
    pub dof: usize,
    pub neighbors: Vec<ScannedNeighbor>,
    /// Perturbations dropped because the neighbor model was singular.
    pub skipped: usize,
    pub spec: NeighborhoodSpec,
}

impl NeighborScan {
    pub fn new(
        model: &MeasurementModel,
        attack: &AttackVector,
        spec: &NeighborhoodSpec,
        rng: &mut SeedStream,
    ) -> Result<Self> {
        spec.validate()?;
        if attack.len() != model.m() {
            return Err(Error::DimensionMismatch {
                op: "NeighborScan",
                expected: model.m(),
                got: attack.len(),
            });
        }
        let updater = ProjectionUpdater::new(model)?;
        let a = attack.dense();
        let sigma = model.sigma();
        let theta = (updater.projection() * &a).norm() / sigma;
        let dof = Projection::of(model)?.rank;

        let (m, n) = (model.m(), model.n());
        let perts: Vec<NeighborPerturbation> = (0..spec.scan_count)
            .map(|_| {
                let row_index = rng.random_range(0..m);
                let mut dir = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let norm = dir.norm();
                dir *= spec.delta_h_bound / norm;
                NeighborPerturbation {
                    row_index,
                    delta_h: dir,
                }
            })
            .collect();

        let results: Vec<Option<ScannedNeighbor>> = perts
            .into_par_iter()
            .map(|pert| {
                let (p, path) = match updater.update(&pert) {
                    Ok(p) => (p, UpdatePath::ShermanMorrison),
                    Err(Error::SingularUpdate { .. }) => {
                        let direct = model
                            .apply_neighbor(&pert)
                            .and_then(|mp| Projection::of(&mp));
                        match direct {
                            Ok(p) => (p.matrix, UpdatePath::Direct),
                            Err(_) => return Ok(None),
                        }
                    }
                    Err(e) => return Err(e),
                };
                Ok(Some(ScannedNeighbor {
                    theta_prime: (p * &a).norm() / sigma,
                    perturbation: pert,
                    path,
                }))
            })
            .collect::<Result<_>>()?;
        let skipped = results.iter().filter(|r| r.is_none()).count();
        Ok(Self {
            theta,
            dof,
            neighbors: results.into_iter().flatten().collect(),
            skipped,
            spec: *spec,
        })
    }

    /// Largest `|θ′ − θ|` over the scan.
    pub fn max_sensitivity(&self) -> f64 {
        self.neighbors
            .iter()
            .map(|s| (s.theta_prime - self.theta).abs())
            .fold(0.0, f64::max)
    }

    /// Maximum δ at `epsilon` over both orderings of every scanned pair and,
    /// when configured, over the `theta_domain` grid.
    pub fn delta_max(&self, epsilon: f64, r_tilde: f64) -> Result<NeighborhoodDelta> {
        let pair = |t: f64, tp: f64| -> Result<f64> {
            Ok(delta_for_epsilon(epsilon, r_tilde, t, tp)?
                .max(delta_for_epsilon(epsilon, r_tilde, tp, t)?))
        };
        let mut best = NeighborhoodDelta {
            delta: 0.0,
            scan_delta: 0.0,
            grid_delta: None,
            argmax_theta: self.theta,
            argmax_theta_prime: self.theta,
            argmax: None,
            skipped: self.skipped,
        };
        for s in &self.neighbors {
            let d = pair(self.theta, s.theta_prime)?;
            if d > best.scan_delta {
                best.scan_delta = d;
                best.argmax_theta_prime = s.theta_prime;
                best.argmax = Some(s.perturbation.clone());
            }
        }
        best.delta = best.scan_delta;
        if let Some((lo, hi)) = self.spec.theta_domain {
            let g = self.spec.grid_points;
            let pts: Vec<f64> = (0..g)
                .map(|i| lo + (hi - lo) * i as f64 / (g - 1) as f64)
                .collect();
            let mut grid_best = 0.0_f64;
            let mut arg = (lo, lo);
            for &t in &pts {
                for &tp in &pts {
                    let d = delta_for_epsilon(epsilon, r_tilde, t, tp)?;
                    if d > grid_best {
                        grid_best = d;
                        arg = (t, tp);
                    }
                }
            }
            best.grid_delta = Some(grid_best);
            if grid_best > best.delta {
                best.delta = grid_best;
                best.argmax_theta = arg.0;
                best.argmax_theta_prime = arg.1;
                best.argmax = None;
            }
        }
        Ok(best)
    }
}

/// Result of a δ maximization over a neighborhood.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodDelta {
    /// `max(scan_delta, grid_delta)`.
    pub delta: f64,
    pub scan_delta: f64,
    pub grid_delta: Option<f64>,
    pub argmax_theta: f64,
    pub argmax_theta_prime: f64,
    /// The scanned perturbation attaining the maximum, if the scan won.
    pub argmax: Option<NeighborPerturbation>,
    pub skipped: usize,
}

/// `max δ` for the chi-square mechanism with `r′` extra degrees of freedom.
pub fn delta_max_over_neighborhood(
    epsilon: f64,
    model: &MeasurementModel,
    attack: &AttackVector,
    r_prime: u32,
    spec: &NeighborhoodSpec,
    rng: &mut SeedStream,
) -> Result<NeighborhoodDelta> {
    let scan = NeighborScan::new(model, attack, spec, rng)?;
    scan.delta_max(epsilon, (scan.dof + r_prime as usize) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaCurveRow {
    pub epsilon: f64,
    pub delta: f64,
    pub argmax_theta: f64,
    pub argmax_theta_prime: f64,
    pub r_tilde: f64,
}

/// One row per ε; δ is the neighborhood maximum from `scan`.
pub fn delta_curve(scan: &NeighborScan, r_prime: u32, epsilons: &[f64]) -> Result<Vec<DeltaCurveRow>> {
    let r_tilde = (scan.dof + r_prime as usize) as f64;
    epsilons
        .iter()
        .map(|&epsilon| {
            let d = scan.delta_max(epsilon, r_tilde)?;
            Ok(DeltaCurveRow {
                epsilon,
                delta: d.delta,
                argmax_theta: d.argmax_theta,
                argmax_theta_prime: d.argmax_theta_prime,
                r_tilde,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::noncentral_chisq_cdf;
    use crate::stats::{ks_critical_value, ks_statistic, mean_variance};

    #[test]
    fn identical_laws_leak_nothing() {
        assert_eq!(delta_for_epsilon(0.5, 3.0, 1.2, 1.2).unwrap(), 0.0);
        assert_eq!(leakage(2.0, 3.0, 1.2, 1.2).unwrap(), 0.0);
    }

    #[test]
    fn delta_decreases_to_zero_in_epsilon() {
        let mut prev = 1.0;
        for i in 1..60 {
            let eps = 0.25 * i as f64;
            let d = delta_for_epsilon(eps, 3.0, 1.0, 1.4).unwrap();
            assert!(d <= prev + 1e-15, "eps {eps}");
            prev = d;
        }
        assert!(prev < 1e-10);
    }

    #[test]
    fn delta_grows_with_gap() {
        let mut prev = 0.0;
        for i in 1..40 {
            let tp = 1.0 + 0.05 * i as f64;
            let d = delta_for_epsilon(3.0, 5.0, 1.0, tp).unwrap();
            assert!(d >= prev - 1e-15);
            prev = d;
        }
    }

    #[test]
    fn empty_first_event_gives_unit_delta() {
        // ε/(θ′−θ) = 1 < (θ′+θ)/2 = 1.5.
        assert_eq!(delta_for_epsilon(1.0, 3.0, 1.0, 2.0).unwrap(), 1.0);
    }

    #[test]
    fn delta_bounds_monte_carlo_leakage() {
        let (r, t, tp, eps) = (3.0, 0.6, 0.9, 1.5);
        let delta = delta_for_epsilon(eps, r, t, tp).unwrap();
        assert!(delta < 0.5);
        let mut rng = SeedStream::new(1, 0);
        let n = 200_000;
        let inside = (0..n)
            .filter(|_| {
                let q = noncentral_chisq_sample(r, t * t, &mut rng).unwrap();
                leakage(q, r, t, tp).unwrap().abs() <= eps
            })
            .count();
        let p = inside as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!(p >= 1.0 - delta - 3.0 * se, "{p} vs {}", 1.0 - delta);
    }

    #[test]
    fn leakage_forms_agree() {
        for &(q, r, t, tp) in &[(2.0, 3.0, 0.5, 1.5), (10.0, 7.0, 2.0, 1.0), (0.3, 1.0, 0.1, 0.2)] {
            let bessel = leakage(q, r, t, tp).unwrap();
            let density = noncentral_chisq_ln_pdf(q, r, t * t).unwrap()
                - noncentral_chisq_ln_pdf(q, r, tp * tp).unwrap();
            assert!((bessel - density).abs() < 1e-9, "{bessel} vs {density}");
        }
        let central = leakage(2.0, 3.0, 0.0, 1.0).unwrap();
        let density = noncentral_chisq_ln_pdf(2.0, 3.0, 0.0).unwrap()
            - noncentral_chisq_ln_pdf(2.0, 3.0, 1.0).unwrap();
        assert!((central - density).abs() < 1e-12);
    }

    #[test]
    fn leakage_decreases_in_q_when_gap_positive() {
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let l = leakage(0.1 * i as f64, 4.0, 0.8, 1.6).unwrap();
            assert!(l < prev);
            prev = l;
        }
    }

    #[test]
    fn chi_release_law_and_samples() {
        let law = ResidualLaw::chi_square(4.0, 2.5).unwrap();
        let params = PrivacyParams::chi_square(1.0, 0.1, 1).unwrap();
        let mut rng = SeedStream::new(3, 0);
        let first = chi_square_release(&law, 0.0, &params, &mut rng).unwrap();
        assert_eq!(first.law, ResidualLaw::chi_square(5.0, 2.5).unwrap());
        assert_eq!(first.seed.unwrap().seed, 3);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| {
                let q = law.sample(&mut rng).unwrap();
                chi_square_release(&law, q, &params, &mut rng).unwrap().value
            })
            .collect();
        let (mean, var) = mean_variance(&samples);
        assert!((mean - 7.5).abs() < 3.0 * (var / n as f64).sqrt());
        let d = ks_statistic(samples, |x| noncentral_chisq_cdf(x, 5.0, 2.5).unwrap());
        assert!(d < ks_critical_value(n, 0.01));
    }

    #[test]
    fn release_rejects_wrong_regime() {
        let law = ResidualLaw::gaussian(10.0, 2.0).unwrap();
        let params = PrivacyParams::chi_square(1.0, 0.1, 1).unwrap();
        assert!(chi_square_release(&law, 1.0, &params, &mut SeedStream::new(0, 0)).is_err());
    }

    fn scan_model() -> (MeasurementModel, AttackVector) {
        let m = MeasurementModel::random(10, 4, 1.0, 0.0, &mut SeedStream::new(5, 0)).unwrap();
        (m, AttackVector::new(10, vec![3], vec![2.0]).unwrap())
    }

    #[test]
    fn collapsing_neighborhood_has_no_leakage() {
        let (m, a) = scan_model();
        let mut prev = 1.0;
        for bound in [1e-1, 1e-3, 1e-6] {
            let spec = NeighborhoodSpec::new(bound, 200).unwrap();
            let d = delta_max_over_neighborhood(1.0, &m, &a, 1, &spec, &mut SeedStream::new(6, 0))
                .unwrap();
            assert!(d.delta <= prev);
            prev = d.delta;
        }
        assert!(prev < 1e-12);
    }

    #[test]
    fn scan_max_dominates_each_pair() {
        let (m, a) = scan_model();
        let spec = NeighborhoodSpec::new(0.2, 300).unwrap();
        let scan = NeighborScan::new(&m, &a, &spec, &mut SeedStream::new(7, 0)).unwrap();
        let r_tilde = (scan.dof + 1) as f64;
        let best = scan.delta_max(1.0, r_tilde).unwrap();
        for s in &scan.neighbors {
            let d = delta_for_epsilon(1.0, r_tilde, scan.theta, s.theta_prime).unwrap();
            assert!(best.delta >= d);
        }
        assert!(best.argmax.is_some());
    }

    #[test]
    fn theta_grid_is_reported() {
        let (m, a) = scan_model();
        let spec = NeighborhoodSpec::new(0.05, 50)
            .unwrap()
            .with_theta_domain(0.5, 1.0)
            .unwrap();
        let d = delta_max_over_neighborhood(2.0, &m, &a, 1, &spec, &mut SeedStream::new(8, 0))
            .unwrap();
        let g = d.grid_delta.unwrap();
        assert!(d.delta >= g && d.delta >= d.scan_delta);
        assert!(NeighborhoodSpec::new(0.1, 10).unwrap().with_theta_domain(1.0, 1.0).is_err());
    }

    #[test]
    fn delta_curve_is_nonincreasing() {
        let (m, a) = scan_model();
        let spec = NeighborhoodSpec::new(0.1, 200).unwrap();
        let scan = NeighborScan::new(&m, &a, &spec, &mut SeedStream::new(9, 0)).unwrap();
        let eps: Vec<f64> = (1..30).map(|i| 0.1 * i as f64).collect();
        let rows = delta_curve(&scan, 1, &eps).unwrap();
        assert!(rows.windows(2).all(|w| w[1].delta <= w[0].delta));
        let direct = scan.delta_max(0.5, rows[0].r_tilde).unwrap().delta;
        assert_eq!(rows[4].delta, direct);
    }
}
