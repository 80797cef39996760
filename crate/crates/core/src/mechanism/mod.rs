//! Privatized release of residual statistics.
//!
//! Three mechanisms are provided:
//!
//! * the chi-square mechanism, which adds an independent central `χ²_{r′}`
//!   draw to the WSSR and is `(ε, δ)`-private with `δ` from a Marcum-Q bound;
//! * a Gaussian output mechanism for the large-`m` regime, whose noise scale
//!   is calibrated numerically from the exact Gaussian leakage distribution
//!   (experimental: there is no closed-form guarantee behind it);
//! * the input-perturbation baseline, which adds Gaussian-mechanism noise to
//!   every measurement.

mod chi;
mod gaussian;

pub use chi::{
    chi_square_release, delta_curve, delta_for_epsilon, delta_max_over_neighborhood, leakage,
    DeltaCurveRow, NeighborScan, NeighborhoodDelta, NeighborhoodSpec, ScannedNeighbor,
};
pub use gaussian::{
    calibrate_nu_sigma, epsilon_for_nu_sigma, gaussian_leakage, gaussian_leakage_probability,
    gaussian_mechanism_sigma, gaussian_output_release, input_perturbation_release, InputRelease,
};

use crate::error::{Error, Result};
use crate::estimation::ResidualLaw;
use crate::rng::SeedRecord;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mechanism {
    /// Add `χ²_{r′}(0)` to the WSSR.
    ChiSquare { r_prime: u32 },
    /// Add `N(nu_mean, nu_sigma²)` to the WSSR. `nu_sigma = 0` is the
    /// no-noise limit.
    GaussianOutput { nu_mean: f64, nu_sigma: f64 },
    /// Add `N(0, kσ²)` to each measurement before estimation.
    GaussianInput { k: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrivacyParams {
    pub epsilon: f64,
    pub delta: f64,
    pub mechanism: Mechanism,
}

/// `r′ = 1`, the smallest chi-square mechanism.
pub const DEFAULT_R_PRIME: u32 = 1;

impl PrivacyParams {
    pub fn new(epsilon: f64, delta: f64, mechanism: Mechanism) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::param("epsilon", format!("{epsilon} must be > 0")));
        }
        if !(0.0..=1.0).contains(&delta) {
            return Err(Error::param("delta", format!("{delta} not in [0, 1]")));
        }
        match mechanism {
            Mechanism::ChiSquare { r_prime: 0 } => {
                return Err(Error::param("r_prime", "must be >= 1"));
            }
            Mechanism::GaussianOutput { nu_mean, nu_sigma } => {
                if !nu_mean.is_finite() {
                    return Err(Error::param("nu_mean", "must be finite"));
                }
                if !(nu_sigma >= 0.0) || !nu_sigma.is_finite() {
                    return Err(Error::param("nu_sigma", format!("{nu_sigma} must be >= 0")));
                }
            }
            Mechanism::GaussianInput { k } if !(k >= 0.0) || !k.is_finite() => {
                return Err(Error::param("input_k", format!("{k} must be >= 0")));
            }
            _ => {}
        }
        Ok(Self {
            epsilon,
            delta,
            mechanism,
        })
    }

    pub fn chi_square(epsilon: f64, delta: f64, r_prime: u32) -> Result<Self> {
        Self::new(epsilon, delta, Mechanism::ChiSquare { r_prime })
    }

    pub fn gaussian_output(epsilon: f64, delta: f64, nu_mean: f64, nu_sigma: f64) -> Result<Self> {
        Self::new(epsilon, delta, Mechanism::GaussianOutput { nu_mean, nu_sigma })
    }
}

/// A privatized statistic with the law it was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyRelease {
    pub value: f64,
    pub params: PrivacyParams,
    pub law: ResidualLaw,
    /// `None` for production releases.
    pub seed: Option<SeedRecord>,
}
