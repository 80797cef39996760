//! Scalar special functions and distribution primitives.
//!
//! Everything here is pure and `f64`-based. Incomplete gamma, `ln Γ` and
//! `erfc_inv` come from `statrs`, `erfc` from `libm`. Marcum Q, the noncentral chi-square law, the
//! modified Bessel function of the first kind and all inverses are evaluated
//! locally, with explicit truncation control through [`Tolerance`].

mod bessel;
mod gamma;
mod marcum;
mod normal;

pub use bessel::{bessel_i, ln_bessel_i};
pub use gamma::{
    ln_gamma, regularized_gamma_p, regularized_gamma_q, regularized_gamma_q_inverse,
};
pub use marcum::{
    marcum_q, marcum_q_with, noncentral_chisq_cdf, noncentral_chisq_cdf_with,
    noncentral_chisq_ln_pdf, noncentral_chisq_quantile, noncentral_chisq_sample,
    noncentral_chisq_sf,
};
pub use normal::{gaussian_cdf, gaussian_q, gaussian_q_inverse};

use crate::error::{Error, Result};

/// Truncation control for series evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_terms: usize) -> Result<Self> {
        if !(abs_tol > 0.0) {
            return Err(Error::param("abs_tol", "must be > 0"));
        }
        if !(rel_tol > 0.0) {
            return Err(Error::param("rel_tol", "must be > 0"));
        }
        if max_terms == 0 {
            return Err(Error::param("max_terms", "must be >= 1"));
        }
        Ok(Self {
            abs_tol,
            rel_tol,
            max_terms,
        })
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_terms: 1_000_000,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_rejects_nonpositive() {
        assert!(Tolerance::new(0.0, 1e-10, 10).is_err());
        assert!(Tolerance::new(1e-12, -1.0, 10).is_err());
        assert!(Tolerance::new(1e-12, 1e-10, 0).is_err());
        assert!(Tolerance::new(f64::NAN, 1e-10, 1).is_err());
        assert_eq!(
            Tolerance::new(1e-12, 1e-10, 1_000_000).unwrap(),
            Tolerance::default()
        );
    }
}
