use nalgebra::{DMatrix, DVector};

use super::{AttackVector, MeasurementModel};
use crate::error::{Error, Result};

const ORTHONORMAL_TOL: f64 = 1e-8;

/// Low-pass graph-signal reduction `H' = H U_κ`.
///
/// The state is restricted to the span of the κ columns of `U_κ`, which must
/// be orthonormal. With `κ < m` this yields residuals even when `m < n`.
pub fn gsp_reduce(model: &MeasurementModel, u_kappa: &DMatrix<f64>) -> Result<MeasurementModel> {
    let (rows, kappa) = u_kappa.shape();
    if rows != model.n() {
        return Err(Error::DimensionMismatch {
            op: "gsp_reduce",
            expected: model.n(),
            got: rows,
        });
    }
    if kappa == 0 || kappa >= model.m() {
        return Err(Error::param(
            "kappa",
            format!("{kappa} must lie in 1..{}", model.m()),
        ));
    }
    let gram = u_kappa.transpose() * u_kappa;
    let deviation = (gram - DMatrix::identity(kappa, kappa)).amax();
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }
    MeasurementModel::new(model.h() * u_kappa, model.sigma(), model.lambda())
}

/// The undetectable attack `a = H c`, which satisfies `Pa = 0`.
pub fn stealth_attack(model: &MeasurementModel, coeffs: &DVector<f64>) -> Result<AttackVector> {
    if model.lambda() != 0.0 {
        return Err(Error::param(
            "lambda",
            "stealth attacks are defined for the unregularized model",
        ));
    }
    if coeffs.len() != model.n() {
        return Err(Error::DimensionMismatch {
            op: "stealth_attack",
            expected: model.n(),
            got: coeffs.len(),
        });
    }
    Ok(AttackVector::from_dense(&(model.h() * coeffs)))
}
