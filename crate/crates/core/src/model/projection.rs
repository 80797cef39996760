use nalgebra::{DMatrix, DVector};

use super::{MeasurementModel, NeighborPerturbation};
use crate::error::{Error, Result};

/// A residual projection `P` (or `P_λ`) with its numerical rank.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub matrix: DMatrix<f64>,
    pub rank: usize,
}

impl Projection {
    /// `P = I − H(HᵀH)⁻¹Hᵀ` via QR when `λ = 0`, otherwise
    /// `P_λ = I − H(HᵀH + λσ²I)⁻¹Hᵀ` via a Cholesky solve.
    pub fn of(model: &MeasurementModel) -> Result<Self> {
        let m = model.m();
        let h = model.h();
        if model.lambda() == 0.0 {
            let q = h.clone().qr().q();
            let matrix = DMatrix::identity(m, m) - &q * q.transpose();
            return Ok(Self {
                matrix,
                rank: m - model.rank(),
            });
        }
        let n = model.n();
        let shift = model.lambda() * model.sigma().powi(2);
        let gram = h.transpose() * h + DMatrix::identity(n, n) * shift;
        let chol = gram.cholesky().ok_or(Error::RankDeficient {
            rank: model.rank(),
            cols: n,
        })?;
        let matrix = DMatrix::identity(m, m) - h * chol.solve(&h.transpose());
        // Eigenvalues of P_λ are λσ²/(s² + λσ²) on range(H) and 1 elsewhere.
        let sv = h.singular_values();
        let tol = m.max(n) as f64 * f64::EPSILON;
        let vanishing = sv.iter().filter(|s| shift / (*s * *s + shift) <= tol).count();
        Ok(Self {
            matrix,
            rank: m - vanishing,
        })
    }

    /// `‖P z‖² / σ²`.
    pub fn quadratic_form(&self, z: &DVector<f64>, sigma: f64) -> f64 {
        (&self.matrix * z).norm_squared() / (sigma * sigma)
    }
}

/// Which route produced a neighbor's projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdatePath {
    ShermanMorrison,
    /// The rank-two update was singular and `P'` was refactored from `H'`.
    Direct,
}

/// Precomputed pieces for repeated neighbor updates of one model.
#[derive(Debug, Clone)]
pub struct ProjectionUpdater {
    h: DMatrix<f64>,
    p: DMatrix<f64>,
    c0_inv: DMatrix<f64>,
}

/// Smallest admissible Sherman-Morrison denominator.
const SINGULAR_DENOMINATOR: f64 = 1e-10;

impl ProjectionUpdater {
    pub fn new(model: &MeasurementModel) -> Result<Self> {
        if model.lambda() != 0.0 {
            return Err(Error::param(
                "lambda",
                "neighbor projection updates need an unregularized model",
            ));
        }
        let h = model.h().clone();
        let c0 = h.transpose() * &h;
        let c0_inv = c0
            .cholesky()
            .ok_or(Error::RankDeficient {
                rank: model.rank(),
                cols: model.n(),
            })?
            .inverse();
        let p = Projection::of(model)?.matrix;
        Ok(Self { h, p, c0_inv })
    }

    pub fn projection(&self) -> &DMatrix<f64> {
        &self.p
    }

    /// `P' = P + C₄` for `H' = H + eΔ_hᵀ`.
    ///
    /// `H'ᵀH' = C₀ + h'h'ᵀ − hhᵀ`, so `(H'ᵀH')⁻¹ = C₀⁻¹ + C₃` follows from two
    /// Sherman-Morrison steps: add `h'h'ᵀ`, then remove `hhᵀ`.
    pub fn update(&self, pert: &NeighborPerturbation) -> Result<DMatrix<f64>> {
        let (m, n) = self.h.shape();
        if pert.row_index >= m {
            return Err(Error::param("row_index", format!("{} >= m = {m}", pert.row_index)));
        }
        if pert.delta_h.len() != n {
            return Err(Error::DimensionMismatch {
                op: "neighbor_projection_update",
                expected: n,
                got: pert.delta_h.len(),
            });
        }
        let dh = &pert.delta_h;
        if dh.iter().all(|&v| v == 0.0) {
            return Ok(self.p.clone());
        }
        let h: DVector<f64> = self.h.row(pert.row_index).transpose();
        let hp = &h + dh;

        let u = &self.c0_inv * &hp;
        let d1 = 1.0 + hp.dot(&u);
        let b_inv = &self.c0_inv - &u * u.transpose() / d1;
        let w = &b_inv * &h;
        let d2 = 1.0 - h.dot(&w);
        if d2.abs() < SINGULAR_DENOMINATOR {
            return Err(Error::SingularUpdate { denominator: d2 });
        }
        let a_inv = &b_inv + &w * w.transpose() / d2;
        let c3 = &a_inv - &self.c0_inv;

        let mut e = DVector::zeros(m);
        e[pert.row_index] = 1.0;
        let ht_prime = self.h.transpose() + dh * e.transpose();
        let c4 = -(&self.h * (&self.c0_inv * dh)) * e.transpose()
            - (&self.h * &c3 + &e * (dh.transpose() * &a_inv)) * ht_prime;
        Ok(&self.p + c4)
    }
}

/// Sherman-Morrison projection of the neighbor model `H + eΔ_hᵀ`.
pub fn neighbor_projection_update(
    model: &MeasurementModel,
    pert: &NeighborPerturbation,
) -> Result<DMatrix<f64>> {
    ProjectionUpdater::new(model)?.update(pert)
}

/// Like [`neighbor_projection_update`], refactoring `H'` when the update is
/// singular. Reports which path was taken.
pub fn neighbor_projection(
    model: &MeasurementModel,
    pert: &NeighborPerturbation,
) -> Result<(DMatrix<f64>, UpdatePath)> {
    match neighbor_projection_update(model, pert) {
        Ok(p) => Ok((p, UpdatePath::ShermanMorrison)),
        Err(Error::SingularUpdate { .. }) => {
            let p = Projection::of(&model.apply_neighbor(pert)?)?.matrix;
            Ok((p, UpdatePath::Direct))
        }
        Err(e) => Err(e),
    }
}
