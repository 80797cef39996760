//! The linear(ized) measurement model `z = Hx + a + η`, `η ~ N(0, σ²I)`.
//!
//! `H` is either the system matrix of a DC model or the Jacobian of a
//! nonlinear model at its operating point; both enter the same way. Noise is
//! assumed white, so callers with correlated noise must pre-whiten.

mod projection;
mod reduce;

pub use projection::{
    neighbor_projection, neighbor_projection_update, Projection, ProjectionUpdater, UpdatePath,
};
pub use reduce::{gsp_reduce, stealth_attack};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// A state vector (ground truth `x_o` or an estimate `x⋆`).
pub type StateVector = DVector<f64>;

/// System matrix `H` (m×n), noise scale `σ` and regularization `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementModel {
    h: DMatrix<f64>,
    sigma: f64,
    lambda: f64,
    rank: usize,
}

impl MeasurementModel {
    /// Validates the model. With `lambda = 0`, `H` must have full column rank.
    pub fn new(h: DMatrix<f64>, sigma: f64, lambda: f64) -> Result<Self> {
        if h.nrows() == 0 || h.ncols() == 0 {
            return Err(Error::param("H", "needs at least one row and column"));
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("H", "entries must be finite"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::param("sigma", format!("{sigma} must be positive")));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::param("lambda", format!("{lambda} must be >= 0")));
        }
        let rank = numerical_rank(&h);
        if lambda == 0.0 && rank < h.ncols() {
            return Err(Error::RankDeficient {
                rank,
                cols: h.ncols(),
            });
        }
        Ok(Self {
            h,
            sigma,
            lambda,
            rank,
        })
    }

    /// A model with i.i.d. standard normal entries in `H`.
    pub fn random<R: Rng + ?Sized>(
        m: usize,
        n: usize,
        sigma: f64,
        lambda: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let h = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        Self::new(h, sigma, lambda)
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of measurements.
    pub fn m(&self) -> usize {
        self.h.nrows()
    }

    /// Number of states.
    pub fn n(&self) -> usize {
        self.h.ncols()
    }

    /// Numerical rank of `H`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.h.clone(), self.sigma, lambda)
    }

    /// The distance-one neighbor `H' = H + e Δ_hᵀ`.
    pub fn apply_neighbor(&self, pert: &NeighborPerturbation) -> Result<Self> {
        pert.check(self)?;
        let mut h = self.h.clone();
        for (j, d) in pert.delta_h.iter().enumerate() {
            h[(pert.row_index, j)] += d;
        }
        Self::new(h, self.sigma, self.lambda)
    }
}

/// `P` or `P_λ` for `model`, with its numerical rank.
pub fn projection_matrix(model: &MeasurementModel) -> Result<Projection> {
    Projection::of(model)
}

/// Rank by singular values above `max(m, n) · ε · σ_max`.
pub fn numerical_rank(h: &DMatrix<f64>) -> usize {
    let sv = h.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let tol = h.nrows().max(h.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > tol).count()
}

/// A sparse false-data injection.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackVector {
    m: usize,
    support: Vec<usize>,
    values: Vec<f64>,
}

impl AttackVector {
    pub fn new(m: usize, support: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::DimensionMismatch {
                op: "AttackVector::new",
                expected: support.len(),
                got: values.len(),
            });
        }
        if let Some(&i) = support.iter().find(|&&i| i >= m) {
            return Err(Error::param("attack.indices", format!("index {i} >= m = {m}")));
        }
        let mut seen = support.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::param("attack.indices", "duplicate index"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("attack.values", "entries must be finite"));
        }
        Ok(Self { m, support, values })
    }

    pub fn zero(m: usize) -> Self {
        Self {
            m,
            support: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Support is every nonzero entry of `a`.
    pub fn from_dense(a: &DVector<f64>) -> Self {
        let (support, values) = a
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .unzip();
        Self {
            m: a.len(),
            support,
            values,
        }
    }

    pub fn dense(&self) -> DVector<f64> {
        let mut a = DVector::zeros(self.m);
        for (&i, &v) in self.support.iter().zip(&self.values) {
            a[i] = v;
        }
        a
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// One sensor's model row changes: `h' = h + Δ_h` at `row_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborPerturbation {
    pub row_index: usize,
    pub delta_h: DVector<f64>,
}

impl NeighborPerturbation {
    fn check(&self, model: &MeasurementModel) -> Result<()> {
        if self.row_index >= model.m() {
            return Err(Error::param(
                "row_index",
                format!("{} >= m = {}", self.row_index, model.m()),
            ));
        }
        if self.delta_h.len() != model.n() {
            return Err(Error::DimensionMismatch {
                op: "NeighborPerturbation",
                expected: model.n(),
                got: self.delta_h.len(),
            });
        }
        if self.delta_h.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("delta_h", "entries must be finite"));
        }
        Ok(())
    }
}

/// Draws `z = H x + a + η`.
pub fn simulate_measurements<R: Rng + ?Sized>(
    model: &MeasurementModel,
    x_true: &StateVector,
    attack: &AttackVector,
    rng: &mut R,
) -> Result<DVector<f64>> {
    check_dims(model, x_true, attack)?;
    let noise = DVector::from_fn(model.m(), |_, _| {
        model.sigma * rng.sample::<f64, _>(StandardNormal)
    });
    Ok(model.h() * x_true + attack.dense() + noise)
}

pub(crate) fn check_dims(
    model: &MeasurementModel,
    x: &StateVector,
    attack: &AttackVector,
) -> Result<()> {
    if x.len() != model.n() {
        return Err(Error::DimensionMismatch {
            op: "state",
            expected: model.n(),
            got: x.len(),
        });
    }
    if attack.len() != model.m() {
        return Err(Error::DimensionMismatch {
            op: "attack",
            expected: model.m(),
            got: attack.len(),
        });
    }
    Ok(())
}
