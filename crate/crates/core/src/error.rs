use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error in {op}: {detail}")]
    Domain { op: &'static str, detail: String },

    /// A series or iteration did not reach tolerance within its term budget.
    #[error("{op} did not converge within {terms} terms")]
    Convergence { op: &'static str, terms: usize },

    #[error("{op} overflowed f64 for argument {arg}")]
    Overflow { op: &'static str, arg: f64 },

    #[error("dimension mismatch in {op}: expected {expected}, got {got}")]
    DimensionMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    /// H has numerical rank below its column count and no regularization is set.
    #[error("system matrix is rank deficient: rank {rank} < {cols} columns")]
    RankDeficient { rank: usize, cols: usize },

    /// The rank-one update hit a vanishing denominator.
    #[error("singular Sherman-Morrison update (denominator {denominator:e})")]
    SingularUpdate { denominator: f64 },

    /// The residual has zero degrees of freedom, so there is nothing to test.
    #[error("residual has zero degrees of freedom")]
    NoResiduals,

    #[error("matrix columns are not orthonormal (max deviation {deviation:e})")]
    NotOrthonormal { deviation: f64 },

    #[error("invalid parameter `{name}`: {detail}")]
    InvalidParameter { name: &'static str, detail: String },

    #[error("regime mismatch: {0}")]
    Regime(String),

    /// A Monte Carlo rate disagreed with its analytic value.
    #[error("{quantity}: empirical {empirical} vs analytic {analytic} exceeds {k_se} standard errors ({se})")]
    Validation {
        quantity: &'static str,
        empirical: f64,
        analytic: f64,
        se: f64,
        k_se: f64,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Domain {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn param(name: &'static str, detail: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            detail: detail.into(),
        }
    }
}
