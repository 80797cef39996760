//! Differentially private release of state-estimation residuals for
//! bad-data detection in linearized measurement models.
//!
//! The crate is organized bottom-up:
//!
//! * [`special`] scalar special functions (Marcum Q, noncentral chi-square,
//!   incomplete gamma, Bessel I, Gaussian tails).
//! * [`model`] the measurement model `z = Hx + a + η`, its projection
//!   matrices, distance-one neighbors, stealth attacks and graph-signal
//!   reductions.
//! * [`estimation`] WLS/RWLS estimates, the WSSR statistic and its exact and
//!   approximate laws.
//! * [`mechanism`] the chi-square and Gaussian release mechanisms and their
//!   privacy accounting.
//! * [`detection`] thresholds, Pfa/Pd, ROC curves and Monte Carlo validation.
//! * [`cli`] the config-driven experiment front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod detection;
pub mod error;
pub mod estimation;
pub mod mechanism;
pub mod model;
pub mod rng;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use rng::{SeedRecord, SeedStream};
