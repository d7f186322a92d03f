//! Regularized particle filtering for hidden Markov models.
//!
//! The crate has three layers:
//!
//! * [`models`]: state-space models behind the [`HmmModel`] trait, plus a
//!   simulator for synthetic observations;
//! * [`kalman`]: exact linear-Gaussian recursions and the asymptotic laws of
//!   the regularized filter, used as oracles;
//! * [`smc`]: the particle filter engine (SIS, bootstrap SIR and the
//!   regularized variant) with resampling policies and bandwidth schedules.
//!
//! [`experiments`] wires these together into reproducible studies that
//! write CSV traces.

// `!(x > 0.0)` is used on purpose to reject NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod kalman;
pub mod linalg;
pub mod models;
pub mod rng;
pub mod smc;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use models::{GaussianBelief, HmmModel, StreamRng};
pub use rng::{Purpose, StreamKey};
