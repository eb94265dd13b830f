//! Order-adaptive identification of partially observed LTI systems.
//!
//! The pipeline estimates a Hankel matrix of Markov parameters by least
//! squares ([`estimators`]), hard-thresholds its singular values at a
//! data-driven level ([`lowrank`]), and realizes `(A, B, C)` from the
//! thresholded matrix with the Ho-Kalman algorithm ([`hokalman`]). The rank
//! that survives thresholding is the order estimate.
//!
//! [`harness`] runs seeded Monte-Carlo sweeps over sample budgets and
//! compares against a baseline that is told the true order.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod hankel;
pub mod harness;
pub mod hokalman;
pub mod io;
pub mod lowrank;
pub mod lti;
pub mod metrics;
pub mod seed;

pub use error::{Result, SysIdError};
pub use hankel::HankelMatrix;
pub use hokalman::{IdentificationResult, Realization};
pub use lti::{NoiseSpec, StateSpaceSystem, Trajectory};
pub use seed::RandomSeed;
