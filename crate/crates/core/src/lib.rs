//! Fairness-constrained min-max optimization for federated learning.
//!
//! This crate trains a single shared model over several clients so that the
//! worst-off client's loss is as small as possible while every client's group
//! disparity stays within its own budget. Training runs in two phases: first
//! a constrained min-max descent on smoothed surrogates of the worst loss and
//! worst constraint slack, then a refinement phase that lowers the average
//! loss without letting any client's loss — or any disparity budget — regress.
//!
//! Everything numeric is generic over the [`Scalar`] floating-point type;
//! `f64` aliases for the common types live at the crate root.

pub mod check;
pub mod data;
pub mod direction;
pub mod error;
pub mod fedsim;
pub mod lp;
pub mod metrics;
pub mod model;
pub mod optimizer;
pub mod problem;
pub mod scalar;
pub mod smf;
pub mod synthetic;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// `f64` parameter vector.
pub type ParameterVector64 = model::ParameterVector<f64>;
/// `f64` client shard.
pub type ClientShard64 = metrics::ClientShard<f64>;
/// `f64` federated problem.
pub type FederatedProblem64 = fedsim::FederatedProblem<f64>;
/// `f64` objective bundle.
pub type ObjectiveBundle64 = fedsim::ObjectiveBundle<f64>;
/// `f64` optimizer configuration.
pub type OptimizerConfig64 = optimizer::OptimizerConfig<f64>;
/// `f64` run outcome.
pub type RunOutcome64 = optimizer::RunOutcome<f64>;
