//! The interface the optimizer trains against.
//!
//! Both the federated simulator and the closed-form benchmark objectives
//! implement [`ObjectiveProvider`], so the two training stages never know
//! whether losses come from logistic models over shards or from analytic
//! formulas.

use crate::error::Result;
use crate::fedsim::ObjectiveBundle;
use crate::model::ParameterVector;
use crate::scalar::Scalar;

/// Per-client summary for final reporting. `accuracy` is `None` when the
/// objective has no notion of labelled samples (benchmark objectives).
#[derive(Clone, Debug)]
pub struct ClientReport<F: Scalar> {
    pub client_id: String,
    pub sample_count: usize,
    pub loss: F,
    pub soft_disparity: F,
    pub hard_disparity: F,
    pub slack: F,
    pub budget: F,
    pub accuracy: Option<F>,
}

/// A multi-client objective with per-client fairness budgets.
///
/// `evaluate` must be deterministic: same parameters, same bundle, with
/// clients in a fixed order that matches `client_ids`/`budgets`/
/// `sample_counts`.
pub trait ObjectiveProvider<F: Scalar> {
    /// Parameter dimension (for linear models: feature dim + intercept).
    fn dim(&self) -> usize;

    fn num_clients(&self) -> usize;

    fn client_ids(&self) -> Vec<String>;

    /// Per-client disparity budgets ε, aligned with `client_ids`.
    fn budgets(&self) -> Vec<F>;

    /// Per-client sample counts, aligned with `client_ids`. Benchmark
    /// objectives report 1 per client.
    fn sample_counts(&self) -> Vec<usize>;

    /// Starting parameters. `base_rate_bias` asks data-backed providers to
    /// set the intercept to the logit of the pooled positive rate; providers
    /// without labels ignore it.
    fn initial_point(&self, base_rate_bias: bool) -> ParameterVector<F>;

    /// Losses, disparities, slacks, and their gradients at `theta`.
    fn evaluate(&self, theta: &ParameterVector<F>) -> Result<ObjectiveBundle<F>>;

    /// Final per-client summaries at `theta`.
    fn client_reports(&self, theta: &ParameterVector<F>) -> Result<Vec<ClientReport<F>>>;
}
