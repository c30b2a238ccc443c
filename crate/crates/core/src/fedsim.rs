//! Federated simulation: client rounds, server-side aggregation, splits.
//!
//! The communication pattern mirrors a real deployment even though everything
//! runs in one process: a client round sees one shard and produces only O(n)
//! aggregates (losses, gradients, disparities — never per-sample data), and
//! the server concatenates those records into an [`ObjectiveBundle`] ordered
//! by client id. Keeping that boundary honest in the types is what makes the
//! simulator a faithful stand-in.

use std::collections::BTreeMap;

use crate::data::{EncodedDataset, Table};
use crate::error::{Error, Result};
use crate::metrics::{
    self, accuracy, dp_hard, eo_hard, ClientShard, DegenerateGroupPolicy, FairnessBudget,
    MetricKind,
};
use crate::model::{bce_loss, grad_bce, predict_labels, ParameterVector};
use crate::problem::{ClientReport, ObjectiveProvider};
use crate::scalar::Scalar;

/// Everything one client sends back from a round: per-client scalars and
/// length-`n` vectors only. This struct is the privacy boundary — if a field
/// scaling with the sample count shows up here, something is wrong.
#[derive(Clone, Debug)]
pub struct ClientRecord<F: Scalar> {
    pub client_id: String,
    pub sample_count: usize,
    pub loss: F,
    pub loss_grad: Vec<F>,
    /// Soft (differentiable) disparity.
    pub disparity: F,
    pub disparity_grad: Vec<F>,
    /// `disparity − ε` for this client's budget.
    pub slack: F,
    /// Thresholded-prediction disparity, for reporting.
    pub hard_disparity: F,
}

/// Server-side view of one round: client records concatenated in client-id
/// order, no reweighting.
#[derive(Clone, Debug)]
pub struct ObjectiveBundle<F: Scalar> {
    pub client_ids: Vec<String>,
    pub sample_counts: Vec<usize>,
    pub losses: Vec<F>,
    pub loss_grads: Vec<Vec<F>>,
    pub disparities: Vec<F>,
    pub disparity_grads: Vec<Vec<F>>,
    pub slacks: Vec<F>,
    pub hard_disparities: Vec<F>,
}

impl<F: Scalar> ObjectiveBundle<F> {
    pub fn num_clients(&self) -> usize {
        self.losses.len()
    }
}

/// Runs one client locally: loss, analytic gradients, soft and hard
/// disparity, and the budget slack.
pub fn client_round<F: Scalar>(
    theta: &ParameterVector<F>,
    shard: &ClientShard<F>,
    budget: &FairnessBudget<F>,
    metric: MetricKind,
    policy: DegenerateGroupPolicy,
) -> Result<ClientRecord<F>> {
    let loss = bce_loss(theta, shard)?;
    let loss_grad = grad_bce(theta, shard)?;
    let (disparity, disparity_grad) = metrics::soft_gap_with_grad(theta, shard, metric, policy)?;
    let predicted = predict_labels(theta, shard)?;
    let hard_disparity = hard_gap_with_policy(&predicted, shard, metric, policy)?;
    Ok(ClientRecord {
        client_id: shard.client_id().to_owned(),
        sample_count: shard.n_samples(),
        loss,
        loss_grad,
        disparity,
        disparity_grad,
        slack: metrics::fairness_slack(disparity, budget),
        hard_disparity,
    })
}

fn hard_gap_with_policy<F: Scalar>(
    predicted: &[bool],
    shard: &ClientShard<F>,
    metric: MetricKind,
    policy: DegenerateGroupPolicy,
) -> Result<F> {
    let hard = match metric {
        MetricKind::Dp => dp_hard(predicted, shard.sensitive()),
        MetricKind::Eo => eo_hard(predicted, shard.sensitive(), shard.labels()),
    };
    match (hard, policy) {
        (Ok(v), _) => Ok(v),
        (Err(Error::DegenerateGroup { .. }), DegenerateGroupPolicy::ZeroWithWarning) => {
            Ok(F::zero())
        }
        (Err(Error::DegenerateGroup { detail, .. }), DegenerateGroupPolicy::Error) => {
            Err(Error::DegenerateGroup {
                client_id: shard.client_id().to_owned(),
                detail,
            })
        }
        (Err(e), _) => Err(e),
    }
}

/// Concatenates client records into a bundle, sorted by client id so the
/// result does not depend on arrival order.
pub fn aggregate<F: Scalar>(mut records: Vec<ClientRecord<F>>) -> Result<ObjectiveBundle<F>> {
    if records.is_empty() {
        return Err(Error::InvalidProblem("no client records to aggregate".into()));
    }
    records.sort_by(|a, b| a.client_id.cmp(&b.client_id));
    for pair in records.windows(2) {
        if pair[0].client_id == pair[1].client_id {
            return Err(Error::InvalidProblem(format!(
                "duplicate client id {:?}",
                pair[0].client_id
            )));
        }
    }
    let dim = records[0].loss_grad.len();
    for r in &records {
        if r.loss_grad.len() != dim || r.disparity_grad.len() != dim {
            return Err(Error::ShapeMismatch(format!(
                "client {:?} gradients have inconsistent dimension",
                r.client_id
            )));
        }
    }
    let mut bundle = ObjectiveBundle {
        client_ids: Vec::with_capacity(records.len()),
        sample_counts: Vec::with_capacity(records.len()),
        losses: Vec::with_capacity(records.len()),
        loss_grads: Vec::with_capacity(records.len()),
        disparities: Vec::with_capacity(records.len()),
        disparity_grads: Vec::with_capacity(records.len()),
        slacks: Vec::with_capacity(records.len()),
        hard_disparities: Vec::with_capacity(records.len()),
    };
    for r in records {
        bundle.client_ids.push(r.client_id);
        bundle.sample_counts.push(r.sample_count);
        bundle.losses.push(r.loss);
        bundle.loss_grads.push(r.loss_grad);
        bundle.disparities.push(r.disparity);
        bundle.disparity_grads.push(r.disparity_grad);
        bundle.slacks.push(r.slack);
        bundle.hard_disparities.push(r.hard_disparity);
    }
    Ok(bundle)
}

/// A full federation: shards, aligned budgets, and the metric policy.
#[derive(Clone, Debug)]
pub struct FederatedProblem<F: Scalar> {
    shards: Vec<ClientShard<F>>,
    budgets: Vec<FairnessBudget<F>>,
    metric: MetricKind,
    policy: DegenerateGroupPolicy,
}

impl<F: Scalar> FederatedProblem<F> {
    /// Validates and sorts clients by id (budgets travel with their shard).
    pub fn new(
        shards: Vec<ClientShard<F>>,
        budgets: Vec<FairnessBudget<F>>,
        metric: MetricKind,
        policy: DegenerateGroupPolicy,
    ) -> Result<Self> {
        if shards.is_empty() {
            return Err(Error::InvalidProblem("a federation needs at least one client".into()));
        }
        if shards.len() != budgets.len() {
            return Err(Error::InvalidProblem(format!(
                "{} shards but {} budgets",
                shards.len(),
                budgets.len()
            )));
        }
        let dim = shards[0].feature_dim();
        for s in &shards {
            if s.n_samples() == 0 {
                return Err(Error::EmptyClient {
                    client_id: s.client_id().to_owned(),
                });
            }
            if s.feature_dim() != dim {
                return Err(Error::ShapeMismatch(format!(
                    "client {:?} has feature dim {}, expected {dim}",
                    s.client_id(),
                    s.feature_dim()
                )));
            }
        }
        let mut pairs: Vec<_> = shards.into_iter().zip(budgets).collect();
        pairs.sort_by(|a, b| a.0.client_id().cmp(b.0.client_id()));
        for w in pairs.windows(2) {
            if w[0].0.client_id() == w[1].0.client_id() {
                return Err(Error::InvalidProblem(format!(
                    "duplicate client id {:?}",
                    w[0].0.client_id()
                )));
            }
        }
        let (shards, budgets) = pairs.into_iter().unzip();
        Ok(Self {
            shards,
            budgets,
            metric,
            policy,
        })
    }

    pub fn shards(&self) -> &[ClientShard<F>] {
        &self.shards
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    /// Replaces every budget, keeping client order (used by budget sweeps).
    pub fn with_budgets(mut self, budgets: Vec<FairnessBudget<F>>) -> Result<Self> {
        if budgets.len() != self.shards.len() {
            return Err(Error::InvalidProblem(format!(
                "{} budgets for {} clients",
                budgets.len(),
                self.shards.len()
            )));
        }
        self.budgets = budgets;
        Ok(self)
    }

    /// Pooled positive-label rate across all clients.
    pub fn pooled_base_rate(&self) -> F {
        let total: usize = self.shards.iter().map(ClientShard::n_samples).sum();
        let positives: usize = self
            .shards
            .iter()
            .map(|s| s.labels().iter().filter(|&&y| y).count())
            .sum();
        F::cast(positives as f64) / F::cast(total.max(1) as f64)
    }
}

impl<F: Scalar> ObjectiveProvider<F> for FederatedProblem<F> {
    fn dim(&self) -> usize {
        self.shards[0].feature_dim() + 1
    }

    fn num_clients(&self) -> usize {
        self.shards.len()
    }

    fn client_ids(&self) -> Vec<String> {
        self.shards.iter().map(|s| s.client_id().to_owned()).collect()
    }

    fn budgets(&self) -> Vec<F> {
        self.budgets.iter().map(FairnessBudget::epsilon).collect()
    }

    fn sample_counts(&self) -> Vec<usize> {
        self.shards.iter().map(ClientShard::n_samples).collect()
    }

    fn initial_point(&self, base_rate_bias: bool) -> ParameterVector<F> {
        let mut theta = ParameterVector::zeros(self.shards[0].feature_dim());
        if base_rate_bias {
            let rate = self
                .pooled_base_rate()
                .max(F::cast(1e-6))
                .min(F::cast(1.0 - 1e-6));
            *theta.bias_mut() = (rate / (F::one() - rate)).ln();
        }
        theta
    }

    fn evaluate(&self, theta: &ParameterVector<F>) -> Result<ObjectiveBundle<F>> {
        let records = self
            .shards
            .iter()
            .zip(&self.budgets)
            .map(|(shard, budget)| client_round(theta, shard, budget, self.metric, self.policy))
            .collect::<Result<Vec<_>>>()?;
        aggregate(records)
    }

    fn client_reports(&self, theta: &ParameterVector<F>) -> Result<Vec<ClientReport<F>>> {
        let bundle = self.evaluate(theta)?;
        let mut reports = Vec::with_capacity(self.shards.len());
        for (i, shard) in self.shards.iter().enumerate() {
            reports.push(ClientReport {
                client_id: bundle.client_ids[i].clone(),
                sample_count: bundle.sample_counts[i],
                loss: bundle.losses[i],
                soft_disparity: bundle.disparities[i],
                hard_disparity: bundle.hard_disparities[i],
                slack: bundle.slacks[i],
                budget: self.budgets[i].epsilon(),
                accuracy: Some(accuracy(theta, shard)?),
            });
        }
        Ok(reports)
    }
}

/// Splits an encoded dataset into two shards by an equality predicate on a
/// raw text column: rows where `column == value` form the first shard. An
/// empty side is an error unless `allow_empty`, in which case that side is
/// dropped with a warning.
pub fn split_by_predicate<F: Scalar>(
    table: &Table,
    encoded: &EncodedDataset<F>,
    column: &str,
    value: &str,
    allow_empty: bool,
) -> Result<Vec<ClientShard<F>>> {
    let cells = table.text_column(column)?;
    check_row_count(table, encoded)?;
    let matching: Vec<usize> = (0..table.n_rows()).filter(|&i| cells[i] == value).collect();
    let rest: Vec<usize> = (0..table.n_rows()).filter(|&i| cells[i] != value).collect();
    if matching.is_empty() || rest.is_empty() {
        let detail = format!(
            "predicate {column} == {value:?} leaves an empty side ({} matching rows of {})",
            matching.len(),
            table.n_rows()
        );
        if !allow_empty {
            return Err(Error::InvalidProblem(detail));
        }
        log::warn!("{detail}; dropping the empty shard");
    }
    let mut shards = Vec::new();
    if !matching.is_empty() {
        shards.push(encoded.subset(&format!("{column}={value}"), &matching)?);
    }
    if !rest.is_empty() {
        shards.push(encoded.subset(&format!("{column}!={value}"), &rest)?);
    }
    Ok(shards)
}

/// Splits an encoded dataset into one shard per distinct value of a raw text
/// column, in sorted key order.
pub fn split_by_key<F: Scalar>(
    table: &Table,
    encoded: &EncodedDataset<F>,
    column: &str,
) -> Result<Vec<ClientShard<F>>> {
    let cells = table.text_column(column)?;
    check_row_count(table, encoded)?;
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, key) in cells.iter().enumerate() {
        groups.entry(key).or_default().push(i);
    }
    groups
        .into_iter()
        .map(|(key, rows)| encoded.subset(key, &rows))
        .collect()
}

fn check_row_count<F: Scalar>(table: &Table, encoded: &EncodedDataset<F>) -> Result<()> {
    if table.n_rows() != encoded.n_rows() {
        return Err(Error::ShapeMismatch(format!(
            "table has {} rows but encoded dataset has {}",
            table.n_rows(),
            encoded.n_rows()
        )));
    }
    Ok(())
}
