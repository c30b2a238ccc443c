//! Client shards, group-fairness metrics, and their smooth surrogates.
//!
//! Disparities are measured per client between the two groups of a binary
//! sensitive attribute. The hard variants threshold predictions at 0.5 and
//! are what gets reported; the soft variants replace the indicator with the
//! model probability so the optimizer has a differentiable surrogate:
//!
//! * demographic parity — absolute gap in positive rate between groups;
//! * equal opportunity — the same gap restricted to positively-labeled rows.

use log::warn;

use crate::error::{Error, Result};
use crate::model::{predict_labels, sigmoid, ParameterVector};
use crate::scalar::Scalar;

/// Which group-fairness notion a run constrains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetricKind {
    /// Demographic parity: gap in positive prediction rate.
    Dp,
    /// Equal opportunity: gap in true positive rate.
    Eo,
}

/// What to do when a shard lacks one of the two groups (or lacks positive
/// rows in a group, for equal opportunity).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DegenerateGroupPolicy {
    /// Surface an error; the disparity is undefined. Default.
    #[default]
    Error,
    /// Report a disparity of zero (with a logged warning) so small shards do
    /// not abort a whole federation run.
    ZeroWithWarning,
}

/// Per-client fairness budget `ε ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FairnessBudget<F: Scalar>(F);

impl<F: Scalar> FairnessBudget<F> {
    pub fn new(epsilon: F) -> Result<Self> {
        if !(epsilon >= F::zero()) {
            return Err(Error::InvalidProblem(format!(
                "fairness budget must be >= 0, got {epsilon}"
            )));
        }
        Ok(Self(epsilon))
    }

    pub fn epsilon(&self) -> F {
        self.0
    }
}

/// One client's local dataset: a dense feature matrix plus binary label and
/// binary sensitive-attribute columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientShard<F: Scalar> {
    client_id: String,
    features: Vec<F>,
    feature_dim: usize,
    labels: Vec<bool>,
    sensitive: Vec<bool>,
}

impl<F: Scalar> ClientShard<F> {
    /// Builds a shard from per-sample feature rows.
    pub fn from_rows(
        client_id: impl Into<String>,
        rows: Vec<Vec<F>>,
        labels: Vec<bool>,
        sensitive: Vec<bool>,
    ) -> Result<Self> {
        let feature_dim = rows.first().map_or(0, Vec::len);
        let mut features = Vec::with_capacity(rows.len() * feature_dim);
        for row in &rows {
            if row.len() != feature_dim {
                return Err(Error::ShapeMismatch(format!(
                    "ragged feature rows: expected {feature_dim}, got {}",
                    row.len()
                )));
            }
            features.extend_from_slice(row);
        }
        Self::from_flat(client_id, features, feature_dim, labels, sensitive)
    }

    /// Builds a shard from a row-major flat feature buffer.
    pub fn from_flat(
        client_id: impl Into<String>,
        features: Vec<F>,
        feature_dim: usize,
        labels: Vec<bool>,
        sensitive: Vec<bool>,
    ) -> Result<Self> {
        let client_id = client_id.into();
        let m = labels.len();
        if sensitive.len() != m {
            return Err(Error::ShapeMismatch(format!(
                "client {client_id}: {m} labels but {} sensitive entries",
                sensitive.len()
            )));
        }
        if feature_dim == 0 && !features.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "client {client_id}: nonempty features with feature_dim = 0"
            )));
        }
        if feature_dim != 0 && features.len() != m * feature_dim {
            return Err(Error::ShapeMismatch(format!(
                "client {client_id}: expected {m}x{feature_dim} features, got {} values",
                features.len()
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("features of client {client_id}"),
            });
        }
        Ok(Self {
            client_id,
            features,
            feature_dim,
            labels,
            sensitive,
        })
    }

    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn sensitive(&self) -> &[bool] {
        &self.sensitive
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    /// Iterator over feature rows.
    pub fn rows(&self) -> impl Iterator<Item = &[F]> + '_ {
        self.features.chunks_exact(self.feature_dim.max(1)).take(self.n_samples())
    }

    /// Fraction of positive labels.
    pub fn base_rate(&self) -> F {
        if self.labels.is_empty() {
            return F::zero();
        }
        let pos = self.labels.iter().filter(|&&y| y).count();
        F::cast(pos as f64) / F::cast(self.labels.len() as f64)
    }
}

/// Hard demographic parity: `|P(ŷ=1 | A=0) − P(ŷ=1 | A=1)|` from thresholded
/// predictions.
pub fn dp_hard<F: Scalar>(predicted: &[bool], sensitive: &[bool]) -> Result<F> {
    hard_gap(predicted, sensitive, None)
}

/// Hard equal opportunity: the positive-rate gap restricted to rows with a
/// positive true label.
pub fn eo_hard<F: Scalar>(predicted: &[bool], sensitive: &[bool], labels: &[bool]) -> Result<F> {
    hard_gap(predicted, sensitive, Some(labels))
}

fn hard_gap<F: Scalar>(
    predicted: &[bool],
    sensitive: &[bool],
    restrict_positive: Option<&[bool]>,
) -> Result<F> {
    if predicted.len() != sensitive.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} predictions vs {} sensitive entries",
            predicted.len(),
            sensitive.len()
        )));
    }
    if let Some(labels) = restrict_positive {
        if labels.len() != predicted.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} predictions vs {} labels",
                predicted.len(),
                labels.len()
            )));
        }
    }
    let mut count = [0usize; 2];
    let mut hits = [0usize; 2];
    for i in 0..predicted.len() {
        if let Some(labels) = restrict_positive {
            if !labels[i] {
                continue;
            }
        }
        let g = usize::from(sensitive[i]);
        count[g] += 1;
        hits[g] += usize::from(predicted[i]);
    }
    for g in 0..2 {
        if count[g] == 0 {
            let what = if restrict_positive.is_some() {
                "no positively-labeled samples"
            } else {
                "no samples"
            };
            return Err(Error::DegenerateGroup {
                client_id: String::new(),
                detail: format!("group {g} has {what}"),
            });
        }
    }
    let rate = |g: usize| F::cast(hits[g] as f64) / F::cast(count[g] as f64);
    Ok((rate(0) - rate(1)).abs())
}

/// Soft demographic parity: absolute difference of group-mean predicted
/// probabilities. Differentiable almost everywhere; coincides with
/// [`dp_hard`] once probabilities saturate to the hard labels.
pub fn dp_soft<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<F> {
    soft_gap(theta, shard, MetricKind::Dp, DegenerateGroupPolicy::Error).map(|(v, _)| v)
}

/// Gradient of [`dp_soft`] with respect to `theta`.
///
/// `∇|m_0 − m_1| = sign(m_0 − m_1)·(∇m_0 − ∇m_1)` with the tie subgradient
/// fixed to zero, so the gradient is defined everywhere.
pub fn grad_dp_soft<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<Vec<F>> {
    soft_gap_with_grad(theta, shard, MetricKind::Dp, DegenerateGroupPolicy::Error).map(|(_, g)| g)
}

/// Soft equal opportunity (the [`dp_soft`] construction on positively-labeled
/// rows).
pub fn eo_soft<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<F> {
    soft_gap(theta, shard, MetricKind::Eo, DegenerateGroupPolicy::Error).map(|(v, _)| v)
}

/// Gradient of [`eo_soft`].
pub fn grad_eo_soft<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<Vec<F>> {
    soft_gap_with_grad(theta, shard, MetricKind::Eo, DegenerateGroupPolicy::Error).map(|(_, g)| g)
}

/// Soft disparity value only, under an explicit degenerate-group policy.
pub fn soft_gap<F: Scalar>(
    theta: &ParameterVector<F>,
    shard: &ClientShard<F>,
    kind: MetricKind,
    policy: DegenerateGroupPolicy,
) -> Result<(F, F)> {
    let stats = group_stats(theta, shard, kind, policy, false)?;
    Ok((stats.gap, stats.signed_diff))
}

/// Soft disparity together with its gradient; this is what the federated
/// round uses so group sums are computed once.
pub fn soft_gap_with_grad<F: Scalar>(
    theta: &ParameterVector<F>,
    shard: &ClientShard<F>,
    kind: MetricKind,
    policy: DegenerateGroupPolicy,
) -> Result<(F, Vec<F>)> {
    let stats = group_stats(theta, shard, kind, policy, true)?;
    Ok((stats.gap, stats.grad.expect("gradient requested")))
}

struct GroupGapStats<F: Scalar> {
    gap: F,
    signed_diff: F,
    grad: Option<Vec<F>>,
}

fn group_stats<F: Scalar>(
    theta: &ParameterVector<F>,
    shard: &ClientShard<F>,
    kind: MetricKind,
    policy: DegenerateGroupPolicy,
    want_grad: bool,
) -> Result<GroupGapStats<F>> {
    if shard.n_samples() == 0 {
        return Err(Error::EmptyClient {
            client_id: shard.client_id().to_owned(),
        });
    }
    if theta.feature_dim() != shard.feature_dim() {
        return Err(Error::ShapeMismatch(format!(
            "theta expects {} features, shard {:?} has {}",
            theta.feature_dim(),
            shard.client_id(),
            shard.feature_dim()
        )));
    }
    let n = theta.len();
    let mut count = [0usize; 2];
    let mut prob_sum = [F::zero(), F::zero()];
    let mut grad_sum = if want_grad {
        Some([vec![F::zero(); n], vec![F::zero(); n]])
    } else {
        None
    };
    for i in 0..shard.n_samples() {
        if kind == MetricKind::Eo && !shard.labels()[i] {
            continue;
        }
        let g = usize::from(shard.sensitive()[i]);
        let x = shard.row(i);
        let p = sigmoid(theta.score(x));
        count[g] += 1;
        prob_sum[g] = prob_sum[g] + p;
        if let Some(sums) = grad_sum.as_mut() {
            // ∇σ(z) = σ(1−σ)·[x; 1]
            let s = p * (F::one() - p);
            let gs = &mut sums[g];
            for (acc, xi) in gs[..n - 1].iter_mut().zip(x) {
                *acc = *acc + s * *xi;
            }
            gs[n - 1] = gs[n - 1] + s;
        }
    }
    if count[0] == 0 || count[1] == 0 {
        let which = if count[0] == 0 { 0 } else { 1 };
        let what = match kind {
            MetricKind::Dp => "no samples",
            MetricKind::Eo => "no positively-labeled samples",
        };
        match policy {
            DegenerateGroupPolicy::Error => {
                return Err(Error::DegenerateGroup {
                    client_id: shard.client_id().to_owned(),
                    detail: format!("group {which} has {what}"),
                });
            }
            DegenerateGroupPolicy::ZeroWithWarning => {
                warn!(
                    "client {}: group {which} has {what}; treating disparity as 0",
                    shard.client_id()
                );
                return Ok(GroupGapStats {
                    gap: F::zero(),
                    signed_diff: F::zero(),
                    grad: want_grad.then(|| vec![F::zero(); n]),
                });
            }
        }
    }
    let mean = |g: usize| prob_sum[g] / F::cast(count[g] as f64);
    let diff = mean(0) - mean(1);
    let sign = if diff > F::zero() {
        F::one()
    } else if diff < F::zero() {
        -F::one()
    } else {
        F::zero()
    };
    let grad = grad_sum.map(|sums| {
        let mut out = vec![F::zero(); n];
        for j in 0..n {
            let m0 = sums[0][j] / F::cast(count[0] as f64);
            let m1 = sums[1][j] / F::cast(count[1] as f64);
            out[j] = sign * (m0 - m1);
        }
        out
    });
    Ok(GroupGapStats {
        gap: diff.abs(),
        signed_diff: diff,
        grad,
    })
}

/// Constraint slack `g − ε`: nonpositive iff the budget is met.
pub fn fairness_slack<F: Scalar>(disparity: F, budget: &FairnessBudget<F>) -> F {
    disparity - budget.epsilon()
}

/// Fraction of samples whose thresholded prediction matches the label.
pub fn accuracy<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<F> {
    if shard.n_samples() == 0 {
        return Err(Error::EmptyClient {
            client_id: shard.client_id().to_owned(),
        });
    }
    let predicted = predict_labels(theta, shard)?;
    let hits = predicted
        .iter()
        .zip(shard.labels())
        .filter(|(p, y)| p == y)
        .count();
    Ok(F::cast(hits as f64) / F::cast(shard.n_samples() as f64))
}
