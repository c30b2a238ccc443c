//! Logistic model: probabilities, binary cross-entropy, analytic gradients.
//!
//! The hypothesis is a single logistic regressor shared by every client. Its
//! parameters live in one flat vector laid out `[w_1, ..., w_f, b]`, i.e. the
//! bias is carried as a trailing coefficient against a constant-1 feature.
//! Anything differentiable could be swapped in later — the optimizer only
//! ever consumes `(value, gradient)` pairs — but the solver ships with this
//! model because every tabular benchmark here is a binary classification
//! task.

use crate::error::{Error, Result};
use crate::metrics::ClientShard;
use crate::scalar::Scalar;

/// Probabilities are clamped into `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the
/// loss so that saturated samples cannot produce infinite cross-entropy.
pub const PROB_CLAMP: f64 = 1e-7;

/// Flat parameter vector `[w_1, ..., w_f, b]` for a logistic model over
/// `f`-dimensional features.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterVector<F: Scalar> {
    values: Vec<F>,
}

impl<F: Scalar> ParameterVector<F> {
    /// Wraps an existing flat vector. `values.len()` must be `feature_dim + 1`.
    pub fn new(values: Vec<F>) -> Self {
        assert!(
            !values.is_empty(),
            "parameter vector needs at least a bias entry"
        );
        Self { values }
    }

    /// All-zero parameters for the given feature dimension (bias included).
    pub fn zeros(feature_dim: usize) -> Self {
        Self::new(vec![F::zero(); feature_dim + 1])
    }

    /// Total length `f + 1`.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Feature dimension `f` (length minus the bias slot).
    pub fn feature_dim(&self) -> usize {
        self.values.len() - 1
    }

    pub fn weights(&self) -> &[F] {
        &self.values[..self.values.len() - 1]
    }

    pub fn bias(&self) -> F {
        self.values[self.values.len() - 1]
    }

    pub fn bias_mut(&mut self) -> &mut F {
        let last = self.values.len() - 1;
        &mut self.values[last]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [F] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<F> {
        self.values
    }

    /// Linear score `w·x + b` for one feature row.
    pub fn score(&self, x: &[F]) -> F {
        debug_assert_eq!(x.len(), self.feature_dim());
        let mut z = self.bias();
        for (w, xi) in self.weights().iter().zip(x) {
            z = z + *w * *xi;
        }
        z
    }

    /// In-place `self += scale * other`, used for applying steps.
    pub fn axpy(&mut self, scale: F, other: &[F]) {
        debug_assert_eq!(other.len(), self.values.len());
        for (v, o) in self.values.iter_mut().zip(other) {
            *v = *v + scale * *o;
        }
    }
}

/// Numerically stable logistic function.
pub fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// Per-sample probabilities `sigmoid(w·x_i + b)` for every row of the shard.
///
/// Outputs are in `[0, 1]`; mathematically they are strictly inside `(0, 1)`
/// but heavily saturated scores round to exactly 0 or 1 in floating point.
/// The loss and gradient paths clamp before taking logs, so saturation is
/// harmless.
pub fn predict_proba<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<Vec<F>> {
    check_dims(theta, shard)?;
    Ok(shard
        .rows()
        .map(|x| sigmoid(theta.score(x)))
        .collect())
}

/// Hard labels at the 0.5 threshold.
pub fn predict_labels<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<Vec<bool>> {
    let half = F::cast(0.5);
    Ok(predict_proba(theta, shard)?
        .into_iter()
        .map(|p| p >= half)
        .collect())
}

/// Mean binary cross-entropy of the shard under `theta`.
///
/// Probabilities are clamped to `[1e-7, 1 - 1e-7]` before the logs so the
/// result is always finite. Empty shards are an error rather than a silent 0
/// — an empty client would otherwise vanish from the min-max objective.
pub fn bce_loss<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<F> {
    check_not_empty(shard)?;
    check_dims(theta, shard)?;
    let lo = F::cast(PROB_CLAMP);
    let hi = F::one() - lo;
    let mut total = F::zero();
    for (x, y) in shard.rows().zip(shard.labels()) {
        let p = sigmoid(theta.score(x)).max(lo).min(hi);
        let term = if *y { p.ln() } else { (F::one() - p).ln() };
        total = total - term;
    }
    Ok(total / F::cast(shard.n_samples() as f64))
}

/// Analytic gradient of [`bce_loss`]: `(1/m) Σ (p_i − y_i) · [x_i; 1]`.
///
/// Matches central finite differences of the unclamped loss wherever no
/// sample is saturated past the clamp.
pub fn grad_bce<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<Vec<F>> {
    check_not_empty(shard)?;
    check_dims(theta, shard)?;
    let n = theta.len();
    let mut grad = vec![F::zero(); n];
    for (x, y) in shard.rows().zip(shard.labels()) {
        let p = sigmoid(theta.score(x));
        let r = p - if *y { F::one() } else { F::zero() };
        for (g, xi) in grad[..n - 1].iter_mut().zip(x) {
            *g = *g + r * *xi;
        }
        grad[n - 1] = grad[n - 1] + r;
    }
    let inv_m = F::one() / F::cast(shard.n_samples() as f64);
    for g in &mut grad {
        *g = *g * inv_m;
    }
    Ok(grad)
}

fn check_not_empty<F: Scalar>(shard: &ClientShard<F>) -> Result<()> {
    if shard.n_samples() == 0 {
        return Err(Error::EmptyClient {
            client_id: shard.client_id().to_owned(),
        });
    }
    Ok(())
}

fn check_dims<F: Scalar>(theta: &ParameterVector<F>, shard: &ClientShard<F>) -> Result<()> {
    if theta.feature_dim() != shard.feature_dim() {
        return Err(Error::ShapeMismatch(format!(
            "theta expects {} features, shard {:?} has {}",
            theta.feature_dim(),
            shard.client_id(),
            shard.feature_dim()
        )));
    }
    Ok(())
}
