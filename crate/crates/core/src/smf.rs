//! Smooth maximum: log-sum-exp surrogate for the per-client maximum.
//!
//! The driver never optimizes `max_i v_i` directly; it works on
//! `smf(v, δ) = δ · ln Σ_i exp(v_i / δ)`, which is smooth and sandwiches the
//! true maximum:
//!
//! ```text
//! max_i v_i  ≤  smf(v, δ)  ≤  max_i v_i + δ · ln N
//! ```
//!
//! Shrinking `δ` tightens the envelope, so the optimizer anneals it whenever
//! progress stalls (the squared step norm falls under `eps_d`).

use crate::scalar::Scalar;

/// Smallest `δ` the decay schedule will produce. Below this the surrogate is
/// indistinguishable from the hard maximum at `f64` precision for the value
/// ranges seen here, and the softmax weights start to saturate.
pub const DELTA_FLOOR: f64 = 1e-6;

/// Annealing state for the two smoothing temperatures: `delta_l` smooths the
/// per-client loss maximum, `delta_g` the per-client constraint-slack
/// maximum.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothingState<F: Scalar> {
    pub delta_l: F,
    pub delta_g: F,
    /// Multiplicative decay factor in `(0, 1)`.
    pub beta: F,
    /// Squared-step-norm threshold that triggers a decay.
    pub eps_d: F,
}

impl<F: Scalar> Default for SmoothingState<F> {
    fn default() -> Self {
        Self {
            delta_l: F::cast(0.1),
            delta_g: F::cast(0.1),
            beta: F::cast(0.5),
            eps_d: F::cast(1e-8),
        }
    }
}

impl<F: Scalar> SmoothingState<F> {
    /// True once `delta_l` has hit the floor (up to a relative 1e-9 slop so
    /// `floor * beta^0` comparisons are robust).
    pub fn loss_delta_floored(&self) -> bool {
        self.delta_l <= F::cast(DELTA_FLOOR) * F::cast(1.0 + 1e-9)
    }
}

/// Smooth maximum `δ · ln Σ exp(v_i / δ)`, evaluated with the max-shift trick
/// so huge `v_i / δ` ratios cannot overflow.
///
/// Panics on an empty slice or a nonpositive `δ`; both indicate caller bugs,
/// not data conditions.
pub fn smf_value<F: Scalar>(values: &[F], delta: F) -> F {
    assert!(!values.is_empty(), "smf_value needs at least one value");
    assert!(delta > F::zero(), "smoothing delta must be positive");
    let vmax = values.iter().copied().fold(values[0], F::max);
    let sum: F = values.iter().map(|&v| ((v - vmax) / delta).exp()).sum();
    vmax + delta * sum.ln()
}

/// Softmax weights `exp(v_i/δ) / Σ_j exp(v_j/δ)`.
///
/// These are exactly the coefficients that turn per-client gradients into the
/// gradient of [`smf_value`]: `∇ smf(v(θ), δ) = Σ_i w_i ∇v_i(θ)`.
pub fn smf_grad_weights<F: Scalar>(values: &[F], delta: F) -> Vec<F> {
    assert!(!values.is_empty(), "smf_grad_weights needs at least one value");
    assert!(delta > F::zero(), "smoothing delta must be positive");
    let vmax = values.iter().copied().fold(values[0], F::max);
    let mut weights: Vec<F> = values.iter().map(|&v| ((v - vmax) / delta).exp()).collect();
    let sum: F = weights.iter().copied().sum();
    for w in &mut weights {
        *w = *w / sum;
    }
    weights
}

/// Decay rule: if the applied step was tiny (`‖d‖² ≤ eps_d`), multiply both
/// temperatures by `beta`, never dropping below [`DELTA_FLOOR`]. Returns
/// whether a decay fired.
pub fn decay<F: Scalar>(state: &mut SmoothingState<F>, dir_sq_norm: F) -> bool {
    if dir_sq_norm > state.eps_d {
        return false;
    }
    let floor = F::cast(DELTA_FLOOR);
    state.delta_l = (state.delta_l * state.beta).max(floor);
    state.delta_g = (state.delta_g * state.beta).max(floor);
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn equal_values_add_exactly_delta_ln_n() {
        let v = [0.5f64, 0.5];
        assert_relative_eq!(
            smf_value(&v, 0.1),
            0.5 + 0.1 * 2.0f64.ln(),
            max_relative = 1e-15
        );
        assert_relative_eq!(smf_value(&v, 0.1), 0.5693147180559945, max_relative = 1e-14);
    }

    #[test]
    fn single_value_is_identity() {
        assert_relative_eq!(smf_value(&[0.37f64], 0.1), 0.37, max_relative = 1e-15);
        assert_relative_eq!(smf_value(&[0.37f64], 1e-6), 0.37, max_relative = 1e-15);
        assert_eq!(smf_grad_weights(&[0.37f64], 0.1), vec![1.0]);
    }

    #[test]
    fn large_spread_does_not_overflow() {
        // Naive exp(v/δ) would overflow at v/δ = 1e6; the shifted form is the
        // max plus an exponentially small correction.
        let v = [1.0f64, 0.0];
        let s = smf_value(&v, 1e-6);
        assert!(s.is_finite());
        assert_relative_eq!(s, 1.0, max_relative = 1e-12);
        let w = smf_grad_weights(&v, 1e-6);
        assert!(w[0] > 1.0 - 1e-12 && w[1] < 1e-12);
    }

    #[test]
    fn weights_lean_toward_the_max() {
        let w = smf_grad_weights(&[0.2f64, 0.8], 0.1);
        assert!(w[1] > w[0]);
        assert_relative_eq!(w[0] + w[1], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn decay_halves_until_floor() {
        let mut st = SmoothingState::<f64>::default();
        assert!(!decay(&mut st, 1.0)); // large step: no decay
        assert_eq!(st.delta_l, 0.1);
        assert!(decay(&mut st, 0.0));
        assert_relative_eq!(st.delta_l, 0.05);
        assert_relative_eq!(st.delta_g, 0.05);
        for _ in 0..200 {
            decay(&mut st, 0.0);
        }
        assert_eq!(st.delta_l, DELTA_FLOOR);
        assert_eq!(st.delta_g, DELTA_FLOOR);
        assert!(st.loss_delta_floored());
    }

    proptest! {
        // The sandwich bound from the construction:
        // max ≤ smf ≤ max + δ ln N.
        #[test]
        fn sandwich_bound_holds(
            v in prop::collection::vec(-10.0f64..10.0, 1..50),
            delta in prop::sample::select(vec![1.0f64, 0.1, 0.01]),
        ) {
            let vmax = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let s = smf_value(&v, delta);
            prop_assert!(s >= vmax - 1e-12);
            prop_assert!(s <= vmax + delta * (v.len() as f64).ln() + 1e-12);
        }

        // Weights always form a point on the probability simplex.
        #[test]
        fn weights_on_simplex(
            v in prop::collection::vec(-10.0f64..10.0, 1..50),
            delta in 1e-6f64..1.0,
        ) {
            let w = smf_grad_weights(&v, delta);
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(w.iter().all(|&wi| (0.0..=1.0).contains(&wi)));
        }

        // Monotone: raising any coordinate cannot lower the smooth max.
        #[test]
        fn monotone_in_each_coordinate(
            v in prop::collection::vec(-5.0f64..5.0, 2..20),
            idx in 0usize..20,
            bump in 0.0f64..3.0,
        ) {
            let idx = idx % v.len();
            let mut v2 = v.clone();
            v2[idx] += bump;
            prop_assert!(smf_value(&v2, 0.1) >= smf_value(&v, 0.1) - 1e-12);
        }
    }
}
