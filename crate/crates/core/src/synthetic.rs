//! Closed-form benchmark objectives.
//!
//! Two smooth losses pull the parameters toward opposite anchors `c` and
//! `-c` on the unit sphere direction `1/√n`:
//!
//! ```text
//! l₁(θ) = 1 − exp(−‖θ − c‖²)        l₂(θ) = 1 − exp(−‖θ + c‖²)
//! ```
//!
//! Both are bounded in [0, 1), each has a unique minimizer, and any point
//! minimizing one maximally violates the other — which makes the pair a
//! sharp test for constrained descent. Because every optimum of any convex
//! combination lies on the segment between `-c` and `c`, a dense 1-D grid
//! over that segment is an exact-enough oracle for the constrained optimum.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::fedsim::ObjectiveBundle;
use crate::model::ParameterVector;
use crate::problem::{ClientReport, ObjectiveProvider};
use crate::scalar::Scalar;

/// The anchor pair in `n` dimensions, `c = (1/√n, …, 1/√n)` so `‖c‖ = 1`.
#[derive(Clone, Debug)]
pub struct SyntheticPair<F: Scalar> {
    center: Vec<F>,
}

impl<F: Scalar> SyntheticPair<F> {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "need at least one coordinate");
        let coord = F::one() / F::cast(n as f64).sqrt();
        Self {
            center: vec![coord; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &[F] {
        &self.center
    }

    /// `1 − exp(−‖θ − c‖²)` and its gradient `2·exp(−‖θ − c‖²)·(θ − c)`.
    pub fn toward_value_grad(&self, theta: &[F]) -> (F, Vec<F>) {
        self.value_grad(theta, false)
    }

    /// `1 − exp(−‖θ + c‖²)` and its gradient `2·exp(−‖θ + c‖²)·(θ + c)`.
    pub fn away_value_grad(&self, theta: &[F]) -> (F, Vec<F>) {
        self.value_grad(theta, true)
    }

    fn value_grad(&self, theta: &[F], flip: bool) -> (F, Vec<F>) {
        assert_eq!(theta.len(), self.center.len(), "dimension mismatch");
        let sign = if flip { F::one() } else { -F::one() };
        let diff: Vec<F> = theta
            .iter()
            .zip(&self.center)
            .map(|(&t, &c)| t + sign * c)
            .collect();
        let sq_norm: F = diff.iter().map(|&d| d * d).sum();
        let attenuation = (-sq_norm).exp();
        let grad = diff
            .iter()
            .map(|&d| F::cast(2.0) * attenuation * d)
            .collect();
        (F::one() - attenuation, grad)
    }
}

/// Point on the segment `θ(t) = t·c`, with both losses evaluated there.
#[derive(Clone, Copy, Debug)]
pub struct SegmentPoint {
    pub t: f64,
    pub toward_loss: f64,
    pub away_loss: f64,
}

fn segment_point(t: f64) -> SegmentPoint {
    // ‖t·c − c‖² = (t−1)² and ‖t·c + c‖² = (t+1)² because ‖c‖ = 1.
    SegmentPoint {
        t,
        toward_loss: 1.0 - (-(t - 1.0) * (t - 1.0)).exp(),
        away_loss: 1.0 - (-(t + 1.0) * (t + 1.0)).exp(),
    }
}

/// Brute-force oracle: minimizes the toward-loss subject to
/// `away_loss ≤ epsilon` by enumerating `points + 1` values of `t` on
/// `[-1, 1]`. Returns `None` when no grid point is feasible.
pub fn constrained_segment_optimum(epsilon: f64, points: usize) -> Option<SegmentPoint> {
    assert!(points >= 2);
    let mut best: Option<SegmentPoint> = None;
    for i in 0..=points {
        let t = -1.0 + 2.0 * i as f64 / points as f64;
        let p = segment_point(t);
        if p.away_loss <= epsilon && best.map_or(true, |b| p.toward_loss < b.toward_loss) {
            best = Some(p);
        }
    }
    best
}

/// Closed-form counterpart of [`constrained_segment_optimum`]: the binding
/// constraint gives `t* = −1 + √(−ln(1−ε))`, capped at the unconstrained
/// minimizer `t = 1`.
pub fn constrained_segment_optimum_closed_form(epsilon: f64) -> SegmentPoint {
    assert!((0.0..1.0).contains(&epsilon));
    let t = (-1.0 + (-(1.0 - epsilon).ln()).sqrt()).min(1.0);
    segment_point(t)
}

/// How to place the starting point for a benchmark run.
#[derive(Clone, Copy, Debug)]
pub enum SyntheticInit {
    /// Near `c`: best toward-loss, worst away-loss (violates any budget).
    NearTowardOptimum { noise: f64 },
    /// Near `-c`: comfortably inside typical budgets.
    NearAwayOptimum { noise: f64 },
    /// Near the origin, where both losses are equal.
    NearOrigin { noise: f64 },
}

/// Interpretation of the pair as a training problem.
#[derive(Clone, Copy, Debug)]
pub enum SyntheticMode<F: Scalar> {
    /// One client: loss = toward-loss, disparity = away-loss with budget ε.
    Constrained { epsilon: F },
    /// Two clients with losses toward/away, no disparity constraints. The
    /// min-max optimum balances the two losses.
    MinMaxPair,
}

/// Benchmark problem wired up as an [`ObjectiveProvider`].
#[derive(Clone, Debug)]
pub struct SyntheticProblem<F: Scalar> {
    pair: SyntheticPair<F>,
    mode: SyntheticMode<F>,
    init: ParameterVector<F>,
}

impl<F: Scalar> SyntheticProblem<F> {
    pub fn new(n: usize, mode: SyntheticMode<F>, init: SyntheticInit, seed: u64) -> Self {
        let pair = SyntheticPair::new(n);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (base, noise): (F, f64) = match init {
            SyntheticInit::NearTowardOptimum { noise } => (F::one(), noise),
            SyntheticInit::NearAwayOptimum { noise } => (-F::one(), noise),
            SyntheticInit::NearOrigin { noise } => (F::zero(), noise),
        };
        let coords: Vec<F> = pair
            .center()
            .iter()
            .map(|&c| base * c + F::cast(noise * (rng.gen::<f64>() * 2.0 - 1.0)))
            .collect();
        Self {
            pair,
            mode,
            init: ParameterVector::new(coords),
        }
    }

    /// Replaces the starting point (for runs that need an exact location).
    pub fn with_initial_point(mut self, init: ParameterVector<F>) -> Self {
        assert_eq!(init.len(), self.pair.dim(), "dimension mismatch");
        self.init = init;
        self
    }

    pub fn pair(&self) -> &SyntheticPair<F> {
        &self.pair
    }

    fn epsilon(&self) -> F {
        match self.mode {
            SyntheticMode::Constrained { epsilon } => epsilon,
            // Vacuous budget: disparities are identically zero.
            SyntheticMode::MinMaxPair => F::one(),
        }
    }
}

impl<F: Scalar> ObjectiveProvider<F> for SyntheticProblem<F> {
    fn dim(&self) -> usize {
        self.pair.dim()
    }

    fn num_clients(&self) -> usize {
        match self.mode {
            SyntheticMode::Constrained { .. } => 1,
            SyntheticMode::MinMaxPair => 2,
        }
    }

    fn client_ids(&self) -> Vec<String> {
        match self.mode {
            SyntheticMode::Constrained { .. } => vec!["objective".into()],
            SyntheticMode::MinMaxPair => vec!["away".into(), "toward".into()],
        }
    }

    fn budgets(&self) -> Vec<F> {
        vec![self.epsilon(); self.num_clients()]
    }

    fn sample_counts(&self) -> Vec<usize> {
        vec![1; self.num_clients()]
    }

    fn initial_point(&self, _base_rate_bias: bool) -> ParameterVector<F> {
        self.init.clone()
    }

    fn evaluate(&self, theta: &ParameterVector<F>) -> Result<ObjectiveBundle<F>> {
        let coords = theta.as_slice();
        let (toward, toward_grad) = self.pair.toward_value_grad(coords);
        let (away, away_grad) = self.pair.away_value_grad(coords);
        let dim = coords.len();
        let bundle = match self.mode {
            SyntheticMode::Constrained { epsilon } => ObjectiveBundle {
                client_ids: self.client_ids(),
                sample_counts: vec![1],
                losses: vec![toward],
                loss_grads: vec![toward_grad],
                disparities: vec![away],
                disparity_grads: vec![away_grad],
                slacks: vec![away - epsilon],
                hard_disparities: vec![away],
            },
            // Ordered to match the sorted client ids: "away" then "toward".
            SyntheticMode::MinMaxPair => ObjectiveBundle {
                client_ids: self.client_ids(),
                sample_counts: vec![1, 1],
                losses: vec![away, toward],
                loss_grads: vec![away_grad, toward_grad],
                disparities: vec![F::zero(); 2],
                disparity_grads: vec![vec![F::zero(); dim], vec![F::zero(); dim]],
                slacks: vec![-F::one(); 2],
                hard_disparities: vec![F::zero(); 2],
            },
        };
        Ok(bundle)
    }

    fn client_reports(&self, theta: &ParameterVector<F>) -> Result<Vec<ClientReport<F>>> {
        let bundle = self.evaluate(theta)?;
        let budgets = self.budgets();
        Ok((0..bundle.num_clients())
            .map(|i| ClientReport {
                client_id: bundle.client_ids[i].clone(),
                sample_count: 1,
                loss: bundle.losses[i],
                soft_disparity: bundle.disparities[i],
                hard_disparity: bundle.hard_disparities[i],
                slack: bundle.slacks[i],
                budget: budgets[i],
                accuracy: None,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::check::central_difference_gradient;
    use approx::assert_relative_eq;

    #[test]
    fn losses_at_landmarks() {
        let pair = SyntheticPair::<f64>::new(20);
        let c: Vec<f64> = pair.center().to_vec();
        let minus_c: Vec<f64> = c.iter().map(|v| -v).collect();
        let origin = vec![0.0; 20];

        let (at_c, grad_at_c) = pair.toward_value_grad(&c);
        assert_relative_eq!(at_c, 0.0);
        assert!(grad_at_c.iter().all(|&g| g == 0.0));
        // ‖c − (−c)‖² = 4.
        let (away_at_c, _) = pair.away_value_grad(&c);
        assert_relative_eq!(away_at_c, 1.0 - (-4.0f64).exp(), max_relative = 1e-14);

        let (toward_at_origin, _) = pair.toward_value_grad(&origin);
        let (away_at_origin, _) = pair.away_value_grad(&origin);
        assert_relative_eq!(toward_at_origin, 1.0 - (-1.0f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(toward_at_origin, away_at_origin);

        let (toward_at_minus_c, _) = pair.toward_value_grad(&minus_c);
        assert_relative_eq!(toward_at_minus_c, 1.0 - (-4.0f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn gradients_match_central_differences() {
        let pair = SyntheticPair::<f64>::new(7);
        let theta: Vec<f64> = (0..7).map(|i| 0.3 * (i as f64) - 0.9).collect();
        let (_, analytic_toward) = pair.toward_value_grad(&theta);
        let numeric_toward = central_difference_gradient(
            |x| pair.toward_value_grad(x).0,
            &theta,
            1e-6,
        );
        for (a, n) in analytic_toward.iter().zip(&numeric_toward) {
            assert_relative_eq!(a, n, max_relative = 1e-7, epsilon = 1e-10);
        }
        let (_, analytic_away) = pair.away_value_grad(&theta);
        let numeric_away =
            central_difference_gradient(|x| pair.away_value_grad(x).0, &theta, 1e-6);
        for (a, n) in analytic_away.iter().zip(&numeric_away) {
            assert_relative_eq!(a, n, max_relative = 1e-7, epsilon = 1e-10);
        }
    }

    #[test]
    fn grid_oracle_matches_closed_form() {
        for &eps in &[0.2, 0.4, 0.6, 0.8] {
            let grid = constrained_segment_optimum(eps, 1_000_000).unwrap();
            let exact = constrained_segment_optimum_closed_form(eps);
            assert_relative_eq!(grid.t, exact.t, epsilon = 3e-6);
            assert_relative_eq!(grid.toward_loss, exact.toward_loss, epsilon = 1e-5);
            assert!(grid.away_loss <= eps);
        }
    }

    #[test]
    fn oracle_frozen_values_at_eps_02() {
        // Independent route: closed form −1 + √(−ln 0.8) = −0.52761927…
        let exact = constrained_segment_optimum_closed_form(0.2);
        assert_relative_eq!(exact.t, -0.527_619_272_922_561_3, epsilon = 1e-12);
        assert_relative_eq!(exact.toward_loss, 0.903_055_889_117_808_2, epsilon = 1e-12);
        // A coarse grid lands within a step of the exact point.
        let coarse = constrained_segment_optimum(0.2, 50_000).unwrap();
        assert!((coarse.t - exact.t).abs() <= 2.0 / 50_000.0);
    }

    #[test]
    fn infeasible_epsilon_yields_none() {
        assert!(constrained_segment_optimum(-0.1, 100).is_none());
    }

    #[test]
    fn provider_bundles_are_consistent() {
        let problem = SyntheticProblem::<f64>::new(
            20,
            SyntheticMode::Constrained { epsilon: 0.2 },
            SyntheticInit::NearTowardOptimum { noise: 0.01 },
            7,
        );
        let theta = problem.initial_point(false);
        // Starting near c should violate the ε = 0.2 budget decisively.
        let bundle = problem.evaluate(&theta).unwrap();
        assert_eq!(bundle.num_clients(), 1);
        assert!(bundle.slacks[0] > 0.5);
        assert!(bundle.losses[0] < 0.1);

        let pairwise = SyntheticProblem::<f64>::new(
            20,
            SyntheticMode::MinMaxPair,
            SyntheticInit::NearOrigin { noise: 0.0 },
            7,
        );
        let origin = pairwise.initial_point(false);
        let bundle = pairwise.evaluate(&origin).unwrap();
        assert_eq!(bundle.client_ids, vec!["away".to_string(), "toward".to_string()]);
        assert_relative_eq!(bundle.losses[0], bundle.losses[1]);
        assert!(bundle.disparities.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn init_kinds_land_where_advertised() {
        let near_c = SyntheticProblem::<f64>::new(
            5,
            SyntheticMode::MinMaxPair,
            SyntheticInit::NearTowardOptimum { noise: 0.01 },
            3,
        );
        let pair = SyntheticPair::<f64>::new(5);
        let theta = near_c.initial_point(false);
        let dist: f64 = theta
            .as_slice()
            .iter()
            .zip(pair.center())
            .map(|(&t, &c)| (t - c) * (t - c))
            .sum();
        assert!(dist.sqrt() < 0.05);

        // Same seed, same point: construction is deterministic.
        let again = SyntheticProblem::<f64>::new(
            5,
            SyntheticMode::MinMaxPair,
            SyntheticInit::NearTowardOptimum { noise: 0.01 },
            3,
        );
        assert_eq!(theta.as_slice(), again.initial_point(false).as_slice());
    }
}
