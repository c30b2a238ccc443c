//! Direction search: picks the update step from a hull of gradients.
//!
//! Each iteration of the driver forms the convex hull of a set of gradients
//! `G = [g_1 .. g_m]` and chooses coefficients `α` on the probability simplex
//! so that the *applied step* `s = −η · (α^T G)` descends the quantity the
//! current phase cares about while not ascending others:
//!
//! * while constraints are satisfied — steepest descent of the smoothed
//!   worst-case loss, keeping the smoothed constraint slack under budget;
//! * while constraints are violated — steepest descent of the smoothed slack,
//!   keeping the smoothed loss from rising (dropping that guard when the two
//!   are irreconcilably opposed, because restoring feasibility has priority);
//! * in the refinement phase — steepest descent of the average client loss,
//!   with no client loss and no slack allowed to rise.
//!
//! All of those are linear programs in `α` after taking inner products with
//! the hull, which is exactly what [`reduce`](DirectionProblem::reduce)
//! produces and the dense simplex solver in [`crate::lp`] consumes.
//!
//! Sign convention used throughout: a functional `q` is non-increasing along
//! the applied step iff `⟨α^T G, ∇q⟩ ≥ 0`, and descending `q` as fast as
//! possible means maximizing `⟨α^T G, ∇q⟩`, i.e. LP-minimizing against the
//! negated gradient.

use log::warn;

use crate::lp::{solve_lp, LpRow, LpStatus};
use crate::scalar::Scalar;

/// Gradients below this norm are treated as exactly zero; a direction search
/// whose objective gradient vanishes returns a zero step instead of letting
/// tie-breaking pick an arbitrary hull member.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// When the guarded slack descent achieves less than this fraction of the
/// unguarded descent, the loss guard is considered irreconcilable and is
/// dropped (violation restoration takes priority).
pub const RELAX_STALL_FACTOR: f64 = 1e-3;

/// What a hull column is the gradient of. Only used for diagnostics and for
/// the documented relaxation order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HullRole {
    /// Per-client loss gradient `∇l_i`.
    Loss(usize),
    /// Per-client disparity gradient `∇g_i`.
    Disparity(usize),
    /// Gradient of the smoothed maximum loss.
    SmfLoss,
    /// Gradient of the smoothed maximum constraint slack.
    SmfSlack,
}

/// Convex hull of gradient columns (all the same dimension).
#[derive(Clone, Debug)]
pub struct GradientHull<F: Scalar> {
    gradients: Vec<Vec<F>>,
    roles: Vec<HullRole>,
    dim: usize,
}

impl<F: Scalar> GradientHull<F> {
    pub fn new(gradients: Vec<Vec<F>>, roles: Vec<HullRole>) -> Self {
        assert!(!gradients.is_empty(), "hull needs at least one gradient");
        assert_eq!(gradients.len(), roles.len());
        let dim = gradients[0].len();
        assert!(
            gradients.iter().all(|g| g.len() == dim),
            "hull gradients must share a dimension"
        );
        Self {
            gradients,
            roles,
            dim,
        }
    }

    pub fn len(&self) -> usize {
        self.gradients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gradients.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gradients(&self) -> &[Vec<F>] {
        &self.gradients
    }

    pub fn roles(&self) -> &[HullRole] {
        &self.roles
    }

    /// `α^T G` for simplex coefficients `α`.
    pub fn combine(&self, alpha: &[F]) -> Vec<F> {
        assert_eq!(alpha.len(), self.gradients.len());
        let mut out = vec![F::zero(); self.dim];
        for (a, g) in alpha.iter().zip(&self.gradients) {
            if *a != F::zero() {
                for (o, gi) in out.iter_mut().zip(g) {
                    *o = *o + *a * *gi;
                }
            }
        }
        out
    }

    fn all_negligible(&self) -> bool {
        let tol = F::cast(DEGENERACY_TOL);
        self.gradients
            .iter()
            .all(|g| g.iter().all(|v| v.abs() <= tol))
    }
}

/// One alignment constraint on the combined direction:
/// `⟨α^T G, vector⟩ ≥ min_alignment`.
///
/// `min_alignment = 0` demands plain non-increase of the corresponding
/// functional along the applied step; a negative value grants a first-order
/// increase allowance (used while a constraint still has slack to spend).
#[derive(Clone, Debug)]
pub struct AlignmentRow<F: Scalar> {
    pub vector: Vec<F>,
    pub min_alignment: F,
}

/// A direction-search instance: minimize `⟨α^T G, objective⟩` over the
/// simplex subject to [`AlignmentRow`]s.
#[derive(Clone, Debug)]
pub struct DirectionProblem<F: Scalar> {
    pub hull: GradientHull<F>,
    /// LP objective vector `v`: the solver minimizes `⟨α^T G, v⟩`, so pass
    /// the *negated* gradient of whatever should descend fastest.
    pub objective: Vec<F>,
    pub rows: Vec<AlignmentRow<F>>,
    /// Row indices that may be dropped (in order) if the LP is infeasible.
    /// Rows not listed are never dropped.
    pub relax_order: Vec<usize>,
}

/// How a direction was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DirectionStatus {
    /// All constraints retained.
    Optimal,
    /// `dropped` constraint rows were removed before a solution existed (or,
    /// for the violated-constraint phase, the loss guard was abandoned as
    /// irreconcilable).
    Relaxed { dropped: usize },
    /// Objective gradient (or the whole hull) is numerically zero; the step
    /// is zero and the caller should tighten smoothing instead of moving.
    Degenerate,
}

/// Direction-search result. `combined` is `α^T G`; the optimizer applies
/// `s = −η · combined`.
#[derive(Clone, Debug)]
pub struct DirectionSolution<F: Scalar> {
    pub alpha: Vec<F>,
    pub combined: Vec<F>,
    pub status: DirectionStatus,
}

impl<F: Scalar> DirectionSolution<F> {
    fn degenerate(hull_len: usize, dim: usize) -> Self {
        let mut alpha = vec![F::zero(); hull_len];
        alpha[0] = F::one();
        Self {
            alpha,
            combined: vec![F::zero(); dim],
            status: DirectionStatus::Degenerate,
        }
    }

    /// Squared norm of the combined direction (the decay trigger input).
    pub fn dir_sq_norm(&self) -> F {
        self.combined.iter().map(|v| *v * *v).sum()
    }
}

impl<F: Scalar> DirectionProblem<F> {
    /// Projects the problem onto the simplex coefficients: objective
    /// `c_i = ⟨g_i, v⟩` and one LP lower-bound row per alignment constraint,
    /// `Σ_i α_i ⟨g_i, w_j⟩ ≥ μ_j`.
    pub fn reduce(&self) -> (Vec<F>, Vec<LpRow<F>>) {
        assert_eq!(self.objective.len(), self.hull.dim());
        let c: Vec<F> = self
            .hull
            .gradients()
            .iter()
            .map(|g| dot(g, &self.objective))
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                assert_eq!(row.vector.len(), self.hull.dim());
                let coeffs: Vec<F> = self
                    .hull
                    .gradients()
                    .iter()
                    .map(|g| dot(g, &row.vector))
                    .collect();
                LpRow::lower_bound(coeffs, row.min_alignment)
            })
            .collect();
        (c, rows)
    }

    /// Solves the reduced LP, dropping rows in `relax_order` while the LP is
    /// infeasible. Returns a zero step when the hull or the objective
    /// gradient is numerically zero.
    pub fn solve(&self) -> DirectionSolution<F> {
        let tol = F::cast(DEGENERACY_TOL);
        if self.hull.all_negligible() || self.objective.iter().all(|v| v.abs() <= tol) {
            return DirectionSolution::degenerate(self.hull.len(), self.hull.dim());
        }
        let (c, all_rows) = self.reduce();
        let mut dropped = 0usize;
        loop {
            let keep: Vec<LpRow<F>> = all_rows
                .iter()
                .enumerate()
                .filter(|(j, _)| !self.relax_order[..dropped].contains(j))
                .map(|(_, r)| r.clone())
                .collect();
            let sol = solve_lp(&c, &keep, true);
            match sol.status {
                LpStatus::Optimal => {
                    let combined = self.hull.combine(&sol.alpha);
                    let status = if dropped == 0 {
                        DirectionStatus::Optimal
                    } else {
                        DirectionStatus::Relaxed { dropped }
                    };
                    return DirectionSolution {
                        alpha: sol.alpha,
                        combined,
                        status,
                    };
                }
                LpStatus::Infeasible if dropped < self.relax_order.len() => {
                    dropped += 1;
                }
                _ => {
                    // The irreducible core is always feasible by construction
                    // (see the phase builders); reaching this means numerics
                    // broke down, so stand still rather than move blindly.
                    warn!("direction LP unsolvable after dropping {dropped} rows; returning zero step");
                    return DirectionSolution::degenerate(self.hull.len(), self.hull.dim());
                }
            }
        }
    }
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

fn norm_negligible<F: Scalar>(v: &[F]) -> bool {
    let tol = F::cast(DEGENERACY_TOL);
    v.iter().all(|x| x.abs() <= tol)
}

/// Direction while constraints are satisfied: over the hull of the two
/// smoothed gradients, descend the smoothed loss as fast as possible while
/// the slack change along the applied step stays within its allowance.
///
/// `slack_min_alignment ≤ 0` is the constraint `⟨α^T G, ∇ĝ⟩ ≥ μ`; the caller
/// derives `μ` from the remaining budget (0 once the boundary is reached).
/// The guard row is never dropped: with `μ ≤ 0` the pure-slack-gradient
/// vertex always satisfies it, so the LP cannot be infeasible.
pub fn stage1_feasible_direction<F: Scalar>(
    smf_loss_grad: &[F],
    smf_slack_grad: &[F],
    slack_min_alignment: F,
) -> DirectionSolution<F> {
    assert!(
        slack_min_alignment <= F::zero(),
        "slack allowance must be a lower bound ≤ 0"
    );
    let hull = GradientHull::new(
        vec![smf_loss_grad.to_vec(), smf_slack_grad.to_vec()],
        vec![HullRole::SmfLoss, HullRole::SmfSlack],
    );
    let problem = DirectionProblem {
        objective: negate(smf_loss_grad),
        rows: vec![AlignmentRow {
            vector: smf_slack_grad.to_vec(),
            min_alignment: slack_min_alignment,
        }],
        relax_order: vec![],
        hull,
    };
    problem.solve()
}

/// Direction while constraints are violated: descend the smoothed slack as
/// fast as possible, keeping the smoothed loss non-increasing — unless that
/// guard makes slack descent hopeless (`RELAX_STALL_FACTOR`) and the caller
/// permits dropping it, in which case feasibility is restored unconditionally
/// and the status reports the relaxation.
pub fn stage1_infeasible_direction<F: Scalar>(
    smf_loss_grad: &[F],
    smf_slack_grad: &[F],
    allow_relax: bool,
) -> DirectionSolution<F> {
    if norm_negligible(smf_slack_grad) {
        // The violated functional is locally flat; only tighter smoothing
        // can change that, so report a degenerate (zero) step.
        return DirectionSolution::degenerate(2, smf_loss_grad.len());
    }
    let hull = GradientHull::new(
        vec![smf_loss_grad.to_vec(), smf_slack_grad.to_vec()],
        vec![HullRole::SmfLoss, HullRole::SmfSlack],
    );
    let guarded = DirectionProblem {
        objective: negate(smf_slack_grad),
        rows: vec![AlignmentRow {
            vector: smf_loss_grad.to_vec(),
            min_alignment: F::zero(),
        }],
        relax_order: vec![0],
        hull: hull.clone(),
    };
    let sol = guarded.solve();
    if !allow_relax || sol.status != DirectionStatus::Optimal {
        return sol;
    }
    let guarded_descent = dot(&sol.combined, smf_slack_grad);
    let unguarded = DirectionProblem {
        objective: negate(smf_slack_grad),
        rows: vec![],
        relax_order: vec![],
        hull,
    };
    let free = unguarded.solve();
    let free_descent = dot(&free.combined, smf_slack_grad);
    if free_descent > F::zero() && guarded_descent <= F::cast(RELAX_STALL_FACTOR) * free_descent {
        return DirectionSolution {
            status: DirectionStatus::Relaxed { dropped: 1 },
            ..free
        };
    }
    sol
}

/// Which non-increase guards the refinement phase places on client losses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossGuardMode {
    /// One row per client: no individual loss may rise (the default; this is
    /// what makes refinement steps Pareto-safe).
    PerClient,
    /// A single row on the smoothed maximum loss.
    SmfOnly,
}

/// Refinement direction: over the hull of all client loss *and* disparity
/// gradients, descend the average loss subject to the loss guards and to
/// non-increase of the smoothed slack.
///
/// If the guards admit no direction, per-client rows are dropped last-added
/// first; the slack row is never dropped.
pub fn stage2_direction<F: Scalar>(
    loss_grads: &[Vec<F>],
    disparity_grads: &[Vec<F>],
    smf_loss_grad: &[F],
    smf_slack_grad: &[F],
    guard_mode: LossGuardMode,
) -> DirectionSolution<F> {
    let n_clients = loss_grads.len();
    assert!(n_clients > 0);
    assert_eq!(disparity_grads.len(), n_clients);
    let dim = loss_grads[0].len();

    let mut gradients = Vec::with_capacity(2 * n_clients);
    let mut roles = Vec::with_capacity(2 * n_clients);
    for (i, g) in loss_grads.iter().enumerate() {
        gradients.push(g.clone());
        roles.push(HullRole::Loss(i));
    }
    for (i, g) in disparity_grads.iter().enumerate() {
        gradients.push(g.clone());
        roles.push(HullRole::Disparity(i));
    }
    let hull = GradientHull::new(gradients, roles);

    let mut mean = vec![F::zero(); dim];
    let inv_n = F::one() / F::cast(n_clients as f64);
    for g in loss_grads {
        for (m, gi) in mean.iter_mut().zip(g) {
            *m = *m + *gi * inv_n;
        }
    }

    let mut rows = Vec::new();
    let mut relax_order = Vec::new();
    match guard_mode {
        LossGuardMode::PerClient => {
            for g in loss_grads {
                rows.push(AlignmentRow {
                    vector: g.clone(),
                    min_alignment: F::zero(),
                });
            }
            // Drop order: last-added client guard first.
            relax_order.extend((0..n_clients).rev());
        }
        LossGuardMode::SmfOnly => {
            rows.push(AlignmentRow {
                vector: smf_loss_grad.to_vec(),
                min_alignment: F::zero(),
            });
            relax_order.push(0);
        }
    }
    // The slack guard comes last and is deliberately absent from relax_order:
    // the pure smoothed-slack-gradient combination always satisfies it, so
    // the LP stays feasible once every loss guard is gone.
    rows.push(AlignmentRow {
        vector: smf_slack_grad.to_vec(),
        min_alignment: F::zero(),
    });

    let problem = DirectionProblem {
        objective: negate(&mean),
        rows,
        relax_order,
        hull,
    };
    problem.solve()
}

fn negate<F: Scalar>(v: &[F]) -> Vec<F> {
    v.iter().map(|x| -*x).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit(dim: usize, axis: usize) -> Vec<f64> {
        let mut v = vec![0.0; dim];
        v[axis] = 1.0;
        v
    }

    #[test]
    fn reduce_is_a_gram_projection() {
        let g = vec![0.5, -1.0, 2.0];
        let hull = GradientHull::new(vec![g.clone()], vec![HullRole::SmfLoss]);
        let problem = DirectionProblem {
            objective: g.clone(),
            rows: vec![],
            relax_order: vec![],
            hull,
        };
        let (c, rows) = problem.reduce();
        assert_eq!(rows.len(), 0);
        // Single coefficient: ⟨g, g⟩ = ‖g‖².
        assert_relative_eq!(c[0], 0.25 + 1.0 + 4.0);
    }

    #[test]
    fn feasible_phase_prefers_the_loss_gradient_when_orthogonal() {
        let g_l = unit(2, 0);
        let g_s = unit(2, 1);
        let sol = stage1_feasible_direction(&g_l, &g_s, 0.0);
        assert_eq!(sol.status, DirectionStatus::Optimal);
        assert_relative_eq!(sol.alpha[0], 1.0, epsilon = 1e-10);
        assert_relative_eq!(sol.alpha[1], 0.0, epsilon = 1e-10);
        assert_relative_eq!(sol.combined[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn feasible_phase_never_spends_more_slack_than_allowed() {
        // Loss gradient wants to ascend the slack (they point oppositely);
        // with a zero allowance the optimum must stay slack-neutral.
        let g_l = vec![1.0, 0.0];
        let g_s = vec![-1.0, 0.0];
        let sol = stage1_feasible_direction(&g_l, &g_s, 0.0);
        let along_slack: f64 = sol
            .combined
            .iter()
            .zip(&g_s)
            .map(|(a, b)| a * b)
            .sum();
        assert!(along_slack >= -1e-8);
        // With a generous allowance the pure loss direction is allowed again.
        let sol = stage1_feasible_direction(&g_l, &g_s, -10.0);
        assert_relative_eq!(sol.alpha[0], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn infeasible_phase_guards_the_loss_when_compatible() {
        let g_l = unit(2, 0);
        let g_s = unit(2, 1);
        let sol = stage1_infeasible_direction(&g_l, &g_s, true);
        assert_eq!(sol.status, DirectionStatus::Optimal);
        // Pure slack descent is compatible with the loss guard here.
        assert_relative_eq!(sol.alpha[1], 1.0, epsilon = 1e-10);
    }

    #[test]
    fn infeasible_phase_relaxes_an_antagonistic_loss_guard() {
        // ∇l = −∇g: descending the slack must ascend the loss. The guard
        // pins the step to zero progress, so it gets dropped.
        let g_l = vec![-1.0, 0.0];
        let g_s = vec![1.0, 0.0];
        let sol = stage1_infeasible_direction(&g_l, &g_s, true);
        assert_eq!(sol.status, DirectionStatus::Relaxed { dropped: 1 });
        let descent: f64 = sol.combined.iter().zip(&g_s).map(|(a, b)| a * b).sum();
        assert!(descent > 0.5);
        // Without permission the guarded (stalled) direction is returned.
        let sol = stage1_infeasible_direction(&g_l, &g_s, false);
        assert_eq!(sol.status, DirectionStatus::Optimal);
        let descent: f64 = sol.combined.iter().zip(&g_s).map(|(a, b)| a * b).sum();
        assert!(descent.abs() <= 1e-8);
    }

    #[test]
    fn vanishing_slack_gradient_is_degenerate() {
        let g_l = unit(2, 0);
        let g_s = vec![0.0, 0.0];
        let sol = stage1_infeasible_direction(&g_l, &g_s, true);
        assert_eq!(sol.status, DirectionStatus::Degenerate);
        assert!(sol.combined.iter().all(|&v| v == 0.0));
        assert_eq!(sol.dir_sq_norm(), 0.0);
    }

    #[test]
    fn refinement_zeroes_out_on_antagonistic_clients() {
        // Two clients pulling in exactly opposite directions: the average
        // gradient is zero, so the only Pareto-safe step is no step.
        let loss_grads = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let disparity_grads = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let smf_loss = vec![0.0, 0.0];
        let smf_slack = vec![0.0, 0.0];
        let sol = stage2_direction(
            &loss_grads,
            &disparity_grads,
            &smf_loss,
            &smf_slack,
            LossGuardMode::PerClient,
        );
        assert_eq!(sol.status, DirectionStatus::Degenerate);
        assert!(sol.combined.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn refinement_descends_the_mean_without_hurting_anyone() {
        // Two orthogonal client gradients: both can descend at once.
        let loss_grads = vec![unit(2, 0), unit(2, 1)];
        let disparity_grads = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
        let smf_slack = vec![0.0, 0.0];
        let sol = stage2_direction(
            &loss_grads,
            &disparity_grads,
            &vec![0.5, 0.5],
            &smf_slack,
            LossGuardMode::PerClient,
        );
        assert_eq!(sol.status, DirectionStatus::Optimal);
        for g in &loss_grads {
            let align: f64 = sol.combined.iter().zip(g).map(|(a, b)| a * b).sum();
            assert!(align >= -1e-8, "loss guard violated: {align}");
        }
        let mean_align: f64 = sol.combined.iter().map(|v| v * 0.5).sum();
        assert!(mean_align > 0.0);
    }

    #[test]
    fn returned_step_satisfies_retained_rows() {
        // Random-ish fixed instance; every retained alignment row must hold
        // within 1e-8 for the combined direction.
        let loss_grads = vec![vec![0.8, -0.3, 0.1], vec![-0.2, 0.9, 0.4]];
        let disparity_grads = vec![vec![0.1, 0.2, -0.5], vec![0.0, -0.1, 0.3]];
        let smf_slack = vec![0.05, 0.05, -0.1];
        let sol = stage2_direction(
            &loss_grads,
            &disparity_grads,
            &vec![0.3, 0.3, 0.25],
            &smf_slack,
            LossGuardMode::PerClient,
        );
        assert_eq!(sol.status, DirectionStatus::Optimal);
        let sum: f64 = sol.alpha.iter().sum();
        assert_relative_eq!(sum, 1.0, epsilon = 1e-10);
        for g in loss_grads.iter().chain(std::iter::once(&smf_slack)) {
            let align: f64 = sol.combined.iter().zip(g).map(|(a, b)| a * b).sum();
            assert!(align >= -1e-8);
        }
    }
}
