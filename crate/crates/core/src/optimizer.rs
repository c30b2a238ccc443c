//! The training loops.
//!
//! `run` drives one of two algorithms over an [`ObjectiveProvider`]:
//!
//! * **fcfl** — two stages. Stage 1 minimizes the smoothed maximum client
//!   loss subject to the smoothed maximum budget slack staying nonpositive,
//!   switching into a restoration branch whenever the slack is violated.
//!   Stage 2 refines the stage-1 point: it descends the average client loss
//!   while no client loss may rise above its stage-1 snapshot and the slack
//!   may not grow back.
//! * **fedave_fairreg** — the scalarized baseline: plain gradient descent on
//!   the sample-weighted average loss plus `fairreg_weight` times the summed
//!   soft disparities.
//!
//! Every iteration appends a record of the pre-step state plus the step
//! taken, so trajectories can be replayed and audited; both loops are
//! deterministic functions of the problem and config.

use crate::direction::{
    stage1_feasible_direction, stage1_infeasible_direction, stage2_direction, DirectionStatus,
};
pub use crate::direction::LossGuardMode;
use crate::error::{Error, Result};
use crate::fedsim::ObjectiveBundle;
use crate::model::ParameterVector;
use crate::problem::{ClientReport, ObjectiveProvider};
use crate::scalar::Scalar;
use crate::smf::{self, smf_grad_weights, smf_value, SmoothingState};
use crate::synthetic::{SyntheticInit, SyntheticMode, SyntheticProblem};

/// Which algorithm `run` executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainingMode {
    Fcfl,
    FedAveFairReg,
}

/// Knobs for both training modes. `Default` gives the settings used
/// throughout the test suite; construct with struct-update syntax for
/// overrides.
#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig<F: Scalar> {
    pub mode: TrainingMode,
    /// Step size, shared by both stages and the baseline.
    pub eta: F,
    pub max_iters_stage1: usize,
    pub max_iters_stage2: usize,
    /// Initial smoothing temperatures plus their decay rule.
    pub smoothing: SmoothingState<F>,
    /// Slack level below which the constraint counts as met (also the
    /// stage-1 convergence requirement on the smoothed slack).
    pub convergence_tol: F,
    /// Width of the safety band inside the feasible region: within
    /// `boundary_margin` of the boundary the feasible branch stops granting
    /// the slack any room to grow.
    pub boundary_margin: F,
    /// Granularity of the stage-2 loss guards.
    pub loss_nonincrease_mode: LossGuardMode,
    /// Additive tolerance on the stage-2 acceptance checks (per-client loss
    /// vs. snapshot, smoothed slack vs. its cap).
    pub stage2_loss_slack: F,
    /// Stage-2 step halvings before a direction is abandoned.
    pub max_backtracks: usize,
    /// Baseline fairness-regularizer coefficient.
    pub fairreg_weight: F,
    /// Start with the intercept at the pooled base-rate logit instead of 0.
    pub init_base_rate_bias: bool,
    /// Recorded for reproducibility of problem construction; the loops
    /// themselves draw no randomness.
    pub seed: u64,
    /// Set false to skip per-iteration records (flags and reports remain).
    pub record_history: bool,
}

impl<F: Scalar> Default for OptimizerConfig<F> {
    fn default() -> Self {
        Self {
            mode: TrainingMode::Fcfl,
            eta: F::cast(0.05),
            max_iters_stage1: 2000,
            max_iters_stage2: 500,
            smoothing: SmoothingState::default(),
            convergence_tol: F::cast(1e-4),
            boundary_margin: F::cast(1e-4),
            loss_nonincrease_mode: LossGuardMode::PerClient,
            stage2_loss_slack: F::cast(1e-6),
            max_backtracks: 20,
            fairreg_weight: F::zero(),
            init_base_rate_bias: false,
            seed: 0,
            record_history: true,
        }
    }
}

impl<F: Scalar> OptimizerConfig<F> {
    /// Rejects configs that would make the loops meaningless. Error messages
    /// name the offending field.
    pub fn validate(&self) -> Result<()> {
        let positive = [
            (self.eta, "eta"),
            (self.convergence_tol, "convergence_tol"),
            (self.stage2_loss_slack, "stage2_loss_slack"),
            (self.smoothing.delta_l, "smoothing.delta_l"),
            (self.smoothing.delta_g, "smoothing.delta_g"),
            (self.smoothing.eps_d, "smoothing.eps_d"),
        ];
        for (value, field) in positive {
            if !(value > F::zero()) || !value.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "{field} must be positive and finite, got {value}"
                )));
            }
        }
        let nonnegative = [
            (self.boundary_margin, "boundary_margin"),
            (self.fairreg_weight, "fairreg_weight"),
        ];
        for (value, field) in nonnegative {
            if value < F::zero() || !value.is_finite() {
                return Err(Error::InvalidProblem(format!(
                    "{field} must be nonnegative and finite, got {value}"
                )));
            }
        }
        if !(self.smoothing.beta > F::zero() && self.smoothing.beta < F::one()) {
            return Err(Error::InvalidProblem(format!(
                "smoothing.beta must lie in (0, 1), got {}",
                self.smoothing.beta
            )));
        }
        Ok(())
    }
}

/// Phase a trajectory record belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    /// Stage 1: constrained min-max.
    MinMax,
    /// Stage 2: Pareto refinement.
    Pareto,
    /// Scalarized baseline (single phase).
    Baseline,
    /// Trailing record holding the final state.
    Done,
}

/// Which update rule produced a record.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Feasible,
    Infeasible,
    Refine,
    Baseline,
    Final,
}

/// Pre-step state plus the step taken from it. The trailing `Done`/`Final`
/// record has a zero step, so consecutive records always bracket every
/// parameter value the run visited.
#[derive(Clone, Debug)]
pub struct IterationRecord<F: Scalar> {
    pub iter: usize,
    pub stage: Stage,
    pub branch: Branch,
    /// How the direction search ended; `None` when no search ran (baseline
    /// and final records).
    pub status: Option<DirectionStatus>,
    pub losses: Vec<F>,
    pub disparities: Vec<F>,
    pub hard_disparities: Vec<F>,
    pub slacks: Vec<F>,
    pub smoothed_loss: F,
    pub smoothed_slack: F,
    pub delta_l: F,
    pub delta_g: F,
    /// Squared norm of the combined direction before step-size scaling.
    pub dir_sq_norm: F,
    /// Step size actually applied (0 for zero steps and rejected steps).
    pub eta_used: F,
    /// Step halvings tried during stage-2 acceptance.
    pub backtracks: usize,
}

/// Outcome flags, all orthogonal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunFlags {
    /// Some client's final soft slack exceeds `convergence_tol`: the budgets
    /// could not be met and the model is best-effort.
    pub mcf_violated: bool,
    /// Stage 1 hit `max_iters_stage1` without meeting the convergence rule.
    pub budget_exhausted: bool,
    /// Stage 2 never accepted a step: the stage-1 point was already
    /// refinement-stationary (or the refinement budget was zero).
    pub pareto_stationary: bool,
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutcome<F: Scalar> {
    pub theta: ParameterVector<F>,
    pub client_ids: Vec<String>,
    pub reports: Vec<ClientReport<F>>,
    pub flags: RunFlags,
    pub stage1_iters: usize,
    pub stage2_iters: usize,
    /// Global record index where refinement began (`None` for the baseline).
    pub stage_transition_iter: Option<usize>,
    /// Per-client losses snapshotted at the stage transition; stage-2
    /// acceptance is checked against these.
    pub stage1_losses: Option<Vec<F>>,
    pub transition_mean_loss: Option<F>,
    pub final_losses: Vec<F>,
    pub final_disparities: Vec<F>,
    pub final_hard_disparities: Vec<F>,
    pub final_slacks: Vec<F>,
    pub final_mean_loss: F,
    pub final_smoothed_slack: F,
    /// Temperatures at termination.
    pub smoothing: SmoothingState<F>,
    pub history: Vec<IterationRecord<F>>,
}

/// Fairness-aware starting point: all-zero weights (every prediction 0.5,
/// hence zero soft disparity on every client), optionally with the intercept
/// moved to the pooled base-rate logit.
pub fn init_fair<F: Scalar, P: ObjectiveProvider<F> + ?Sized>(
    provider: &P,
    cfg: &OptimizerConfig<F>,
) -> ParameterVector<F> {
    provider.initial_point(cfg.init_base_rate_bias)
}

/// Runs the algorithm selected by `cfg.mode`.
pub fn run<F: Scalar, P: ObjectiveProvider<F> + ?Sized>(
    provider: &P,
    cfg: &OptimizerConfig<F>,
) -> Result<RunOutcome<F>> {
    match cfg.mode {
        TrainingMode::Fcfl => run_fcfl(provider, cfg),
        TrainingMode::FedAveFairReg => run_baseline(provider, cfg, None),
    }
}

fn run_fcfl<F: Scalar, P: ObjectiveProvider<F> + ?Sized>(
    provider: &P,
    cfg: &OptimizerConfig<F>,
) -> Result<RunOutcome<F>> {
    cfg.validate()?;
    let mut smoothing = cfg.smoothing;
    let mut theta = init_fair(provider, cfg);
    let mut history: Vec<IterationRecord<F>> = Vec::new();
    let mut step_index = 0usize;

    let mut bundle = provider.evaluate(&theta)?;
    ensure_bundle_finite(&bundle)?;
    let ghat0 = smf_value(&bundle.slacks, smoothing.delta_g);
    if ghat0 > F::zero() {
        log::warn!(
            "initial point violates the smoothed budgets (smoothed slack {ghat0}); \
             stage 1 starts in the restoration branch"
        );
    }

    // ---- Stage 1: constrained min-max -------------------------------
    let mut converged = false;
    let mut stage1_iters = 0usize;
    while stage1_iters < cfg.max_iters_stage1 {
        let loss_weights = smf_grad_weights(&bundle.losses, smoothing.delta_l);
        let grad_lhat = combine_weighted(&bundle.loss_grads, &loss_weights);
        let ghat = smf_value(&bundle.slacks, smoothing.delta_g);
        let slack_weights = smf_grad_weights(&bundle.slacks, smoothing.delta_g);
        // Slack gradients equal disparity gradients: budgets are constant.
        let grad_ghat = combine_weighted(&bundle.disparity_grads, &slack_weights);

        let feasible = ghat <= F::zero();
        let sol = if feasible {
            // Room the slack may grow into this step, in alignment units:
            // first-order, the slack moves by −η·⟨combined, ∇ĝ⟩, so a lower
            // bound μ keeps the post-step slack under −margin as long as
            // μ ≤ (ĝ + margin)/η. Clamped to ≤ 0 so the band near the
            // boundary never *forces* ascent of the loss.
            let mu = ((ghat + cfg.boundary_margin) / cfg.eta).min(F::zero());
            stage1_feasible_direction(&grad_lhat, &grad_ghat, mu)
        } else {
            // Dropping the loss guard is always on the table: restoration
            // steps are violation-clamped below, so the loss damage from a
            // relaxed step is itself proportional to the violation.
            stage1_infeasible_direction(&grad_lhat, &grad_ghat, true)
        };
        let dir_sq_norm = sol.dir_sq_norm();
        let zero_step =
            sol.status == DirectionStatus::Degenerate || dir_sq_norm == F::zero();
        // Restoration steps are clamped so the slack lands at zero to first
        // order instead of overshooting deep into the feasible region; a
        // fixed step would ping-pong across the boundary forever and the
        // direction norm could never settle below the decay trigger.
        let mut eta_used = if zero_step { F::zero() } else { cfg.eta };
        if !feasible && !zero_step {
            let slack_descent = dot(&sol.combined, &grad_ghat);
            if slack_descent > F::zero() {
                eta_used = eta_used.min(ghat / slack_descent);
            }
        }

        if cfg.record_history {
            history.push(IterationRecord {
                iter: step_index,
                stage: Stage::MinMax,
                branch: if feasible { Branch::Feasible } else { Branch::Infeasible },
                status: Some(sol.status),
                losses: bundle.losses.clone(),
                disparities: bundle.disparities.clone(),
                hard_disparities: bundle.hard_disparities.clone(),
                slacks: bundle.slacks.clone(),
                smoothed_loss: smf_value(&bundle.losses, smoothing.delta_l),
                smoothed_slack: ghat,
                delta_l: smoothing.delta_l,
                delta_g: smoothing.delta_g,
                dir_sq_norm,
                eta_used,
                backtracks: 0,
            });
        }
        step_index += 1;
        stage1_iters += 1;

        if !zero_step {
            theta.axpy(-eta_used, &sol.combined);
        }
        smf::decay(&mut smoothing, dir_sq_norm);
        if dir_sq_norm <= smoothing.eps_d
            && smoothing.loss_delta_floored()
            && ghat <= cfg.convergence_tol
        {
            converged = true;
            break;
        }
        bundle = provider.evaluate(&theta)?;
        ensure_bundle_finite(&bundle)?;
    }

    // ---- Stage 2: Pareto refinement ----------------------------------
    let stage_transition_iter = step_index;
    let snapshot = provider.evaluate(&theta)?;
    ensure_bundle_finite(&snapshot)?;
    let stage1_losses = snapshot.losses.clone();
    let transition_mean_loss = mean(&snapshot.losses);
    let transition_ghat = smf_value(&snapshot.slacks, smoothing.delta_g);
    // Slack may not grow back past where stage 1 left it (or past zero,
    // whichever is looser — a feasible point must stay feasible).
    let ghat_cap = transition_ghat.max(F::zero()) + cfg.stage2_loss_slack;

    let mut bundle = snapshot;
    let mut stage2_iters = 0usize;
    let mut accepted_any = false;
    while stage2_iters < cfg.max_iters_stage2 {
        let loss_weights = smf_grad_weights(&bundle.losses, smoothing.delta_l);
        let grad_lhat = combine_weighted(&bundle.loss_grads, &loss_weights);
        let slack_weights = smf_grad_weights(&bundle.slacks, smoothing.delta_g);
        let grad_ghat = combine_weighted(&bundle.disparity_grads, &slack_weights);
        let sol = stage2_direction(
            &bundle.loss_grads,
            &bundle.disparity_grads,
            &grad_lhat,
            &grad_ghat,
            cfg.loss_nonincrease_mode,
        );
        let dir_sq_norm = sol.dir_sq_norm();
        let stationary =
            sol.status == DirectionStatus::Degenerate || dir_sq_norm <= smoothing.eps_d;

        let mut eta_used = F::zero();
        let mut backtracks = 0usize;
        let mut accepted: Option<(ParameterVector<F>, ObjectiveBundle<F>)> = None;
        if !stationary {
            let mut eta_try = cfg.eta;
            loop {
                let mut cand = theta.clone();
                cand.axpy(-eta_try, &sol.combined);
                let cand_bundle = provider.evaluate(&cand)?;
                ensure_bundle_finite(&cand_bundle)?;
                let losses_ok = cand_bundle
                    .losses
                    .iter()
                    .zip(&stage1_losses)
                    .all(|(l, s)| *l <= *s + cfg.stage2_loss_slack);
                let slack_ok =
                    smf_value(&cand_bundle.slacks, smoothing.delta_g) <= ghat_cap;
                if losses_ok && slack_ok {
                    eta_used = eta_try;
                    accepted = Some((cand, cand_bundle));
                    break;
                }
                if backtracks >= cfg.max_backtracks {
                    break;
                }
                backtracks += 1;
                eta_try = eta_try / F::cast(2.0);
            }
        }

        if cfg.record_history {
            history.push(IterationRecord {
                iter: step_index,
                stage: Stage::Pareto,
                branch: Branch::Refine,
                status: Some(sol.status),
                losses: bundle.losses.clone(),
                disparities: bundle.disparities.clone(),
                hard_disparities: bundle.hard_disparities.clone(),
                slacks: bundle.slacks.clone(),
                smoothed_loss: smf_value(&bundle.losses, smoothing.delta_l),
                smoothed_slack: smf_value(&bundle.slacks, smoothing.delta_g),
                delta_l: smoothing.delta_l,
                delta_g: smoothing.delta_g,
                dir_sq_norm,
                eta_used,
                backtracks,
            });
        }
        step_index += 1;
        stage2_iters += 1;

        match accepted {
            Some((cand, cand_bundle)) => {
                theta = cand;
                bundle = cand_bundle;
                accepted_any = true;
            }
            // Stationary, or no admissible step at any tried step size.
            None => break,
        }
    }

    finish_run(
        provider,
        cfg,
        theta,
        smoothing,
        history,
        step_index,
        RunShape {
            stage1_iters,
            stage2_iters,
            stage_transition_iter: Some(stage_transition_iter),
            stage1_losses: Some(stage1_losses),
            transition_mean_loss: Some(transition_mean_loss),
            budget_exhausted: !converged,
            pareto_stationary: !accepted_any,
        },
    )
}

/// Scalarized baseline: gradient descent on
/// `Σ_k w_k·loss_k + fairreg_weight·Σ_k disparity_k`. Weights default to
/// sample-count shares; `weight_override` substitutes explicit ones (used
/// by weight sweeps) and is applied exactly as given, without renormalizing.
pub fn run_baseline<F: Scalar, P: ObjectiveProvider<F> + ?Sized>(
    provider: &P,
    cfg: &OptimizerConfig<F>,
    weight_override: Option<&[F]>,
) -> Result<RunOutcome<F>> {
    cfg.validate()?;
    let n_clients = provider.num_clients();
    let weights: Vec<F> = match weight_override {
        Some(w) => {
            if w.len() != n_clients {
                return Err(Error::InvalidProblem(format!(
                    "{} scalarization weights for {} clients",
                    w.len(),
                    n_clients
                )));
            }
            if w.iter().any(|v| !v.is_finite() || *v < F::zero()) {
                return Err(Error::InvalidProblem(
                    "scalarization weights must be finite and nonnegative".into(),
                ));
            }
            w.to_vec()
        }
        None => {
            let counts = provider.sample_counts();
            let total: usize = counts.iter().sum();
            counts
                .iter()
                .map(|&c| F::cast(c as f64) / F::cast(total.max(1) as f64))
                .collect()
        }
    };

    let smoothing = cfg.smoothing; // constant: the baseline never anneals
    let mut theta = init_fair(provider, cfg);
    let mut history: Vec<IterationRecord<F>> = Vec::new();
    let mut step_index = 0usize;
    let mut bundle = provider.evaluate(&theta)?;
    ensure_bundle_finite(&bundle)?;

    let mut converged = false;
    let mut iters = 0usize;
    while iters < cfg.max_iters_stage1 {
        let mut grad = vec![F::zero(); theta.len()];
        for (g, &w) in bundle.loss_grads.iter().zip(&weights) {
            for (acc, &gi) in grad.iter_mut().zip(g) {
                *acc = *acc + w * gi;
            }
        }
        if cfg.fairreg_weight > F::zero() {
            for g in &bundle.disparity_grads {
                for (acc, &gi) in grad.iter_mut().zip(g) {
                    *acc = *acc + cfg.fairreg_weight * gi;
                }
            }
        }
        let dir_sq_norm: F = grad.iter().map(|v| *v * *v).sum();
        let zero_step = dir_sq_norm <= smoothing.eps_d;

        if cfg.record_history {
            history.push(IterationRecord {
                iter: step_index,
                stage: Stage::Baseline,
                branch: Branch::Baseline,
                status: None,
                losses: bundle.losses.clone(),
                disparities: bundle.disparities.clone(),
                hard_disparities: bundle.hard_disparities.clone(),
                slacks: bundle.slacks.clone(),
                smoothed_loss: smf_value(&bundle.losses, smoothing.delta_l),
                smoothed_slack: smf_value(&bundle.slacks, smoothing.delta_g),
                delta_l: smoothing.delta_l,
                delta_g: smoothing.delta_g,
                dir_sq_norm,
                eta_used: if zero_step { F::zero() } else { cfg.eta },
                backtracks: 0,
            });
        }
        step_index += 1;
        iters += 1;

        if zero_step {
            converged = true;
            break;
        }
        theta.axpy(-cfg.eta, &grad);
        bundle = provider.evaluate(&theta)?;
        ensure_bundle_finite(&bundle)?;
    }

    finish_run(
        provider,
        cfg,
        theta,
        smoothing,
        history,
        step_index,
        RunShape {
            stage1_iters: iters,
            stage2_iters: 0,
            stage_transition_iter: None,
            stage1_losses: None,
            transition_mean_loss: None,
            budget_exhausted: !converged,
            pareto_stationary: false,
        },
    )
}

/// Weight-sweep oracle for the two-anchor benchmark: runs the baseline on
/// the min-max pair for each toward-loss weight `w` (client weights
/// `[1−w, w]` in id order `["away", "toward"]`), each run from its own
/// seeded start near the origin. Demonstrates that every scalarization
/// slides to one anchor while the constrained min-max run balances.
pub fn minmax_pair_weight_sweep<F: Scalar>(
    n: usize,
    toward_weights: &[F],
    cfg: &OptimizerConfig<F>,
    base_seed: u64,
) -> Result<Vec<(F, RunOutcome<F>)>> {
    toward_weights
        .iter()
        .enumerate()
        .map(|(i, &w)| {
            let problem = SyntheticProblem::<F>::new(
                n,
                SyntheticMode::MinMaxPair,
                // Off-center start so the symmetric w = 0.5 saddle is left.
                SyntheticInit::NearOrigin { noise: 0.3 },
                base_seed.wrapping_add(i as u64),
            );
            let outcome = run_baseline(&problem, cfg, Some(&[F::one() - w, w]))?;
            Ok((w, outcome))
        })
        .collect()
}

/// Shared epilogue inputs that differ between the two loops.
struct RunShape<F: Scalar> {
    stage1_iters: usize,
    stage2_iters: usize,
    stage_transition_iter: Option<usize>,
    stage1_losses: Option<Vec<F>>,
    transition_mean_loss: Option<F>,
    budget_exhausted: bool,
    pareto_stationary: bool,
}

fn finish_run<F: Scalar, P: ObjectiveProvider<F> + ?Sized>(
    provider: &P,
    cfg: &OptimizerConfig<F>,
    theta: ParameterVector<F>,
    smoothing: SmoothingState<F>,
    mut history: Vec<IterationRecord<F>>,
    step_index: usize,
    shape: RunShape<F>,
) -> Result<RunOutcome<F>> {
    let final_bundle = provider.evaluate(&theta)?;
    ensure_bundle_finite(&final_bundle)?;
    let final_smoothed_slack = smf_value(&final_bundle.slacks, smoothing.delta_g);
    if cfg.record_history {
        history.push(IterationRecord {
            iter: step_index,
            stage: Stage::Done,
            branch: Branch::Final,
            status: None,
            losses: final_bundle.losses.clone(),
            disparities: final_bundle.disparities.clone(),
            hard_disparities: final_bundle.hard_disparities.clone(),
            slacks: final_bundle.slacks.clone(),
            smoothed_loss: smf_value(&final_bundle.losses, smoothing.delta_l),
            smoothed_slack: final_smoothed_slack,
            delta_l: smoothing.delta_l,
            delta_g: smoothing.delta_g,
            dir_sq_norm: F::zero(),
            eta_used: F::zero(),
            backtracks: 0,
        });
    }
    let flags = RunFlags {
        mcf_violated: final_bundle
            .slacks
            .iter()
            .any(|s| *s > cfg.convergence_tol),
        budget_exhausted: shape.budget_exhausted,
        pareto_stationary: shape.pareto_stationary,
    };
    let reports = provider.client_reports(&theta)?;
    Ok(RunOutcome {
        theta,
        client_ids: final_bundle.client_ids.clone(),
        reports,
        flags,
        stage1_iters: shape.stage1_iters,
        stage2_iters: shape.stage2_iters,
        stage_transition_iter: shape.stage_transition_iter,
        stage1_losses: shape.stage1_losses,
        transition_mean_loss: shape.transition_mean_loss,
        final_mean_loss: mean(&final_bundle.losses),
        final_losses: final_bundle.losses,
        final_disparities: final_bundle.disparities,
        final_hard_disparities: final_bundle.hard_disparities,
        final_slacks: final_bundle.slacks,
        final_smoothed_slack,
        smoothing,
        history,
    })
}

fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn combine_weighted<F: Scalar>(grads: &[Vec<F>], weights: &[F]) -> Vec<F> {
    assert_eq!(grads.len(), weights.len());
    assert!(!grads.is_empty());
    let mut out = vec![F::zero(); grads[0].len()];
    for (g, &w) in grads.iter().zip(weights) {
        for (acc, &gi) in out.iter_mut().zip(g) {
            *acc = *acc + w * gi;
        }
    }
    out
}

fn mean<F: Scalar>(values: &[F]) -> F {
    values.iter().copied().sum::<F>() / F::cast(values.len().max(1) as f64)
}

fn ensure_bundle_finite<F: Scalar>(bundle: &ObjectiveBundle<F>) -> Result<()> {
    let scalars = bundle
        .losses
        .iter()
        .chain(&bundle.disparities)
        .chain(&bundle.slacks);
    for v in scalars {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "client loss/disparity evaluation".into(),
            });
        }
    }
    for g in bundle.loss_grads.iter().chain(&bundle.disparity_grads) {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "client gradient evaluation".into(),
            });
        }
    }
    Ok(())
}
