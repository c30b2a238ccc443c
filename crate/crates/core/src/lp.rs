//! Dense two-phase simplex solver for the tiny LPs of the direction search.
//!
//! Every problem this crate solves has the shape
//!
//! ```text
//! min  c·α   s.t.   α ≥ 0,   Σ α = 1 (optional),   A α ≤ b
//! ```
//!
//! with at most a few dozen variables and rows, so a dense tableau is the
//! right tool: no sparsity bookkeeping, exact control over pivoting, and —
//! because the direction search must be reproducible — Bland's anti-cycling
//! rule throughout, which makes the pivot sequence (and therefore the
//! returned vertex) a pure function of the input.

use crate::scalar::Scalar;

/// Termination status of [`solve_lp`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    /// An optimal basic feasible solution was found.
    Optimal,
    /// The constraints admit no feasible point.
    Infeasible,
    /// The objective decreases without bound (only possible when the simplex
    /// equality is switched off).
    Unbounded,
}

/// One upper-bound row `coeffs · α ≤ rhs`.
#[derive(Clone, Debug)]
pub struct LpRow<F: Scalar> {
    pub coeffs: Vec<F>,
    pub rhs: F,
}

impl<F: Scalar> LpRow<F> {
    pub fn new(coeffs: Vec<F>, rhs: F) -> Self {
        Self { coeffs, rhs }
    }

    /// Convenience for `coeffs · α ≥ rhs` rows (stored negated).
    pub fn lower_bound(coeffs: Vec<F>, rhs: F) -> Self {
        Self {
            coeffs: coeffs.into_iter().map(|v| -v).collect(),
            rhs: -rhs,
        }
    }
}

/// Solver outcome. `alpha` and `objective` are meaningful only when `status`
/// is [`LpStatus::Optimal`].
#[derive(Clone, Debug)]
pub struct LpSolution<F: Scalar> {
    pub status: LpStatus,
    pub alpha: Vec<F>,
    pub objective: F,
}

impl<F: Scalar> LpSolution<F> {
    fn non_optimal(status: LpStatus, nvars: usize) -> Self {
        Self {
            status,
            alpha: vec![F::zero(); nvars],
            objective: F::zero(),
        }
    }
}

/// Minimizes `c · α` subject to `α ≥ 0`, the rows, and — when `simplex` is
/// true — the equality `Σ α = 1`.
///
/// Identical inputs produce identical pivots and an identical `alpha`.
pub fn solve_lp<F: Scalar>(c: &[F], rows: &[LpRow<F>], simplex: bool) -> LpSolution<F> {
    let n = c.len();
    assert!(n > 0, "LP needs at least one variable");
    for row in rows {
        assert_eq!(row.coeffs.len(), n, "LP row width must match variable count");
    }

    let mut tab = Tableau::build(c, rows, simplex);
    match tab.phase_one() {
        PhaseOutcome::Feasible => {}
        PhaseOutcome::Infeasible => return LpSolution::non_optimal(LpStatus::Infeasible, n),
    }
    match tab.phase_two() {
        PhaseOutcome::Feasible => {}
        PhaseOutcome::Infeasible => return LpSolution::non_optimal(LpStatus::Unbounded, n),
    }

    let alpha = tab.extract(n);
    let objective = c.iter().zip(&alpha).map(|(ci, ai)| *ci * *ai).sum();
    LpSolution {
        status: LpStatus::Optimal,
        alpha,
        objective,
    }
}

enum PhaseOutcome {
    Feasible,
    /// Phase 1: no feasible point. Phase 2: unbounded ray.
    Infeasible,
}

struct Tableau<F: Scalar> {
    /// Constraint rows, each `n_total + 1` wide (last entry is the rhs).
    rows: Vec<Vec<F>>,
    /// Basic variable of each row.
    basis: Vec<usize>,
    n_structural: usize,
    n_total: usize,
    first_artificial: usize,
    cost: Vec<F>,
    pivot_tol: F,
    cost_tol: F,
    feas_tol: F,
}

impl<F: Scalar> Tableau<F> {
    fn build(c: &[F], rows: &[LpRow<F>], simplex: bool) -> Self {
        let n = c.len();
        // Split rows by rhs sign: nonnegative rhs keeps its slack as the
        // initial basic variable; negative rhs is negated into a >= row that
        // needs a surplus column plus an artificial.
        let n_le = rows.iter().filter(|r| r.rhs >= F::zero()).count();
        let n_ge = rows.len() - n_le;
        let n_eq = usize::from(simplex);
        let n_structural = n + rows.len(); // originals + one slack/surplus per row
        let n_total = n_structural + n_ge + n_eq; // + artificials
        let mut tableau_rows = Vec::with_capacity(rows.len() + n_eq);
        let mut basis = Vec::with_capacity(rows.len() + n_eq);

        let mut slack_idx = n;
        let mut artificial_idx = n_structural;
        for row in rows {
            let mut t = vec![F::zero(); n_total + 1];
            let negate = row.rhs < F::zero();
            for (j, &a) in row.coeffs.iter().enumerate() {
                t[j] = if negate { -a } else { a };
            }
            t[n_total] = if negate { -row.rhs } else { row.rhs };
            if negate {
                t[slack_idx] = -F::one(); // surplus
                t[artificial_idx] = F::one();
                basis.push(artificial_idx);
                artificial_idx += 1;
            } else {
                t[slack_idx] = F::one();
                basis.push(slack_idx);
            }
            slack_idx += 1;
            tableau_rows.push(t);
        }
        if simplex {
            let mut t = vec![F::zero(); n_total + 1];
            for j in 0..n {
                t[j] = F::one();
            }
            t[artificial_idx] = F::one();
            t[n_total] = F::one();
            basis.push(artificial_idx);
            tableau_rows.push(t);
        }

        let eps = F::epsilon();
        Self {
            rows: tableau_rows,
            basis,
            n_structural,
            n_total,
            first_artificial: n_structural,
            cost: c.to_vec(),
            pivot_tol: F::cast(1e-11).max(eps * F::cast(32.0)),
            cost_tol: F::cast(1e-10).max(eps * F::cast(64.0)),
            feas_tol: F::cast(1e-9).max(eps * F::cast(256.0)),
        }
    }

    fn phase_one(&mut self) -> PhaseOutcome {
        if self.first_artificial == self.n_total {
            return PhaseOutcome::Feasible; // all-slack basis is already feasible
        }
        let mut cost = vec![F::zero(); self.n_total];
        for j in self.first_artificial..self.n_total {
            cost[j] = F::one();
        }
        // Artificial infeasibility can't be unbounded below (cost >= 0).
        let _ = self.iterate(&cost);
        let infeasibility = self.objective_value(&cost);
        if infeasibility > self.feas_tol {
            return PhaseOutcome::Infeasible;
        }
        self.evict_artificials();
        PhaseOutcome::Feasible
    }

    fn phase_two(&mut self) -> PhaseOutcome {
        let mut cost = vec![F::zero(); self.n_total];
        cost[..self.cost.len()].copy_from_slice(&self.cost);
        self.iterate(&cost)
    }

    /// Primal simplex sweep under Bland's rule: entering column is the
    /// lowest-indexed one with a negative reduced cost; the ratio test breaks
    /// ties by the lowest basic-variable index.
    fn iterate(&mut self, cost: &[F]) -> PhaseOutcome {
        loop {
            let reduced = self.reduced_costs(cost);
            let mut entering = None;
            for (j, &rc) in reduced.iter().enumerate() {
                if self.column_allowed(j) && rc < -self.cost_tol {
                    entering = Some(j);
                    break;
                }
            }
            let Some(j) = entering else {
                return PhaseOutcome::Feasible;
            };
            let mut leave: Option<(usize, F)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][j];
                if a > self.pivot_tol {
                    let ratio = self.rows[r][self.n_total] / a;
                    let better = match leave {
                        None => true,
                        Some((best_r, best_ratio)) => {
                            ratio < best_ratio - self.pivot_tol
                                || (ratio < best_ratio + self.pivot_tol
                                    && self.basis[r] < self.basis[best_r])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            let Some((r, _)) = leave else {
                return PhaseOutcome::Infeasible; // unbounded along column j
            };
            self.pivot(r, j);
        }
    }

    /// During phase 2, artificial columns are frozen out of the pricing step.
    fn column_allowed(&self, j: usize) -> bool {
        j < self.first_artificial || self.basis.contains(&j)
    }

    fn reduced_costs(&self, cost: &[F]) -> Vec<F> {
        // rc_j = c_j − Σ_r c_{basis(r)} · a_{r,j}
        let mut rc = cost.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != F::zero() {
                for j in 0..self.n_total {
                    rc[j] = rc[j] - cb * self.rows[r][j];
                }
            }
        }
        rc
    }

    fn objective_value(&self, cost: &[F]) -> F {
        self.basis
            .iter()
            .enumerate()
            .map(|(r, &b)| cost[b] * self.rows[r][self.n_total])
            .sum()
    }

    /// After phase 1, pivot leftover artificials (basic at value ~0) onto any
    /// structural column; rows where that is impossible are redundant and get
    /// dropped.
    fn evict_artificials(&mut self) {
        let mut r = 0;
        while r < self.rows.len() {
            if self.basis[r] >= self.first_artificial {
                let mut pivoted = false;
                for j in 0..self.n_structural {
                    if self.rows[r][j].abs() > self.pivot_tol {
                        self.pivot(r, j);
                        pivoted = true;
                        break;
                    }
                }
                if !pivoted {
                    self.rows.remove(r);
                    self.basis.remove(r);
                    continue;
                }
            }
            r += 1;
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let p = self.rows[r][j];
        debug_assert!(p.abs() > F::zero());
        for v in &mut self.rows[r] {
            *v = *v / p;
        }
        for i in 0..self.rows.len() {
            if i == r {
                continue;
            }
            let factor = self.rows[i][j];
            if factor != F::zero() {
                for k in 0..=self.n_total {
                    let delta = factor * self.rows[r][k];
                    self.rows[i][k] = self.rows[i][k] - delta;
                }
                self.rows[i][j] = F::zero(); // cancel exactly, not approximately
            }
        }
        self.basis[r] = j;
    }

    fn extract(&self, n: usize) -> Vec<F> {
        let mut alpha = vec![F::zero(); n];
        for (r, &b) in self.basis.iter().enumerate() {
            if b < n {
                alpha[b] = self.rows[r][self.n_total];
            }
        }
        // Scrub pivot dust so callers see exact zeros.
        for a in &mut alpha {
            if a.abs() < F::cast(1e-13) {
                *a = F::zero();
            }
        }
        alpha
    }
}
