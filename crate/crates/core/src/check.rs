//! Independent verification routines.
//!
//! Nothing here is used by the optimizer itself. These are deliberately
//! brute-force re-derivations — numerical differentiation and grid
//! enumeration — kept in the crate so test suites at every level can compare
//! the fast analytic paths against a slow second opinion that shares no code
//! with them.

use crate::lp::LpRow;
use crate::scalar::Scalar;

/// Central finite-difference gradient of `f` at `x` with step `h`.
///
/// Error is `O(h²)` in the truncation term, so `h ≈ 1e-5` gives ~1e-10
/// accuracy for well-scaled `f64` functions.
pub fn central_difference_gradient<F, G>(f: G, x: &[F], h: F) -> Vec<F>
where
    F: Scalar,
    G: Fn(&[F]) -> F,
{
    let two_h = h + h;
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + h;
        let up = f(&probe);
        probe[i] = xi - h;
        let down = f(&probe);
        probe[i] = xi;
        grad.push((up - down) / two_h);
    }
    grad
}

/// Result of [`simplex_grid_minimize`].
#[derive(Clone, Debug)]
pub struct GridOutcome<F: Scalar> {
    /// Whether any grid point satisfied all rows.
    pub feasible: bool,
    /// Best objective over feasible grid points (meaningless if infeasible).
    pub objective: F,
    /// The minimizing grid point.
    pub alpha: Vec<F>,
}

/// Minimizes `c · α` over grid points of the probability simplex subject to
/// upper-bound rows, by enumeration.
///
/// For up to three variables the full grid at the requested resolution
/// (`1/denominator` spacing) is swept outright. Higher dimensions make a full
/// fine sweep astronomically large (the 1e-3 grid on the 5-simplex has ~1e13
/// points), so the sweep starts on a coarse full grid and then repeatedly
/// enumerates finer windows around the best candidates — still pure
/// enumeration, finishing at a spacing at least as fine as requested. Rows
/// are checked with a `1e-9` slack so exact-boundary vertices count as
/// feasible.
pub fn simplex_grid_minimize<F: Scalar>(
    c: &[F],
    rows: &[LpRow<F>],
    denominator: usize,
) -> GridOutcome<F> {
    let m = c.len();
    assert!(m >= 1 && denominator >= 1);
    if m <= 3 {
        let mut best = Incumbents::new(1);
        let lo = vec![0u32; m];
        let hi = vec![denominator as u32; m];
        enumerate(c, rows, denominator as u32, &lo, &hi, &mut best);
        return best.outcome(denominator as u32);
    }

    // Coarse-to-fine: full sweep at a small denominator, then windows of
    // half-width 3 around the best feasible and least-violating points,
    // doubling the resolution until we are finer than asked for. A final
    // polish repeats the window sweep at the target resolution until the
    // incumbent stops moving, which recovers the few cells of slack the
    // doubling schedule can leave behind.
    const KEEP: usize = 12;
    const WINDOW: u32 = 3;
    let mut denom: u32 = 32;
    let mut best = Incumbents::new(KEEP);
    let lo = vec![0u32; m];
    let hi = vec![denom; m];
    enumerate(c, rows, denom, &lo, &hi, &mut best);
    while (denom as usize) < denominator {
        let next = denom * 2;
        let mut refined = Incumbents::new(KEEP);
        refined.absorb(&best, denom, next);
        for seed in best.seeds() {
            enumerate_window(c, rows, next, &seed, 2, WINDOW, &mut refined);
        }
        best = refined;
        denom = next;
    }
    for _ in 0..16 {
        let before = best.best_objective();
        let mut polished = Incumbents::new(KEEP);
        polished.absorb(&best, denom, denom);
        for seed in best.seeds() {
            enumerate_window(c, rows, denom, &seed, 1, WINDOW, &mut polished);
        }
        let after = polished.best_objective();
        let improved = match (before, after) {
            (Some(b), Some(a)) => a < b - 1e-15,
            (None, Some(_)) => true,
            _ => false,
        };
        best = polished;
        if !improved {
            break;
        }
    }
    best.outcome(denom)
}

/// Enumerates the window `seed·scale ± w` (clamped to `[0, denom]`) at the
/// given resolution.
fn enumerate_window<F: Scalar>(
    c: &[F],
    rows: &[LpRow<F>],
    denom: u32,
    seed: &[u32],
    scale: u32,
    w: u32,
    best: &mut Incumbents,
) {
    let mut lo = Vec::with_capacity(seed.len());
    let mut hi = Vec::with_capacity(seed.len());
    for &k in seed {
        let center = k * scale;
        lo.push(center.saturating_sub(w));
        hi.push((center + w).min(denom));
    }
    enumerate(c, rows, denom, &lo, &hi, best);
}

/// Running best lists: top-k feasible by objective, top-k infeasible by
/// smallest constraint violation (the latter keep refinement anchored when
/// the feasible region is a sliver the coarse grid misses).
struct Incumbents {
    k: usize,
    feasible: Vec<(f64, Vec<u32>)>,
    near: Vec<(f64, Vec<u32>)>,
}

impl Incumbents {
    fn new(k: usize) -> Self {
        Self {
            k,
            feasible: Vec::new(),
            near: Vec::new(),
        }
    }

    fn offer(&mut self, objective: f64, violation: f64, point: &[u32]) {
        let (list, key) = if violation <= 0.0 {
            (&mut self.feasible, objective)
        } else {
            (&mut self.near, violation)
        };
        // Overlapping windows revisit points; duplicates would crowd the
        // lists down to a single effective seed.
        if list.iter().any(|(_, p)| p == point) {
            return;
        }
        if list.len() < self.k {
            list.push((key, point.to_vec()));
            list.sort_by(|a, b| a.0.total_cmp(&b.0));
        } else if key < list.last().expect("nonempty").0 {
            list.pop();
            list.push((key, point.to_vec()));
            list.sort_by(|a, b| a.0.total_cmp(&b.0));
        }
    }

    /// Carries incumbents from the previous level into the next (rescaled),
    /// so refinement can only improve on what was already found.
    fn absorb(&mut self, prev: &Incumbents, denom_prev: u32, denom_next: u32) {
        let scale = denom_next / denom_prev;
        for (key, p) in &prev.feasible {
            let scaled: Vec<u32> = p.iter().map(|&k| k * scale).collect();
            self.feasible.push((*key, scaled));
        }
        self.feasible.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.feasible.truncate(self.k);
        for (key, p) in &prev.near {
            let scaled: Vec<u32> = p.iter().map(|&k| k * scale).collect();
            self.near.push((*key, scaled));
        }
        self.near.sort_by(|a, b| a.0.total_cmp(&b.0));
        self.near.truncate(self.k);
    }

    fn best_objective(&self) -> Option<f64> {
        self.feasible.first().map(|(obj, _)| *obj)
    }

    fn seeds(&self) -> Vec<Vec<u32>> {
        self.feasible
            .iter()
            .chain(self.near.iter())
            .map(|(_, p)| p.clone())
            .collect()
    }

    fn outcome<F: Scalar>(&self, denom: u32) -> GridOutcome<F> {
        match self.feasible.first() {
            Some((obj, p)) => GridOutcome {
                feasible: true,
                objective: F::cast(*obj),
                alpha: p.iter().map(|&k| F::cast(k as f64 / denom as f64)).collect(),
            },
            None => GridOutcome {
                feasible: false,
                objective: F::zero(),
                alpha: Vec::new(),
            },
        }
    }
}

/// Recursively enumerates integer compositions `k` of `denom` with
/// `lo ≤ k ≤ hi` componentwise, scoring each grid point `α = k / denom`.
fn enumerate<F: Scalar>(
    c: &[F],
    rows: &[LpRow<F>],
    denom: u32,
    lo: &[u32],
    hi: &[u32],
    best: &mut Incumbents,
) {
    let m = c.len();
    let cf: Vec<f64> = c.iter().map(|v| v.to_f64_lossy()).collect();
    let rowsf: Vec<(Vec<f64>, f64)> = rows
        .iter()
        .map(|r| {
            (
                r.coeffs.iter().map(|v| v.to_f64_lossy()).collect(),
                r.rhs.to_f64_lossy(),
            )
        })
        .collect();
    let inv = 1.0 / denom as f64;
    let mut point = vec![0u32; m];
    // Suffix bounds let us prune branches that cannot reach the target sum.
    let mut lo_suffix = vec![0u32; m + 1];
    let mut hi_suffix = vec![0u64; m + 1];
    for i in (0..m).rev() {
        lo_suffix[i] = lo_suffix[i + 1] + lo[i];
        hi_suffix[i] = hi_suffix[i + 1] + hi[i] as u64;
    }
    recurse(
        0,
        denom,
        &cf,
        &rowsf,
        inv,
        lo,
        hi,
        &lo_suffix,
        &hi_suffix,
        &mut point,
        best,
    );
}

#[allow(clippy::too_many_arguments)]
fn recurse(
    depth: usize,
    remaining: u32,
    c: &[f64],
    rows: &[(Vec<f64>, f64)],
    inv: f64,
    lo: &[u32],
    hi: &[u32],
    lo_suffix: &[u32],
    hi_suffix: &[u64],
    point: &mut Vec<u32>,
    best: &mut Incumbents,
) {
    let m = c.len();
    if depth == m - 1 {
        if remaining < lo[depth] || remaining > hi[depth] {
            return;
        }
        point[depth] = remaining;
        let mut objective = 0.0;
        for (ci, &ki) in c.iter().zip(point.iter()) {
            objective += ci * ki as f64;
        }
        objective *= inv;
        let mut violation = 0.0f64;
        for (coeffs, rhs) in rows {
            let mut lhs = 0.0;
            for (a, &ki) in coeffs.iter().zip(point.iter()) {
                lhs += a * ki as f64;
            }
            lhs *= inv;
            violation = violation.max(lhs - rhs - 1e-9);
        }
        best.offer(objective, violation, point);
        return;
    }
    let lower = lo[depth].max(remaining.saturating_sub(hi_suffix[depth + 1].min(u32::MAX as u64) as u32));
    let upper = hi[depth]
        .min(remaining.saturating_sub(lo_suffix[depth + 1]));
    let mut k = lower;
    while k <= upper {
        point[depth] = k;
        recurse(
            depth + 1,
            remaining - k,
            c,
            rows,
            inv,
            lo,
            hi,
            lo_suffix,
            hi_suffix,
            point,
            best,
        );
        k += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn finite_differences_recover_a_quadratic_gradient() {
        // f(x) = Σ i·x_i² has gradient 2·i·x_i.
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| (i + 1) as f64 * v * v).sum();
        let x = vec![0.3, -1.2, 2.0];
        let g = central_difference_gradient(f, &x, 1e-5);
        for (i, gi) in g.iter().enumerate() {
            assert_relative_eq!(*gi, 2.0 * (i + 1) as f64 * x[i], max_relative = 1e-8);
        }
    }

    #[test]
    fn grid_minimum_finds_the_cheapest_vertex() {
        let out = simplex_grid_minimize(&[0.5f64, -0.25], &[], 1000);
        assert!(out.feasible);
        assert_relative_eq!(out.objective, -0.25);
        assert_relative_eq!(out.alpha[1], 1.0);
    }

    #[test]
    fn grid_respects_rows() {
        // min -α_0 with α_0 ≤ 0.3: grid best sits exactly on the bound.
        let rows = vec![LpRow::new(vec![1.0f64, 0.0], 0.3)];
        let out = simplex_grid_minimize(&[-1.0f64, 0.0], &rows, 1000);
        assert!(out.feasible);
        assert_relative_eq!(out.objective, -0.3, epsilon = 1e-9);
    }

    #[test]
    fn grid_reports_infeasible() {
        let rows = vec![
            LpRow::new(vec![1.0f64, 1.0], 0.4), // conflicts with Σα = 1
        ];
        let out = simplex_grid_minimize(&[1.0f64, 1.0], &rows, 200);
        assert!(!out.feasible);
    }

    #[test]
    fn refinement_matches_full_sweep_in_low_dimensions() {
        // A 4-variable problem small enough to solve exactly by reasoning:
        // min α_3 - α_0 with α_0 ≤ 0.25 → objective -0.25.
        let rows = vec![LpRow::new(vec![1.0f64, 0.0, 0.0, 0.0], 0.25)];
        let out = simplex_grid_minimize(&[-1.0f64, 0.0, 0.0, 1.0], &rows, 1024);
        assert!(out.feasible);
        assert_relative_eq!(out.objective, -0.25, epsilon = 1e-3);
    }
}
