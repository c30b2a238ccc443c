//! The simplex LP solver replayed against brute-force grid enumeration on
//! randomized instances shaped like the optimizer's direction searches:
//! up to six hull members, up to four alignment rows.

use fcfl_core::check::simplex_grid_minimize;
use fcfl_core::lp::{solve_lp, LpRow, LpStatus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID_DENOMINATOR: usize = 1000;
const OBJECTIVE_TOL: f64 = 2e-3;

struct Instance {
    c: Vec<f64>,
    rows: Vec<LpRow<f64>>,
}

/// Rows are anchored on a random interior simplex point with a real margin,
/// so every instance is feasible and the coarse sweep of the hierarchical
/// grid can see the feasible region.
fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let m = rng.gen_range(2..=6usize);
    let n_rows = rng.gen_range(0..=4usize);
    let c: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut anchor: Vec<f64> = (0..m).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
    let total: f64 = anchor.iter().sum();
    for a in &mut anchor {
        *a /= total;
    }

    let rows = (0..n_rows)
        .map(|_| {
            let coeffs: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let at_anchor: f64 = coeffs.iter().zip(&anchor).map(|(w, a)| w * a).sum();
            let margin = rng.gen_range(0.05..0.3);
            LpRow::new(coeffs, at_anchor + margin)
        })
        .collect();
    Instance { c, rows }
}

#[test]
fn solver_matches_grid_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4242);
    for trial in 0..300 {
        let inst = random_instance(&mut rng);
        let lp = solve_lp(&inst.c, &inst.rows, true);
        assert_eq!(
            lp.status,
            LpStatus::Optimal,
            "trial {trial}: anchored instance must be feasible"
        );

        // Solution sanity: on the simplex, rows respected.
        let sum: f64 = lp.alpha.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-10, "trial {trial}: simplex sum {sum}");
        for (i, a) in lp.alpha.iter().enumerate() {
            assert!(*a >= -1e-10, "trial {trial}: alpha[{i}] = {a}");
        }
        for (j, row) in inst.rows.iter().enumerate() {
            let lhs: f64 = row.coeffs.iter().zip(&lp.alpha).map(|(w, a)| w * a).sum();
            assert!(
                lhs <= row.rhs + 1e-9,
                "trial {trial}: row {j} violated by {}",
                lhs - row.rhs
            );
        }

        let grid = simplex_grid_minimize(&inst.c, &inst.rows, GRID_DENOMINATOR);
        assert!(grid.feasible, "trial {trial}: grid missed the feasible region");
        let gap = grid.objective - lp.objective;
        // The grid point is a feasible candidate, so it can never beat the
        // true optimum (up to fp noise); and it must come within the grid
        // resolution of it.
        assert!(
            (-1e-9..=OBJECTIVE_TOL).contains(&gap),
            "trial {trial}: grid best {} vs lp {} (gap {gap})",
            grid.objective,
            lp.objective
        );
    }
}

#[test]
fn unanchored_instances_agree_on_feasibility() {
    // Free-form rows (no anchored margin): solver and grid must agree on
    // whether anything is feasible, and on the value when it is.
    let mut rng = ChaCha8Rng::seed_from_u64(7777);
    let mut infeasible_seen = 0;
    for trial in 0..200 {
        let m = rng.gen_range(2..=4usize);
        let c: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rows: Vec<LpRow<f64>> = (0..rng.gen_range(1..=3usize))
            .map(|_| {
                let coeffs: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
                LpRow::new(coeffs, rng.gen_range(-0.6..0.6))
            })
            .collect();
        let lp = solve_lp(&c, &rows, true);
        let grid = simplex_grid_minimize(&c, &rows, GRID_DENOMINATOR);
        match lp.status {
            LpStatus::Optimal => {
                // A grid may miss a sliver-thin feasible region; it must
                // never contradict the solver with a better value.
                if grid.feasible {
                    let gap = grid.objective - lp.objective;
                    assert!(
                        (-1e-9..=OBJECTIVE_TOL).contains(&gap),
                        "trial {trial}: gap {gap}"
                    );
                }
            }
            LpStatus::Infeasible => {
                infeasible_seen += 1;
                assert!(
                    !grid.feasible,
                    "trial {trial}: grid found a feasible point the solver missed"
                );
            }
            LpStatus::Unbounded => panic!("trial {trial}: impossible on the simplex"),
        }
    }
    assert!(infeasible_seen > 0, "generator never produced an infeasible case");
}
