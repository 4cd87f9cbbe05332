mod common;

use common::{beale, random_lp, vertex_enumeration};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slp_core::{solve, LpStatus, SolverOptions};

#[test]
fn random_programs_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut optimal, mut infeasible) = (0, 0);
    for case in 0..500 {
        let d = random_lp(&mut rng, 4, 6, 10.0);
        let oracle = vertex_enumeration(&d);
        let sol = solve(&d.lp, None, &SolverOptions::default()).unwrap();
        match oracle {
            Some(best) => {
                assert_eq!(sol.status, LpStatus::Optimal, "case {case}");
                assert!((sol.objective - best).abs() <= 1e-7 * (1.0 + best.abs()), "case {case}: {} vs {best}", sol.objective);
                assert!(d.lp.max_violation(&sol.x) < 1e-7, "case {case}");
                optimal += 1;
            }
            None => {
                assert_eq!(sol.status, LpStatus::Infeasible, "case {case}");
                infeasible += 1;
            }
        }
    }
    assert!(optimal > 100 && infeasible > 10, "{optimal} optimal, {infeasible} infeasible");
}

#[test]
fn beale_cycling_instance_terminates() {
    for bland_factor in [0, 5] {
        let opts = SolverOptions { bland_factor, ..SolverOptions::default() };
        let sol = solve(&beale(), None, &opts).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective + 0.05).abs() < 1e-9, "{}", sol.objective);
    }
}

#[test]
fn warm_start_after_rhs_perturbation() {
    let mut lp = beale();
    let cold = solve(&lp, None, &SolverOptions::default()).unwrap();
    lp.inequalities[2].rhs = 1.1;
    let warm = solve(&lp, Some(&cold.basis), &SolverOptions::default()).unwrap();
    let fresh = solve(&lp, None, &SolverOptions::default()).unwrap();
    assert!(warm.warm_started);
    assert!((warm.objective - fresh.objective).abs() < 1e-9);
    assert!(warm.pivots <= fresh.pivots);
}
