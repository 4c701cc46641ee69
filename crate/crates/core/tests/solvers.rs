mod common;

use common::*;
use smm_core::admm::{self, AdmmConfig};
use smm_core::alm::{self, AlmConfig, Criterion, WarmStart};
use smm_core::report::Solution;
use smm_core::sncg::{newton_direction, NewtonWorkspace, SncgConfig, SubproblemContext};
use smm_core::spectral::JacobianMode;
use smm_core::model::Problem;
use smm_core::{
    classify_samples, dual_objective, primal_objective, relobj, Dataset, Hyperparams, Matrix,
};

fn hyper(c: f64, tau: f64) -> Hyperparams {
    Hyperparams::new(c, tau).unwrap()
}

fn reference(ds: &Dataset, h: &Hyperparams) -> Solution {
    let sol = alm::solve(ds, h, &AlmConfig::with_tol(1e-9), None).unwrap();
    assert!(sol.report.converged);
    sol
}

#[test]
fn solvers_agree_on_small_instances() {
    let mut r = rng(21);
    for (c, tau) in [(0.1, 0.5), (1.0, 2.0), (5.0, 1.0)] {
        let ds = random_dataset(60, 4, 5, &mut r);
        let h = hyper(c, tau);
        let ref_sol = reference(&ds, &h);
        let cfg = AdmmConfig {
            kkt_tol: None,
            relobj_stop: Some((ref_sol.objective(), 1e-6)),
            ..AdmmConfig::default()
        };
        for sol in [
            admm::solve_ispadmm(&ds, &h, &cfg, None).unwrap(),
            admm::solve_sgs_ispadmm(&ds, &h, &cfg, None).unwrap(),
        ] {
            assert!(sol.report.converged, "{} at ({c}, {tau})", sol.report.solver);
            let gap = relobj(sol.objective(), ref_sol.objective());
            assert!(gap <= 1e-6, "{}: relobj {gap:e}", sol.report.solver);
            assert!((&sol.primal.w - &ref_sol.primal.w).norm() < 1e-2 * (1.0 + ref_sol.primal.w.norm()));
        }
    }
}

#[test]
fn converged_alm_closes_duality_gap() {
    let mut r = rng(22);
    for seed in 0..4 {
        let ds = random_dataset(80, 3 + seed % 2, 4, &mut r);
        let h = hyper(0.5 + seed as f64, 1.0);
        let sol = reference(&ds, &h);
        let p = primal_objective(&ds, &h, &sol.primal.w, sol.primal.b).unwrap();
        let d = dual_objective(&ds, &h, &sol.dual.lambda, &sol.dual.lambda_mat).unwrap();
        assert!(d.feasibility.is_feasible(), "{:?}", d.feasibility.failures());
        let gap = (p - d.value).abs() / (1.0 + p.abs() + d.value.abs());
        assert!(gap < 1e-6, "gap {gap:e}");
        assert!((p - sol.report.primal_objective).abs() < 1e-12 * (1.0 + p.abs()));
    }
}

#[test]
fn objective_is_below_simple_candidates() {
    let mut r = rng(23);
    let ds = random_dataset(70, 4, 4, &mut r);
    let h = hyper(1.0, 0.5);
    let sol = reference(&ds, &h);
    let best = sol.objective();
    for _ in 0..50 {
        let w = &sol.primal.w + gaussian(4, 4, &mut r) * 1e-2;
        let b = sol.primal.b + 1e-2 * gaussian_vec(1, &mut r)[0];
        assert!(primal_objective(&ds, &h, &w, b).unwrap() >= best - 1e-9);
    }
    assert!(primal_objective(&ds, &h, &Matrix::zeros(4, 4), 0.0).unwrap() >= best);
}

#[test]
fn both_inexactness_criteria_converge_to_the_same_point() {
    let mut r = rng(24);
    let ds = random_dataset(60, 5, 3, &mut r);
    let h = hyper(2.0, 1.0);
    let mut sols = Vec::new();
    for criterion in [Criterion::A, Criterion::B, Criterion::Both] {
        let cfg = AlmConfig {
            criterion,
            ..AlmConfig::with_tol(1e-8)
        };
        let sol = alm::solve(&ds, &h, &cfg, None).unwrap();
        assert!(sol.report.converged, "{criterion:?}");
        sols.push(sol.objective());
    }
    assert!(relobj(sols[1], sols[0]) < 1e-7 && relobj(sols[2], sols[0]) < 1e-7, "{sols:?}");
}

#[test]
fn zero_tau_reduces_to_a_linear_svm() {
    let mut r = rng(25);
    let ds = random_dataset(60, 3, 3, &mut r);
    let h = hyper(1.0, 0.0);
    let sol = reference(&ds, &h);
    assert!(sol.dual.lambda_mat.norm() < 1e-8);
    let sgs = admm::solve_sgs_ispadmm(
        &ds,
        &h,
        &AdmmConfig {
            kkt_tol: Some(1e-8),
            ..AdmmConfig::default()
        },
        None,
    )
    .unwrap();
    assert!(relobj(sgs.objective(), sol.objective()) < 1e-6);
}

#[test]
fn large_tau_gives_zero_matrix() {
    let mut r = rng(26);
    let ds = random_dataset(40, 3, 4, &mut r);
    // ‖A*λ‖₂ ≤ C Σ‖Xᵢ‖ bounds the ball needed for W = 0.
    let c = 0.3;
    let bound: f64 = (0..40).map(|i| ds.sample(i).norm()).sum::<f64>() * c;
    let sol = reference(&ds, &hyper(c, bound + 1.0));
    assert!(sol.primal.w.norm() < 1e-8);
    assert_eq!(sol.report.rank_w, 0);
}

#[test]
fn warm_start_from_a_nearby_solution_saves_iterations() {
    let mut r = rng(27);
    let mut fewer = 0;
    let cases = 10;
    for _ in 0..cases {
        let ds = random_dataset(80, 4, 4, &mut r);
        let cfg = AlmConfig::with_tol(1e-7);
        let near = alm::solve(&ds, &hyper(1.0, 1.0), &cfg, None).unwrap();
        let h = hyper(1.05, 1.0);
        let cold = alm::solve(&ds, &h, &cfg, None).unwrap();
        let ws = WarmStart {
            primal: near.primal,
            dual: near.dual,
        };
        let warm = alm::solve(&ds, &h, &cfg, Some(&ws)).unwrap();
        assert!(warm.report.converged && cold.report.converged);
        assert!(relobj(warm.objective(), cold.objective()) < 1e-5);
        if warm.report.inner_iterations < cold.report.inner_iterations {
            fewer += 1;
        }
    }
    assert!(fewer * 10 >= cases * 7, "warm start helped in {fewer}/{cases}");
}

#[test]
fn ispadmm_warm_start_feeds_alm() {
    let mut r = rng(28);
    let ds = random_dataset(60, 4, 4, &mut r);
    let h = hyper(1.0, 1.0);
    let ws = admm::warm_start(&ds, &h, 20, &AdmmConfig::default()).unwrap();
    let sol = alm::solve(&ds, &h, &AlmConfig::with_tol(1e-8), Some(&ws)).unwrap();
    assert!(sol.report.converged);
    assert!(relobj(sol.objective(), reference(&ds, &h).objective()) < 1e-6);
}

#[test]
fn classification_matches_report() {
    let mut r = rng(29);
    let ds = random_dataset(90, 3, 5, &mut r);
    let h = hyper(0.7, 0.8);
    let sol = reference(&ds, &h);
    let cls = classify_samples(&sol.dual.lambda, h.c, sol.report.classify_tol);
    assert_eq!(cls.n_support(), sol.report.n_support);
    assert_eq!(cls.n_active_support(), sol.report.n_active_support);
    assert!(sol.dual.lambda.iter().all(|&l| (-h.c..=0.0).contains(&l)));
}

/// Newton directions are descent directions of φ, and the fast and dense
/// Jacobian paths give the same direction.
#[test]
fn newton_direction_descends() {
    let mut r = rng(30);
    for k in 0..15 {
        let ds = random_dataset(50, 4, 3, &mut r);
        let c = 0.5 + k as f64 * 0.2;
        let problem = Problem::smm(&ds, hyper(c, 0.8));
        let dual = random_dual(50, 4, 3, c, &mut r);
        let ctx = SubproblemContext::new(&problem, 1.0 + k as f64, &dual).unwrap();
        let state = ctx.evaluate(&gaussian(4, 3, &mut r), 0.3).unwrap();
        let cfg = SncgConfig::default();
        let mut ws = NewtonWorkspace::build(&ctx, &state, &cfg).unwrap();
        ws.mode = JacobianMode::Fast;
        let fast = newton_direction(&ctx, &state, &ws, 1e-12, 500).unwrap();
        ws.mode = JacobianMode::Dense;
        let dense = newton_direction(&ctx, &state, &ws, 1e-12, 500).unwrap();
        assert!((&fast.d_w - &dense.d_w).norm() < 1e-8 * (1.0 + fast.d_w.norm()));
        let slope = state.grad_w.dot(&fast.d_w) + state.grad_b * fast.d_b;
        assert!(slope < 0.0, "slope {slope}");
    }
}
