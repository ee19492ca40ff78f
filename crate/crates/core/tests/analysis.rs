mod common;

use bargain::analysis::{
    certificate_gradients, check_bounded, combination_norm, finite_diff_gradient, min_norm_weights,
    stationarity_residual,
};
use bargain::solvers::{solve, Method, SolverConfig, StepSchedule};
use common::{grid_min_residual, rng, strongly_convex_game};
use rand::Rng;

#[test]
fn residual_matches_grid_oracle() {
    let mut r = rng(10);
    for seed in 0..50 {
        let (game, _) = strongly_convex_game(seed);
        for _ in 0..3 {
            let x = [r.random_range(-1.5..1.5), r.random_range(-1.5..1.5)];
            let cert = stationarity_residual(&game, &x);
            let grid = grid_min_residual(&certificate_gradients(&game, &x), 1e-3);
            assert!((cert.residual - grid).abs() <= 1e-3, "seed {seed}: {} vs {grid}", cert.residual);
            assert!(cert.residual <= grid + 1e-9);
            assert!((cert.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            assert!(cert.weights.iter().all(|&w| w >= 0.0));
            let recomputed = combination_norm(&certificate_gradients(&game, &x), &cert.weights);
            assert!((recomputed - cert.residual).abs() <= 1e-9);
        }
    }
}

#[test]
fn residual_is_permutation_invariant() {
    for seed in 0..20 {
        let (game, x0) = strongly_convex_game(100 + seed);
        let n = game.num_agents();
        let perm: Vec<usize> = (0..n).rev().collect();
        let swapped = game.permuted(&perm).unwrap();
        let a = stationarity_residual(&game, &x0);
        let b = stationarity_residual(&swapped, &x0);
        assert!((a.residual - b.residual).abs() <= 1e-9);
        for (k, &p) in perm.iter().enumerate() {
            assert!((b.weights[k] - a.weights[p]).abs() <= 1e-6);
        }
    }
}

#[test]
fn positive_rescaling_keeps_zero_status() {
    let mut r = rng(11);
    for _ in 0..200 {
        let m = r.random_range(2..=4);
        let vs: Vec<Vec<f64>> = (0..m).map(|_| vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]).collect();
        let before = combination_norm(&vs, &min_norm_weights(&vs)) <= 1e-7;
        let mut scaled = vs.clone();
        let k = r.random_range(0..m);
        let factor = r.random_range(0.05..20.0);
        scaled[k].iter_mut().for_each(|v| *v *= factor);
        let after = combination_norm(&scaled, &min_norm_weights(&scaled)) <= 1e-7;
        assert_eq!(before, after, "{vs:?} scaled {k} by {factor}");
    }
}

#[test]
fn converged_dibs_runs_are_certified_with_distance_weights() {
    let cfg = SolverConfig {
        schedule: StepSchedule::constant(0.05),
        max_iters: 20_000,
        update_norm_tol: 1e-12,
        ..SolverConfig::default()
    };
    for seed in 0..20 {
        let (game, x0) = strongly_convex_game(200 + seed);
        let report = solve(&game, Method::Dibs, &x0, &cfg).unwrap();
        assert!(report.stationarity_residual <= 1e-4);
        // beta_i proportional to ||x - x*_i|| / ||grad l_i(x)||
        let x = &report.final_state;
        let raw: Vec<f64> = game
            .gradients(x)
            .iter()
            .zip(game.preferred_states())
            .map(|(g, s)| {
                let d: f64 = x.iter().zip(s.iter()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                d / g.iter().map(|v| v * v).sum::<f64>().sqrt()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let predicted: Vec<f64> = raw.iter().map(|v| v / total).collect();
        assert!(combination_norm(&game.gradients(x), &predicted) <= 1e-6);
    }
}

#[test]
fn bounded_trajectories() {
    let cfg = SolverConfig {
        schedule: StepSchedule::constant(0.05),
        max_iters: 5000,
        update_norm_tol: 1e-12,
        trajectory_stride: 1,
        ..SolverConfig::default()
    };
    let (game, x0) = strongly_convex_game(300);
    let report = solve(&game, Method::Dibs, &x0, &cfg).unwrap();
    assert!(check_bounded(report.trajectory.as_ref().unwrap(), game.preferred_states(), &x0));
}

#[test]
fn finite_differences_match_quadratics() {
    let (game, x0) = strongly_convex_game(400);
    for model in game.agents() {
        let fd = finite_diff_gradient(model.as_ref(), &x0, 1e-6);
        assert!(common::max_abs_diff(&fd, &model.gradient(&x0)) <= 1e-8);
    }
}
