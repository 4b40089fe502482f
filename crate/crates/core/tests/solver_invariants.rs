//! Solver-level invariants: iterate feasibility, conservation laws, warm
//! starts, cross-solver and oracle agreement, and path behavior.

mod common;

use common::*;
use ndarray::Axis;
use rand::Rng;

use cvxcluster::{
    ama_step, dual_objective, primal_objective, solve_admm, solve_ama, solve_path,
    split_objective, AdmmConfig, AmaConfig, AmaState, CachedFactor, ClusterProblem, GammaGrid,
    PathOptions, PenaltyNorm, SolverChoice,
};

#[test]
fn ama_iterates_preserve_column_means_and_feasibility() {
    let mut rng = rng(101);
    for trial in 0..10 {
        let norms = all_norms(&mut rng, 3);
        let norm = norms[trial % norms.len()].clone();
        let problem = random_knn_problem(&mut rng, 8, 3, norm, 0.6);
        let config = AmaConfig {
            accelerated: trial % 2 == 0,
            ..AmaConfig::default()
        };
        let dual_norm = problem.norm().dual();
        let x_means = problem.data().values().mean_axis(Axis(0)).unwrap();

        let mut state = AmaState::new(&problem, None).unwrap();
        for _ in 0..50 {
            ama_step(&mut state, &problem, &config).unwrap();

            // grand-mean conservation: deltas cancel across nodes
            let u = cvxcluster::ama_centroids(problem.data(), state.deltas()).unwrap();
            let u_means = u.values().mean_axis(Axis(0)).unwrap();
            for (a, b) in u_means.iter().zip(x_means.iter()) {
                assert!((a - b).abs() <= 1e-12, "column mean drifted");
            }

            // every projected multiplier stays in its ball
            for (l, row) in state.lambdas().rows().into_iter().enumerate() {
                let value = dual_norm.value(row);
                let radius = problem.ball_radius(l);
                assert!(
                    value <= radius + 1e-12,
                    "iterate left the ball: {value} > {radius}"
                );
            }
        }
    }
}

#[test]
fn ama_gap_is_nonnegative_and_below_tol_at_success() {
    let mut rng = rng(113);
    for trial in 0..10 {
        let problem = random_knn_problem(&mut rng, 10, 2, PenaltyNorm::L2, 0.5 + 0.1 * trial as f64);
        let config = AmaConfig::default();
        let (solution, trace) =
            cvxcluster::solve_ama_traced(&problem, &config, None).unwrap();
        assert!(solution.converged, "trial {trial} did not converge");
        assert!(solution.gap <= config.tol);
        for entry in &trace {
            assert!(
                entry.gap >= -1e-10,
                "negative gap {} at iteration {}",
                entry.gap,
                entry.iteration
            );
        }
    }
}

#[test]
fn accelerated_and_plain_duals_agree() {
    let mut rng = rng(127);
    for trial in 0..8 {
        let norms = all_norms(&mut rng, 2);
        let norm = norms[trial % norms.len()].clone();
        let problem = random_knn_problem(&mut rng, 12, 2, norm, 0.7);
        let tol = 1e-6;
        let plain = solve_ama(&problem, &AmaConfig::default().with_tol(tol), None).unwrap();
        let fast = solve_ama(&problem, &AmaConfig::accelerated().with_tol(tol), None).unwrap();
        assert!(plain.converged && fast.converged);
        let d_plain = dual_objective(&problem, &plain.lambdas).unwrap();
        let d_fast = dual_objective(&problem, &fast.lambdas).unwrap();
        assert!(
            (d_plain - d_fast).abs() <= 10.0 * tol,
            "dual objectives differ: {d_plain} vs {d_fast}"
        );
    }
}

#[test]
fn admm_terminates_with_small_residual_and_consistent_split() {
    let mut rng = rng(131);
    for trial in 0..8 {
        let norms = all_norms(&mut rng, 2);
        let norm = norms[trial % norms.len()].clone();
        let problem = random_knn_problem(&mut rng, 10, 2, norm, 0.5);
        let config = AdmmConfig::default();
        let sol = solve_admm(&problem, &config, None).unwrap();
        assert!(sol.converged);

        // split objective at (U, V) approaches the primal at U
        let split = split_objective(&problem, &sol.centroids, &sol.v).unwrap();
        let primal = primal_objective(&problem, &sol.centroids).unwrap();
        assert!(
            (split - primal).abs() <= 1e-3 * primal.abs().max(1.0),
            "split {split} vs primal {primal}"
        );
    }
}

#[test]
fn admm_factorization_always_succeeds_on_valid_input() {
    let mut rng = rng(139);
    for _ in 0..30 {
        let n = rng.gen_range(2..25);
        let edge_prob = rng.gen_range(0.1..0.9);
        let graph = random_graph(&mut rng, n, edge_prob);
        for step in [1e-6, 0.1, 1.0, 10.0, 1e4] {
            assert!(CachedFactor::new(&graph, step).is_ok());
        }
    }
}

#[test]
fn admm_cold_and_warm_starts_agree() {
    let mut rng = rng(149);
    for _ in 0..6 {
        let problem = random_knn_problem(&mut rng, 12, 2, PenaltyNorm::L2, 0.6);
        let config = AdmmConfig::default().with_tols(1e-9, 1e-9, 1e-7);
        let cold = solve_admm(&problem, &config, None).unwrap();

        let seed_problem = problem
            .with_gamma(problem.gamma() * rng.gen_range(0.5..0.9))
            .unwrap();
        let seed = solve_admm(&seed_problem, &config, None).unwrap();
        let warm = solve_admm(
            &problem,
            &config,
            Some(&cvxcluster::AdmmWarmStart {
                v: seed.v.clone(),
                lambdas: seed.lambdas.clone(),
            }),
        )
        .unwrap();

        let f_cold = primal_objective(&problem, &cold.centroids).unwrap();
        let f_warm = primal_objective(&problem, &warm.centroids).unwrap();
        assert!(
            (f_cold - f_warm).abs() <= 1e-6 * f_cold.abs().max(1.0),
            "cold {f_cold} vs warm {f_warm}"
        );
    }
}

#[test]
fn cross_solver_agreement_spot_check() {
    let mut rng = rng(151);
    let problem = random_knn_problem(&mut rng, 20, 2, PenaltyNorm::L2, 0.5);
    let ama = solve_ama(&problem, &AmaConfig::default().with_tol(1e-8), None).unwrap();
    let admm = solve_admm(
        &problem,
        &AdmmConfig::default().with_tols(1e-8, 1e-8, 1e-6),
        None,
    )
    .unwrap();
    assert!(ama.converged && admm.converged);
    let f_ama = primal_objective(&problem, &ama.centroids).unwrap();
    let f_admm = primal_objective(&problem, &admm.centroids).unwrap();
    assert!(
        (f_ama - f_admm).abs() <= 1e-4 * f_ama.abs().max(1.0),
        "objectives disagree: {f_ama} vs {f_admm}"
    );
}

#[test]
fn path_warm_and_cold_runs_agree_per_gamma() {
    let mut rng = rng(157);
    let problem = random_knn_problem(&mut rng, 10, 2, PenaltyNorm::L2, 0.0);
    let scale = median_fusion_threshold(problem.data(), problem.graph());
    let grid = GammaGrid::new(vec![0.0, 0.1 * scale, 0.4 * scale, 0.9 * scale]).unwrap();
    let choice = SolverChoice::Ama(AmaConfig::default().with_tol(1e-9));

    let warm = solve_path(&problem, &grid, &choice, &PathOptions::default()).unwrap();
    let cold = solve_path(
        &problem,
        &grid,
        &choice,
        &PathOptions {
            warm_start: false,
            ..PathOptions::default()
        },
    )
    .unwrap();

    for (w, c) in warm.entries().iter().zip(cold.entries()) {
        let pw = primal_objective(
            &problem.with_gamma(w.gamma).unwrap(),
            &w.centroids,
        )
        .unwrap();
        let pc = primal_objective(
            &problem.with_gamma(c.gamma).unwrap(),
            &c.centroids,
        )
        .unwrap();
        assert!(
            (pw - pc).abs() <= 1e-5 * pw.abs().max(1.0),
            "gamma {}: warm {pw} vs cold {pc}",
            w.gamma
        );
    }
}

#[test]
fn path_centroids_change_continuously_under_grid_refinement() {
    let mut rng = rng(163);
    let problem = random_knn_problem(&mut rng, 8, 2, PenaltyNorm::L2, 0.0);
    let scale = median_fusion_threshold(problem.data(), problem.graph());
    let choice = SolverChoice::Ama(AmaConfig::default().with_tol(1e-9));

    // max centroid movement between adjacent grid points, for increasingly
    // fine grids over the same interval
    let mut max_jumps = Vec::new();
    for &count in &[4usize, 16, 64] {
        let values: Vec<f64> = (0..count)
            .map(|i| scale * i as f64 / (count - 1) as f64)
            .collect();
        let grid = GammaGrid::new(values).unwrap();
        let path = solve_path(&problem, &grid, &choice, &PathOptions::default()).unwrap();
        let jump = path
            .entries()
            .windows(2)
            .map(|pair| max_abs_diff(pair[0].centroids.values(), pair[1].centroids.values()))
            .fold(0.0, f64::max);
        max_jumps.push(jump);
    }
    assert!(
        max_jumps[2] < max_jumps[0],
        "refinement did not shrink the jumps: {max_jumps:?}"
    );
    assert!(max_jumps[2] <= 0.5 * max_jumps[0] + 1e-9);
}

#[test]
fn subgradient_reference_tracks_ama_on_small_instances() {
    let mut rng = rng(167);
    let mut checked = 0;
    for trial in 0..50 {
        let n = rng.gen_range(3..7);
        let p = rng.gen_range(1..4);
        let norms = all_norms(&mut rng, p);
        let norm = norms[trial % norms.len()].clone();
        let gamma_frac = rng.gen_range(0.2..0.9);
        let problem = random_knn_problem(&mut rng, n, p, norm, gamma_frac);

        let ama = solve_ama(&problem, &AmaConfig::default().with_tol(1e-9), None).unwrap();
        assert!(ama.converged);
        let reference = cvxcluster::oracle::subgradient_reference(&problem, 300_000, trial as u64);

        let f_ama = primal_objective(&problem, &ama.centroids).unwrap();
        let f_ref = primal_objective(&problem, &reference).unwrap();
        // the subgradient method is the cruder of the two; it must come
        // within its documented accuracy and can never be meaningfully below
        assert!(
            f_ref >= f_ama - 1e-9,
            "reference beat a certified solution: {f_ref} < {f_ama}"
        );
        assert!(
            (f_ref - f_ama).abs() <= 1e-3 * f_ama.abs().max(1.0),
            "trial {trial}: reference {f_ref} vs ama {f_ama}"
        );
        checked += 1;
    }
    assert_eq!(checked, 50);
}

#[test]
fn two_point_oracles_are_self_consistent() {
    let mut rng = rng(173);
    for trial in 0..20 {
        let p = rng.gen_range(1..4);
        let x1 = random_vector(&mut rng, p, 2.0);
        let x2 = random_vector(&mut rng, p, 2.0);
        let w = rng.gen_range(0.2..2.0);
        let gamma = rng.gen_range(0.0..1.5);

        let (u1, u2) = cvxcluster::oracle::two_point_closed_form(x1.view(), x2.view(), w, gamma);

        let mut values = ndarray::Array2::zeros((2, p));
        values.row_mut(0).assign(&x1);
        values.row_mut(1).assign(&x2);
        let data = cvxcluster::DataMatrix::new(values).unwrap();
        let graph =
            cvxcluster::WeightGraph::new(2, vec![cvxcluster::Edge::new(0, 1, w)]).unwrap();
        let problem = ClusterProblem::new(data, graph, PenaltyNorm::L2, gamma).unwrap();
        let reference = cvxcluster::oracle::subgradient_reference(&problem, 200_000, trial as u64);

        assert!(linf_diff_vec(&reference.values().row(0).to_owned(), &u1) < 1e-3);
        assert!(linf_diff_vec(&reference.values().row(1).to_owned(), &u2) < 1e-3);
    }
}
