//! Convex clustering by splitting methods.
//!
//! Minimizes, for a tuning constant `gamma >= 0`,
//!
//! ```text
//! F(U) = 1/2 * sum_i ||x_i - u_i||_2^2 + gamma * sum_{l in E} w_l ||u_{l1} - u_{l2}||
//! ```
//!
//! over centroid matrices `U`, where the penalty runs over the edges of a
//! weight graph and the norm is any of l1, l2, linf, or a group-l2 norm.
//! The objective is strictly convex, so each gamma has a unique solution;
//! sweeping gamma from zero upward traces a continuous clustering path from
//! `n` singletons to one cluster per graph component.
//!
//! Two solvers are provided: ADMM ([`solve_admm`]) and the usually much
//! faster AMA ([`solve_ama`]), which is proximal gradient ascent on the dual
//! and certifies its answer with a duality gap. [`solve_path`] drives either
//! solver across a gamma grid with warm starts and labels the clusters.
//!
//! The [`oracle`] module carries slow, independent reference
//! implementations (closed forms, subgradient descent, dense eigensolver)
//! used by the test suites to validate the fast paths.
//!
//! # Example
//!
//! Two points an edge apart fuse exactly when `gamma * w` reaches half
//! their distance:
//!
//! ```
//! use cvxcluster::{solve_ama, AmaConfig, ClusterProblem, DataMatrix, Edge,
//!                  PenaltyNorm, WeightGraph};
//! use ndarray::array;
//!
//! let data = DataMatrix::new(array![[0.0], [2.0]])?;
//! let graph = WeightGraph::new(2, vec![Edge::new(0, 1, 1.0)])?;
//! let problem = ClusterProblem::new(data, graph, PenaltyNorm::L2, 1.5)?;
//!
//! let solution = solve_ama(&problem, &AmaConfig::default(), None)?;
//! assert!(solution.converged && solution.gap <= 1e-6);
//! // gamma is past the fusion threshold of 1, so both centroids sit at
//! // the grand mean
//! assert!((solution.centroids.values()[[0, 0]] - 1.0).abs() < 1e-4);
//! assert!((solution.centroids.values()[[1, 0]] - 1.0).abs() < 1e-4);
//! # Ok::<(), cvxcluster::Error>(())
//! ```

pub mod admm;
pub mod ama;
pub mod error;
pub mod model;
pub mod oracle;
pub mod path;
pub mod prox;
pub mod weights;

pub use admm::{
    admm_lambda, admm_sweep, admm_u_complete, admm_u_sparse, admm_v, residuals, solve_admm,
    solve_admm_with_factor, AdmmConfig, AdmmMode, AdmmSolution, AdmmState, AdmmWarmStart,
    CachedFactor,
};
pub use ama::{
    ama_centroids, ama_step, compute_deltas, momentum_update, solve_ama, solve_ama_traced,
    AmaConfig, AmaSolution, AmaState, AmaTraceEntry,
};
pub use error::{Error, Result};
pub use model::{
    dual_objective, duality_gap, primal_objective, split_objective, CentroidMatrix,
    ClusterProblem, DataMatrix, DualNorm, DualVariables, EdgeVectors, PenaltyNorm,
};
pub use path::{
    assign_clusters, default_grid, reconstruct_v, solve_path, Certificate, ClusterPath,
    GammaGrid, PathEntry, PathOptions, SolverChoice,
};
pub use prox::{moreau_check, project_ball, project_simplex, prox, BallProjection, ProxRequest};
pub use weights::{build_knn_gaussian_weights, Edge, WeightGraph};
