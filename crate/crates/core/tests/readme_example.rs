//! Compile check of the README library example.
use cvxcluster::{
    build_knn_gaussian_weights, default_grid, solve_path, AmaConfig, ClusterProblem,
    DataMatrix, PathOptions, PenaltyNorm, SolverChoice,
};
use ndarray::array;

#[test]
fn readme_library_example() -> Result<(), cvxcluster::Error> {
    let data = DataMatrix::new(array![[0.0, 0.0], [0.2, 0.1], [3.0, 3.0], [3.1, 2.9]])?;
    let graph = build_knn_gaussian_weights(&data, 2, 0.5)?;
    let problem = ClusterProblem::new(data, graph, PenaltyNorm::L2, 0.0)?;

    let grid = default_grid(&problem, 30)?;
    let path = solve_path(
        &problem,
        &grid,
        &SolverChoice::Ama(AmaConfig::accelerated()),
        &PathOptions::default(),
    )?;
    for entry in path.entries() {
        println!("gamma {:.4}: {} clusters", entry.gamma, entry.num_clusters);
    }
    assert_eq!(path.len(), 30);
    Ok(())
}
