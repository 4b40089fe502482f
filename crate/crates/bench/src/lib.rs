//! Synthetic instances for the solver benchmarks.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cvxcluster::{build_knn_gaussian_weights, ClusterProblem, DataMatrix, PenaltyNorm};

/// Standard-normal data via Box-Muller.
pub fn gaussian_data(n: usize, p: usize, seed: u64) -> DataMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = Array2::from_shape_fn((n, p), |_| {
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    });
    DataMatrix::new(values).expect("finite data")
}

/// k-NN problem over standard-normal points with gamma in the mid-fusion
/// regime.
pub fn knn_problem(n: usize, p: usize, k: usize, norm: PenaltyNorm, seed: u64) -> ClusterProblem {
    let data = gaussian_data(n, p, seed);
    let graph = build_knn_gaussian_weights(&data, k, 0.5).expect("valid knn");
    let mut median: Vec<f64> = graph
        .edges()
        .iter()
        .map(|e| {
            let d = data
                .point(e.i)
                .iter()
                .zip(data.point(e.j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            d / (2.0 * e.weight)
        })
        .collect();
    median.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let gamma = 0.5 * median[median.len() / 2];
    ClusterProblem::new(data, graph, norm, gamma).expect("valid problem")
}
