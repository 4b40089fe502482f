//! Shared helpers for the integration and acceptance suites.
#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use cvxcluster::{
    build_knn_gaussian_weights, ClusterProblem, DataMatrix, PenaltyNorm, WeightGraph,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal via Box-Muller.
pub fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

pub fn random_data(rng: &mut ChaCha8Rng, n: usize, p: usize, spread: f64) -> DataMatrix {
    let values = Array2::from_shape_fn((n, p), |_| spread * normal(rng));
    DataMatrix::new(values).expect("finite random data")
}

/// Random k-NN problem with gamma scaled to a fraction of the median
/// per-edge fusion threshold, which keeps instances in the regime where
/// some but not all pairs fuse and away from extreme penalty scales.
pub fn random_knn_problem(
    rng: &mut ChaCha8Rng,
    n: usize,
    p: usize,
    norm: PenaltyNorm,
    gamma_frac: f64,
) -> ClusterProblem {
    let data = random_data(rng, n, p, 1.0);
    let k = rng.gen_range(2..=(n - 1).min(5));
    let phi = rng.gen_range(0.0..0.5);
    let graph = build_knn_gaussian_weights(&data, k, phi).expect("valid knn parameters");
    let gamma = gamma_frac * median_fusion_threshold(&data, &graph);
    ClusterProblem::new(data, graph, norm, gamma).expect("consistent problem")
}

/// Median of the per-edge pairwise fusion thresholds `dist / (2 w)`, a
/// robust scale for gamma (tiny Gaussian weights make the max explode).
pub fn median_fusion_threshold(data: &DataMatrix, graph: &WeightGraph) -> f64 {
    let mut thresholds: Vec<f64> = graph
        .edges()
        .iter()
        .map(|e| {
            let dist = data
                .point(e.i)
                .iter()
                .zip(data.point(e.j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist / (2.0 * e.weight)
        })
        .collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds
        .get(thresholds.len() / 2)
        .copied()
        .unwrap_or(1.0)
        .max(1e-3)
}

/// Random graph on `n` nodes with each pair included independently; always
/// returns at least one edge.
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, edge_prob: f64) -> WeightGraph {
    loop {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen_range(0.0..1.0) < edge_prob {
                    edges.push(cvxcluster::Edge::new(i, j, rng.gen_range(0.2..2.0)));
                }
            }
        }
        if !edges.is_empty() {
            return WeightGraph::new(n, edges).expect("valid random graph");
        }
    }
}

/// Two interlocking half moons of the given radius with Gaussian noise
/// (`noise` is a fraction of the radius); returns the data and ground-truth
/// labels (0 = upper moon, 1 = lower moon).
pub fn two_moons(
    n_per_moon: usize,
    radius: f64,
    noise: f64,
    seed: u64,
) -> (DataMatrix, Vec<usize>) {
    let mut rng = rng(seed);
    let mut rows = Vec::with_capacity(2 * n_per_moon);
    let mut labels = Vec::with_capacity(2 * n_per_moon);
    for idx in 0..n_per_moon {
        let t = std::f64::consts::PI * idx as f64 / (n_per_moon - 1) as f64;
        rows.push([
            radius * (t.cos() + noise * normal(&mut rng)),
            radius * (t.sin() + noise * normal(&mut rng)),
        ]);
        labels.push(0);
    }
    for idx in 0..n_per_moon {
        let t = std::f64::consts::PI * idx as f64 / (n_per_moon - 1) as f64;
        rows.push([
            radius * (1.0 - t.cos() + noise * normal(&mut rng)),
            radius * (0.5 - t.sin() + noise * normal(&mut rng)),
        ]);
        labels.push(1);
    }
    let mut values = Array2::zeros((rows.len(), 2));
    for (i, row) in rows.iter().enumerate() {
        values[[i, 0]] = row[0];
        values[[i, 1]] = row[1];
    }
    (DataMatrix::new(values).unwrap(), labels)
}

/// Adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0f64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1.0;
    }
    let choose2 = |x: f64| x * (x - 1.0) / 2.0;
    let sum_ij: f64 = table
        .iter()
        .flat_map(|row| row.iter())
        .map(|&c| choose2(c))
        .sum();
    let sum_a: f64 = table
        .iter()
        .map(|row| choose2(row.iter().sum::<f64>()))
        .sum();
    let sum_b: f64 = (0..kb)
        .map(|j| choose2(table.iter().map(|row| row[j]).sum::<f64>()))
        .sum();
    let expected = sum_a * sum_b / choose2(n as f64);
    let max_index = 0.5 * (sum_a + sum_b);
    if (max_index - expected).abs() < 1e-12 {
        return 1.0;
    }
    (sum_ij - expected) / (max_index - expected)
}

pub fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn linf_diff_vec(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Random vector with entries in (-scale, scale).
pub fn random_vector(rng: &mut ChaCha8Rng, p: usize, scale: f64) -> Array1<f64> {
    Array1::from_shape_fn(p, |_| rng.gen_range(-scale..scale))
}

/// A partition of `0..p` into contiguous random chunks.
pub fn random_groups(rng: &mut ChaCha8Rng, p: usize) -> Vec<Vec<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    while start < p {
        let len = rng.gen_range(1..=(p - start).min(3));
        groups.push((start..start + len).collect());
        start += len;
    }
    groups
}

/// The four supported norms, with a group partition fitted to `p`.
pub fn all_norms(rng: &mut ChaCha8Rng, p: usize) -> Vec<PenaltyNorm> {
    vec![
        PenaltyNorm::L1,
        PenaltyNorm::L2,
        PenaltyNorm::Linf,
        PenaltyNorm::GroupL2(random_groups(rng, p)),
    ]
}
