//! Weight graph construction and spectral step-size bounds.
//!
//! Edges carry the positive fusion weights. The recommended construction
//! connects each point to its k nearest neighbors and sets
//! `w_ij = exp(-phi * ||x_i - x_j||_2^2)`, which slows the coalescence of
//! distant points while keeping the edge set sparse.

use std::collections::HashSet;
use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::model::DataMatrix;

/// An undirected weighted edge with `i < j`. Node `i` is treated as the head
/// of the oriented edge when signs matter (dual aggregation, incidence).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, weight: f64) -> Self {
        Self { i, j, weight }
    }
}

/// Sparse weight graph over `n` nodes. Edge order is preserved from
/// construction and shared by every edge-indexed quantity (dual variables,
/// split variables).
#[derive(Debug, Clone)]
pub struct WeightGraph {
    n: usize,
    edges: Vec<Edge>,
    degrees: Vec<usize>,
}

impl WeightGraph {
    /// Validates and wraps an edge list: indices in range with `i < j`, no
    /// duplicate pairs, strictly positive finite weights.
    pub fn new(n: usize, edges: Vec<Edge>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph needs at least one node".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut degrees = vec![0usize; n];
        for edge in &edges {
            if edge.i >= edge.j || edge.j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) out of order or out of range for n = {n}",
                    edge.i, edge.j
                )));
            }
            if !edge.weight.is_finite() || edge.weight <= 0.0 {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) has nonpositive weight {}",
                    edge.i, edge.j, edge.weight
                )));
            }
            if !seen.insert((edge.i, edge.j)) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    edge.i, edge.j
                )));
            }
            degrees[edge.i] += 1;
            degrees[edge.j] += 1;
        }
        Ok(Self { n, edges, degrees })
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Number of edges incident to each node.
    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// True when breadth-first search from node 0 reaches every node.
    pub fn is_connected(&self) -> bool {
        self.n_components() == 1
    }

    /// Number of connected components.
    pub fn n_components(&self) -> usize {
        let labels = component_labels(self.n, self.edges.iter().map(|e| (e.i, e.j)));
        labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Upper bound on the largest Laplacian eigenvalue:
    /// `min(n, max over edges of d(i) + d(j))`. The recommended dual ascent
    /// step is the reciprocal of this bound.
    pub fn spectral_step_bound(&self) -> Result<f64> {
        if self.edges.is_empty() {
            return Err(Error::EmptyEdgeSet);
        }
        let degree_bound = self
            .edges
            .iter()
            .map(|e| self.degrees[e.i] + self.degrees[e.j])
            .max()
            .expect("nonempty");
        Ok((self.n.min(degree_bound)) as f64)
    }
}

/// Connected-component labels via breadth-first search, with components
/// numbered by order of first discovery from the lowest-index node.
/// Neighbor lists are visited in sorted order so labels are deterministic
/// and independent of edge input order.
pub(crate) fn component_labels(
    n: usize,
    edges: impl Iterator<Item = (usize, usize)>,
) -> Vec<usize> {
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j) in edges {
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(node) = queue.pop_front() {
            for &nb in &adjacency[node] {
                if labels[nb] == usize::MAX {
                    labels[nb] = next;
                    queue.push_back(nb);
                }
            }
        }
        next += 1;
    }
    labels
}

/// Builds the k-nearest-neighbor Gaussian weight graph: an edge joins `i`
/// and `j` whenever either point is among the other's k nearest neighbors
/// (Euclidean distance, ties broken toward the lower index), with weight
/// `exp(-phi * ||x_i - x_j||_2^2)`. `phi = 0` gives uniform unit weights.
///
/// Exact duplicates are allowed; they get weight 1 and fuse first. Neighbor
/// selection never counts a point as its own neighbor. The result may be
/// disconnected; callers that require connectivity should check
/// [`WeightGraph::is_connected`].
pub fn build_knn_gaussian_weights(data: &DataMatrix, k: usize, phi: f64) -> Result<WeightGraph> {
    let n = data.n_points();
    if k == 0 || k > n.saturating_sub(1) {
        return Err(Error::KOutOfRange { k, n });
    }
    if !phi.is_finite() || phi < 0.0 {
        return Err(Error::NegativeParameter {
            name: "phi",
            value: phi,
        });
    }

    // All-pairs squared distances, O(n^2 p).
    let mut sq_dist = vec![vec![0.0f64; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d2 = data
                .point(i)
                .iter()
                .zip(data.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            sq_dist[i][j] = d2;
            sq_dist[j][i] = d2;
        }
    }

    let mut selected: HashSet<(usize, usize)> = HashSet::new();
    let mut order: Vec<usize> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| {
            sq_dist[i][a]
                .partial_cmp(&sq_dist[i][b])
                .expect("finite distances")
                .then(a.cmp(&b))
        });
        for &j in order.iter().take(k) {
            selected.insert((i.min(j), i.max(j)));
        }
    }

    let mut pairs: Vec<(usize, usize)> = selected.into_iter().collect();
    pairs.sort_unstable();
    let edges = pairs
        .into_iter()
        .map(|(i, j)| Edge::new(i, j, (-phi * sq_dist[i][j]).exp()))
        .collect();
    WeightGraph::new(n, edges)
}
