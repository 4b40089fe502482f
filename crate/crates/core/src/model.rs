//! Problem definition and objective evaluation.
//!
//! The clustering objective for data points `x_1..x_n` and centroids
//! `u_1..u_n` is
//!
//! ```text
//! F(U) = 1/2 * sum_i ||x_i - u_i||_2^2 + gamma * sum_l w_l * ||u_{l1} - u_{l2}||
//! ```
//!
//! where the sum over `l` runs over the edges of a weight graph and the
//! penalty norm is configurable. This module holds the shared types plus
//! the primal, split, and dual objective values used by both solvers.

use ndarray::{Array1, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};
use crate::weights::WeightGraph;

/// Relative slack used when checking dual-ball feasibility. Projections land
/// exactly on the ball boundary, so membership is tested up to rounding.
pub const FEASIBILITY_REL_SLACK: f64 = 1e-12;

/// Per-edge vectors (one length-`p` row per edge, in graph edge order).
pub type EdgeVectors = Array2<f64>;

/// Input data: `n` observations (rows) by `p` features (columns).
#[derive(Debug, Clone)]
pub struct DataMatrix {
    values: Array2<f64>,
    grand_mean: Array1<f64>,
}

impl DataMatrix {
    /// Wraps an `n x p` matrix, recomputing the column-wise grand mean.
    pub fn new(values: Array2<f64>) -> Result<Self> {
        let (n, p) = values.dim();
        if n == 0 || p == 0 {
            return Err(Error::InvalidData(format!(
                "need at least one row and one column, got {n} x {p}"
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite entry".into()));
        }
        let grand_mean = values.mean_axis(Axis(0)).expect("n >= 1");
        Ok(Self { values, grand_mean })
    }

    /// Number of observations.
    pub fn n_points(&self) -> usize {
        self.values.nrows()
    }

    /// Number of features.
    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// Column-wise mean of the rows.
    pub fn grand_mean(&self) -> ArrayView1<'_, f64> {
        self.grand_mean.view()
    }

    pub fn point(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }
}

/// The norm applied to centroid differences in the fusion penalty.
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyNorm {
    L1,
    L2,
    Linf,
    /// Sum of Euclidean norms over a partition of the feature indices.
    GroupL2(Vec<Vec<usize>>),
}

impl PenaltyNorm {
    /// Checks that the norm is usable on length-`p` vectors. For `GroupL2`
    /// the groups must be nonempty, disjoint, and cover `0..p`.
    pub fn validate_for_dim(&self, p: usize) -> Result<()> {
        if let PenaltyNorm::GroupL2(groups) = self {
            let mut seen = vec![false; p];
            for (g, group) in groups.iter().enumerate() {
                if group.is_empty() {
                    return Err(Error::InvalidNorm(format!("group {g} is empty")));
                }
                for &idx in group {
                    if idx >= p {
                        return Err(Error::InvalidNorm(format!(
                            "group {g} references feature {idx}, but p = {p}"
                        )));
                    }
                    if seen[idx] {
                        return Err(Error::InvalidNorm(format!(
                            "feature {idx} appears in more than one group"
                        )));
                    }
                    seen[idx] = true;
                }
            }
            if let Some(missing) = seen.iter().position(|covered| !covered) {
                return Err(Error::InvalidNorm(format!(
                    "feature {missing} is not covered by any group"
                )));
            }
        }
        Ok(())
    }

    /// Norm value.
    pub fn value(&self, v: ArrayView1<'_, f64>) -> f64 {
        match self {
            PenaltyNorm::L1 => v.iter().map(|x| x.abs()).sum(),
            PenaltyNorm::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            PenaltyNorm::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            PenaltyNorm::GroupL2(groups) => groups
                .iter()
                .map(|g| g.iter().map(|&i| v[i] * v[i]).sum::<f64>().sqrt())
                .sum(),
        }
    }

    /// Norm of the difference `a - b` without materializing it.
    pub fn diff_value(&self, a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            PenaltyNorm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            PenaltyNorm::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            PenaltyNorm::Linf => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
            PenaltyNorm::GroupL2(groups) => groups
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|&i| (a[i] - b[i]) * (a[i] - b[i]))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum(),
        }
    }

    /// Slice variant of [`Self::diff_value`] for the solver hot loops.
    pub(crate) fn diff_value_slices(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            PenaltyNorm::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            PenaltyNorm::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
            PenaltyNorm::Linf => a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs())),
            PenaltyNorm::GroupL2(groups) => groups
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|&i| (a[i] - b[i]) * (a[i] - b[i]))
                        .sum::<f64>()
                        .sqrt()
                })
                .sum(),
        }
    }

    /// The dual norm, which defines the constraint balls of the dual problem.
    pub fn dual(&self) -> DualNorm {
        match self {
            PenaltyNorm::L1 => DualNorm::Linf,
            PenaltyNorm::L2 => DualNorm::L2,
            PenaltyNorm::Linf => DualNorm::L1,
            PenaltyNorm::GroupL2(groups) => DualNorm::GroupMaxL2(groups.clone()),
        }
    }
}

/// Dual norms paired with [`PenaltyNorm`]: l1 <-> linf, l2 <-> l2, and the
/// group norm dualizes to the max of group Euclidean norms.
#[derive(Debug, Clone, PartialEq)]
pub enum DualNorm {
    L1,
    L2,
    Linf,
    GroupMaxL2(Vec<Vec<usize>>),
}

impl DualNorm {
    pub fn value(&self, y: ArrayView1<'_, f64>) -> f64 {
        match self {
            DualNorm::L1 => y.iter().map(|x| x.abs()).sum(),
            DualNorm::L2 => y.iter().map(|x| x * x).sum::<f64>().sqrt(),
            DualNorm::Linf => y.iter().fold(0.0, |m, x| m.max(x.abs())),
            DualNorm::GroupMaxL2(groups) => groups
                .iter()
                .map(|g| g.iter().map(|&i| y[i] * y[i]).sum::<f64>().sqrt())
                .fold(0.0, f64::max),
        }
    }
}

/// A fully specified clustering problem instance.
#[derive(Debug, Clone)]
pub struct ClusterProblem {
    data: DataMatrix,
    graph: WeightGraph,
    norm: PenaltyNorm,
    gamma: f64,
}

impl ClusterProblem {
    pub fn new(data: DataMatrix, graph: WeightGraph, norm: PenaltyNorm, gamma: f64) -> Result<Self> {
        if graph.n_nodes() != data.n_points() {
            return Err(Error::DimensionMismatch {
                context: "cluster problem",
                expected: format!("{} graph nodes", data.n_points()),
                found: format!("{}", graph.n_nodes()),
            });
        }
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::NegativeParameter {
                name: "gamma",
                value: gamma,
            });
        }
        norm.validate_for_dim(data.n_features())?;
        Ok(Self {
            data,
            graph,
            norm,
            gamma,
        })
    }

    /// Same data, graph, and norm at a different penalty weight.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(self.data.clone(), self.graph.clone(), self.norm.clone(), gamma)
    }

    pub fn data(&self) -> &DataMatrix {
        &self.data
    }

    pub fn graph(&self) -> &WeightGraph {
        &self.graph
    }

    pub fn norm(&self) -> &PenaltyNorm {
        &self.norm
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Dual-ball radius `gamma * w_l` for edge `l`.
    pub fn ball_radius(&self, edge: usize) -> f64 {
        self.gamma * self.graph.edges()[edge].weight
    }
}

/// Centroid estimates, one row per data point.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidMatrix {
    values: Array2<f64>,
}

impl CentroidMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite centroid entry".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.values.row(i)
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

/// Dual variables: one length-`p` multiplier per graph edge, stored as the
/// rows of an `edges x p` matrix in graph edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct DualVariables {
    values: Array2<f64>,
}

impl DualVariables {
    pub fn zeros(n_edges: usize, p: usize) -> Self {
        Self {
            values: Array2::zeros((n_edges, p)),
        }
    }

    /// Wraps an `edges x p` matrix, checking the row count against the graph.
    pub fn from_array(values: Array2<f64>, graph: &WeightGraph) -> Result<Self> {
        if values.nrows() != graph.n_edges() {
            return Err(Error::DimensionMismatch {
                context: "dual variables",
                expected: format!("{} rows", graph.n_edges()),
                found: format!("{}", values.nrows()),
            });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn edge(&self, l: usize) -> ArrayView1<'_, f64> {
        self.values.row(l)
    }

    /// True when every multiplier lies in its dual ball,
    /// `||lambda_l||_dual <= gamma * w_l`, up to relative slack.
    pub fn is_feasible(&self, problem: &ClusterProblem) -> bool {
        let dual = problem.norm().dual();
        self.values
            .rows()
            .into_iter()
            .enumerate()
            .all(|(l, row)| dual.value(row) <= problem.ball_radius(l) * (1.0 + FEASIBILITY_REL_SLACK))
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.values
    }
}

/// Aggregates edge vectors into node space: node `i` accumulates `+row_l`
/// for every edge with head `i` and `-row_l` for every edge with tail `i`.
pub(crate) fn aggregate_edges_to_nodes(rows: &Array2<f64>, graph: &WeightGraph) -> Array2<f64> {
    let mut out = Array2::zeros((graph.n_nodes(), rows.ncols()));
    aggregate_edges_into(rows, graph, &mut out);
    out
}

/// As [`aggregate_edges_to_nodes`], writing into a preallocated buffer.
pub(crate) fn aggregate_edges_into(rows: &Array2<f64>, graph: &WeightGraph, out: &mut Array2<f64>) {
    let p = rows.ncols();
    debug_assert_eq!(out.dim(), (graph.n_nodes(), p));
    let src = rows.as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    dst.fill(0.0);
    for (l, edge) in graph.edges().iter().enumerate() {
        let row = &src[l * p..(l + 1) * p];
        let head = edge.i * p;
        let tail = edge.j * p;
        for k in 0..p {
            dst[head + k] += row[k];
            dst[tail + k] -= row[k];
        }
    }
}

fn check_centroid_shape(problem: &ClusterProblem, centroids: &CentroidMatrix) -> Result<()> {
    let expected = (problem.data.n_points(), problem.data.n_features());
    if centroids.values.dim() != expected {
        return Err(Error::DimensionMismatch {
            context: "centroid matrix",
            expected: format!("{:?}", expected),
            found: format!("{:?}", centroids.values.dim()),
        });
    }
    Ok(())
}

fn check_edge_rows(problem: &ClusterProblem, rows: &Array2<f64>, context: &'static str) -> Result<()> {
    let expected = (problem.graph.n_edges(), problem.data.n_features());
    if rows.dim() != expected {
        return Err(Error::DimensionMismatch {
            context,
            expected: format!("{:?}", expected),
            found: format!("{:?}", rows.dim()),
        });
    }
    Ok(())
}

/// Half the squared Frobenius distance between the data and the centroids.
pub(crate) fn fidelity(data: &DataMatrix, centroids: &Array2<f64>) -> f64 {
    data.values()
        .iter()
        .zip(centroids.iter())
        .map(|(x, u)| (x - u) * (x - u))
        .sum::<f64>()
        * 0.5
}

/// `F(U) = 1/2 sum_i ||x_i - u_i||^2 + gamma sum_l w_l ||u_{l1} - u_{l2}||`.
pub fn primal_objective(problem: &ClusterProblem, centroids: &CentroidMatrix) -> Result<f64> {
    check_centroid_shape(problem, centroids)?;
    Ok(primal_objective_raw(problem, &centroids.values))
}

pub(crate) fn primal_objective_raw(problem: &ClusterProblem, centroids: &Array2<f64>) -> f64 {
    let std = centroids.as_standard_layout();
    let u = std.as_slice().expect("standard layout");
    let p = centroids.ncols();
    let mut penalty = 0.0;
    for edge in problem.graph.edges() {
        penalty += edge.weight
            * problem
                .norm
                .diff_value_slices(&u[edge.i * p..(edge.i + 1) * p], &u[edge.j * p..(edge.j + 1) * p]);
    }
    fidelity(&problem.data, centroids) + problem.gamma * penalty
}

/// The split-form objective `1/2 sum_i ||x_i - u_i||^2 + gamma sum_l w_l ||v_l||`,
/// which agrees with the primal when `v_l = u_{l1} - u_{l2}`.
pub fn split_objective(
    problem: &ClusterProblem,
    centroids: &CentroidMatrix,
    v: &EdgeVectors,
) -> Result<f64> {
    check_centroid_shape(problem, centroids)?;
    check_edge_rows(problem, v, "split variables")?;
    let mut penalty = 0.0;
    for (l, edge) in problem.graph.edges().iter().enumerate() {
        penalty += edge.weight * problem.norm.value(v.row(l));
    }
    Ok(fidelity(&problem.data, &centroids.values) + problem.gamma * penalty)
}

/// Dual objective value at `lambdas`, or `-inf` when any multiplier leaves
/// its ball (the constraint indicator is part of the dual function).
pub fn dual_objective(problem: &ClusterProblem, lambdas: &DualVariables) -> Result<f64> {
    check_edge_rows(problem, &lambdas.values, "dual variables")?;
    if !lambdas.is_feasible(problem) {
        return Ok(f64::NEG_INFINITY);
    }
    let deltas = aggregate_edges_to_nodes(&lambdas.values, &problem.graph);
    Ok(dual_objective_raw(problem, &lambdas.values, &deltas))
}

/// Dual value assuming feasibility, reusing precomputed node aggregates.
pub(crate) fn dual_objective_raw(
    problem: &ClusterProblem,
    lambda_values: &Array2<f64>,
    deltas: &Array2<f64>,
) -> f64 {
    let quad: f64 = deltas.iter().map(|d| d * d).sum::<f64>() * 0.5;
    let mut cross = 0.0;
    let p = lambda_values.ncols();
    let lam = lambda_values.as_slice().expect("standard layout");
    let x = problem.data.values().as_slice().expect("standard layout");
    for (l, edge) in problem.graph.edges().iter().enumerate() {
        let row = &lam[l * p..(l + 1) * p];
        let xi = &x[edge.i * p..(edge.i + 1) * p];
        let xj = &x[edge.j * p..(edge.j + 1) * p];
        for k in 0..p {
            cross += row[k] * (xi[k] - xj[k]);
        }
    }
    -quad - cross
}

/// `F(U) - D(Lambda)`; nonnegative for feasible duals up to round-off, and
/// `+inf` when `lambdas` is infeasible.
pub fn duality_gap(
    problem: &ClusterProblem,
    centroids: &CentroidMatrix,
    lambdas: &DualVariables,
) -> Result<f64> {
    let primal = primal_objective(problem, centroids)?;
    let dual = dual_objective(problem, lambdas)?;
    Ok(primal - dual)
}
