//! ADMM solver with two centroid-update strategies.
//!
//! Each sweep updates the centroids, the per-edge split variables (a prox
//! evaluation), and the multipliers (dual ascent on the constraint
//! residual). On a complete graph the centroid update has a closed form via
//! the Sherman-Morrison identity; on sparse edge sets it solves
//! `M U = X + aggregate(Lambda + nu V)` with `M = I + nu L` through a
//! cached Cholesky factorization. `M` does not depend on `gamma`, so one
//! factorization serves an entire regularization path.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use nalgebra::{Cholesky, DMatrix, Dyn};
use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{
    aggregate_edges_to_nodes, CentroidMatrix, ClusterProblem, DataMatrix, DualVariables,
    EdgeVectors, PenaltyNorm,
};
use crate::prox::prox_in_place;
use crate::weights::WeightGraph;

/// Which centroid update to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdmmMode {
    /// Closed-form update; valid only when the edge set is all pairs.
    CompleteGraph,
    /// Cached-factorization linear solve; valid for any edge set.
    SparseEdges,
}

/// ADMM solver options. Any positive step converges; the tolerances feed the
/// scale-free residual criterion
/// `||r|| <= primal_tol * sqrt(edges * p) + rel_tol * max(||A U||, ||V||)` and
/// `||s|| <= dual_tol * sqrt(n * p) + rel_tol * ||A' Lambda||`.
#[derive(Debug, Clone)]
pub struct AdmmConfig {
    pub step: f64,
    /// Absolute part of the primal residual threshold.
    pub primal_tol: f64,
    /// Absolute part of the dual residual threshold.
    pub dual_tol: f64,
    /// Relative part shared by both thresholds.
    pub rel_tol: f64,
    pub max_iters: usize,
    /// Update strategy; `None` selects [`AdmmMode::CompleteGraph`] exactly
    /// when the edge set contains all pairs.
    pub mode: Option<AdmmMode>,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            step: 1.0,
            primal_tol: 1e-6,
            dual_tol: 1e-6,
            rel_tol: 1e-4,
            max_iters: 100_000,
            mode: None,
        }
    }
}

impl AdmmConfig {
    pub fn with_tols(mut self, primal_tol: f64, dual_tol: f64, rel_tol: f64) -> Self {
        self.primal_tol = primal_tol;
        self.dual_tol = dual_tol;
        self.rel_tol = rel_tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !self.step.is_finite() || self.step <= 0.0 {
            return Err(Error::NegativeParameter {
                name: "step",
                value: self.step,
            });
        }
        Ok(())
    }

    fn resolve_mode(&self, graph: &WeightGraph) -> AdmmMode {
        self.mode.unwrap_or_else(|| {
            if is_complete(graph) {
                AdmmMode::CompleteGraph
            } else {
                AdmmMode::SparseEdges
            }
        })
    }
}

fn is_complete(graph: &WeightGraph) -> bool {
    let n = graph.n_nodes();
    graph.n_edges() == n * (n - 1) / 2
}

/// Cholesky factor of `M = I + nu * L`, reusable across every gamma on a
/// path for a fixed graph and step. `M` is positive definite for any
/// positive step, so factorization cannot fail on valid input.
#[derive(Debug, Clone)]
pub struct CachedFactor {
    fingerprint: u64,
    chol: Cholesky<f64, Dyn>,
}

impl CachedFactor {
    pub fn new(graph: &WeightGraph, step: f64) -> Result<Self> {
        if !step.is_finite() || step <= 0.0 {
            return Err(Error::NegativeParameter {
                name: "step",
                value: step,
            });
        }
        let n = graph.n_nodes();
        let mut m = DMatrix::<f64>::identity(n, n);
        for edge in graph.edges() {
            m[(edge.i, edge.i)] += step;
            m[(edge.j, edge.j)] += step;
            m[(edge.i, edge.j)] -= step;
            m[(edge.j, edge.i)] -= step;
        }
        let chol = Cholesky::new(m).ok_or_else(|| {
            Error::FactorizationFailed("I + nu L is positive definite; this cannot happen".into())
        })?;
        Ok(Self {
            fingerprint: fingerprint(graph, step),
            chol,
        })
    }

    /// True when this factor was built from the same edge set and step.
    pub fn matches(&self, graph: &WeightGraph, step: f64) -> bool {
        self.fingerprint == fingerprint(graph, step)
    }
}

fn fingerprint(graph: &WeightGraph, step: f64) -> u64 {
    let mut hasher = DefaultHasher::new();
    graph.n_nodes().hash(&mut hasher);
    step.to_bits().hash(&mut hasher);
    for edge in graph.edges() {
        edge.i.hash(&mut hasher);
        edge.j.hash(&mut hasher);
    }
    hasher.finish()
}

/// Closed-form centroid update for complete graphs:
/// `u_i = y_i / (1 + n nu) + n nu / (1 + n nu) * xbar` with
/// `y_i = x_i + aggregate(Lambda + nu V)_i`.
pub fn admm_u_complete(
    data: &DataMatrix,
    graph: &WeightGraph,
    v: &EdgeVectors,
    lambdas: &DualVariables,
    step: f64,
) -> Result<CentroidMatrix> {
    if !is_complete(graph) {
        return Err(Error::ModeMismatch(format!(
            "complete-graph update needs all {} pairs, graph has {} edges",
            graph.n_nodes() * (graph.n_nodes() - 1) / 2,
            graph.n_edges()
        )));
    }
    CentroidMatrix::new(u_complete_raw(data, graph, v, lambdas.values(), step))
}

/// Writes `aggregate(Lambda + step * V) + X` into `out` without
/// materializing the shifted edge matrix.
fn shifted_rhs_into(
    data: &DataMatrix,
    graph: &WeightGraph,
    v: &Array2<f64>,
    lambdas: &Array2<f64>,
    step: f64,
    out: &mut Array2<f64>,
) {
    let p = v.ncols();
    let vs = v.as_slice().expect("standard layout");
    let ls = lambdas.as_slice().expect("standard layout");
    let x = data.values().as_slice().expect("standard layout");
    let dst = out.as_slice_mut().expect("standard layout");
    dst.copy_from_slice(x);
    for (l, edge) in graph.edges().iter().enumerate() {
        let base = l * p;
        let head = edge.i * p;
        let tail = edge.j * p;
        for k in 0..p {
            let value = ls[base + k] + step * vs[base + k];
            dst[head + k] += value;
            dst[tail + k] -= value;
        }
    }
}

fn u_complete_raw(
    data: &DataMatrix,
    graph: &WeightGraph,
    v: &Array2<f64>,
    lambdas: &Array2<f64>,
    step: f64,
) -> Array2<f64> {
    let mut u = Array2::zeros(data.values().dim());
    shifted_rhs_into(data, graph, v, lambdas, step, &mut u);

    let n = data.n_points() as f64;
    let denom = 1.0 + n * step;
    let mean_coef = n * step / denom;
    u.mapv_inplace(|val| val / denom);
    for mut row in u.rows_mut() {
        row.scaled_add(mean_coef, &data.grand_mean());
    }
    u
}

/// Sparse centroid update: solves `M U = X + aggregate(Lambda + nu V)`
/// using the cached Cholesky factor (two triangular solves per feature).
/// The right-hand side matches the stationarity condition of the centroid
/// block and agrees with the complete-graph closed form on complete graphs.
pub fn admm_u_sparse(
    data: &DataMatrix,
    graph: &WeightGraph,
    v: &EdgeVectors,
    lambdas: &DualVariables,
    step: f64,
    factor: &CachedFactor,
) -> Result<CentroidMatrix> {
    if !factor.matches(graph, step) {
        return Err(Error::StaleFactorization);
    }
    CentroidMatrix::new(u_sparse_raw(data, graph, v, lambdas.values(), step, factor))
}

fn u_sparse_raw(
    data: &DataMatrix,
    graph: &WeightGraph,
    v: &Array2<f64>,
    lambdas: &Array2<f64>,
    step: f64,
    factor: &CachedFactor,
) -> Array2<f64> {
    let mut rhs = Array2::zeros(data.values().dim());
    shifted_rhs_into(data, graph, v, lambdas, step, &mut rhs);

    let (n, p) = rhs.dim();
    let rhs_na = DMatrix::from_fn(n, p, |r, c| rhs[[r, c]]);
    let solved = factor.chol.solve(&rhs_na);
    Array2::from_shape_fn((n, p), |(r, c)| solved[(r, c)])
}

/// Split-variable update `v_l = prox_{sigma_l}(u_{l1} - u_{l2} - lambda_l / nu)`
/// with `sigma_l = gamma w_l / nu`.
pub fn admm_v(
    u: &CentroidMatrix,
    lambdas: &DualVariables,
    step: f64,
    gamma: f64,
    graph: &WeightGraph,
    norm: &PenaltyNorm,
) -> EdgeVectors {
    v_update_raw(u.values(), lambdas.values(), step, gamma, graph, norm)
}

fn v_update_raw(
    u: &Array2<f64>,
    lambdas: &Array2<f64>,
    step: f64,
    gamma: f64,
    graph: &WeightGraph,
    norm: &PenaltyNorm,
) -> Array2<f64> {
    let p = lambdas.ncols();
    let mut v = Array2::zeros(lambdas.dim());
    let us = u.as_slice().expect("standard layout");
    let ls = lambdas.as_slice().expect("standard layout");
    let vs = v.as_slice_mut().expect("standard layout");
    let inv_step = 1.0 / step;
    for (l, edge) in graph.edges().iter().enumerate() {
        let sigma = gamma * edge.weight * inv_step;
        let base = l * p;
        let head = edge.i * p;
        let tail = edge.j * p;
        for k in 0..p {
            vs[base + k] = us[head + k] - us[tail + k] - inv_step * ls[base + k];
        }
        prox_in_place(norm, &mut vs[base..base + p], sigma);
    }
    v
}

/// Multiplier ascent `lambda_l += nu (v_l - u_{l1} + u_{l2})`.
pub fn admm_lambda(
    lambdas: &DualVariables,
    v: &EdgeVectors,
    u: &CentroidMatrix,
    step: f64,
    graph: &WeightGraph,
) -> DualVariables {
    let mut values = lambdas.values().clone();
    lambda_update_raw(&mut values, v, u.values(), step, graph);
    DualVariables::from_array(values, graph).expect("shape preserved")
}

fn lambda_update_raw(
    lambdas: &mut Array2<f64>,
    v: &Array2<f64>,
    u: &Array2<f64>,
    step: f64,
    graph: &WeightGraph,
) {
    let p = v.ncols();
    let vs = v.as_slice().expect("standard layout");
    let us = u.as_slice().expect("standard layout");
    let ls = lambdas.as_slice_mut().expect("standard layout");
    for (l, edge) in graph.edges().iter().enumerate() {
        let base = l * p;
        let head = edge.i * p;
        let tail = edge.j * p;
        for k in 0..p {
            ls[base + k] += step * (vs[base + k] - us[head + k] + us[tail + k]);
        }
    }
}

/// Iterate bundle for ADMM. `prev_v` is retained because the dual residual
/// measures the change in the split variables between sweeps.
#[derive(Debug, Clone)]
pub struct AdmmState {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub prev_v: Array2<f64>,
    pub lambdas: Array2<f64>,
    pub iteration: usize,
}

impl AdmmState {
    /// Cold start: zero split variables and multipliers.
    pub fn cold(problem: &ClusterProblem) -> Self {
        let (n, p) = problem.data().values().dim();
        let edges = problem.graph().n_edges();
        Self {
            u: Array2::zeros((n, p)),
            v: Array2::zeros((edges, p)),
            prev_v: Array2::zeros((edges, p)),
            lambdas: Array2::zeros((edges, p)),
            iteration: 0,
        }
    }

    fn warm(problem: &ClusterProblem, start: &AdmmWarmStart) -> Result<Self> {
        let (n, p) = problem.data().values().dim();
        let edges = problem.graph().n_edges();
        if start.v.dim() != (edges, p) || start.lambdas.values().dim() != (edges, p) {
            return Err(Error::DimensionMismatch {
                context: "admm warm start",
                expected: format!("{:?}", (edges, p)),
                found: format!("{:?} / {:?}", start.v.dim(), start.lambdas.values().dim()),
            });
        }
        Ok(Self {
            u: Array2::zeros((n, p)),
            v: start.v.clone(),
            prev_v: start.v.clone(),
            lambdas: start.lambdas.values().clone(),
            iteration: 0,
        })
    }
}

/// Warm-start data. The centroid update runs first in every sweep and is a
/// function of `(v, lambdas)`, so these two fully seed a solve.
#[derive(Debug, Clone)]
pub struct AdmmWarmStart {
    pub v: EdgeVectors,
    pub lambdas: DualVariables,
}

/// One full U -> V -> Lambda sweep. Sparse mode requires a matching cached
/// factorization.
pub fn admm_sweep(
    state: &mut AdmmState,
    problem: &ClusterProblem,
    config: &AdmmConfig,
    factor: Option<&CachedFactor>,
) -> Result<()> {
    config.validate()?;
    let graph = problem.graph();
    let step = config.step;

    state.u = match config.resolve_mode(graph) {
        AdmmMode::CompleteGraph => {
            if !is_complete(graph) {
                return Err(Error::ModeMismatch(
                    "complete-graph mode on a non-complete graph".into(),
                ));
            }
            u_complete_raw(problem.data(), graph, &state.v, &state.lambdas, step)
        }
        AdmmMode::SparseEdges => {
            let factor = factor.ok_or(Error::MissingFactorization)?;
            if !factor.matches(graph, step) {
                return Err(Error::StaleFactorization);
            }
            u_sparse_raw(problem.data(), graph, &state.v, &state.lambdas, step, factor)
        }
    };

    std::mem::swap(&mut state.prev_v, &mut state.v);
    state.v = v_update_raw(
        &state.u,
        &state.lambdas,
        step,
        problem.gamma(),
        graph,
        problem.norm(),
    );
    lambda_update_raw(&mut state.lambdas, &state.v, &state.u, step, graph);
    state.iteration += 1;
    Ok(())
}

/// Primal and dual residual norms of the current state: the primal residual
/// stacks `v_l - (u_{l1} - u_{l2})` over edges, the dual residual is
/// `nu * A'(V - V_prev)` in node space.
pub fn residuals(state: &AdmmState, graph: &WeightGraph, step: f64) -> (f64, f64) {
    let p = state.v.ncols();
    let vs = state.v.as_slice().expect("standard layout");
    let pv = state.prev_v.as_slice().expect("standard layout");
    let us = state.u.as_slice().expect("standard layout");

    let mut primal_sq = 0.0;
    // dual residual: step * aggregate(V - V_prev), accumulated in node space
    let mut agg = vec![0.0f64; graph.n_nodes() * p];
    for (l, edge) in graph.edges().iter().enumerate() {
        let base = l * p;
        let head = edge.i * p;
        let tail = edge.j * p;
        for k in 0..p {
            let r = vs[base + k] - (us[head + k] - us[tail + k]);
            primal_sq += r * r;
            let dv = vs[base + k] - pv[base + k];
            agg[head + k] += dv;
            agg[tail + k] -= dv;
        }
    }
    let dual_sq: f64 = agg.iter().map(|x| x * x).sum();

    (primal_sq.sqrt(), step * dual_sq.sqrt())
}

/// Solution returned by [`solve_admm`].
#[derive(Debug, Clone)]
pub struct AdmmSolution {
    pub centroids: CentroidMatrix,
    pub v: EdgeVectors,
    pub lambdas: DualVariables,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Runs ADMM until both residuals pass the scale-free criterion or
/// `max_iters` is reached. Builds a factorization internally when sparse
/// mode needs one; use [`solve_admm_with_factor`] to share a factor across
/// solves.
pub fn solve_admm(
    problem: &ClusterProblem,
    config: &AdmmConfig,
    warm_start: Option<&AdmmWarmStart>,
) -> Result<AdmmSolution> {
    config.validate()?;
    let owned;
    let factor = match config.resolve_mode(problem.graph()) {
        AdmmMode::SparseEdges => {
            owned = CachedFactor::new(problem.graph(), config.step)?;
            Some(&owned)
        }
        AdmmMode::CompleteGraph => None,
    };
    solve_admm_with_factor(problem, config, warm_start, factor)
}

/// As [`solve_admm`] with a caller-managed factorization (reused across the
/// gammas of a path, where `M` never changes).
pub fn solve_admm_with_factor(
    problem: &ClusterProblem,
    config: &AdmmConfig,
    warm_start: Option<&AdmmWarmStart>,
    factor: Option<&CachedFactor>,
) -> Result<AdmmSolution> {
    config.validate()?;
    let graph = problem.graph();
    let p = problem.data().n_features();

    // At gamma = 0 the objective is minimized exactly by the data matrix;
    // return it directly rather than iterating toward it.
    if problem.gamma() == 0.0 {
        let u = problem.data().values().clone();
        let mut v = Array2::zeros((graph.n_edges(), p));
        for (l, edge) in graph.edges().iter().enumerate() {
            let mut row = v.row_mut(l);
            row.assign(&u.row(edge.i));
            row -= &u.row(edge.j);
        }
        return Ok(AdmmSolution {
            centroids: CentroidMatrix::new(u)?,
            v,
            lambdas: DualVariables::zeros(graph.n_edges(), p),
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let mut state = match warm_start {
        Some(start) => AdmmState::warm(problem, start)?,
        None => AdmmState::cold(problem),
    };

    let edge_count = graph.n_edges() as f64;
    let n = problem.data().n_points() as f64;
    let pf = p as f64;

    for iter in 1..=config.max_iters {
        admm_sweep(&mut state, problem, config, factor)?;
        let (primal_res, dual_res) = residuals(&state, graph, config.step);

        let au_norm = {
            let us = state.u.as_slice().expect("standard layout");
            let pf = state.u.ncols();
            let mut sq = 0.0;
            for edge in graph.edges() {
                let head = edge.i * pf;
                let tail = edge.j * pf;
                for k in 0..pf {
                    let d = us[head + k] - us[tail + k];
                    sq += d * d;
                }
            }
            sq.sqrt()
        };
        let v_norm = state.v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let at_lambda_norm = aggregate_edges_to_nodes(&state.lambdas, graph)
            .iter()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt();

        let eps_primal =
            config.primal_tol * (edge_count * pf).sqrt() + config.rel_tol * au_norm.max(v_norm);
        let eps_dual = config.dual_tol * (n * pf).sqrt() + config.rel_tol * at_lambda_norm;

        if primal_res <= eps_primal && dual_res <= eps_dual {
            return finish(problem, state, primal_res, dual_res, iter, true);
        }
    }

    let (primal_res, dual_res) = residuals(&state, graph, config.step);
    let iterations = state.iteration;
    finish(problem, state, primal_res, dual_res, iterations, false)
}

fn finish(
    problem: &ClusterProblem,
    state: AdmmState,
    primal_residual: f64,
    dual_residual: f64,
    iterations: usize,
    converged: bool,
) -> Result<AdmmSolution> {
    Ok(AdmmSolution {
        centroids: CentroidMatrix::new(state.u)?,
        v: state.v,
        lambdas: DualVariables::from_array(state.lambdas, problem.graph())?,
        primal_residual,
        dual_residual,
        iterations,
        converged,
    })
}
