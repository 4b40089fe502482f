//! AMA solver: proximal gradient ascent on the dual problem.
//!
//! Each iteration aggregates the multipliers into per-node sums, takes a
//! gradient step on every edge, and projects back onto the dual balls
//! `||lambda_l|| <= gamma * w_l`. Centroids are recovered on demand as
//! `u_i = x_i + delta_i`, so the split variables never need to be stored.
//! Termination is certified by the duality gap. The accelerated variant
//! adds Nesterov extrapolation between projected iterates.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{
    aggregate_edges_into, aggregate_edges_to_nodes, CentroidMatrix, ClusterProblem, DataMatrix,
    DualNorm, DualVariables,
};
use crate::prox::project_ball_in_place;
use crate::weights::WeightGraph;

/// AMA solver options.
#[derive(Debug, Clone)]
pub struct AmaConfig {
    /// Gradient step size. `None` selects `1 / rho_hat`, the reciprocal of
    /// the spectral bound, which also guarantees monotone dual ascent.
    /// Explicit values must satisfy `step < 2 / rho_hat`.
    pub step: Option<f64>,
    /// Duality-gap threshold for termination.
    pub tol: f64,
    pub max_iters: usize,
    /// Enables Nesterov extrapolation between projected iterates.
    pub accelerated: bool,
}

impl Default for AmaConfig {
    fn default() -> Self {
        Self {
            step: None,
            tol: 1e-6,
            max_iters: 100_000,
            accelerated: false,
        }
    }
}

impl AmaConfig {
    pub fn accelerated() -> Self {
        Self {
            accelerated: true,
            ..Self::default()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// The step size this configuration resolves to for `graph`.
    pub fn resolved_step(&self, graph: &WeightGraph) -> Result<f64> {
        let bound = graph.spectral_step_bound()?;
        match self.step {
            None => Ok(1.0 / bound),
            Some(step) => {
                let limit = 2.0 / bound;
                if !step.is_finite() || step <= 0.0 || step >= limit {
                    Err(Error::StepTooLarge { step, bound: limit })
                } else {
                    Ok(step)
                }
            }
        }
    }
}

/// Iterate bundle for AMA. `lambdas` always holds the most recent projected
/// (hence feasible) multipliers; `prev_lambdas` the ones before that, kept
/// for the momentum difference; `extrap` is the extrapolated point the next
/// gradient is evaluated at (equal to `lambdas` when not accelerating).
#[derive(Debug, Clone)]
pub struct AmaState {
    lambdas: Array2<f64>,
    prev_lambdas: Array2<f64>,
    extrap: Array2<f64>,
    momentum: f64,
    deltas: Array2<f64>,
    delta_buf: Array2<f64>,
    iteration: usize,
}

impl AmaState {
    /// Starts from `warm_start` (projected onto the dual balls) or zeros.
    pub fn new(problem: &ClusterProblem, warm_start: Option<&DualVariables>) -> Result<Self> {
        let n_edges = problem.graph().n_edges();
        let n = problem.data().n_points();
        let p = problem.data().n_features();
        let lambdas = match warm_start {
            Some(warm) => {
                let mut vars = DualVariables::from_array(warm.values().clone(), problem.graph())?;
                vars.project_feasible(problem);
                vars.into_inner()
            }
            None => Array2::zeros((n_edges, p)),
        };
        let deltas = aggregate_edges_to_nodes(&lambdas, problem.graph());
        Ok(Self {
            prev_lambdas: lambdas.clone(),
            extrap: lambdas.clone(),
            lambdas,
            momentum: 1.0,
            deltas,
            delta_buf: Array2::zeros((n, p)),
            iteration: 0,
        })
    }

    /// Current feasible multipliers.
    pub fn lambdas(&self) -> &Array2<f64> {
        &self.lambdas
    }

    pub fn prev_lambdas(&self) -> &Array2<f64> {
        &self.prev_lambdas
    }

    /// Per-node aggregates of the current multipliers.
    pub fn deltas(&self) -> &Array2<f64> {
        &self.deltas
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }
}

/// Solution returned by [`solve_ama`].
#[derive(Debug, Clone)]
pub struct AmaSolution {
    pub centroids: CentroidMatrix,
    pub lambdas: DualVariables,
    /// Duality gap at the returned iterate.
    pub gap: f64,
    pub iterations: usize,
    /// False when the gap threshold was not reached within `max_iters`;
    /// the best iterate seen is returned in that case.
    pub converged: bool,
}

/// One point of the per-iteration trace from [`solve_ama_traced`].
#[derive(Debug, Clone, Copy)]
pub struct AmaTraceEntry {
    pub iteration: usize,
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Per-node sums `delta_i = sum_{head = i} lambda_l - sum_{tail = i} lambda_l`.
pub fn compute_deltas(lambdas: &DualVariables, graph: &WeightGraph) -> Array2<f64> {
    aggregate_edges_to_nodes(lambdas.values(), graph)
}

/// Centroids induced by the dual variables: `u_i = x_i + delta_i`. Column
/// means of the result always equal those of the data since the per-edge
/// contributions cancel in the sum over nodes.
pub fn ama_centroids(data: &DataMatrix, deltas: &Array2<f64>) -> Result<CentroidMatrix> {
    if deltas.dim() != (data.n_points(), data.n_features()) {
        return Err(Error::DimensionMismatch {
            context: "ama centroids",
            expected: format!("{:?}", (data.n_points(), data.n_features())),
            found: format!("{:?}", deltas.dim()),
        });
    }
    CentroidMatrix::new(data.values() + deltas)
}

/// Nesterov momentum sequence `alpha_m = (1 + sqrt(1 + 4 alpha_{m-1}^2)) / 2`.
pub fn momentum_update(alpha_prev: f64) -> f64 {
    (1.0 + (1.0 + 4.0 * alpha_prev * alpha_prev).sqrt()) / 2.0
}

/// Hoisted per-solve quantities. The step works on flat slices: one
/// iteration costs O(edges * p) with no allocation.
struct Workspace {
    dual: DualNorm,
    radii: Vec<f64>,
    /// Flat `edges x p` matrix of data differences `x_{l1} - x_{l2}`.
    edge_diffs: Vec<f64>,
    step: f64,
    p: usize,
}

impl Workspace {
    fn new(problem: &ClusterProblem, config: &AmaConfig) -> Result<Self> {
        let graph = problem.graph();
        let x = problem.data().values().as_slice().expect("standard layout");
        let p = problem.data().n_features();
        let mut edge_diffs = vec![0.0; graph.n_edges() * p];
        for (l, edge) in graph.edges().iter().enumerate() {
            for k in 0..p {
                edge_diffs[l * p + k] = x[edge.i * p + k] - x[edge.j * p + k];
            }
        }
        Ok(Self {
            dual: problem.norm().dual(),
            radii: (0..graph.n_edges()).map(|l| problem.ball_radius(l)).collect(),
            edge_diffs,
            step: config.resolved_step(graph)?,
            p,
        })
    }

    /// Advances the state by one (optionally accelerated) iteration.
    fn step(&self, state: &mut AmaState, problem: &ClusterProblem, accelerated: bool) {
        let graph = problem.graph();
        let p = self.p;

        // Gradient is taken at the extrapolated point; for plain AMA that
        // point is the current iterate itself, whose aggregates are already
        // in `deltas`.
        if accelerated {
            aggregate_edges_into(&state.extrap, graph, &mut state.delta_buf);
        } else {
            state.delta_buf.assign(&state.deltas);
        }

        {
            let source = if accelerated {
                state.extrap.as_slice().expect("standard layout")
            } else {
                state.lambdas.as_slice().expect("standard layout")
            };
            let deltas = state.delta_buf.as_slice().expect("standard layout");
            // the previous-previous iterate's buffer is recycled as the target
            let next = state
                .prev_lambdas
                .as_slice_mut()
                .expect("standard layout");
            for (l, edge) in graph.edges().iter().enumerate() {
                let base = l * p;
                let head = edge.i * p;
                let tail = edge.j * p;
                for k in 0..p {
                    let gradient =
                        self.edge_diffs[base + k] + deltas[head + k] - deltas[tail + k];
                    next[base + k] = source[base + k] - self.step * gradient;
                }
                project_ball_in_place(&self.dual, &mut next[base..base + p], self.radii[l]);
            }
        }

        if accelerated {
            let alpha_next = momentum_update(state.momentum);
            // Nesterov coefficient (alpha_{m-1} - 1) / alpha_m: zero on the
            // first iteration, approaching one as m grows.
            let ratio = (state.momentum - 1.0) / alpha_next;
            // extrap = next + ratio * (next - lambdas); `prev_lambdas` holds
            // the fresh projection, `lambdas` the previous one.
            let next = state.prev_lambdas.as_slice().expect("standard layout");
            let old = state.lambdas.as_slice().expect("standard layout");
            let extrap = state.extrap.as_slice_mut().expect("standard layout");
            for idx in 0..next.len() {
                extrap[idx] = next[idx] + ratio * (next[idx] - old[idx]);
            }
            state.momentum = alpha_next;
        }

        std::mem::swap(&mut state.prev_lambdas, &mut state.lambdas);
        aggregate_edges_into(&state.lambdas, graph, &mut state.deltas);
        state.iteration += 1;
    }

    /// Primal, dual, and gap at the current (feasible) iterate.
    fn evaluate(
        &self,
        state: &AmaState,
        problem: &ClusterProblem,
        u_buf: &mut Array2<f64>,
    ) -> (f64, f64, f64) {
        let p = self.p;
        let x = problem.data().values().as_slice().expect("standard layout");
        let deltas = state.deltas.as_slice().expect("standard layout");
        let lambdas = state.lambdas.as_slice().expect("standard layout");

        // centroids u = x + deltas and the fidelity term in one pass
        let mut fidelity = 0.0;
        {
            let u = u_buf.as_slice_mut().expect("standard layout");
            for idx in 0..x.len() {
                u[idx] = x[idx] + deltas[idx];
                fidelity += deltas[idx] * deltas[idx];
            }
        }
        let u = u_buf.as_slice().expect("standard layout");

        let mut penalty = 0.0;
        let mut cross = 0.0;
        for (l, edge) in problem.graph().edges().iter().enumerate() {
            let base = l * p;
            penalty += edge.weight
                * problem
                    .norm()
                    .diff_value_slices(&u[edge.i * p..(edge.i + 1) * p], &u[edge.j * p..(edge.j + 1) * p]);
            for k in 0..p {
                cross += lambdas[base + k] * self.edge_diffs[base + k];
            }
        }

        // with u = x + delta the fidelity and the dual quadratic coincide
        let primal = 0.5 * fidelity + problem.gamma() * penalty;
        let dual = -0.5 * fidelity - cross;
        (primal, dual, primal - dual)
    }
}

/// One AMA iteration. Prefer [`solve_ama`] for full solves; this entry point
/// exists for step-level inspection and benchmarking.
pub fn ama_step(state: &mut AmaState, problem: &ClusterProblem, config: &AmaConfig) -> Result<()> {
    let workspace = Workspace::new(problem, config)?;
    workspace.step(state, problem, config.accelerated);
    Ok(())
}

/// Runs AMA until the duality gap falls below `config.tol`, returning the
/// first iterate that does, or the best iterate seen if `max_iters` is
/// exhausted (flagged via `converged`).
pub fn solve_ama(
    problem: &ClusterProblem,
    config: &AmaConfig,
    warm_start: Option<&DualVariables>,
) -> Result<AmaSolution> {
    solve_ama_impl(problem, config, warm_start, None)
}

/// As [`solve_ama`], also recording `(primal, dual, gap)` at the initial
/// point and after every iteration.
pub fn solve_ama_traced(
    problem: &ClusterProblem,
    config: &AmaConfig,
    warm_start: Option<&DualVariables>,
) -> Result<(AmaSolution, Vec<AmaTraceEntry>)> {
    let mut trace = Vec::new();
    let solution = solve_ama_impl(problem, config, warm_start, Some(&mut trace))?;
    Ok((solution, trace))
}

fn solve_ama_impl(
    problem: &ClusterProblem,
    config: &AmaConfig,
    warm_start: Option<&DualVariables>,
    mut trace: Option<&mut Vec<AmaTraceEntry>>,
) -> Result<AmaSolution> {
    let graph = problem.graph();
    let p = problem.data().n_features();

    // Without edges the penalty is empty and the data matrix is optimal.
    if graph.n_edges() == 0 {
        return Ok(AmaSolution {
            centroids: CentroidMatrix::new(problem.data().values().clone())?,
            lambdas: DualVariables::zeros(0, p),
            gap: 0.0,
            iterations: 0,
            converged: true,
        });
    }

    let workspace = Workspace::new(problem, config)?;
    let mut state = AmaState::new(problem, warm_start)?;
    let mut u_buf = Array2::zeros(problem.data().values().dim());

    let (primal, dual, gap) = workspace.evaluate(&state, problem, &mut u_buf);
    if let Some(t) = trace.as_deref_mut() {
        t.push(AmaTraceEntry {
            iteration: 0,
            primal,
            dual,
            gap,
        });
    }

    let mut best_gap = gap;
    let mut best_lambdas = state.lambdas.clone();
    let mut best_deltas = state.deltas.clone();

    if gap <= config.tol {
        return finish(problem, state.lambdas, state.deltas, gap, 0, true);
    }

    for iter in 1..=config.max_iters {
        workspace.step(&mut state, problem, config.accelerated);
        let (primal, dual, gap) = workspace.evaluate(&state, problem, &mut u_buf);
        if let Some(t) = trace.as_deref_mut() {
            t.push(AmaTraceEntry {
                iteration: iter,
                primal,
                dual,
                gap,
            });
        }
        if gap <= config.tol {
            return finish(problem, state.lambdas, state.deltas, gap, iter, true);
        }
        if gap < best_gap {
            best_gap = gap;
            best_lambdas.assign(&state.lambdas);
            best_deltas.assign(&state.deltas);
        }
    }

    finish(problem, best_lambdas, best_deltas, best_gap, config.max_iters, false)
}

fn finish(
    problem: &ClusterProblem,
    lambdas: Array2<f64>,
    deltas: Array2<f64>,
    gap: f64,
    iterations: usize,
    converged: bool,
) -> Result<AmaSolution> {
    let centroids = ama_centroids(problem.data(), &deltas)?;
    Ok(AmaSolution {
        centroids,
        lambdas: DualVariables::from_array(lambdas, problem.graph())?,
        gap,
        iterations,
        converged,
    })
}
