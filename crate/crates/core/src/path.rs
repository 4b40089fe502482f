//! Regularization-path driver.
//!
//! Solves the clustering problem over an increasing grid of gamma values,
//! warm-starting each solve from the previous solution, and labels clusters
//! as the connected components of the graph whose edges carry a zero split
//! vector. The split variables come straight from ADMM; for AMA they are
//! reconstructed after termination from the final multipliers, where the
//! thresholding prox produces exact zeros for fused pairs.

use ndarray::Array2;

use crate::admm::{
    solve_admm_with_factor, AdmmConfig, AdmmMode, AdmmWarmStart, CachedFactor,
};
use crate::ama::{solve_ama, AmaConfig};
use crate::error::{Error, Result};
use crate::model::{CentroidMatrix, ClusterProblem, DualVariables, EdgeVectors, PenaltyNorm};
use crate::prox::prox_in_place;
use crate::weights::{component_labels, WeightGraph};

/// Strictly increasing nonnegative gamma values.
#[derive(Debug, Clone)]
pub struct GammaGrid {
    values: Vec<f64>,
}

impl GammaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidGrid("grid is empty".into()));
        }
        if values.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(Error::InvalidGrid(
                "grid values must be finite and nonnegative".into(),
            ));
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "grid values must be strictly increasing".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Which solver drives the path.
#[derive(Debug, Clone)]
pub enum SolverChoice {
    Ama(AmaConfig),
    Admm(AdmmConfig),
}

/// Convergence certificate carried by each path entry: a duality gap for
/// AMA, residual norms for ADMM.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Certificate {
    DualityGap(f64),
    Residuals { primal: f64, dual: f64 },
}

/// Solution record for a single gamma.
#[derive(Debug, Clone)]
pub struct PathEntry {
    pub gamma: f64,
    pub centroids: CentroidMatrix,
    /// Cluster id per node; ids are contiguous from 0 in discovery order.
    pub assignments: Vec<usize>,
    pub num_clusters: usize,
    pub certificate: Certificate,
    pub iterations: usize,
    pub converged: bool,
}

/// The full solution path over a gamma grid.
#[derive(Debug, Clone)]
pub struct ClusterPath {
    entries: Vec<PathEntry>,
}

impl ClusterPath {
    pub fn entries(&self) -> &[PathEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when at least one gamma converged.
    pub fn any_converged(&self) -> bool {
        self.entries.iter().any(|e| e.converged)
    }
}

/// Path driver options.
#[derive(Debug, Clone)]
pub struct PathOptions {
    /// Edges with `||v_l||_2 <= zero_tol` count as fused. Zero works for
    /// both solvers because the prox produces exact zeros; a relaxed value
    /// such as 1e-8 guards against floating-point dust after warm starts.
    pub zero_tol: f64,
    /// Warm-start each gamma from the previous solution. Disabling this
    /// solves every gamma cold, which is useful for uniqueness checks.
    pub warm_start: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            zero_tol: 0.0,
            warm_start: true,
        }
    }
}

/// Recovers the split variables from a terminated solve:
/// `v_l = prox_{sigma_l}(u_{l1} - u_{l2} - lambda_l / nu)` with
/// `sigma_l = gamma w_l / nu`. Fused pairs yield exact zeros.
pub fn reconstruct_v(
    centroids: &CentroidMatrix,
    lambdas: &DualVariables,
    step: f64,
    gamma: f64,
    graph: &WeightGraph,
    norm: &PenaltyNorm,
) -> EdgeVectors {
    let p = lambdas.values().ncols();
    let u = centroids.values().as_slice().expect("standard layout");
    let ls = lambdas.values().as_slice().expect("standard layout");
    let mut v = Array2::zeros(lambdas.values().dim());
    let vs = v.as_slice_mut().expect("standard layout");
    let inv_step = 1.0 / step;
    for (l, edge) in graph.edges().iter().enumerate() {
        let sigma = gamma * edge.weight * inv_step;
        let base = l * p;
        let head = edge.i * p;
        let tail = edge.j * p;
        for k in 0..p {
            vs[base + k] = u[head + k] - u[tail + k] - inv_step * ls[base + k];
        }
        prox_in_place(norm, &mut vs[base..base + p], sigma);
    }
    v
}

/// Labels the connected components of the graph restricted to edges whose
/// split vector is (numerically) zero. Returns per-node cluster ids and the
/// cluster count; ids are contiguous from 0 and independent of edge order.
pub fn assign_clusters(
    v: &EdgeVectors,
    graph: &WeightGraph,
    zero_tol: f64,
) -> (Vec<usize>, usize) {
    let fused = graph.edges().iter().enumerate().filter_map(|(l, edge)| {
        let norm = v.row(l).iter().map(|x| x * x).sum::<f64>().sqrt();
        (norm <= zero_tol).then_some((edge.i, edge.j))
    });
    let labels = component_labels(graph.n_nodes(), fused);
    let count = labels.iter().copied().max().map_or(0, |m| m + 1);
    (labels, count)
}

/// Solves the problem over the grid in increasing gamma order.
/// Per-gamma non-convergence is recorded on the entry, not fatal.
pub fn solve_path(
    template: &ClusterProblem,
    grid: &GammaGrid,
    choice: &SolverChoice,
    options: &PathOptions,
) -> Result<ClusterPath> {
    let graph = template.graph();
    let mut entries = Vec::with_capacity(grid.len());

    // The ADMM system matrix depends only on the graph and step, so a single
    // factorization serves the whole path.
    let admm_factor = match choice {
        SolverChoice::Admm(config)
            if matches!(
                config.mode.unwrap_or(AdmmMode::SparseEdges),
                AdmmMode::SparseEdges
            ) && graph.n_edges() > 0 =>
        {
            Some(CachedFactor::new(graph, config.step)?)
        }
        _ => None,
    };

    let mut ama_warm: Option<DualVariables> = None;
    let mut admm_warm: Option<AdmmWarmStart> = None;

    for &gamma in grid.values() {
        let problem = template.with_gamma(gamma)?;
        let entry = match choice {
            SolverChoice::Ama(config) => {
                let warm = if options.warm_start {
                    ama_warm.as_ref()
                } else {
                    None
                };
                let sol = solve_ama(&problem, config, warm)?;
                let step = if graph.n_edges() > 0 {
                    config.resolved_step(graph)?
                } else {
                    1.0
                };
                let v = reconstruct_v(
                    &sol.centroids,
                    &sol.lambdas,
                    step,
                    gamma,
                    graph,
                    problem.norm(),
                );
                let (assignments, num_clusters) = assign_clusters(&v, graph, options.zero_tol);
                ama_warm = Some(sol.lambdas.clone());
                PathEntry {
                    gamma,
                    centroids: sol.centroids,
                    assignments,
                    num_clusters,
                    certificate: Certificate::DualityGap(sol.gap),
                    iterations: sol.iterations,
                    converged: sol.converged,
                }
            }
            SolverChoice::Admm(config) => {
                let warm = if options.warm_start {
                    admm_warm.as_ref()
                } else {
                    None
                };
                let sol = solve_admm_with_factor(&problem, config, warm, admm_factor.as_ref())?;
                let (assignments, num_clusters) =
                    assign_clusters(&sol.v, graph, options.zero_tol);
                admm_warm = Some(AdmmWarmStart {
                    v: sol.v.clone(),
                    lambdas: sol.lambdas.clone(),
                });
                PathEntry {
                    gamma,
                    centroids: sol.centroids,
                    assignments,
                    num_clusters,
                    certificate: Certificate::Residuals {
                        primal: sol.primal_residual,
                        dual: sol.dual_residual,
                    },
                    iterations: sol.iterations,
                    converged: sol.converged,
                }
            }
        };
        entries.push(entry);
    }

    Ok(ClusterPath { entries })
}

/// Builds a default grid: zero followed by `count - 1` logarithmically
/// spaced values ending at a gamma large enough to coalesce each connected
/// component (found by adaptive doubling), starting three decades below it.
pub fn default_grid(template: &ClusterProblem, count: usize) -> Result<GammaGrid> {
    if count < 2 {
        return Err(Error::InvalidGrid(
            "default grid needs at least two values".into(),
        ));
    }
    let graph = template.graph();
    if graph.n_edges() == 0 {
        // no penalty edges: any positive gamma leaves the solution at the data
        let mut values = vec![0.0];
        values.extend((0..count - 1).map(|i| 10f64.powi(i as i32 - (count as i32 - 2))));
        return GammaGrid::new(values);
    }

    let target_components = graph.n_components();
    let x = template.data().values();

    // Start from the largest pairwise fusion threshold over the edges; for a
    // single edge this is already the exact coalescence point.
    let mut gamma_hi = graph
        .edges()
        .iter()
        .map(|e| {
            let dist = x
                .row(e.i)
                .iter()
                .zip(x.row(e.j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            dist / (2.0 * e.weight)
        })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    if gamma_hi == f64::MIN_POSITIVE {
        // all points coincide; any positive gamma fuses everything
        gamma_hi = 1.0;
    }

    let probe_config = AmaConfig::accelerated();
    for _ in 0..60 {
        let problem = template.with_gamma(gamma_hi)?;
        let sol = solve_ama(&problem, &probe_config, None)?;
        let step = probe_config.resolved_step(graph)?;
        let v = reconstruct_v(
            &sol.centroids,
            &sol.lambdas,
            step,
            gamma_hi,
            graph,
            problem.norm(),
        );
        let (_, clusters) = assign_clusters(&v, graph, 0.0);
        if sol.converged && clusters <= target_components {
            break;
        }
        gamma_hi *= 2.0;
    }

    let mut values = vec![0.0];
    let points = count - 1;
    if points == 1 {
        values.push(gamma_hi);
    } else {
        let gamma_lo = gamma_hi / 1e3;
        let log_lo = gamma_lo.ln();
        let log_hi = gamma_hi.ln();
        for i in 0..points {
            let t = i as f64 / (points as f64 - 1.0);
            values.push((log_lo + t * (log_hi - log_lo)).exp());
        }
    }
    GammaGrid::new(values)
}
