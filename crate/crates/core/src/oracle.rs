//! Independent reference implementations for validation.
//!
//! Everything in this module exists to cross-check the production solvers
//! and is deliberately built on different numerical routes: closed forms
//! derived by symmetry, scalar bisection and golden-section searches,
//! plain subgradient descent, and a dense eigensolver. None of it shares
//! kernels with the solver modules.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{CentroidMatrix, ClusterProblem, PenaltyNorm};
use crate::weights::WeightGraph;

/// Exact minimizer of the two-point problem with a single unit edge under
/// the Euclidean penalty. By symmetry the centroid sum equals `x1 + x2` and
/// the difference solves a one-dimensional shrinkage problem:
/// `diff = [1 - 2 gamma w / ||x1 - x2||]_+ (x1 - x2)`. The pair fuses
/// exactly when `gamma w >= ||x1 - x2|| / 2`.
pub fn two_point_closed_form(
    x1: ArrayView1<'_, f64>,
    x2: ArrayView1<'_, f64>,
    w: f64,
    gamma: f64,
) -> (Array1<f64>, Array1<f64>) {
    let d = &x1 - &x2;
    let dist = d.iter().map(|x| x * x).sum::<f64>().sqrt();
    let factor = if dist > 0.0 {
        (1.0 - 2.0 * gamma * w / dist).max(0.0)
    } else {
        0.0
    };
    let shrunk = d.mapv(|x| x * factor);
    let mid = (&x1 + &x2) / 2.0;
    let u1 = &mid + &(&shrunk / 2.0);
    let u2 = &mid - &(&shrunk / 2.0);
    (u1, u2)
}

fn norm_subgradient(
    norm: &PenaltyNorm,
    diff: ArrayView1<'_, f64>,
    rng: &mut ChaCha8Rng,
) -> Array1<f64> {
    match norm {
        PenaltyNorm::L1 => diff.mapv(|x| {
            if x > 0.0 {
                1.0
            } else if x < 0.0 {
                -1.0
            } else {
                0.0
            }
        }),
        PenaltyNorm::L2 => {
            let nrm = diff.iter().map(|x| x * x).sum::<f64>().sqrt();
            if nrm == 0.0 {
                Array1::zeros(diff.len())
            } else {
                diff.mapv(|x| x / nrm)
            }
        }
        PenaltyNorm::Linf => {
            let max = diff.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mut out = Array1::zeros(diff.len());
            if max > 0.0 {
                let ties: Vec<usize> = diff
                    .iter()
                    .enumerate()
                    .filter(|(_, x)| x.abs() == max)
                    .map(|(k, _)| k)
                    .collect();
                let pick = ties[rng.gen_range(0..ties.len())];
                out[pick] = diff[pick].signum();
            }
            out
        }
        PenaltyNorm::GroupL2(groups) => {
            let mut out = Array1::zeros(diff.len());
            for group in groups {
                let nrm = group.iter().map(|&i| diff[i] * diff[i]).sum::<f64>().sqrt();
                if nrm > 0.0 {
                    for &i in group {
                        out[i] = diff[i] / nrm;
                    }
                }
            }
            out
        }
    }
}

/// Minimizes the clustering objective by plain subgradient descent,
/// returning the best iterate seen. The fidelity term makes the objective
/// 1-strongly convex, so the classic strongly-convex schedule
/// `step_m = 2 / (m + 1)` applies and drives the best objective to within
/// `O(G^2 / m)` of the optimum. Slow but entirely independent of the
/// splitting solvers; intended for small instances as a cross-check
/// (objective accuracy around 1e-3 relative at a few hundred thousand
/// iterations).
pub fn subgradient_reference(
    problem: &ClusterProblem,
    iterations: usize,
    seed: u64,
) -> CentroidMatrix {
    let x = problem.data().values();
    let gamma = problem.gamma();
    let norm = problem.norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut u = x.to_owned();
    let mut best_u = u.clone();
    let mut best_obj = crate::model::primal_objective_raw(problem, &u);

    let mut grad = Array2::zeros(u.dim());
    for m in 1..=iterations {
        grad.assign(&u);
        grad -= x;
        for edge in problem.graph().edges() {
            let diff = &u.row(edge.i) - &u.row(edge.j);
            let sub = norm_subgradient(norm, diff.view(), &mut rng);
            let coeff = gamma * edge.weight;
            let mut gi = grad.row_mut(edge.i);
            gi.scaled_add(coeff, &sub);
            let mut gj = grad.row_mut(edge.j);
            gj.scaled_add(-coeff, &sub);
        }
        let step = 2.0 / (m as f64 + 1.0);
        u.zip_mut_with(&grad, |ui, g| *ui -= step * g);

        let obj = crate::model::primal_objective_raw(problem, &u);
        if obj < best_obj {
            best_obj = obj;
            best_u.assign(&u);
        }
    }
    CentroidMatrix::new(best_u).expect("finite iterates")
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// Reference prox evaluation that avoids the production shrinkage formulas:
/// coordinate-wise case analysis for l1, a one-dimensional golden-section
/// search along the (norm-preserved) ray for l2 and group norms, and a
/// bisection on the clamp level for the max norm.
pub fn prox_reference(
    norm: &PenaltyNorm,
    v: ArrayView1<'_, f64>,
    sigma: f64,
) -> Result<Array1<f64>> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::NegativeParameter {
            name: "sigma",
            value: sigma,
        });
    }
    if sigma == 0.0 {
        return Ok(v.to_owned());
    }
    Ok(match norm {
        PenaltyNorm::L1 => v.mapv(|x| {
            if x > sigma {
                x - sigma
            } else if x < -sigma {
                x + sigma
            } else {
                0.0
            }
        }),
        PenaltyNorm::L2 => radial_prox(v, sigma),
        PenaltyNorm::GroupL2(groups) => {
            let mut out = Array1::zeros(v.len());
            for group in groups {
                let sub = Array1::from_iter(group.iter().map(|&i| v[i]));
                let solved = radial_prox(sub.view(), sigma);
                for (k, &i) in group.iter().enumerate() {
                    out[i] = solved[k];
                }
            }
            out
        }
        PenaltyNorm::Linf => {
            let l1: f64 = v.iter().map(|x| x.abs()).sum();
            if sigma >= l1 {
                return Ok(Array1::zeros(v.len()));
            }
            // The minimizer clamps v to [-theta, theta] where the total
            // clipped mass equals sigma; the excess function is piecewise
            // linear and strictly decreasing, so bisection nails theta.
            let hi = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let excess =
                |theta: f64| v.iter().map(|x| (x.abs() - theta).max(0.0)).sum::<f64>() - sigma;
            let mut lo = 0.0;
            let mut hi = hi;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if excess(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let theta = 0.5 * (lo + hi);
            v.mapv(|x| x.clamp(-theta, theta))
        }
    })
}

/// Shared 1-D search for the Euclidean-norm prox: the minimizer lies on the
/// ray through `v`, with length minimizing `sigma t + (t - r)^2 / 2`.
fn radial_prox(v: ArrayView1<'_, f64>, sigma: f64) -> Array1<f64> {
    let r = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if r == 0.0 {
        return Array1::zeros(v.len());
    }
    let objective = |t: f64| sigma * t + 0.5 * (t - r) * (t - r);
    let t = golden_section(objective, 0.0, r, 160);
    let t = if objective(0.0) <= objective(t) { 0.0 } else { t };
    v.mapv(|x| x * (t / r))
}

/// Eigenvalues of the dense unweighted graph Laplacian, ascending. Used to
/// validate the cheap spectral bound; intended for small graphs.
pub fn dense_laplacian_spectrum(graph: &WeightGraph) -> Vec<f64> {
    let n = graph.n_nodes();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for edge in graph.edges() {
        l[(edge.i, edge.i)] += 1.0;
        l[(edge.j, edge.j)] += 1.0;
        l[(edge.i, edge.j)] -= 1.0;
        l[(edge.j, edge.i)] -= 1.0;
    }
    let mut eigenvalues: Vec<f64> = l.symmetric_eigen().eigenvalues.iter().copied().collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    eigenvalues
}

/// A single reference-vs-tested comparison.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub instance: String,
    pub reference: Vec<f64>,
    pub tested: Vec<f64>,
    pub abs_error: f64,
    pub rel_error: f64,
}

impl OracleReport {
    pub fn new(instance: impl Into<String>, reference: Vec<f64>, tested: Vec<f64>) -> Self {
        let abs_error = reference
            .iter()
            .zip(&tested)
            .map(|(r, t)| (r - t).abs())
            .fold(0.0, f64::max);
        let ref_scale = reference.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        let rel_error = abs_error / ref_scale.max(1e-300);
        Self {
            instance: instance.into(),
            reference,
            tested,
            abs_error,
            rel_error,
        }
    }
}

/// Append-only collection of oracle comparisons, exportable as CSV for test
/// artifacts.
#[derive(Debug, Default)]
pub struct OracleLog {
    reports: Vec<OracleReport>,
}

impl OracleLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn append(&mut self, report: OracleReport) {
        self.reports.push(report);
    }

    pub fn reports(&self) -> &[OracleReport] {
        &self.reports
    }

    pub fn max_abs_error(&self) -> f64 {
        self.reports.iter().map(|r| r.abs_error).fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,reference,tested,abs_error,rel_error\n");
        for r in &self.reports {
            let join = |xs: &[f64]| {
                xs.iter()
                    .map(|x| format!("{x}"))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.instance,
                join(&r.reference),
                join(&r.tested),
                r.abs_error,
                r.rel_error
            ));
        }
        out
    }
}
