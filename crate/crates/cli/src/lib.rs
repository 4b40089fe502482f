//! Command-line front end: CSV ingestion, configuration, path execution,
//! and serialized outputs (a JSON array of per-gamma records plus an
//! optional long-format CSV of centroid trajectories for plotting).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use cvxcluster::{
    build_knn_gaussian_weights, default_grid, solve_path, AdmmConfig, AmaConfig, Certificate,
    ClusterPath, ClusterProblem, DataMatrix, GammaGrid, PathOptions, PenaltyNorm, SolverChoice,
};
use ndarray::Array2;

/// CLI failure modes, mapped onto exit codes: input problems exit 1,
/// an entirely non-convergent path exits 2.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("no gamma value converged; try more iterations or a looser tolerance")]
    NoConvergence,
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::NoConvergence => 2,
        }
    }
}

impl From<cvxcluster::Error> for CliError {
    fn from(err: cvxcluster::Error) -> Self {
        CliError::Input(err.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(err: io::Error) -> Self {
        CliError::Input(err.to_string())
    }
}

/// How the gamma grid is specified on the command line.
#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    /// Explicit strictly increasing values.
    List(Vec<f64>),
    /// Logarithmically spaced between two positive endpoints.
    Log { lo: f64, hi: f64, count: usize },
    /// Zero plus `count - 1` log-spaced values up to an automatically
    /// discovered coalescence point.
    Auto { count: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Ama,
    AmaFast,
    Admm,
}

/// Everything one invocation needs. `seed` is recorded for reproducibility
/// bookkeeping; the current pipeline is fully deterministic and does not
/// consume it.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: PathBuf,
    pub norm: PenaltyNorm,
    pub knn: usize,
    pub phi: f64,
    pub grid: GridSpec,
    pub solver: SolverKind,
    pub tol: f64,
    pub max_iters: usize,
    pub standardize: bool,
    /// JSON records destination; `None` writes to stdout.
    pub output: Option<PathBuf>,
    /// Long-format centroid trajectory CSV, written when set.
    pub plot_output: Option<PathBuf>,
    pub seed: u64,
}

/// Parses `l1 | l2 | linf | group:<g1;g2;...>` where each group is a
/// comma-separated list of 1-based feature indices, e.g. `group:1,2;3,4`.
pub fn parse_norm(spec: &str) -> Result<PenaltyNorm, CliError> {
    match spec {
        "l1" => Ok(PenaltyNorm::L1),
        "l2" => Ok(PenaltyNorm::L2),
        "linf" => Ok(PenaltyNorm::Linf),
        other => {
            let Some(groups) = other.strip_prefix("group:") else {
                return Err(CliError::Input(format!(
                    "unknown norm {other:?}; expected l1, l2, linf, or group:<spec>"
                )));
            };
            let mut parsed = Vec::new();
            for (g, group) in groups.split(';').enumerate() {
                let mut indices = Vec::new();
                for token in group.split(',') {
                    let idx: usize = token.trim().parse().map_err(|_| {
                        CliError::Input(format!(
                            "group {}: {token:?} is not a feature index",
                            g + 1
                        ))
                    })?;
                    if idx == 0 {
                        return Err(CliError::Input(
                            "group feature indices are 1-based".into(),
                        ));
                    }
                    indices.push(idx - 1);
                }
                parsed.push(indices);
            }
            Ok(PenaltyNorm::GroupL2(parsed))
        }
    }
}

/// Parses `list:v1,v2,... | log:lo:hi:count | auto:count`.
pub fn parse_grid_spec(spec: &str) -> Result<GridSpec, CliError> {
    if let Some(rest) = spec.strip_prefix("list:") {
        let values = rest
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Input(format!("bad gamma value {t:?}")))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        return Ok(GridSpec::List(values));
    }
    if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(CliError::Input(
                "log grid needs the form log:lo:hi:count".into(),
            ));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| CliError::Input(format!("bad grid endpoint {:?}", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| CliError::Input(format!("bad grid endpoint {:?}", parts[1])))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| CliError::Input(format!("bad grid count {:?}", parts[2])))?;
        if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 || hi <= lo || count < 2 {
            return Err(CliError::Input(
                "log grid needs 0 < lo < hi and count >= 2".into(),
            ));
        }
        return Ok(GridSpec::Log { lo, hi, count });
    }
    if let Some(rest) = spec.strip_prefix("auto:") {
        let count: usize = rest
            .parse()
            .map_err(|_| CliError::Input(format!("bad grid count {rest:?}")))?;
        if count < 2 {
            return Err(CliError::Input("auto grid needs count >= 2".into()));
        }
        return Ok(GridSpec::Auto { count });
    }
    // bare comma-separated values are accepted as an explicit list
    if let Ok(values) = spec
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<f64>, _>>()
    {
        return Ok(GridSpec::List(values));
    }
    Err(CliError::Input(format!(
        "unknown gamma grid {spec:?}; expected list:..., log:lo:hi:count, or auto:count"
    )))
}

pub fn parse_solver(spec: &str) -> Result<SolverKind, CliError> {
    match spec {
        "ama" => Ok(SolverKind::Ama),
        "ama-fast" => Ok(SolverKind::AmaFast),
        "admm" => Ok(SolverKind::Admm),
        other => Err(CliError::Input(format!(
            "unknown solver {other:?}; expected ama, ama-fast, or admm"
        ))),
    }
}

/// True when the first row of the file does not parse as numbers and is
/// therefore a header.
pub fn sniff_header(path: &Path) -> Result<bool, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let mut first = csv::StringRecord::new();
    let any = reader
        .read_record(&mut first)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if !any {
        return Err(CliError::Input(format!("{}: file is empty", path.display())));
    }
    Ok(first.iter().any(|cell| cell.trim().parse::<f64>().is_err()))
}

/// Reads a rectangular numeric CSV into a data matrix (rows are
/// observations). With `standardize` every column is centered and scaled to
/// unit sample standard deviation; zero-variance columns are only centered.
pub fn ingest_csv(path: &Path, has_header: bool, standardize: bool) -> Result<DataMatrix, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, record) in reader.records().enumerate() {
        let row_number = idx + 1;
        let record = record.map_err(|e| CliError::Input(format!("row {row_number}: {e}")))?;
        if has_header && idx == 0 {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::Input(format!(
                "row {row_number}: expected {expected} columns, found {}",
                record.len()
            )));
        }
        let mut row = Vec::with_capacity(expected);
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| {
                CliError::Input(format!(
                    "row {row_number}, column {}: {cell:?} is not numeric",
                    col + 1
                ))
            })?;
            row.push(value);
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!(
            "{}: no data rows",
            path.display()
        )));
    }

    let n = rows.len();
    let p = rows[0].len();
    let mut values = Array2::zeros((n, p));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values[[i, j]] = v;
        }
    }

    if standardize {
        for j in 0..p {
            let mean = (0..n).map(|i| values[[i, j]]).sum::<f64>() / n as f64;
            for i in 0..n {
                values[[i, j]] -= mean;
            }
            if n > 1 {
                let var = (0..n).map(|i| values[[i, j]].powi(2)).sum::<f64>() / (n as f64 - 1.0);
                if var > 0.0 {
                    let std = var.sqrt();
                    for i in 0..n {
                        values[[i, j]] /= std;
                    }
                }
            }
        }
    }

    DataMatrix::new(values).map_err(CliError::from)
}

/// Residual pair reported by ADMM runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualPair {
    pub primal: f64,
    pub dual: f64,
}

/// Serialized form of one path entry; round-trips losslessly through JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub gamma: f64,
    pub num_clusters: usize,
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualPair>,
    pub iterations: usize,
    pub converged: bool,
}

/// Converts solved path entries into serializable records.
pub fn records_from_path(path: &ClusterPath) -> Vec<PathRecord> {
    path.entries()
        .iter()
        .map(|entry| {
            let (gap, residuals) = match entry.certificate {
                Certificate::DualityGap(gap) => (Some(gap), None),
                Certificate::Residuals { primal, dual } => {
                    (None, Some(ResidualPair { primal, dual }))
                }
            };
            PathRecord {
                gamma: entry.gamma,
                num_clusters: entry.num_clusters,
                assignments: entry.assignments.clone(),
                centroids: entry
                    .centroids
                    .values()
                    .rows()
                    .into_iter()
                    .map(|row| row.to_vec())
                    .collect(),
                gap,
                residuals,
                iterations: entry.iterations,
                converged: entry.converged,
            }
        })
        .collect()
}

/// Writes the long-format centroid trajectory table, one row per
/// `(gamma, node, feature)` in that sort order. Output is deterministic for
/// a given path.
pub fn emit_plot_data(path: &ClusterPath, out: &mut impl Write) -> io::Result<()> {
    writeln!(out, "gamma,node,feature,value")?;
    for entry in path.entries() {
        let values = entry.centroids.values();
        for node in 0..values.nrows() {
            for feature in 0..values.ncols() {
                writeln!(
                    out,
                    "{},{},{},{}",
                    entry.gamma,
                    node,
                    feature,
                    values[[node, feature]]
                )?;
            }
        }
    }
    Ok(())
}

fn build_grid(template: &ClusterProblem, spec: &GridSpec) -> Result<GammaGrid, CliError> {
    match spec {
        GridSpec::List(values) => GammaGrid::new(values.clone()).map_err(CliError::from),
        GridSpec::Log { lo, hi, count } => {
            let log_lo = lo.ln();
            let log_hi = hi.ln();
            let values: Vec<f64> = (0..*count)
                .map(|i| {
                    let t = i as f64 / (*count as f64 - 1.0);
                    (log_lo + t * (log_hi - log_lo)).exp()
                })
                .collect();
            GammaGrid::new(values).map_err(CliError::from)
        }
        GridSpec::Auto { count } => default_grid(template, *count).map_err(CliError::from),
    }
}

fn solver_choice(config: &RunConfig) -> SolverChoice {
    match config.solver {
        SolverKind::Ama => SolverChoice::Ama(AmaConfig {
            tol: config.tol,
            max_iters: config.max_iters,
            ..AmaConfig::default()
        }),
        SolverKind::AmaFast => SolverChoice::Ama(AmaConfig {
            tol: config.tol,
            max_iters: config.max_iters,
            ..AmaConfig::accelerated()
        }),
        SolverKind::Admm => SolverChoice::Admm(AdmmConfig {
            primal_tol: config.tol,
            dual_tol: config.tol,
            max_iters: config.max_iters,
            ..AdmmConfig::default()
        }),
    }
}

/// Runs the full pipeline: ingest, weight graph, grid, path solve, outputs.
/// Outputs are written even when no gamma converged, so partial results can
/// be inspected; the non-convergence error is returned afterwards.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    if config.tol <= 0.0 || !config.tol.is_finite() {
        return Err(CliError::Input(format!(
            "tolerance must be positive, got {}",
            config.tol
        )));
    }
    let has_header = sniff_header(&config.input)?;
    let data = ingest_csv(&config.input, has_header, config.standardize)?;
    let graph = build_knn_gaussian_weights(&data, config.knn, config.phi)?;
    if !graph.is_connected() {
        eprintln!(
            "warning: weight graph is disconnected ({} components); \
             the path coalesces per component",
            graph.n_components()
        );
    }

    let template = ClusterProblem::new(data, graph, config.norm.clone(), 0.0)?;
    let grid = build_grid(&template, &config.grid)?;
    let choice = solver_choice(config);
    let path = solve_path(&template, &grid, &choice, &PathOptions::default())?;

    let records = records_from_path(&path);
    let json = serde_json::to_string(&records)
        .map_err(|e| CliError::Input(format!("serialization failed: {e}")))?;
    match &config.output {
        Some(path) => fs::write(path, json + "\n")?,
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(json.as_bytes())?;
            lock.write_all(b"\n")?;
        }
    }

    if let Some(plot_path) = &config.plot_output {
        let mut buffer = Vec::new();
        emit_plot_data(&path, &mut buffer)?;
        fs::write(plot_path, buffer)?;
    }

    if !path.any_converged() {
        return Err(CliError::NoConvergence);
    }
    Ok(())
}
