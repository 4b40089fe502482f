use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cvxcluster_cli::{parse_grid_spec, parse_norm, parse_solver, run, CliError, RunConfig};

/// Convex clustering solution paths from CSV data.
///
/// Reads an n x p numeric table (rows are observations; a non-numeric first
/// row is treated as a header), builds a k-nearest-neighbor Gaussian weight
/// graph, solves the clustering path over a gamma grid, and writes one JSON
/// record per gamma with centroids, cluster assignments, and the solver's
/// convergence certificate.
#[derive(Parser, Debug)]
#[command(name = "cvxcluster", version)]
struct Args {
    /// Input CSV file.
    #[arg(long)]
    input: PathBuf,

    /// Penalty norm: l1, l2, linf, or group:<g1;g2;...> with 1-based
    /// comma-separated feature indices, e.g. group:1,2;3,4.
    #[arg(long, default_value = "l2")]
    norm: String,

    /// Number of nearest neighbors for the weight graph.
    #[arg(long, default_value_t = 5)]
    knn: usize,

    /// Gaussian kernel constant; 0 gives uniform weights.
    #[arg(long, default_value_t = 0.5)]
    phi: f64,

    /// Gamma grid: list:v1,v2,... | log:lo:hi:count | auto:count.
    #[arg(long = "gamma-grid", default_value = "auto:20")]
    gamma_grid: String,

    /// Solver: ama, ama-fast, or admm.
    #[arg(long, default_value = "ama-fast")]
    solver: String,

    /// Convergence tolerance (duality gap for AMA, absolute residual
    /// tolerance for ADMM).
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,

    /// Iteration cap per gamma.
    #[arg(long = "max-iters", default_value_t = 100_000)]
    max_iters: usize,

    /// Center each column and scale it to unit sample standard deviation.
    #[arg(long)]
    standardize: bool,

    /// Destination for the JSON records; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,

    /// Also write a long-format CSV of centroid trajectories
    /// (gamma,node,feature,value) for external plotting.
    #[arg(long = "emit-plot-data")]
    emit_plot_data: Option<PathBuf>,

    /// Recorded for reproducibility; the pipeline itself is deterministic.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn config_from(args: Args) -> Result<RunConfig, CliError> {
    Ok(RunConfig {
        input: args.input,
        norm: parse_norm(&args.norm)?,
        knn: args.knn,
        phi: args.phi,
        grid: parse_grid_spec(&args.gamma_grid)?,
        solver: parse_solver(&args.solver)?,
        tol: args.tol,
        max_iters: args.max_iters,
        standardize: args.standardize,
        output: args.output,
        plot_output: args.emit_plot_data,
        seed: args.seed,
    })
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = config_from(args).and_then(|config| run(&config));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code())
        }
    }
}
