//! pdflow: seeded, scriptable runs of the projected primal-dual dynamics.
//!
//! Subcommands: `solve` (one configured run), `certify` (monotonicity
//! certificate only), `reproduce` (the bundled experiment families fig1-fig4).
//! Exit codes: 0 success/converged, 1 configuration error, 2 divergence or
//! failed certificate.

mod config;
mod reproduce;
mod runner;

use clap::{Args, Parser, Subcommand};

use config::{AlphaPolicy, Experiment, RunConfig, StepPolicy};
use pdflow::dynamics::Outcome;
use pdflow::linalg::jacobi_eigenvalues;

#[derive(Debug)]
pub struct CliError {
    pub exit_code: i32,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { exit_code: 1, message: msg.into() }
    }

    pub fn diverged(msg: impl Into<String>) -> Self {
        CliError { exit_code: 2, message: msg.into() }
    }
}

#[derive(Parser)]
#[command(
    name = "pdflow",
    about = "Projected primal-dual dynamics for linearly constrained convex QPs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or load a program, run the dynamics, write trace + summary.
    Solve(RunArgs),
    /// Build the metric and print the strong-monotonicity certificate.
    Certify(RunArgs),
    /// Re-run a bundled experiment family (fig1, fig2, fig3, fig4).
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Problem family: random_qp, l2ls, or custom-file.
    #[arg(long)]
    experiment: Option<String>,
    /// Seed for all randomness in the run.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of primal variables.
    #[arg(long)]
    n: Option<usize>,
    /// Number of inequality constraints.
    #[arg(long)]
    m: Option<usize>,
    /// Regularization weight of the l2ls family.
    #[arg(long)]
    theta: Option<f64>,
    /// Diagonal Hessian scale of the random_qp family.
    #[arg(long)]
    hessian_scale: Option<f64>,
    /// Geometry: euclidean or metric.
    #[arg(long)]
    mode: Option<String>,
    /// k = k-mult * rho (threshold multiple).
    #[arg(long = "k-mult")]
    k_mult: Option<f64>,
    /// Absolute k, overriding --k-mult.
    #[arg(long = "k-abs")]
    k_abs: Option<f64>,
    /// Gain alpha: a number, "auto" (2nu/ell^2) or "stable" (0.9/ell).
    #[arg(long)]
    alpha: Option<String>,
    /// Outer gain beta.
    #[arg(long)]
    beta: Option<f64>,
    /// Euler step s: a number or "auto" (s*beta = min(1, 0.9/(alpha*ell))).
    #[arg(long)]
    step: Option<String>,
    /// Stopping tolerance on the projected-gradient residual.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration budget.
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// Output directory (default: $PDFLOW_OUT or the working directory).
    #[arg(long)]
    out: Option<String>,
    /// JSON config file; command-line flags override its values.
    #[arg(long)]
    config: Option<String>,
    /// Append per-coordinate state columns to the CSV.
    #[arg(long = "full-state")]
    full_state: bool,
    /// Program JSON for the custom-file experiment.
    #[arg(long = "problem-file")]
    problem_file: Option<String>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// One of fig1, fig2, fig3, fig4.
    figure: String,
    /// Output directory (default: $PDFLOW_OUT or the working directory).
    #[arg(long)]
    out: Option<String>,
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        cfg.apply_file(path)?;
    }
    if let Some(v) = &args.experiment {
        cfg.experiment = Experiment::parse(v)?;
    }
    if let Some(v) = &args.mode {
        cfg.metric_mode = config::parse_mode(v)?;
    }
    if let Some(v) = &args.alpha {
        cfg.alpha = Some(AlphaPolicy::parse(v)?);
    }
    if let Some(v) = &args.step {
        cfg.step = StepPolicy::parse(v)?;
    }
    macro_rules! take {
        ($($field:ident),*) => {
            $(if let Some(v) = args.$field.clone() { cfg.$field = v; })*
        };
    }
    take!(n, m, theta, hessian_scale, k_mult, beta, tol, max_iters, out);
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    if args.k_abs.is_some() {
        cfg.k_abs = args.k_abs;
    }
    if args.problem_file.is_some() {
        cfg.problem_file = args.problem_file.clone();
    }
    if args.full_state {
        cfg.full_state = true;
    }
    Ok(cfg)
}

fn cmd_solve(args: &RunArgs) -> Result<i32, CliError> {
    let cfg = resolve_config(args)?;
    let run = runner::prepare(&cfg)?;
    let out_dir = std::path::PathBuf::from(&cfg.out);
    let artifacts = runner::solve_and_export(&cfg, run, &out_dir)?;
    eprintln!(
        "{}: {} after {} iterations (kkt total {:.3e}); trace {}",
        artifacts.summary_path.display(),
        match artifacts.result.outcome {
            Outcome::Converged => "converged",
            Outcome::MaxIters => "stopped at max-iters",
            Outcome::Diverged => "diverged",
        },
        artifacts.result.iterations,
        artifacts.result.final_kkt.total,
        artifacts.csv_path.display(),
    );
    match artifacts.result.outcome {
        Outcome::Converged => Ok(0),
        Outcome::MaxIters => Err(CliError::diverged(
            "did not converge within the iteration budget",
        )),
        Outcome::Diverged => Err(CliError::diverged("state diverged")),
    }
}

fn cmd_certify(args: &RunArgs) -> Result<i32, CliError> {
    let cfg = resolve_config(args)?;
    if !cfg.metric_mode {
        // Euclidean geometry: report the monotone-but-not-strongly spectrum
        let program = runner::build_program(&cfg)?;
        let sym = pdflow::lagrangian::jacobian_of_gradient_map(&program).symmetric_part();
        let eig = jacobi_eigenvalues(&sym);
        let zero_count = eig.iter().filter(|v| v.abs() <= 1e-9).count();
        let doc = serde_json::json!({
            "mode": "euclidean",
            "nu": eig[0],
            "zero_eigenvalues": zero_count,
            "monotone": eig[0] >= -1e-9,
            "strongly_monotone": false,
        });
        println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        return Ok(0);
    }
    let run = runner::prepare(&cfg)?;
    let cert = run.certificate.expect("metric mode builds a certificate");
    println!("{}", cert.to_json());
    let out_dir = std::path::PathBuf::from(&cfg.out);
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", out_dir.display())))?;
    let path = out_dir.join(format!("{}_certificate.json", run.label));
    std::fs::write(&path, cert.to_json())
        .map_err(|e| CliError::config(format!("cannot write certificate: {e}")))?;
    if cert.passed {
        Ok(0)
    } else {
        Err(CliError::diverged("certificate failed: nu <= 0"))
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Certify(args) => cmd_certify(args),
        Command::Reproduce(args) => reproduce::run(args.figure.as_str(), args.out.clone()),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            std::process::exit(e.exit_code);
        }
    }
}
