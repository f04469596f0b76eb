//! Assembles a configured run: problem, metric, resolved parameters, solve,
//! trace export, and the summary document.

use std::path::{Path, PathBuf};

use serde_json::json;

use pdflow::dynamics::{
    default_alpha, euler_solve, stable_alpha, DynamicsParams, FlowResult, Mode, Outcome,
};
use pdflow::linalg::jacobi_eigenvalues;
use pdflow::metric::{certify_strong_monotonicity, choose_k, MetricSpec, MonotonicityCertificate};
use pdflow::oracle::{active_set_solve, MAX_ORACLE_CONSTRAINTS};
use pdflow::problem::{
    make_l2_least_squares, make_random_qp, ConvexQuadraticProgram, PrimalDualPoint,
};
use pdflow::trace::{fit_geometric_rate, CertificateSnapshot, RateFit};

use crate::config::{AlphaPolicy, Experiment, RunConfig, StepPolicy};
use crate::CliError;

pub struct PreparedRun {
    pub program: ConvexQuadraticProgram,
    pub spec: Option<MetricSpec>,
    pub certificate: Option<MonotonicityCertificate>,
    pub params: DynamicsParams,
    pub label: String,
}

pub fn build_program(config: &RunConfig) -> Result<ConvexQuadraticProgram, CliError> {
    let mut program = match config.experiment {
        Experiment::RandomQp => {
            let seed = config.seed.ok_or_else(|| CliError::config("--seed is required (see --help for usage)"))?;
            make_random_qp(seed, config.n, config.m, config.hessian_scale)
                .map_err(|e| CliError::config(format!("generator failed: {e}")))?
        }
        Experiment::L2Ls => {
            let seed = config.seed.ok_or_else(|| CliError::config("--seed is required (see --help for usage)"))?;
            make_l2_least_squares(seed, config.m, config.n, config.theta)
                .map_err(|e| CliError::config(format!("generator failed: {e}")))?
        }
        Experiment::CustomFile => {
            let path = config
                .problem_file
                .as_ref()
                .ok_or_else(|| CliError::config("custom-file experiment needs --problem-file"))?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(format!("cannot read {path}: {e}")))?;
            pdflow::problem::from_json(&text)
                .map_err(|e| CliError::config(format!("bad problem file {path}: {e}")))?
        }
    };
    if let Some(c) = &config.linear_term {
        if c.len() != program.n() {
            return Err(CliError::config("linear_term length must equal n"));
        }
        program = ConvexQuadraticProgram::new(
            program.hessian().clone(),
            c.clone(),
            program.constraint_matrix().clone(),
            program.constraint_rhs().to_vec(),
        )
        .expect("rebuilding a validated program cannot fail");
    }
    Ok(program)
}

/// Euclidean operator norm of ∇G, used by the step policy when no metric
/// certificate is available.
fn euclidean_lipschitz(program: &ConvexQuadraticProgram) -> f64 {
    let j = pdflow::lagrangian::jacobian_of_gradient_map(program);
    let jtj = j.transpose().matmul(&j);
    jacobi_eigenvalues(&jtj).last().unwrap().max(0.0).sqrt()
}

pub fn prepare(config: &RunConfig) -> Result<PreparedRun, CliError> {
    let program = build_program(config)?;

    let (spec, certificate) = if config.metric_mode {
        let spec = match config.k_abs {
            Some(k) => MetricSpec::with_k(&program, k),
            None => choose_k(&program, config.k_mult),
        }
        .map_err(|e| CliError::diverged(format!("{e}")))?;
        let cert = certify_strong_monotonicity(&program, &spec);
        (Some(spec), Some(cert))
    } else {
        (None, None)
    };

    let ell = match &certificate {
        Some(c) => c.ell,
        None => euclidean_lipschitz(&program),
    };

    let alpha = match config.alpha {
        Some(AlphaPolicy::Fixed(v)) => {
            if !(v > 0.0) {
                return Err(CliError::config("alpha must be positive"));
            }
            v
        }
        Some(AlphaPolicy::Auto) => match &certificate {
            Some(c) => default_alpha(c),
            None => return Err(CliError::config("--alpha auto needs metric mode")),
        },
        Some(AlphaPolicy::Stable) => match &certificate {
            Some(c) => stable_alpha(c),
            None => 0.9 / ell,
        },
        // defaults: the stability-scaled gain in metric mode, the unit gain
        // of the reference experiments in euclidean mode
        None => match &certificate {
            Some(c) => stable_alpha(c),
            None => 1.0,
        },
    };

    let step = match config.step {
        StepPolicy::Fixed(v) => {
            if !(v > 0.0) {
                return Err(CliError::config("step must be positive"));
            }
            v
        }
        StepPolicy::Auto => {
            let product = (1.0f64).min(0.9 / (alpha * ell));
            // snap to the exact fixed-point map when alpha already carries
            // the 1/ell scaling
            let product = if product > 1.0 - 1e-9 { 1.0 } else { product };
            product / config.beta
        }
    };

    if !(config.beta > 0.0) {
        return Err(CliError::config("beta must be positive"));
    }

    let mut params = DynamicsParams::new(if config.metric_mode {
        Mode::Metric
    } else {
        Mode::Euclidean
    });
    params.alpha = alpha;
    params.beta = config.beta;
    params.step = step;
    params.stop_tol = config.tol;
    params.max_iters = config.max_iters;

    for w in params.warnings(certificate.as_ref()) {
        eprintln!("warning: {w}");
    }

    let label = run_label(config);
    Ok(PreparedRun {
        program,
        spec,
        certificate,
        params,
        label,
    })
}

/// `{experiment}_{seed}_{mode}_{k_multiplier}` per the trace file convention.
pub fn run_label(config: &RunConfig) -> String {
    let mode = if config.metric_mode { "metric" } else { "euclidean" };
    let kmult = if config.metric_mode {
        format_multiplier(config.k_mult)
    } else {
        "0".to_string()
    };
    format!(
        "{}_{}_{}_{}",
        config.experiment.name(),
        config.seed.map(|s| s.to_string()).unwrap_or_else(|| "file".into()),
        mode,
        kmult
    )
}

pub fn format_multiplier(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

pub struct SolveArtifacts {
    pub result: FlowResult,
    pub fit: Option<RateFit>,
    pub reference: &'static str,
    pub csv_path: PathBuf,
    pub summary_path: PathBuf,
}

/// Runs a prepared configuration, finalizes the trace against the best
/// available reference (oracle when feasible, otherwise the final iterate),
/// writes the CSV and summary, and returns the pieces.
pub fn solve_and_export(
    config: &RunConfig,
    run: PreparedRun,
    out_dir: &Path,
) -> Result<SolveArtifacts, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::config(format!("cannot create {}: {e}", out_dir.display())))?;
    let program = &run.program;
    let z0 = PrimalDualPoint::origin(program.n(), program.m());
    let mut result = euler_solve(program, run.spec.as_ref(), &run.params, &z0, true)
        .map_err(|e| CliError::config(format!("{e}")))?;

    let (reference, z_ref): (&'static str, PrimalDualPoint) =
        if program.m() <= MAX_ORACLE_CONSTRAINTS {
            match active_set_solve(program) {
                Ok(sol) => ("oracle", sol.point()),
                Err(_) => ("final_iterate", result.final_point.clone()),
            }
        } else {
            ("final_iterate", result.final_point.clone())
        };

    let trajectory = result.trajectory.as_mut().expect("trajectory was recorded");
    if let Some(cert) = &run.certificate {
        trajectory.metadata.certificate = Some(CertificateSnapshot::from(cert));
    }
    trajectory.finalize(program, &z_ref, run.spec.as_ref());
    let fit = fit_geometric_rate(trajectory, None).ok();

    let csv_path = out_dir.join(format!("{}.csv", run.label));
    pdflow::trace::export_csv(trajectory, config.full_state, program.n(), program.m(), &csv_path)
        .map_err(|e| CliError::config(format!("{e}")))?;

    let summary = summary_json(config, &run, &result, &fit, reference);
    let summary_path = out_dir.join(format!("{}_summary.json", run.label));
    std::fs::write(&summary_path, summary)
        .map_err(|e| CliError::config(format!("cannot write summary: {e}")))?;

    Ok(SolveArtifacts {
        result,
        fit,
        reference,
        csv_path,
        summary_path,
    })
}

fn summary_json(
    config: &RunConfig,
    run: &PreparedRun,
    result: &FlowResult,
    fit: &Option<RateFit>,
    reference: &str,
) -> String {
    let outcome = match result.outcome {
        Outcome::Converged => "converged",
        Outcome::MaxIters => "max_iters",
        Outcome::Diverged => "diverged",
    };
    let cert = run.certificate.as_ref().map(|c| {
        json!({
            "k": c.k, "q1": c.q1, "q2": c.q2, "rho": c.rho,
            "nu": c.nu, "ell": c.ell,
            "nu_ge_q1_half": c.nu_ge_q1_half, "passed": c.passed,
        })
    });
    serde_json::to_string_pretty(&json!({
        "experiment": config.experiment.name(),
        "seed": config.seed,
        "mode": if config.metric_mode { "metric" } else { "euclidean" },
        "params": {
            "alpha": run.params.alpha,
            "beta": run.params.beta,
            "step": run.params.step,
            "stop_tol": run.params.stop_tol,
            "max_iters": run.params.max_iters,
            "k": run.spec.as_ref().map(|s| s.k()),
        },
        "outcome": outcome,
        "converged": result.converged,
        "iterations": result.iterations,
        "final_residual": result.final_residual,
        "final_kkt": {
            "stationarity": result.final_kkt.stationarity,
            "primal_infeasibility": result.final_kkt.primal_infeasibility,
            "dual_infeasibility": result.final_kkt.dual_infeasibility,
            "complementarity": result.final_kkt.complementarity,
            "total": result.final_kkt.total,
        },
        "error_reference": reference,
        "fitted_rate": fit.as_ref().map(|f| json!({
            "rate": f.rate,
            "r_squared": f.r_squared,
            "window": [f.window.0, f.window.1],
            "floor_truncated": f.floor_truncated,
        })),
        "certificate": cert,
    }))
    .expect("summary serialization cannot fail")
}
