//! Run configuration: defaults < JSON config file < command-line flags.

use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    RandomQp,
    L2Ls,
    CustomFile,
}

impl Experiment {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "random_qp" => Ok(Experiment::RandomQp),
            "l2ls" => Ok(Experiment::L2Ls),
            "custom-file" | "custom_file" => Ok(Experiment::CustomFile),
            other => Err(CliError::config(format!(
                "unknown experiment '{other}' (expected random_qp, l2ls or custom-file)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::RandomQp => "random_qp",
            Experiment::L2Ls => "l2ls",
            Experiment::CustomFile => "custom_file",
        }
    }
}

/// alpha is either a number or one of the named policies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaPolicy {
    /// 2ν/ℓ², the maximizer of the exponential rate bound.
    Auto,
    /// 0.9/ℓ, the practical stability-scaled gain.
    Stable,
    Fixed(f64),
}

impl AlphaPolicy {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "auto" => Ok(AlphaPolicy::Auto),
            "stable" => Ok(AlphaPolicy::Stable),
            other => other
                .parse::<f64>()
                .map(AlphaPolicy::Fixed)
                .map_err(|_| CliError::config(format!("bad alpha '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepPolicy {
    /// s·β = min(1, 0.9/(αℓ)).
    Auto,
    Fixed(f64),
}

impl StepPolicy {
    pub fn parse(s: &str) -> Result<Self, CliError> {
        match s {
            "auto" => Ok(StepPolicy::Auto),
            other => other
                .parse::<f64>()
                .map(StepPolicy::Fixed)
                .map_err(|_| CliError::config(format!("bad step '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: Option<u64>,
    pub n: usize,
    pub m: usize,
    pub theta: f64,
    pub hessian_scale: f64,
    /// Overrides the generated linear term c (config-file only).
    pub linear_term: Option<Vec<f64>>,
    pub problem_file: Option<String>,
    pub metric_mode: bool,
    pub k_mult: f64,
    pub k_abs: Option<f64>,
    pub alpha: Option<AlphaPolicy>,
    pub beta: f64,
    pub step: StepPolicy,
    pub tol: f64,
    pub max_iters: usize,
    pub out: String,
    pub full_state: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::RandomQp,
            seed: None,
            n: 10,
            m: 5,
            theta: 1.0,
            hessian_scale: 20.0,
            linear_term: None,
            problem_file: None,
            metric_mode: true,
            k_mult: 1.0,
            k_abs: None,
            alpha: None,
            beta: 1.0,
            step: StepPolicy::Auto,
            tol: 1e-9,
            max_iters: 1_000_000,
            out: default_out_dir(),
            full_state: false,
        }
    }
}

/// PDFLOW_OUT, falling back to the working directory.
pub fn default_out_dir() -> String {
    std::env::var("PDFLOW_OUT").unwrap_or_else(|_| ".".into())
}

/// Fields accepted in a --config JSON file; every field is optional and
/// command-line flags win over file values.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    experiment: Option<String>,
    seed: Option<u64>,
    n: Option<usize>,
    m: Option<usize>,
    theta: Option<f64>,
    hessian_scale: Option<f64>,
    linear_term: Option<Vec<f64>>,
    problem_file: Option<String>,
    mode: Option<String>,
    k_mult: Option<f64>,
    k_abs: Option<f64>,
    alpha: Option<serde_json::Value>,
    beta: Option<f64>,
    step: Option<serde_json::Value>,
    tol: Option<f64>,
    max_iters: Option<usize>,
    out: Option<String>,
    full_state: Option<bool>,
}

fn policy_string(v: &serde_json::Value, what: &str) -> Result<String, CliError> {
    match v {
        serde_json::Value::String(s) => Ok(s.clone()),
        serde_json::Value::Number(x) => Ok(x.to_string()),
        _ => Err(CliError::config(format!("bad {what} in config file"))),
    }
}

impl RunConfig {
    /// Applies a config file on top of the defaults.
    pub fn apply_file(&mut self, path: &str) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read config {path}: {e}")))?;
        let file: FileConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("bad config JSON in {path}: {e}")))?;

        if let Some(v) = file.experiment {
            self.experiment = Experiment::parse(&v)?;
        }
        if let Some(v) = file.mode {
            self.metric_mode = parse_mode(&v)?;
        }
        if let Some(v) = file.alpha {
            self.alpha = Some(AlphaPolicy::parse(&policy_string(&v, "alpha")?)?);
        }
        if let Some(v) = file.step {
            self.step = StepPolicy::parse(&policy_string(&v, "step")?)?;
        }
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = file.$field { self.$field = v; })*
            };
        }
        take!(n, m, theta, hessian_scale, tol, max_iters, out, full_state, k_mult, beta);
        if let Some(v) = file.seed {
            self.seed = Some(v);
        }
        if let Some(v) = file.linear_term {
            self.linear_term = Some(v);
        }
        if let Some(v) = file.problem_file {
            self.problem_file = Some(v);
        }
        if let Some(v) = file.k_abs {
            self.k_abs = Some(v);
        }
        Ok(())
    }
}

pub fn parse_mode(s: &str) -> Result<bool, CliError> {
    match s {
        "metric" => Ok(true),
        "euclidean" => Ok(false),
        other => Err(CliError::config(format!(
            "unknown mode '{other}' (expected euclidean or metric)"
        ))),
    }
}
