//! Trajectory recording, error norms in both geometries, geometric-rate
//! fitting, envelope checking, and CSV/JSON export with canonical float
//! formatting (17 significant digits, byte-stable round trips).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::lyapunov_value;
use crate::linalg;
use crate::metric::{MetricSpec, MonotonicityCertificate};
use crate::problem::{ConvexQuadraticProgram, PrimalDualPoint, Provenance};

/// Iterations recorded densely before the cadence thins to every 10th.
const DENSE_ITERS: usize = 10_000;

/// Fit floor: samples with err_r below this are dropped from rate fits.
const ERR_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CertificateSnapshot {
    pub k: f64,
    pub q1: f64,
    pub q2: f64,
    pub rho: f64,
    pub nu: f64,
    pub ell: f64,
    pub nu_ge_q1_half: bool,
    pub passed: bool,
}

impl From<&MonotonicityCertificate> for CertificateSnapshot {
    fn from(c: &MonotonicityCertificate) -> Self {
        CertificateSnapshot {
            k: c.k,
            q1: c.q1,
            q2: c.q2,
            rho: c.rho,
            nu: c.nu,
            ell: c.ell,
            nu_ge_q1_half: c.nu_ge_q1_half,
            passed: c.passed,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMetadata {
    pub provenance: Option<Provenance>,
    pub mode: String,
    pub alpha: f64,
    pub beta: f64,
    pub step: f64,
    pub stop_tol: f64,
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateSnapshot>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Sample {
    pub iter: usize,
    pub t: f64,
    pub z: Vec<f64>,
    pub residual: f64,
    pub err_euclid: f64,
    pub err_r: f64,
    pub lyapunov: f64,
}

/// Recorded trajectory. Error and Lyapunov columns are filled by
/// [`Trajectory::finalize`] against a reference point; export requires that.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Trajectory {
    pub metadata: RunMetadata,
    samples: Vec<Sample>,
    finalized: bool,
}

#[derive(Debug)]
pub enum TraceError {
    NotFinalized,
    InsufficientSamples { have: usize, need: usize },
    Io(std::io::Error),
}

impl std::fmt::Display for TraceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TraceError::NotFinalized => {
                write!(f, "trajectory must be finalized against a reference point first")
            }
            TraceError::InsufficientSamples { have, need } => {
                write!(f, "rate fit needs at least {need} usable samples, have {have}")
            }
            TraceError::Io(e) => write!(f, "trace I/O failure: {e}"),
        }
    }
}

impl std::error::Error for TraceError {}

impl From<std::io::Error> for TraceError {
    fn from(e: std::io::Error) -> Self {
        TraceError::Io(e)
    }
}

impl Trajectory {
    pub fn new(metadata: RunMetadata) -> Self {
        Trajectory {
            metadata,
            samples: Vec::new(),
            finalized: false,
        }
    }

    /// Cadence: every iteration up to 10^4, every 10th afterwards.
    pub fn record(&mut self, iter: usize, t_phys: f64, z: &[f64], residual: f64) {
        if iter > DENSE_ITERS && iter % 10 != 0 {
            return;
        }
        self.samples.push(Sample {
            iter,
            t: t_phys,
            z: z.to_vec(),
            residual,
            err_euclid: f64::NAN,
            err_r: f64::NAN,
            lyapunov: f64::NAN,
        });
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn is_finalized(&self) -> bool {
        self.finalized
    }

    /// Fills the error and Lyapunov columns against `z_star`. With a metric,
    /// err_r uses the r-norm and the Lyapunov value is the V₁ variant;
    /// without one, err_r coincides with the Euclidean error.
    pub fn finalize(
        &mut self,
        program: &ConvexQuadraticProgram,
        z_star: &PrimalDualPoint,
        spec: Option<&MetricSpec>,
    ) {
        let star = z_star.stacked();
        for s in &mut self.samples {
            let diff = linalg::sub_vec(&s.z, &star);
            s.err_euclid = linalg::norm2(&diff);
            s.err_r = match spec {
                Some(sp) => sp.r_norm(&diff),
                None => s.err_euclid,
            };
            s.lyapunov = lyapunov_value(
                program,
                spec,
                &PrimalDualPoint::from_stacked(&s.z, program.n(), program.m()),
                z_star,
            );
        }
        self.finalized = true;
    }
}

/// Least-squares line through (t, ln err_r) on a window of iterations.
#[derive(Clone, Debug, Serialize)]
pub struct RateFit {
    /// Decay rate per unit physical time (minus the fitted slope).
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Iteration window the fit used.
    pub window: (usize, usize),
    /// True when trailing samples were dropped for sitting at the error floor.
    pub floor_truncated: bool,
}

/// Fits a geometric rate on `trajectory`. `window` is a half-open iteration
/// range; by default the first 10% of iterations are dropped as transient and
/// everything after err_r falls below 1e-12 is truncated.
pub fn fit_geometric_rate(
    trajectory: &Trajectory,
    window: Option<(usize, usize)>,
) -> Result<RateFit, TraceError> {
    if !trajectory.is_finalized() {
        return Err(TraceError::NotFinalized);
    }
    let samples = trajectory.samples();
    if samples.is_empty() {
        return Err(TraceError::InsufficientSamples { have: 0, need: 10 });
    }
    let last_iter = samples.last().unwrap().iter;
    let (start, end) = window.unwrap_or((last_iter / 10, last_iter + 1));

    let mut floor_truncated = false;
    let mut ts = Vec::new();
    let mut logs = Vec::new();
    let mut used_window = (usize::MAX, 0usize);
    for s in samples {
        if s.iter < start || s.iter >= end {
            continue;
        }
        if s.err_r < ERR_FLOOR {
            floor_truncated = true;
            break;
        }
        ts.push(s.t);
        logs.push(s.err_r.ln());
        used_window.0 = used_window.0.min(s.iter);
        used_window.1 = used_window.1.max(s.iter);
    }
    if ts.len() < 10 {
        return Err(TraceError::InsufficientSamples { have: ts.len(), need: 10 });
    }

    let n = ts.len() as f64;
    let mean_t = ts.iter().sum::<f64>() / n;
    let mean_l = logs.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut ss_tot = 0.0;
    for (t, l) in ts.iter().zip(&logs) {
        sxx += (t - mean_t) * (t - mean_t);
        sxy += (t - mean_t) * (l - mean_l);
        ss_tot += (l - mean_l) * (l - mean_l);
    }
    // numerically constant log series: a flat line explains everything
    let variance_floor = 1e-24 * n;
    let (slope, r_squared, intercept) = if ss_tot <= variance_floor || sxx <= 0.0 {
        (0.0, 1.0, mean_l)
    } else {
        let slope = sxy / sxx;
        let intercept = mean_l - slope * mean_t;
        let mut ss_res = 0.0;
        for (t, l) in ts.iter().zip(&logs) {
            let pred = intercept + slope * t;
            ss_res += (l - pred) * (l - pred);
        }
        (slope, (1.0 - ss_res / ss_tot).clamp(0.0, 1.0), intercept)
    };

    Ok(RateFit {
        rate: -slope,
        intercept,
        r_squared,
        window: used_window,
        floor_truncated,
    })
}

/// Whether every sample satisfies
/// err_r(t) ≤ err_r(0) · exp(−bound · t) · (1 + slack).
#[derive(Clone, Copy, Debug)]
pub struct EnvelopeReport {
    pub holds: bool,
    pub max_ratio: f64,
    pub first_violation_iter: Option<usize>,
}

pub fn check_envelope(
    trajectory: &Trajectory,
    bound: f64,
    slack: f64,
) -> Result<EnvelopeReport, TraceError> {
    if !trajectory.is_finalized() {
        return Err(TraceError::NotFinalized);
    }
    let samples = trajectory.samples();
    if samples.is_empty() {
        return Err(TraceError::InsufficientSamples { have: 0, need: 1 });
    }
    let err0 = samples[0].err_r;
    let mut max_ratio = 0.0f64;
    let mut first_violation_iter = None;
    for s in samples {
        let envelope = err0 * (-bound * s.t).exp() * (1.0 + slack);
        let ratio = if envelope > 0.0 { s.err_r / envelope } else { f64::INFINITY };
        if ratio > max_ratio {
            max_ratio = ratio;
        }
        if ratio > 1.0 && first_violation_iter.is_none() {
            first_violation_iter = Some(s.iter);
        }
    }
    Ok(EnvelopeReport {
        holds: first_violation_iter.is_none(),
        max_ratio,
        first_violation_iter,
    })
}

/// Canonical float format: 17 significant digits, scientific notation.
/// Parsing and re-formatting a value printed this way is the identity.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with columns `iter,t,residual,err_euclid,err_r,lyapunov`,
/// extended by `x_0..x_{n-1},lambda_0..lambda_{m-1}` when `full_state`.
pub fn to_csv(trajectory: &Trajectory, full_state: bool, n: usize, m: usize) -> Result<String, TraceError> {
    if !trajectory.is_finalized() {
        return Err(TraceError::NotFinalized);
    }
    let mut out = String::from("iter,t,residual,err_euclid,err_r,lyapunov");
    if full_state {
        for i in 0..n {
            out.push_str(&format!(",x_{i}"));
        }
        for i in 0..m {
            out.push_str(&format!(",lambda_{i}"));
        }
    }
    out.push('\n');
    for s in trajectory.samples() {
        out.push_str(&format!(
            "{},{},{},{},{},{}",
            s.iter,
            format_float(s.t),
            format_float(s.residual),
            format_float(s.err_euclid),
            format_float(s.err_r),
            format_float(s.lyapunov)
        ));
        if full_state {
            for v in &s.z {
                out.push(',');
                out.push_str(&format_float(*v));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Parses CSV text produced by [`to_csv`] into header + numeric rows.
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<(usize, Vec<f64>)>,
}

pub fn parse_csv(text: &str) -> CsvTable {
    let mut lines = text.lines();
    let header = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let mut fields = line.split(',');
            let iter: usize = fields.next().unwrap().parse().expect("iter column");
            let values = fields.map(|f| f.parse::<f64>().expect("float column")).collect();
            (iter, values)
        })
        .collect();
    CsvTable { header, rows }
}

/// Re-emits a parsed table in canonical formatting.
pub fn format_csv(table: &CsvTable) -> String {
    let mut out = table.header.join(",");
    out.push('\n');
    for (iter, values) in &table.rows {
        out.push_str(&iter.to_string());
        for v in values {
            out.push(',');
            out.push_str(&format_float(*v));
        }
        out.push('\n');
    }
    out
}

pub fn export_csv(
    trajectory: &Trajectory,
    full_state: bool,
    n: usize,
    m: usize,
    path: &Path,
) -> Result<(), TraceError> {
    let text = to_csv(trajectory, full_state, n, m)?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

pub fn export_json(trajectory: &Trajectory, path: &Path) -> Result<(), TraceError> {
    if !trajectory.is_finalized() {
        return Err(TraceError::NotFinalized);
    }
    let text = serde_json::to_string_pretty(trajectory).expect("trajectory serialization");
    let mut file = std::fs::File::create(path)?;
    file.write_all(text.as_bytes())?;
    Ok(())
}

pub fn from_json(text: &str) -> Result<Trajectory, serde_json::Error> {
    serde_json::from_str(text)
}
