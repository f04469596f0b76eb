//! Constrained convex quadratic programs: the problem type, seeded generators
//! for the two benchmark families, and validation of the standing
//! assumptions (strong convexity, full-row-rank constraints).

use serde::{Deserialize, Serialize};

use crate::linalg::{jacobi_eigenvalues, Mat};
use crate::rng::SplitMix64;

/// Tolerance on `max |H - H^T|` accepted at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Attempts to redraw a rank-deficient constraint matrix before giving up.
const MAX_REDRAWS: usize = 16;

/// minimize ½ xᵀHx + cᵀx  subject to  Ax ≤ b
///
/// `H` must be symmetric; positive definiteness and full row rank of `A` are
/// reported by [`validate`] rather than enforced here, so degenerate
/// instances can still be constructed and inspected.
#[derive(Clone, Debug)]
pub struct ConvexQuadraticProgram {
    hessian: Mat,
    linear: Vec<f64>,
    constraint_matrix: Mat,
    constraint_rhs: Vec<f64>,
    provenance: Option<Provenance>,
}

/// How a program was generated; carried through serialization so runs can be
/// reproduced from the document alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator")]
pub enum Provenance {
    #[serde(rename = "random_qp")]
    RandomQp { seed: u64, n: usize, m: usize, hessian_scale: f64 },
    #[serde(rename = "l2_least_squares")]
    L2LeastSquares { seed: u64, m: usize, n: usize, theta: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemError {
    DimensionMismatch(String),
    AsymmetricHessian { max_asymmetry: f64 },
    RankDeficientAfterRedraws { redraws: usize },
    InvalidParameter(String),
}

impl std::fmt::Display for ProblemError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProblemError::DimensionMismatch(what) => write!(f, "dimension mismatch: {what}"),
            ProblemError::AsymmetricHessian { max_asymmetry } => {
                write!(f, "hessian is not symmetric (max |H - H^T| = {max_asymmetry:e})")
            }
            ProblemError::RankDeficientAfterRedraws { redraws } => {
                write!(f, "constraint matrix rank deficient after {redraws} redraws")
            }
            ProblemError::InvalidParameter(what) => write!(f, "invalid parameter: {what}"),
        }
    }
}

impl std::error::Error for ProblemError {}

impl ConvexQuadraticProgram {
    pub fn new(
        hessian: Mat,
        linear: Vec<f64>,
        constraint_matrix: Mat,
        constraint_rhs: Vec<f64>,
    ) -> Result<Self, ProblemError> {
        let n = hessian.rows();
        if hessian.cols() != n {
            return Err(ProblemError::DimensionMismatch("H must be square".into()));
        }
        if linear.len() != n {
            return Err(ProblemError::DimensionMismatch("c must have length n".into()));
        }
        if constraint_matrix.cols() != n {
            return Err(ProblemError::DimensionMismatch("A must have n columns".into()));
        }
        if constraint_rhs.len() != constraint_matrix.rows() {
            return Err(ProblemError::DimensionMismatch("b must have length m".into()));
        }
        let asym = hessian.max_asymmetry();
        if asym > SYMMETRY_TOL {
            return Err(ProblemError::AsymmetricHessian { max_asymmetry: asym });
        }
        Ok(ConvexQuadraticProgram {
            hessian,
            linear,
            constraint_matrix,
            constraint_rhs,
            provenance: None,
        })
    }

    pub fn n(&self) -> usize {
        self.hessian.rows()
    }

    pub fn m(&self) -> usize {
        self.constraint_matrix.rows()
    }

    pub fn hessian(&self) -> &Mat {
        &self.hessian
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.linear
    }

    pub fn constraint_matrix(&self) -> &Mat {
        &self.constraint_matrix
    }

    pub fn constraint_rhs(&self) -> &[f64] {
        &self.constraint_rhs
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }

    /// ½ xᵀHx + cᵀx
    pub fn objective(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n(), "objective dimension mismatch");
        0.5 * crate::linalg::dot(x, &self.hessian.matvec(x)) + crate::linalg::dot(&self.linear, x)
    }

    /// Hx + c
    pub fn objective_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.hessian.matvec(x);
        crate::linalg::axpy(1.0, &self.linear, &mut g);
        g
    }

    /// Ax - b, the constraint values.
    pub fn constraint_values(&self, x: &[f64]) -> Vec<f64> {
        let mut v = self.constraint_matrix.matvec(x);
        for (vi, bi) in v.iter_mut().zip(&self.constraint_rhs) {
            *vi -= bi;
        }
        v
    }
}

/// z = (x, λ), the state of the primal-dual dynamics.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualPoint {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl PrimalDualPoint {
    pub fn new(x: Vec<f64>, lambda: Vec<f64>) -> Self {
        PrimalDualPoint { x, lambda }
    }

    pub fn origin(n: usize, m: usize) -> Self {
        PrimalDualPoint {
            x: vec![0.0; n],
            lambda: vec![0.0; m],
        }
    }

    pub fn dim(&self) -> usize {
        self.x.len() + self.lambda.len()
    }

    /// Stacked (x, λ) vector.
    pub fn stacked(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.dim());
        z.extend_from_slice(&self.x);
        z.extend_from_slice(&self.lambda);
        z
    }

    pub fn from_stacked(z: &[f64], n: usize, m: usize) -> Self {
        assert_eq!(z.len(), n + m, "stacked dimension mismatch");
        PrimalDualPoint {
            x: z[..n].to_vec(),
            lambda: z[n..].to_vec(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.lambda).all(|v| v.is_finite())
    }
}

fn gaussian_mat(rng: &mut SplitMix64, rows: usize, cols: usize) -> Mat {
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, rng.next_normal());
        }
    }
    m
}

fn gaussian_vec(rng: &mut SplitMix64, len: usize) -> Vec<f64> {
    let mut v = vec![0.0; len];
    rng.fill_normal(&mut v);
    v
}

fn has_full_row_rank(a: &Mat) -> bool {
    let eig = jacobi_eigenvalues(&a.gram_rows());
    let q2 = eig.last().copied().unwrap_or(0.0);
    eig[0] > 1e-10 * q2.max(1.0)
}

/// Draws `A` until it has full row rank, up to [`MAX_REDRAWS`] attempts.
fn draw_full_rank(rng: &mut SplitMix64, m: usize, n: usize) -> Result<Mat, ProblemError> {
    for _ in 0..MAX_REDRAWS {
        let a = gaussian_mat(rng, m, n);
        if has_full_row_rank(&a) {
            return Ok(a);
        }
    }
    Err(ProblemError::RankDeficientAfterRedraws { redraws: MAX_REDRAWS })
}

/// Benchmark family one: H = hessian_scale · I, c = 0, Gaussian `A` and `b`.
pub fn make_random_qp(
    seed: u64,
    n: usize,
    m: usize,
    hessian_scale: f64,
) -> Result<ConvexQuadraticProgram, ProblemError> {
    if n < m || m < 1 {
        return Err(ProblemError::InvalidParameter(format!(
            "need n >= m >= 1, got n={n} m={m}"
        )));
    }
    if !(hessian_scale > 0.0) {
        return Err(ProblemError::InvalidParameter("hessian_scale must be positive".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let a = draw_full_rank(&mut rng, m, n)?;
    let b = gaussian_vec(&mut rng, m);
    let program = ConvexQuadraticProgram::new(
        Mat::scaled_identity(n, hessian_scale),
        vec![0.0; n],
        a,
        b,
    )?;
    Ok(program.with_provenance(Provenance::RandomQp { seed, n, m, hessian_scale }))
}

/// Benchmark family two: L2-regularized least squares ‖Cx − d‖² + (θ/2)‖x‖²
/// with Gaussian data, stored as H = 2CᵀC + θI, c = −2Cᵀd.
pub fn make_l2_least_squares(
    seed: u64,
    m: usize,
    n: usize,
    theta: f64,
) -> Result<ConvexQuadraticProgram, ProblemError> {
    if !(theta > 0.0) {
        return Err(ProblemError::InvalidParameter("theta must be positive".into()));
    }
    if n < m || m < 1 {
        return Err(ProblemError::InvalidParameter(format!(
            "need n >= m >= 1, got n={n} m={m}"
        )));
    }
    let mut rng = SplitMix64::new(seed);
    let c_data = gaussian_mat(&mut rng, m, n);
    let d = gaussian_vec(&mut rng, m);
    let a = draw_full_rank(&mut rng, m, n)?;
    let b = gaussian_vec(&mut rng, m);

    let mut hessian = c_data.gram_cols().scale(2.0);
    for i in 0..n {
        hessian.set(i, i, hessian.get(i, i) + theta);
    }
    let linear: Vec<f64> = c_data.tr_matvec(&d).iter().map(|v| -2.0 * v).collect();

    let program = ConvexQuadraticProgram::new(hessian, linear, a, b)?;
    Ok(program.with_provenance(Provenance::L2LeastSquares { seed, m, n, theta }))
}

/// One assumption check: a named quantity and whether it passed.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub value: f64,
    pub passed: bool,
}

/// Result of [`validate`]: μ = λmin(H), rank(A) via the spectrum of AAᵀ, and
/// the extremal eigenvalues q1, q2 of AAᵀ.
#[derive(Clone, Debug, Serialize)]
pub struct AssumptionReport {
    pub mu: f64,
    pub rank: usize,
    pub q1: f64,
    pub q2: f64,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Checks the standing assumptions: μ = λmin(H) > 0 and rank(A) = m.
pub fn validate(program: &ConvexQuadraticProgram) -> AssumptionReport {
    let mu = jacobi_eigenvalues(program.hessian())[0];
    let gram = program.constraint_matrix().gram_rows();
    let eig = jacobi_eigenvalues(&gram);
    let m = program.m();
    let q2 = eig.last().copied().unwrap_or(0.0);
    let q1 = eig.first().copied().unwrap_or(0.0);
    let rank_tol = 1e-10 * q2.max(1.0);
    let rank = eig.iter().filter(|&&v| v > rank_tol).count();

    let checks = vec![
        AssumptionCheck {
            name: "strong_convexity_mu_positive".into(),
            value: mu,
            passed: mu > 0.0,
        },
        AssumptionCheck {
            name: "constraints_full_row_rank".into(),
            value: rank as f64,
            passed: rank == m,
        },
    ];
    AssumptionReport { mu, rank, q1, q2, checks }
}

/// JSON document for a program: row-major matrices, generator provenance
/// stored alongside the data.
#[derive(Serialize, Deserialize)]
struct ProgramDocument {
    n: usize,
    m: usize,
    #[serde(rename = "H")]
    hessian: Vec<Vec<f64>>,
    c: Vec<f64>,
    #[serde(rename = "A")]
    constraint_matrix: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

pub fn to_json(program: &ConvexQuadraticProgram) -> String {
    let doc = ProgramDocument {
        n: program.n(),
        m: program.m(),
        hessian: mat_to_rows(program.hessian()),
        c: program.linear_term().to_vec(),
        constraint_matrix: mat_to_rows(program.constraint_matrix()),
        b: program.constraint_rhs().to_vec(),
        provenance: program.provenance().cloned(),
    };
    serde_json::to_string_pretty(&doc).expect("program serialization cannot fail")
}

pub fn from_json(text: &str) -> Result<ConvexQuadraticProgram, ProblemError> {
    let doc: ProgramDocument = serde_json::from_str(text)
        .map_err(|e| ProblemError::InvalidParameter(format!("bad program JSON: {e}")))?;
    if doc.hessian.len() != doc.n || doc.constraint_matrix.len() != doc.m {
        return Err(ProblemError::DimensionMismatch(
            "matrix row counts disagree with n, m".into(),
        ));
    }
    let program = ConvexQuadraticProgram::new(
        Mat::from_rows(&doc.hessian),
        doc.c,
        Mat::from_rows(&doc.constraint_matrix),
        doc.b,
    )?;
    Ok(match doc.provenance {
        Some(p) => program.with_provenance(p),
        None => program,
    })
}
