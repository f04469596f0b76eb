//! The constant block metric that makes the preconditioned gradient map
//! strongly monotone: R⁻¹ = [[kI, Aᵀ], [A, kI]] with k above the
//! positive-definiteness and Schur-complement thresholds, the metric gradient
//! G_r = R⁻¹G, and the measured strong-monotonicity certificate (ν, ℓ).

use serde_json::json;

use crate::lagrangian::{gradient_map, jacobian_of_gradient_map};
use crate::linalg::{self, jacobi_eigenvalues, CholeskyFactor, LuFactor, Mat};
use crate::parallel;
use crate::problem::{ConvexQuadraticProgram, PrimalDualPoint};

/// Relative bump applied to strict thresholds (`k > ...`).
const STRICT_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricError {
    NotPositiveDefinite { k: f64, sqrt_q2: f64 },
    RankDeficientConstraints { q1: f64 },
    InvalidMultiplier(f64),
    SingularHessian,
}

impl std::fmt::Display for MetricError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MetricError::NotPositiveDefinite { k, sqrt_q2 } => write!(
                f,
                "metric not positive definite: k = {k} must exceed sqrt(q2) = {sqrt_q2}"
            ),
            MetricError::RankDeficientConstraints { q1 } => {
                write!(f, "constraint matrix is rank deficient (lambda_min(AA^T) = {q1:e})")
            }
            MetricError::InvalidMultiplier(m) => write!(f, "multiplier must be >= 1, got {m}"),
            MetricError::SingularHessian => write!(f, "hessian is numerically singular"),
        }
    }
}

impl std::error::Error for MetricError {}

/// Extremal eigenvalues (q1, q2) of AAᵀ.
///
/// Errors with `RankDeficientConstraints` when q1 is negligible against q2.
pub fn spectral_bounds(a: &Mat) -> Result<(f64, f64), MetricError> {
    let eig = jacobi_eigenvalues(&a.gram_rows());
    let q1 = eig[0];
    let q2 = *eig.last().unwrap();
    if q1 <= 1e-10 * q2.max(1.0) {
        return Err(MetricError::RankDeficientConstraints { q1 });
    }
    Ok((q1, q2))
}

/// The constant metric, held through its inverse R⁻¹ = [[kI, Aᵀ], [A, kI]]
/// and a Cholesky factor R⁻¹ = LLᵀ. R itself is only formed on request;
/// r-inner products go through triangular solves:
/// ⟨u, v⟩_r = uᵀRv = (L⁻¹u)ᵀ(L⁻¹v).
pub struct MetricSpec {
    k: f64,
    q1: f64,
    q2: f64,
    rho: f64,
    inverse: Mat,
    chol: CholeskyFactor,
    n: usize,
    m: usize,
}

impl MetricSpec {
    /// Assembles the metric for a given k, verifying k > sqrt(q2) and
    /// positive definiteness of R⁻¹ (Cholesky succeeds).
    pub fn with_k(program: &ConvexQuadraticProgram, k: f64) -> Result<Self, MetricError> {
        let (q1, q2) = spectral_bounds(program.constraint_matrix())?;
        if k <= q2.sqrt() {
            return Err(MetricError::NotPositiveDefinite { k, sqrt_q2: q2.sqrt() });
        }
        let inverse = assemble_inverse(program, k);
        let chol = CholeskyFactor::new(&inverse)
            .map_err(|_| MetricError::NotPositiveDefinite { k, sqrt_q2: q2.sqrt() })?;
        let rho = threshold_rho(program, q1, q2)?;
        Ok(MetricSpec {
            k,
            q1,
            q2,
            rho,
            inverse,
            chol,
            n: program.n(),
            m: program.m(),
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn q1(&self) -> f64 {
        self.q1
    }

    pub fn q2(&self) -> f64 {
        self.q2
    }

    /// The k-selection threshold ϱ = max{√q2, λmax(AᵀAH⁻¹ + ½q1H⁻¹ + ½H)}.
    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }

    /// R⁻¹, the block matrix [[kI, Aᵀ], [A, kI]].
    pub fn inverse_matrix(&self) -> &Mat {
        &self.inverse
    }

    /// R, formed densely; intended for tests and diagnostics only.
    pub fn metric_matrix(&self) -> Mat {
        let d = self.n + self.m;
        let mut r = Mat::zeros(d, d);
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            let col = self.chol.solve(&e);
            for i in 0..d {
                r.set(i, j, col[i]);
            }
        }
        r
    }

    /// ⟨u, v⟩_r = uᵀRv via two forward solves against L.
    pub fn r_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        let lu = self.chol.forward_solve(u);
        let lv = self.chol.forward_solve(v);
        linalg::dot(&lu, &lv)
    }

    /// ‖v‖_r = ‖L⁻¹v‖₂.
    pub fn r_norm(&self, v: &[f64]) -> f64 {
        linalg::norm2(&self.chol.forward_solve(v))
    }

    pub(crate) fn cholesky(&self) -> &CholeskyFactor {
        &self.chol
    }

    /// Exact metric projection of a stacked point onto ℝⁿ × ℝᵐ₊.
    ///
    /// Minimizing ‖w − v‖_r over v with v_λ ≥ 0 has the closed form
    ///   v_λ = max(w_λ, 0),   v_x = w_x + Aᵀ[−w_λ]₊ / k,
    /// because the KKT system R(v − w) = [0; η] decouples componentwise in
    /// the multiplier η. The Euclidean clamp alone is not the r-projection
    /// and shifts the fixed points of the metric dynamics off the saddle.
    pub fn project_domain(&self, program: &ConvexQuadraticProgram, w: &[f64]) -> Vec<f64> {
        assert_eq!(w.len(), self.n + self.m, "projection dimension mismatch");
        let mut out = w.to_vec();
        let mut neg = vec![0.0; self.m];
        let mut any = false;
        for i in 0..self.m {
            let wl = w[self.n + i];
            if wl < 0.0 {
                neg[i] = -wl;
                out[self.n + i] = 0.0;
                any = true;
            }
        }
        if any {
            let corr = program.constraint_matrix().tr_matvec(&neg);
            for i in 0..self.n {
                out[i] += corr[i] / self.k;
            }
        }
        out
    }
}

fn assemble_inverse(program: &ConvexQuadraticProgram, k: f64) -> Mat {
    let (n, m) = (program.n(), program.m());
    let mut r = Mat::zeros(n + m, n + m);
    for i in 0..(n + m) {
        r.set(i, i, k);
    }
    for i in 0..m {
        for j in 0..n {
            let a = program.constraint_matrix().get(i, j);
            r.set(j, n + i, a);
            r.set(n + i, j, a);
        }
    }
    r
}

/// λmax of AᵀAH⁻¹ + ½q1H⁻¹ + ½H, taken conservatively as the larger of the
/// symmetric-part eigenvalue and the power-iteration spectral radius (the
/// matrix is not symmetric for general H).
fn threshold_rho(
    program: &ConvexQuadraticProgram,
    q1: f64,
    q2: f64,
) -> Result<f64, MetricError> {
    let n = program.n();
    let h_lu = LuFactor::new(program.hessian()).map_err(|_| MetricError::SingularHessian)?;
    // H⁻¹ column by column
    let mut h_inv = Mat::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let col = h_lu.solve(&e);
        for i in 0..n {
            h_inv.set(i, j, col[i]);
        }
    }
    let ata = program.constraint_matrix().gram_cols();
    let mut threshold = ata.matmul(&h_inv);
    threshold = threshold.add(&h_inv.scale(0.5 * q1));
    threshold = threshold.add(&program.hessian().scale(0.5));

    let sym_max = *jacobi_eigenvalues(&threshold.symmetric_part())
        .last()
        .expect("nonempty spectrum");
    let radius = linalg::spectral_radius(&threshold, 20_000, 1e-12);
    Ok(sym_max.max(radius).max(q2.sqrt()))
}

/// Selects k = multiplier · ϱ · (1 + 1e-6) and assembles the metric.
pub fn choose_k(
    program: &ConvexQuadraticProgram,
    multiplier: f64,
) -> Result<MetricSpec, MetricError> {
    if !(multiplier >= 1.0) {
        return Err(MetricError::InvalidMultiplier(multiplier));
    }
    let (q1, q2) = spectral_bounds(program.constraint_matrix())?;
    let rho = threshold_rho(program, q1, q2)?;
    let k = multiplier * rho * (1.0 + STRICT_MARGIN);
    MetricSpec::with_k(program, k)
}

/// G_r(z) = R⁻¹G(z) through the explicit block formula
///   [ k∇f − AᵀAx + kAᵀλ + Aᵀb ;  A∇f − kAx + AAᵀλ + kb ].
///
/// [`metric_gradient_via_matrix`] is the independent matrix-vector route;
/// the two must agree to 1e-12 and are cross-checked in the test suite.
pub fn metric_gradient(
    program: &ConvexQuadraticProgram,
    spec: &MetricSpec,
    z: &PrimalDualPoint,
) -> Vec<f64> {
    assert_eq!(z.x.len(), program.n(), "primal dimension mismatch");
    assert_eq!(z.lambda.len(), program.m(), "dual dimension mismatch");
    let k = spec.k();
    let a = program.constraint_matrix();

    // shared pieces: g = ∇f(x) + Aᵀλ is deliberately NOT formed; the block
    // formula keeps the five primal and four dual terms separate on purpose.
    let grad_f = program.objective_gradient(&z.x);
    let ax = a.matvec(&z.x);
    let at_lambda = a.tr_matvec(&z.lambda);
    let at_b = a.tr_matvec(program.constraint_rhs());
    let at_ax = a.tr_matvec(&ax);
    let a_grad_f = a.matvec(&grad_f);
    let aat_lambda = a.matvec(&at_lambda);

    let mut out = Vec::with_capacity(program.n() + program.m());
    for i in 0..program.n() {
        out.push(k * grad_f[i] - at_ax[i] + k * at_lambda[i] + at_b[i]);
    }
    for i in 0..program.m() {
        out.push(a_grad_f[i] - k * ax[i] + aat_lambda[i] + k * program.constraint_rhs()[i]);
    }
    out
}

/// The cross-check route: assemble G(z) and multiply by R⁻¹.
pub fn metric_gradient_via_matrix(
    program: &ConvexQuadraticProgram,
    spec: &MetricSpec,
    z: &PrimalDualPoint,
) -> Vec<f64> {
    spec.inverse_matrix().matvec(&gradient_map(program, z))
}

/// Measured strong-monotonicity evidence for G_r.
///
/// ν is the smallest eigenvalue of the symmetric part of ∇G_r = R⁻¹∇G: the
/// modulus actually guaranteed by the spectrum, never assumed from theory.
/// `nu_ge_q1_half` records whether the theoretical lower bound q1/2 held.
#[derive(Clone, Debug)]
pub struct MonotonicityCertificate {
    pub k: f64,
    pub q1: f64,
    pub q2: f64,
    pub rho: f64,
    pub nu: f64,
    pub ell: f64,
    /// λmin(∇G_r + ∇G_rᵀ − q1·I); equals 2ν − q1 up to eigensolver error.
    pub lambda_min_shifted: f64,
    pub nu_ge_q1_half: bool,
    pub passed: bool,
}

impl MonotonicityCertificate {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&json!({
            "k": self.k,
            "q1": self.q1,
            "q2": self.q2,
            "rho": self.rho,
            "nu": self.nu,
            "ell": self.ell,
            "nu_ge_q1_half": self.nu_ge_q1_half,
            "passed": self.passed,
        }))
        .expect("certificate serialization cannot fail")
    }
}

/// ∇G_r = R⁻¹ ∇G, constant for quadratic programs.
pub fn metric_jacobian(program: &ConvexQuadraticProgram, spec: &MetricSpec) -> Mat {
    spec.inverse_matrix().matmul(&jacobian_of_gradient_map(program))
}

pub fn certify_strong_monotonicity(
    program: &ConvexQuadraticProgram,
    spec: &MetricSpec,
) -> MonotonicityCertificate {
    let jac = metric_jacobian(program, spec);
    let sym = jac.symmetric_part();
    let nu = jacobi_eigenvalues(&sym)[0];

    // λmin(∇G_r + ∇G_rᵀ − q1 I), computed from its own assembly as a
    // cross-check against 2ν − q1
    let d = jac.rows();
    let mut shifted = jac.add(&jac.transpose());
    for i in 0..d {
        shifted.set(i, i, shifted.get(i, i) - spec.q1());
    }
    let lambda_min_shifted = jacobi_eigenvalues(&shifted)[0];

    let ell = estimate_lipschitz(program, spec);
    MonotonicityCertificate {
        k: spec.k(),
        q1: spec.q1(),
        q2: spec.q2(),
        rho: spec.rho(),
        nu,
        ell,
        lambda_min_shifted,
        nu_ge_q1_half: nu >= spec.q1() / 2.0,
        passed: nu > 0.0,
    }
}

/// Lipschitz constant of G_r in the r-norm:
/// ℓ = sup ‖Jv‖_r / ‖v‖_r = √λmax(JᵀRJ, R) with J = R⁻¹∇G.
///
/// The generalized problem reduces through the factor R⁻¹ = LLᵀ to the
/// ordinary symmetric problem λmax(MᵀM) with M = Lᵀ∇G L.
pub fn estimate_lipschitz(program: &ConvexQuadraticProgram, spec: &MetricSpec) -> f64 {
    r_operator_norm_of_euclidean_jacobian(spec, &jacobian_of_gradient_map(program))
}

/// r-operator norm of R⁻¹·`euclidean_jac`, i.e. the largest singular value
/// of M = Lᵀ·`euclidean_jac`·L.
fn r_operator_norm_of_euclidean_jacobian(spec: &MetricSpec, euclidean_jac: &Mat) -> f64 {
    let d = euclidean_jac.rows();
    let mut m = Mat::zeros(d, d);
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        let le = spec.cholesky().l_matvec(&e);
        let col = spec.cholesky().lt_matvec(&euclidean_jac.matvec(&le));
        for i in 0..d {
            m.set(i, j, col[i]);
        }
    }
    let mtm = m.transpose().matmul(&m);
    jacobi_eigenvalues(&mtm).last().unwrap().max(0.0).sqrt()
}

/// Sampled margins of the strong-monotonicity inequality over seeded
/// standard-normal pairs, in both pairings:
///
/// * `min_margin_euclid`: ⟨ΔG_r, Δz⟩ − ν‖Δz‖², the inequality the measured
///   ν actually certifies (field of values of ∇G_r);
/// * `min_margin_r`: ⟨ΔG_r, Δz⟩_r − ν‖Δz‖²_r. Note ⟨ΔG_r, Δz⟩_r = ΔzᵀΔG
///   identically (the metric cancels out of the gradient pairing), so this
///   margin can go negative on dual-heavy displacements; it is reported for
///   diagnosis, not certified.
#[derive(Clone, Copy, Debug)]
pub struct StrongMonotonicitySample {
    pub min_margin_euclid: f64,
    pub min_margin_r: f64,
    pub pairs: usize,
}

pub fn sample_strong_monotonicity(
    program: &ConvexQuadraticProgram,
    spec: &MetricSpec,
    nu: f64,
    pairs: usize,
    seed: u64,
) -> StrongMonotonicitySample {
    let margins = parallel::map_indices(pairs, |i| pair_margins(program, spec, nu, seed, i as u64));
    fold_margins(margins, pairs)
}

/// Sequential variant, kept for the benchmark suite.
pub fn sample_strong_monotonicity_seq(
    program: &ConvexQuadraticProgram,
    spec: &MetricSpec,
    nu: f64,
    pairs: usize,
    seed: u64,
) -> StrongMonotonicitySample {
    let margins =
        parallel::map_indices_seq(pairs, |i| pair_margins(program, spec, nu, seed, i as u64));
    fold_margins(margins, pairs)
}

fn fold_margins(margins: Vec<(f64, f64)>, pairs: usize) -> StrongMonotonicitySample {
    let mut e = f64::INFINITY;
    let mut r = f64::INFINITY;
    for (me, mr) in margins {
        e = e.min(me);
        r = r.min(mr);
    }
    StrongMonotonicitySample {
        min_margin_euclid: e,
        min_margin_r: r,
        pairs,
    }
}

fn pair_margins(
    program: &ConvexQuadraticProgram,
    spec: &MetricSpec,
    nu: f64,
    seed: u64,
    index: u64,
) -> (f64, f64) {
    let (z1, z2) = crate::lagrangian::random_pair(program, seed, index);
    let dz = linalg::sub_vec(&z1.stacked(), &z2.stacked());
    let dg = linalg::sub_vec(
        &metric_gradient(program, spec, &z1),
        &metric_gradient(program, spec, &z2),
    );
    let euclid = linalg::dot(&dg, &dz) - nu * linalg::dot(&dz, &dz);
    let r = spec.r_inner(&dg, &dz) - nu * spec.r_inner(&dz, &dz);
    (euclid, r)
}

/// Worst slack of ‖ΔG_r‖_r ≤ ℓ‖Δz‖_r over seeded pairs: the minimum of
/// ℓ‖Δz‖_r − ‖ΔG_r‖_r (negative means a violation).
pub fn sample_lipschitz_slack(
    program: &ConvexQuadraticProgram,
    spec: &MetricSpec,
    ell: f64,
    pairs: usize,
    seed: u64,
) -> f64 {
    let slacks = parallel::map_indices(pairs, |i| {
        let (z1, z2) = crate::lagrangian::random_pair(program, spec_seed(seed), i as u64);
        let dz = linalg::sub_vec(&z1.stacked(), &z2.stacked());
        let dg = linalg::sub_vec(
            &metric_gradient(program, spec, &z1),
            &metric_gradient(program, spec, &z2),
        );
        ell * spec.r_norm(&dz) - spec.r_norm(&dg)
    });
    slacks.into_iter().fold(f64::INFINITY, f64::min)
}

fn spec_seed(seed: u64) -> u64 {
    seed ^ 0xA5A5_5A5A_DEAD_BEEF
}
