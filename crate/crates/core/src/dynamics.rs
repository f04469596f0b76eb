//! The projected primal-dual flow ż = β{P[z − αG̃(z)] − z} in both
//! geometries (G̃ = G Euclidean, G̃ = G_r metric), its explicit Euler
//! discretization z⁺ = z + sβ(P[z − αG̃(z)] − z), step policies, the
//! exponential-rate bound, and the Lyapunov monitors.
//!
//! Euclidean mode projects by clamping the duals; metric mode uses the exact
//! r-metric projection so that stationary points coincide with KKT points in
//! both geometries. With s·β = 1 the iteration reduces to the fixed-point
//! map z⁺ = P[z − αG̃(z)].

use crate::lagrangian::{gradient_map, kkt_residual, lagrangian_value, KktResidual};
use crate::linalg;
use crate::metric::{metric_gradient, MetricSpec, MonotonicityCertificate};
use crate::problem::{ConvexQuadraticProgram, PrimalDualPoint};
use crate::trace::{RunMetadata, Trajectory};

/// State-norm threshold of the divergence guard.
const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Euclidean,
    Metric,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Mode::Euclidean => write!(f, "euclidean"),
            Mode::Metric => write!(f, "metric"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DynamicsParams {
    pub alpha: f64,
    pub beta: f64,
    /// Euler time step s; physical time advances by s per iteration.
    pub step: f64,
    pub max_iters: usize,
    /// Tolerance on the projected-gradient residual ‖P(z − αG̃(z)) − z‖/α.
    pub stop_tol: f64,
    pub mode: Mode,
}

impl DynamicsParams {
    pub fn new(mode: Mode) -> Self {
        DynamicsParams {
            alpha: 1.0,
            beta: 1.0,
            step: 1.0,
            max_iters: 1_000_000,
            stop_tol: 1e-9,
            mode,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.alpha > 0.0) || !(self.beta > 0.0) || !(self.step > 0.0) || !(self.stop_tol > 0.0)
        {
            return Err(DynamicsError::InvalidParams(
                "alpha, beta, step and stop_tol must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Advisory flags; the rate-bound step condition is reported, not enforced.
    pub fn warnings(&self, certificate: Option<&MonotonicityCertificate>) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(cert) = certificate {
            let limit = 4.0 * cert.nu / (cert.ell * cert.ell);
            if self.mode == Mode::Metric && self.alpha >= limit {
                out.push(format!(
                    "alpha = {:e} is outside the rate-bound condition alpha < 4nu/ell^2 = {:e}",
                    self.alpha, limit
                ));
            }
        }
        if self.step * self.beta > 1.0 {
            out.push(format!(
                "s*beta = {} > 1 leaves the convex-combination regime; domain invariance is not guaranteed",
                self.step * self.beta
            ));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DynamicsError {
    InvalidParams(String),
    MissingMetricSpec,
    NonFiniteStart,
}

impl std::fmt::Display for DynamicsError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DynamicsError::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
            DynamicsError::MissingMetricSpec => {
                write!(f, "metric mode requires a MetricSpec")
            }
            DynamicsError::NonFiniteStart => write!(f, "initial point is not finite"),
        }
    }
}

impl std::error::Error for DynamicsError {}

/// How a solve ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Converged,
    MaxIters,
    Diverged,
}

#[derive(Debug)]
pub struct FlowResult {
    pub final_point: PrimalDualPoint,
    pub iterations: usize,
    pub converged: bool,
    pub outcome: Outcome,
    pub final_kkt: KktResidual,
    pub final_residual: f64,
    pub trajectory: Option<Trajectory>,
}

/// Euclidean projection onto ℝⁿ × ℝᵐ₊: x unchanged, λ clamped at zero.
pub fn project_domain(z: &PrimalDualPoint) -> PrimalDualPoint {
    PrimalDualPoint::new(
        z.x.clone(),
        z.lambda.iter().map(|&l| l.max(0.0)).collect(),
    )
}

fn projected_step(
    program: &ConvexQuadraticProgram,
    spec: Option<&MetricSpec>,
    mode: Mode,
    alpha: f64,
    z: &[f64],
) -> Vec<f64> {
    let n = program.n();
    let m = program.m();
    let point = PrimalDualPoint::from_stacked(z, n, m);
    let g = match mode {
        Mode::Euclidean => gradient_map(program, &point),
        Mode::Metric => metric_gradient(program, spec.expect("spec checked by caller"), &point),
    };
    let mut w = z.to_vec();
    linalg::axpy(-alpha, &g, &mut w);
    match mode {
        Mode::Euclidean => {
            for l in &mut w[n..] {
                if *l < 0.0 {
                    *l = 0.0;
                }
            }
            w
        }
        Mode::Metric => spec.unwrap().project_domain(program, &w),
    }
}

/// β{P[z − αG̃(z)] − z}, the right-hand side of the flow.
pub fn flow_field(
    program: &ConvexQuadraticProgram,
    spec: Option<&MetricSpec>,
    params: &DynamicsParams,
    z: &PrimalDualPoint,
) -> Result<Vec<f64>, DynamicsError> {
    params.validate()?;
    if params.mode == Mode::Metric && spec.is_none() {
        return Err(DynamicsError::MissingMetricSpec);
    }
    let stacked = z.stacked();
    let w = projected_step(program, spec, params.mode, params.alpha, &stacked);
    Ok(w
        .iter()
        .zip(&stacked)
        .map(|(wi, zi)| params.beta * (wi - zi))
        .collect())
}

/// Runs the Euler iteration until the projected-gradient residual drops
/// below `stop_tol`, the iteration budget runs out, or the state diverges
/// (‖z‖ > 1e12 or non-finite; the last finite iterate is kept).
pub fn euler_solve(
    program: &ConvexQuadraticProgram,
    spec: Option<&MetricSpec>,
    params: &DynamicsParams,
    z0: &PrimalDualPoint,
    record_trajectory: bool,
) -> Result<FlowResult, DynamicsError> {
    params.validate()?;
    if params.mode == Mode::Metric && spec.is_none() {
        return Err(DynamicsError::MissingMetricSpec);
    }
    if !z0.is_finite() {
        return Err(DynamicsError::NonFiniteStart);
    }
    let n = program.n();
    let m = program.m();
    let mut z = z0.stacked();
    let mut trajectory = record_trajectory.then(|| {
        Trajectory::new(RunMetadata {
            provenance: program.provenance().cloned(),
            mode: params.mode.to_string(),
            alpha: params.alpha,
            beta: params.beta,
            step: params.step,
            stop_tol: params.stop_tol,
            k: spec.map(|s| s.k()),
            certificate: None,
        })
    });

    let mut iterations = 0;
    let mut outcome = Outcome::MaxIters;
    let mut final_residual = f64::NAN;

    for iter in 0..=params.max_iters {
        let w = projected_step(program, spec, params.mode, params.alpha, &z);
        let residual = step_residual(&w, &z, params.alpha);
        if let Some(t) = trajectory.as_mut() {
            t.record(iter, iter as f64 * params.step, &z, residual);
        }
        iterations = iter;
        final_residual = residual;
        if residual <= params.stop_tol {
            outcome = Outcome::Converged;
            break;
        }
        if iter == params.max_iters {
            break;
        }

        let sb = params.step * params.beta;
        let mut next = z.clone();
        for i in 0..(n + m) {
            next[i] += sb * (w[i] - z[i]);
        }
        if !next.iter().all(|v| v.is_finite()) || linalg::norm2(&next) > DIVERGENCE_NORM {
            outcome = Outcome::Diverged;
            break;
        }
        z = next;
    }

    let final_point = PrimalDualPoint::from_stacked(&z, n, m);
    let final_kkt = kkt_residual(program, &final_point);
    Ok(FlowResult {
        converged: outcome == Outcome::Converged,
        outcome,
        iterations,
        final_kkt,
        final_residual,
        trajectory,
        final_point,
    })
}

fn step_residual(w: &[f64], z: &[f64], alpha: f64) -> f64 {
    let mut acc = 0.0;
    for (wi, zi) in w.iter().zip(z) {
        acc += (wi - zi) * (wi - zi);
    }
    acc.sqrt() / alpha
}

/// α = 2ν/ℓ², the maximizer of the rate expression αβ(4ν − αℓ²)/8.
pub fn default_alpha(certificate: &MonotonicityCertificate) -> f64 {
    2.0 * certificate.nu / (certificate.ell * certificate.ell)
}

/// α = 0.9/ℓ: the largest gain that keeps α·|λ| ≤ 0.9 for every eigenvalue
/// of ∇G_r (|λ| is bounded by the r-operator norm ℓ). Paired with s·β = 1
/// this is the practical fast configuration; the rate-optimal 2ν/ℓ² is
/// vastly smaller for large k because ℓ grows linearly in k.
pub fn stable_alpha(certificate: &MonotonicityCertificate) -> f64 {
    0.9 / certificate.ell
}

/// The exponent coefficient αβ(4ν − αℓ²)/8 of the exponential envelope.
/// Non-positive output means the condition α < 4ν/ℓ² failed; callers treat
/// that as an invalid bound.
pub fn rate_bound(params: &DynamicsParams, certificate: &MonotonicityCertificate) -> f64 {
    let a = params.alpha;
    a * params.beta * (4.0 * certificate.nu - a * certificate.ell * certificate.ell) / 8.0
}

/// V(z) = (L(x*,λ*) − L(x*,λ)) + (L(x,λ*) − L(x*,λ*)) + ½‖z − z*‖², with the
/// r-norm in the last term when a metric is supplied (the V₁ variant).
pub fn lyapunov_value(
    program: &ConvexQuadraticProgram,
    spec: Option<&MetricSpec>,
    z: &PrimalDualPoint,
    z_star: &PrimalDualPoint,
) -> f64 {
    let l_star = lagrangian_value(program, z_star);
    let l_dual = lagrangian_value(
        program,
        &PrimalDualPoint::new(z_star.x.clone(), z.lambda.clone()),
    );
    let l_primal = lagrangian_value(
        program,
        &PrimalDualPoint::new(z.x.clone(), z_star.lambda.clone()),
    );
    let diff = linalg::sub_vec(&z.stacked(), &z_star.stacked());
    let half_norm = match spec {
        Some(s) => 0.5 * s.r_inner(&diff, &diff),
        None => 0.5 * linalg::dot(&diff, &diff),
    };
    (l_star - l_dual) + (l_primal - l_star) + half_norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metric::{certify_strong_monotonicity, choose_k};
    use crate::oracle::active_set_solve;
    use crate::problem::make_random_qp;
    use crate::testutil::p1;

    fn z(x: f64, l: f64) -> PrimalDualPoint {
        PrimalDualPoint::new(vec![x], vec![l])
    }

    #[test]
    fn projection_clamps_duals_only() {
        let p = project_domain(&z(0.5, -0.3));
        assert_eq!(p, z(0.5, 0.0));
        // idempotent on the domain
        let q = project_domain(&p);
        assert_eq!(q, p);
        let multi = project_domain(&PrimalDualPoint::new(vec![1.0, 2.0], vec![-1.0, 4.0]));
        assert_eq!(multi.x, vec![1.0, 2.0]);
        assert_eq!(multi.lambda, vec![0.0, 4.0]);
    }

    #[test]
    fn flow_field_hand_values_on_p1() {
        let p = p1();
        let params = DynamicsParams::new(Mode::Euclidean);
        // saddle point is stationary
        let f = flow_field(&p, None, &params, &z(-1.0, 2.0)).unwrap();
        assert!(linalg::norm2(&f) <= 1e-12);
        // z = (0,0): z - G = (0,1), already in the domain
        let f = flow_field(&p, None, &params, &z(0.0, 0.0)).unwrap();
        assert_eq!(f, vec![0.0, 1.0]);

        let spec = MetricSpec::with_k(&p, 2.0).unwrap();
        let params = DynamicsParams::new(Mode::Metric);
        let f = flow_field(&p, Some(&spec), &params, &z(0.0, 0.0)).unwrap();
        assert_eq!(f, vec![1.0, 2.0]);
    }

    #[test]
    fn metric_mode_requires_spec() {
        let p = p1();
        let params = DynamicsParams::new(Mode::Metric);
        assert!(matches!(
            flow_field(&p, None, &params, &z(0.0, 0.0)),
            Err(DynamicsError::MissingMetricSpec)
        ));
    }

    #[test]
    fn euclidean_solve_reaches_the_saddle_on_p1() {
        let p = p1();
        let mut params = DynamicsParams::new(Mode::Euclidean);
        params.step = 0.1;
        params.stop_tol = 1e-9;
        let res = euler_solve(&p, None, &params, &z(0.0, 0.0), false).unwrap();
        assert!(res.converged);
        assert!((res.final_point.x[0] + 1.0).abs() < 1e-6);
        assert!((res.final_point.lambda[0] - 2.0).abs() < 1e-6);
        // regression pin: measured iteration count for this configuration
        assert_eq!(res.iterations, 231);
    }

    #[test]
    fn starting_at_the_saddle_takes_zero_iterations() {
        let p = p1();
        let params = DynamicsParams::new(Mode::Euclidean);
        let res = euler_solve(&p, None, &params, &z(-1.0, 2.0), false).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn metric_solve_with_default_alpha_on_p1() {
        let p = p1();
        let spec = choose_k(&p, 1.0).unwrap();
        let cert = certify_strong_monotonicity(&p, &spec);
        let mut params = DynamicsParams::new(Mode::Metric);
        params.alpha = default_alpha(&cert);
        params.step = 1.0;
        params.beta = 1.0;
        let res = euler_solve(&p, Some(&spec), &params, &z(0.0, 0.0), false).unwrap();
        assert!(res.converged);
        assert!((res.final_point.x[0] + 1.0).abs() < 1e-6);
        assert!((res.final_point.lambda[0] - 2.0).abs() < 1e-6);
        // regression pin: the metric run needs more iterations than the
        // Euclidean s=0.1 run above (450 vs 231); the rate-optimal alpha is
        // conservative because ell enters squared
        assert_eq!(res.iterations, 450);
    }

    #[test]
    fn default_alpha_arithmetic() {
        let cert = MonotonicityCertificate {
            k: 1.0,
            q1: 1.0,
            q2: 1.0,
            rho: 1.0,
            nu: 1.0,
            ell: 2.0,
            lambda_min_shifted: 1.0,
            nu_ge_q1_half: true,
            passed: true,
        };
        assert_eq!(default_alpha(&cert), 0.5);
        let cert2 = MonotonicityCertificate { ell: 1.0, ..cert.clone() };
        assert_eq!(default_alpha(&cert2), 2.0);
        // always strictly inside the rate-bound condition
        assert!(default_alpha(&cert) < 4.0 * cert.nu / (cert.ell * cert.ell));
    }

    #[test]
    fn rate_bound_arithmetic() {
        let cert = MonotonicityCertificate {
            k: 1.0,
            q1: 1.0,
            q2: 1.0,
            rho: 1.0,
            nu: 1.0,
            ell: 2.0,
            lambda_min_shifted: 1.0,
            nu_ge_q1_half: true,
            passed: true,
        };
        let mut params = DynamicsParams::new(Mode::Metric);
        params.alpha = 0.5;
        assert!((rate_bound(&params, &cert) - 0.125).abs() < 1e-15);
        // alpha = 2nu/ell^2 gives nu^2 beta / (2 ell^2)
        params.alpha = default_alpha(&cert);
        let expect = cert.nu * cert.nu * params.beta / (2.0 * cert.ell * cert.ell);
        assert!((rate_bound(&params, &cert) - expect).abs() < 1e-15);
        // boundary alpha = 4nu/ell^2 is flagged by a zero bound
        params.alpha = 4.0 * cert.nu / (cert.ell * cert.ell);
        assert_eq!(rate_bound(&params, &cert), 0.0);
    }

    #[test]
    fn lyapunov_hand_values_on_p1() {
        let p = p1();
        let z_star = z(-1.0, 2.0);
        assert_eq!(lyapunov_value(&p, None, &z_star, &z_star), 0.0);
        // z = (0, 2): terms are 0, L(0,2) − L(−1,2) = 2 − 1 = 1, and ½·1
        let v = lyapunov_value(&p, None, &z(0.0, 2.0), &z_star);
        assert!((v - 1.5).abs() < 1e-12, "V = {v}");
    }

    #[test]
    fn lyapunov_dominates_half_squared_distance() {
        let p = p1();
        let sol = active_set_solve(&p).unwrap();
        let z_star = sol.point();
        let mut rng = crate::rng::SplitMix64::new(5);
        for _ in 0..200 {
            let zp = z(rng.next_normal(), rng.next_normal().abs());
            let v = lyapunov_value(&p, None, &zp, &z_star);
            let dz = linalg::sub_vec(&zp.stacked(), &z_star.stacked());
            assert!(v >= 0.5 * linalg::dot(&dz, &dz) - 1e-12);
        }
    }

    #[test]
    fn lyapunov_descends_along_euclidean_iterates() {
        let p = make_random_qp(1, 10, 5, 20.0).unwrap();
        let sol = active_set_solve(&p).unwrap();
        let z_star = sol.point();
        let mut params = DynamicsParams::new(Mode::Euclidean);
        params.step = 0.01;
        params.max_iters = 20_000;
        params.stop_tol = 1e-10;
        let res = euler_solve(
            &p,
            None,
            &params,
            &PrimalDualPoint::origin(10, 5),
            true,
        )
        .unwrap();
        let traj = res.trajectory.unwrap();
        let mut prev = f64::INFINITY;
        for s in traj.samples() {
            let v = lyapunov_value(
                &p,
                None,
                &PrimalDualPoint::from_stacked(&s.z, 10, 5),
                &z_star,
            );
            assert!(v <= prev + 1e-10, "Lyapunov increased: {prev} -> {v}");
            prev = v;
        }
    }

    #[test]
    fn reduction_identity_at_unit_step_gain() {
        // with s·β = 1 the Euler update equals the fixed-point map exactly
        let p = p1();
        let spec = choose_k(&p, 1.0).unwrap();
        let mut params = DynamicsParams::new(Mode::Metric);
        params.alpha = 0.05;
        params.beta = 4.0;
        params.step = 0.25;
        params.max_iters = 1;
        let res = euler_solve(&p, Some(&spec), &params, &z(0.3, 0.7), false).unwrap();
        let w = projected_step(&p, Some(&spec), Mode::Metric, params.alpha, &[0.3, 0.7]);
        assert_eq!(res.final_point.stacked(), w);
    }

    #[test]
    fn domain_invariance_of_duals() {
        let p = make_random_qp(3, 6, 3, 5.0).unwrap();
        let spec = choose_k(&p, 1.0).unwrap();
        let cert = certify_strong_monotonicity(&p, &spec);
        let mut params = DynamicsParams::new(Mode::Metric);
        params.alpha = stable_alpha(&cert);
        params.beta = 1.0;
        params.step = 0.5; // s·β < 1: convex combination keeps λ ≥ 0
        params.max_iters = 5000;
        let res = euler_solve(&p, Some(&spec), &params, &PrimalDualPoint::origin(6, 3), true)
            .unwrap();
        for s in res.trajectory.unwrap().samples() {
            for &l in &s.z[6..] {
                assert!(l >= 0.0, "dual left the nonnegative orthant");
            }
        }
    }

    #[test]
    fn divergence_guard_keeps_last_finite_iterate() {
        let p = make_l2();
        let spec = choose_k(&p, 1000.0).unwrap();
        let mut params = DynamicsParams::new(Mode::Metric);
        params.alpha = 1.0;
        params.beta = 1.0;
        params.step = 1.0;
        params.max_iters = 1000;
        let res = euler_solve(&p, Some(&spec), &params, &PrimalDualPoint::origin(p.n(), p.m()), false)
            .unwrap();
        assert_eq!(res.outcome, Outcome::Diverged);
        assert!(!res.converged);
        assert!(res.final_point.is_finite());
    }

    fn make_l2() -> ConvexQuadraticProgram {
        crate::problem::make_l2_least_squares(7, 6, 10, 1.0).unwrap()
    }

    #[test]
    fn stationarity_equivalence_in_both_modes() {
        // flow_field vanishes iff the KKT residual vanishes
        for seed in [4u64, 9] {
            let p = make_random_qp(seed, 5, 2, 3.0).unwrap();
            let sol = active_set_solve(&p).unwrap();
            let spec = choose_k(&p, 1.0).unwrap();
            let pe = DynamicsParams::new(Mode::Euclidean);
            let mut pm = DynamicsParams::new(Mode::Metric);
            pm.alpha = 0.01;

            let fe = flow_field(&p, None, &pe, &sol.point()).unwrap();
            let fm = flow_field(&p, Some(&spec), &pm, &sol.point()).unwrap();
            assert!(linalg::norm2(&fe) <= 1e-9, "euclidean field at saddle");
            assert!(linalg::norm2(&fm) <= 1e-9, "metric field at saddle");

            // and a non-KKT point moves in both modes
            let mut zp = sol.point();
            zp.x[0] += 0.1;
            assert!(linalg::norm2(&flow_field(&p, None, &pe, &zp).unwrap()) > 1e-6);
            assert!(linalg::norm2(&flow_field(&p, Some(&spec), &pm, &zp).unwrap()) > 1e-9);
        }
    }
}
