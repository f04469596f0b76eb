//! Projected primal-dual dynamics for linear-inequality-constrained strongly
//! convex quadratic programs.
//!
//! The solver runs the flow ż = β{P[z − αG̃(z)] − z} in two geometries:
//!
//! * **Euclidean**: G̃ = G = [∇f + Aᵀλ; −(Ax − b)], which is monotone but not
//!   strongly so (the symmetric Jacobian has m zero eigenvalues), giving
//!   Lyapunov stability only;
//! * **Metric**: G̃ = G_r = R⁻¹G with R⁻¹ = [[kI, Aᵀ], [A, kI]] and k above
//!   an explicit spectral threshold, which makes ∇G_r strongly positive
//!   definite and the dynamics exponentially convergent.
//!
//! Strong monotonicity is never assumed: [`metric::certify_strong_monotonicity`]
//! measures the modulus ν and the r-norm Lipschitz constant ℓ with a
//! self-contained Jacobi eigensolver, and [`dynamics::rate_bound`] turns them
//! into the exponential envelope coefficient αβ(4ν − αℓ²)/8.
//!
//! An exact active-set oracle ([`oracle::active_set_solve`]) provides ground
//! truth for convergence tests, and [`trace`] records trajectories, fits
//! geometric rates, and exports CSV/JSON series.
//!
//! ```
//! use pdflow::*;
//!
//! let program = make_random_qp(1, 10, 5, 20.0).unwrap();
//! let spec = choose_k(&program, 1.0).unwrap();
//! let cert = certify_strong_monotonicity(&program, &spec);
//! assert!(cert.passed && cert.nu > 0.0);
//!
//! let mut params = DynamicsParams::new(Mode::Metric);
//! params.alpha = stable_alpha(&cert);
//! let start = PrimalDualPoint::origin(program.n(), program.m());
//! let run = euler_solve(&program, Some(&spec), &params, &start, true).unwrap();
//! assert!(run.converged && run.final_kkt.total < 1e-8);
//!
//! let oracle = active_set_solve(&program).unwrap();
//! let mut traj = run.trajectory.unwrap();
//! traj.finalize(&program, &oracle.point(), Some(&spec));
//! let fit = fit_geometric_rate(&traj, None).unwrap();
//! assert!(fit.rate > 0.0 && fit.r_squared > 0.99);
//! ```

pub mod dynamics;
pub mod lagrangian;
pub mod linalg;
pub mod metric;
pub mod oracle;
pub(crate) mod parallel;
pub mod problem;
pub mod rng;
pub mod trace;

pub use dynamics::{
    default_alpha, euler_solve, flow_field, lyapunov_value, project_domain, rate_bound,
    stable_alpha, DynamicsParams, FlowResult, Mode, Outcome,
};
pub use lagrangian::{
    gradient_map, jacobian_of_gradient_map, kkt_residual, lagrangian_value, monotonicity_gap,
    KktResidual,
};
pub use metric::{
    certify_strong_monotonicity, choose_k, estimate_lipschitz, metric_gradient, spectral_bounds,
    MetricSpec, MonotonicityCertificate,
};
pub use oracle::{active_set_solve, verify_saddle, OracleSolution};
pub use problem::{
    make_l2_least_squares, make_random_qp, validate, ConvexQuadraticProgram, PrimalDualPoint,
    Provenance,
};
pub use trace::{check_envelope, fit_geometric_rate, RateFit, Trajectory};
