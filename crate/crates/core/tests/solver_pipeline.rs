//! End-to-end library flows: generate, certify, solve, trace, fit.

use pdflow::dynamics::{
    default_alpha, euler_solve, stable_alpha, DynamicsParams, Mode, Outcome,
};
use pdflow::linalg::{norm_inf, sub_vec};
use pdflow::metric::{certify_strong_monotonicity, choose_k};
use pdflow::oracle::{active_set_solve, verify_saddle};
use pdflow::problem::{make_random_qp, PrimalDualPoint};
use pdflow::trace::{fit_geometric_rate, to_csv};

/// Oracle/dynamics agreement with the rate-optimal gain on small programs:
/// the conservative alpha still converges at desk scale.
#[test]
fn dynamics_agree_with_oracle_under_default_alpha() {
    for (seed, n, m, scale) in [(2u64, 4, 2, 1.5), (5, 6, 3, 8.0), (8, 5, 2, 3.0)] {
        let p = make_random_qp(seed, n, m, scale).unwrap();
        let sol = active_set_solve(&p).unwrap();
        assert!(verify_saddle(&p, &sol.point()));

        let spec = choose_k(&p, 1.0).unwrap();
        let cert = certify_strong_monotonicity(&p, &spec);
        assert!(cert.passed);
        let mut params = DynamicsParams::new(Mode::Metric);
        params.alpha = default_alpha(&cert);
        params.step = 1.0;
        params.stop_tol = 1e-10;
        params.max_iters = 3_000_000;
        let res = euler_solve(&p, Some(&spec), &params, &PrimalDualPoint::origin(n, m), false)
            .unwrap();
        assert_eq!(res.outcome, Outcome::Converged, "seed {seed}");
        let gap = norm_inf(&sub_vec(&res.final_point.x, &sol.x_star));
        assert!(gap <= 1e-6, "seed {seed}: |x - x*|_inf = {gap:.2e}");
    }
}

#[test]
fn traced_metric_run_exports_and_fits() {
    let p = make_random_qp(4, 8, 4, 10.0).unwrap();
    let sol = active_set_solve(&p).unwrap();
    let spec = choose_k(&p, 1.0).unwrap();
    let cert = certify_strong_monotonicity(&p, &spec);

    let mut params = DynamicsParams::new(Mode::Metric);
    params.alpha = stable_alpha(&cert);
    params.step = 1.0;
    params.stop_tol = 1e-9;
    let res = euler_solve(&p, Some(&spec), &params, &PrimalDualPoint::origin(8, 4), true)
        .unwrap();
    assert!(res.converged);
    assert!(res.final_kkt.total <= 10.0 * params.stop_tol);

    let mut traj = res.trajectory.unwrap();
    traj.finalize(&p, &sol.point(), Some(&spec));

    // stored errors match recomputation (no stale data)
    let star = sol.point().stacked();
    for s in traj.samples() {
        let diff = sub_vec(&s.z, &star);
        assert!((s.err_euclid - pdflow::linalg::norm2(&diff)).abs() <= 1e-12);
        assert!((s.err_r - spec.r_norm(&diff)).abs() <= 1e-12);
    }

    let fit = fit_geometric_rate(&traj, None).unwrap();
    assert!(fit.rate > 0.0);
    assert!(fit.r_squared > 0.9);

    let csv = to_csv(&traj, false, 8, 4).unwrap();
    assert!(csv.starts_with("iter,t,residual,err_euclid,err_r,lyapunov\n"));
    // canonical formatting survives a parse/format cycle
    let again = pdflow::trace::format_csv(&pdflow::trace::parse_csv(&csv));
    assert_eq!(csv, again);
}

#[test]
fn euclidean_and_metric_runs_share_the_same_limit() {
    let p = make_random_qp(6, 6, 3, 5.0).unwrap();
    let sol = active_set_solve(&p).unwrap();

    let mut pe = DynamicsParams::new(Mode::Euclidean);
    pe.step = 0.05;
    pe.alpha = 0.2;
    pe.max_iters = 2_000_000;
    pe.stop_tol = 1e-10;
    let re = euler_solve(&p, None, &pe, &PrimalDualPoint::origin(6, 3), false).unwrap();
    assert!(re.converged);

    let spec = choose_k(&p, 1.0).unwrap();
    let cert = certify_strong_monotonicity(&p, &spec);
    let mut pm = DynamicsParams::new(Mode::Metric);
    pm.alpha = stable_alpha(&cert);
    pm.step = 1.0;
    pm.stop_tol = 1e-10;
    let rm = euler_solve(&p, Some(&spec), &pm, &PrimalDualPoint::origin(6, 3), false).unwrap();
    assert!(rm.converged);
    assert!(re.final_kkt.total <= 10.0 * pe.stop_tol);
    assert!(rm.final_kkt.total <= 10.0 * pm.stop_tol);

    let gap = norm_inf(&sub_vec(&re.final_point.stacked(), &rm.final_point.stacked()));
    assert!(gap <= 1e-6, "modes disagree by {gap:.2e}");
    assert!(norm_inf(&sub_vec(&rm.final_point.x, &sol.x_star)) <= 1e-6);
}

/// Regression pin: the exact saddle point of the n=10, m=5, H=20I instance
/// at seed 1, frozen from the first oracle computation. The dynamics must
/// keep reproducing it.
#[test]
fn example_one_saddle_point_is_pinned() {
    let x_star = [
        0.06588872988427799,
        0.039863173265928954,
        0.0956870829385464,
        -0.0385916819328332,
        0.1236321259865673,
        0.02338882648107101,
        0.0009293439897275137,
        0.08381370439220673,
        0.02355894937457137,
        0.04195829620444208,
    ];
    let lambda_star = [0.0, 0.0, 0.0, 1.5184533341661623, 0.0];

    let p = make_random_qp(1, 10, 5, 20.0).unwrap();
    let sol = active_set_solve(&p).unwrap();
    assert_eq!(sol.active_set, vec![3]);
    for (a, b) in sol.x_star.iter().zip(&x_star) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }
    for (a, b) in sol.lambda_star.iter().zip(&lambda_star) {
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    // and the dynamics reproduce it
    let spec = choose_k(&p, 1.0).unwrap();
    let cert = certify_strong_monotonicity(&p, &spec);
    let mut params = DynamicsParams::new(Mode::Metric);
    params.alpha = stable_alpha(&cert);
    params.step = 1.0;
    params.stop_tol = 1e-10;
    let res = euler_solve(&p, Some(&spec), &params, &PrimalDualPoint::origin(10, 5), false)
        .unwrap();
    assert!(res.converged);
    assert!(norm_inf(&sub_vec(&res.final_point.x, &sol.x_star)) <= 1e-8);
    assert!(norm_inf(&sub_vec(&res.final_point.lambda, &sol.lambda_star)) <= 1e-8);
}

#[test]
fn generated_programs_always_validate() {
    for seed in 0..15u64 {
        let p = make_random_qp(seed, 9, 4, 0.5 + seed as f64).unwrap();
        assert!(pdflow::problem::validate(&p).passed(), "random_qp seed {seed}");
        let q = pdflow::problem::make_l2_least_squares(seed, 3, 7, 0.3 + seed as f64 / 10.0).unwrap();
        assert!(pdflow::problem::validate(&q).passed(), "l2ls seed {seed}");
    }
}
