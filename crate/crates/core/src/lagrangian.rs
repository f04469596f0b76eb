//! The Lagrangian L(z) = f(x) + λᵀ(Ax − b), its gradient map
//! G(z) = [∇f(x) + Aᵀλ; −(Ax − b)], KKT residuals, and the Euclidean
//! monotonicity diagnostics. G is monotone but not strongly so: the symmetric
//! part of its Jacobian has exactly m zero eigenvalues.

use crate::linalg::{self, Mat};
use crate::parallel;
use crate::problem::{ConvexQuadraticProgram, PrimalDualPoint};
use crate::rng::SplitMix64;

/// f(x) + λᵀ(Ax − b)
pub fn lagrangian_value(program: &ConvexQuadraticProgram, z: &PrimalDualPoint) -> f64 {
    assert_eq!(z.x.len(), program.n(), "primal dimension mismatch");
    assert_eq!(z.lambda.len(), program.m(), "dual dimension mismatch");
    program.objective(&z.x) + linalg::dot(&z.lambda, &program.constraint_values(&z.x))
}

/// G(z) = [∇f(x) + Aᵀλ; −(Ax − b)], stacked.
pub fn gradient_map(program: &ConvexQuadraticProgram, z: &PrimalDualPoint) -> Vec<f64> {
    assert_eq!(z.x.len(), program.n(), "primal dimension mismatch");
    assert_eq!(z.lambda.len(), program.m(), "dual dimension mismatch");
    let mut g = Vec::with_capacity(program.n() + program.m());
    let mut gx = program.objective_gradient(&z.x);
    linalg::axpy(1.0, &program.constraint_matrix().tr_matvec(&z.lambda), &mut gx);
    g.extend_from_slice(&gx);
    for v in program.constraint_values(&z.x) {
        g.push(-v);
    }
    g
}

/// The constant Jacobian  ∇G = [[H, Aᵀ], [−A, 0]].
pub fn jacobian_of_gradient_map(program: &ConvexQuadraticProgram) -> Mat {
    let (n, m) = (program.n(), program.m());
    let mut j = Mat::zeros(n + m, n + m);
    for i in 0..n {
        for k in 0..n {
            j.set(i, k, program.hessian().get(i, k));
        }
    }
    for r in 0..m {
        for k in 0..n {
            let a = program.constraint_matrix().get(r, k);
            j.set(k, n + r, a);
            j.set(n + r, k, -a);
        }
    }
    j
}

/// KKT residual components for g(x) = Ax − b; all measured in the 2-norm,
/// complementarity as the absolute aggregated inner product |λᵀ(Ax − b)|.
#[derive(Clone, Debug)]
pub struct KktResidual {
    pub stationarity: f64,
    pub primal_infeasibility: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
    pub total: f64,
}

pub fn kkt_residual(program: &ConvexQuadraticProgram, z: &PrimalDualPoint) -> KktResidual {
    let mut grad = program.objective_gradient(&z.x);
    linalg::axpy(1.0, &program.constraint_matrix().tr_matvec(&z.lambda), &mut grad);
    let stationarity = linalg::norm2(&grad);

    let cons = program.constraint_values(&z.x);
    let primal: f64 = cons.iter().map(|v| v.max(0.0).powi(2)).sum::<f64>().sqrt();
    let dual: f64 = z.lambda.iter().map(|v| (-v).max(0.0).powi(2)).sum::<f64>().sqrt();
    let complementarity = linalg::dot(&z.lambda, &cons).abs();

    let total = stationarity.max(primal).max(dual).max(complementarity);
    KktResidual {
        stationarity,
        primal_infeasibility: primal,
        dual_infeasibility: dual,
        complementarity,
        total,
    }
}

/// (G(z1) − G(z2))ᵀ(z1 − z2). For quadratic programs this collapses to
/// (x1 − x2)ᵀ H (x1 − x2) ≥ 0, the monotonicity of G.
pub fn monotonicity_gap(
    program: &ConvexQuadraticProgram,
    z1: &PrimalDualPoint,
    z2: &PrimalDualPoint,
) -> f64 {
    let g1 = gradient_map(program, z1);
    let g2 = gradient_map(program, z2);
    let dg = linalg::sub_vec(&g1, &g2);
    let dz = linalg::sub_vec(&z1.stacked(), &z2.stacked());
    linalg::dot(&dg, &dz)
}

/// Worst monotonicity gap over `pairs` seeded standard-normal point pairs.
#[derive(Clone, Copy, Debug)]
pub struct GapSample {
    pub min_gap: f64,
    pub pairs: usize,
}

pub fn sample_monotonicity_gaps(
    program: &ConvexQuadraticProgram,
    pairs: usize,
    seed: u64,
) -> GapSample {
    let gaps = parallel::map_indices(pairs, |i| pair_gap(program, seed, i as u64));
    fold_min(gaps, pairs)
}

/// Sequential variant, kept for the benchmark suite.
pub fn sample_monotonicity_gaps_seq(
    program: &ConvexQuadraticProgram,
    pairs: usize,
    seed: u64,
) -> GapSample {
    let gaps = parallel::map_indices_seq(pairs, |i| pair_gap(program, seed, i as u64));
    fold_min(gaps, pairs)
}

fn fold_min(gaps: Vec<f64>, pairs: usize) -> GapSample {
    GapSample {
        min_gap: gaps.into_iter().fold(f64::INFINITY, f64::min),
        pairs,
    }
}

fn pair_gap(program: &ConvexQuadraticProgram, seed: u64, index: u64) -> f64 {
    let (z1, z2) = random_pair(program, seed, index);
    monotonicity_gap(program, &z1, &z2)
}

/// Deterministic standard-normal pair keyed by (seed, index).
pub(crate) fn random_pair(
    program: &ConvexQuadraticProgram,
    seed: u64,
    index: u64,
) -> (PrimalDualPoint, PrimalDualPoint) {
    let mut rng = SplitMix64::stream(seed, index);
    let draw = |rng: &mut SplitMix64| {
        let mut x = vec![0.0; program.n()];
        let mut l = vec![0.0; program.m()];
        rng.fill_normal(&mut x);
        rng.fill_normal(&mut l);
        PrimalDualPoint::new(x, l)
    };
    (draw(&mut rng), draw(&mut rng))
}
