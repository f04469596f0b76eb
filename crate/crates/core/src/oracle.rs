//! Exact reference solutions by active-set enumeration: for each subset S of
//! constraints, solve the equality-KKT system and accept the first subset
//! whose solution is primal and dual feasible. Strong convexity makes every
//! accepting subset agree on the saddle point, so the lexicographically
//! smallest subset is returned deterministically.

use crate::lagrangian::{kkt_residual, lagrangian_value};
use crate::linalg::{self, lu_solve, Mat};

use crate::problem::{ConvexQuadraticProgram, PrimalDualPoint};
use crate::rng::SplitMix64;

/// Enumeration guard: 2^m subsets get solved.
pub const MAX_ORACLE_CONSTRAINTS: usize = 20;

const FEASIBILITY_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    TooManyConstraints { m: usize },
    NoAcceptingSubset,
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::TooManyConstraints { m } => write!(
                f,
                "active-set enumeration guard: m = {m} exceeds {MAX_ORACLE_CONSTRAINTS}"
            ),
            OracleError::NoAcceptingSubset => {
                write!(f, "no active set yields a feasible KKT solution (degenerate program?)")
            }
        }
    }
}

impl std::error::Error for OracleError {}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub x_star: Vec<f64>,
    pub lambda_star: Vec<f64>,
    pub active_set: Vec<usize>,
    pub kkt_total: f64,
}

impl OracleSolution {
    pub fn point(&self) -> PrimalDualPoint {
        PrimalDualPoint::new(self.x_star.clone(), self.lambda_star.clone())
    }
}

/// Solves the program exactly by enumerating candidate active sets in
/// lexicographic order of their bitmask. The parallel search keeps the
/// sequential semantics: the first accepting subset in mask order wins and
/// later-ordered work is pruned.
#[cfg(feature = "parallel")]
pub fn active_set_solve(program: &ConvexQuadraticProgram) -> Result<OracleSolution, OracleError> {
    use rayon::prelude::*;
    let m = program.m();
    if m > MAX_ORACLE_CONSTRAINTS {
        return Err(OracleError::TooManyConstraints { m });
    }
    let total = 1usize << m;
    let winner = (0..total)
        .into_par_iter()
        .find_map_first(|mask| try_subset(program, mask as u32).map(|sol| (mask, sol)));
    finish(program, winner)
}

#[cfg(not(feature = "parallel"))]
pub fn active_set_solve(program: &ConvexQuadraticProgram) -> Result<OracleSolution, OracleError> {
    active_set_solve_seq(program)
}

/// Sequential variant, kept for the benchmark suite. Short-circuits at the
/// first accepting subset, which is also the lexicographic minimum.
pub fn active_set_solve_seq(
    program: &ConvexQuadraticProgram,
) -> Result<OracleSolution, OracleError> {
    let m = program.m();
    if m > MAX_ORACLE_CONSTRAINTS {
        return Err(OracleError::TooManyConstraints { m });
    }
    for mask in 0..(1usize << m) {
        if let Some(sol) = try_subset(program, mask as u32) {
            return finish(program, Some((mask, sol)));
        }
    }
    finish(program, None)
}

fn finish(
    program: &ConvexQuadraticProgram,
    winner: Option<(usize, (Vec<f64>, Vec<f64>))>,
) -> Result<OracleSolution, OracleError> {
    let (mask, (x_star, lambda_star)) = winner.ok_or(OracleError::NoAcceptingSubset)?;
    let active_set: Vec<usize> = (0..program.m()).filter(|i| mask >> i & 1 == 1).collect();
    let kkt_total = kkt_residual(
        program,
        &PrimalDualPoint::new(x_star.clone(), lambda_star.clone()),
    )
    .total;
    Ok(OracleSolution {
        x_star,
        lambda_star,
        active_set,
        kkt_total,
    })
}

/// Solves [[H, A_Sᵀ], [A_S, 0]]·[x; λ_S] = [−c; b_S] for the subset encoded
/// by `mask` and checks feasibility of the result.
fn try_subset(program: &ConvexQuadraticProgram, mask: u32) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = program.n();
    let subset: Vec<usize> = (0..program.m()).filter(|i| mask >> i & 1 == 1).collect();
    let ns = subset.len();
    let dim = n + ns;

    let mut kkt = Mat::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            kkt.set(i, j, program.hessian().get(i, j));
        }
    }
    for (r, &ci) in subset.iter().enumerate() {
        for j in 0..n {
            let a = program.constraint_matrix().get(ci, j);
            kkt.set(j, n + r, a);
            kkt.set(n + r, j, a);
        }
    }
    let mut rhs = vec![0.0; dim];
    for i in 0..n {
        rhs[i] = -program.linear_term()[i];
    }
    for (r, &ci) in subset.iter().enumerate() {
        rhs[n + r] = program.constraint_rhs()[ci];
    }

    let sol = lu_solve(&kkt, &rhs).ok()?;

    // back-substitution check of the linear solve itself
    let residual = linalg::sub_vec(&kkt.matvec(&sol), &rhs);
    if linalg::norm2(&residual) > 1e-10 * linalg::norm2(&rhs).max(1.0) {
        return None;
    }

    let x = sol[..n].to_vec();
    let mut lambda = vec![0.0; program.m()];
    for (r, &ci) in subset.iter().enumerate() {
        let l = sol[n + r];
        if l < -FEASIBILITY_SLACK {
            return None;
        }
        lambda[ci] = l;
    }
    for v in program.constraint_values(&x) {
        if v > FEASIBILITY_SLACK {
            return None;
        }
    }
    Some((x, lambda))
}

/// Samples random (x, λ ≥ 0) pairs and checks both saddle inequalities
/// L(x*, λ) ≤ L(x*, λ*) ≤ L(x, λ*) with slack 1e-9. Candidates carrying a
/// negative multiplier are rejected outright.
pub fn verify_saddle(program: &ConvexQuadraticProgram, z_star: &PrimalDualPoint) -> bool {
    const SAMPLES: usize = 1000;
    const SLACK: f64 = 1e-9;

    if z_star.lambda.iter().any(|&l| l < 0.0) {
        return false;
    }
    let l_star = lagrangian_value(program, z_star);
    let mut rng = SplitMix64::new(0x5ADD_1E00 ^ program.n() as u64);
    for _ in 0..SAMPLES {
        let mut x = vec![0.0; program.n()];
        rng.fill_normal(&mut x);
        for (xi, si) in x.iter_mut().zip(&z_star.x) {
            *xi += si;
        }
        let mut lambda = vec![0.0; program.m()];
        for (li, si) in lambda.iter_mut().zip(&z_star.lambda) {
            *li = (si + rng.next_normal()).max(0.0);
        }

        let left = lagrangian_value(
            program,
            &PrimalDualPoint::new(z_star.x.clone(), lambda),
        );
        if left > l_star + SLACK {
            return false;
        }
        let right = lagrangian_value(
            program,
            &PrimalDualPoint::new(x, z_star.lambda.clone()),
        );
        if right < l_star - SLACK {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::make_random_qp;
    use crate::testutil::p1;

    #[test]
    fn solves_p1_by_hand_kkt() {
        let sol = active_set_solve(&p1()).unwrap();
        assert!((sol.x_star[0] + 1.0).abs() < 1e-12);
        assert!((sol.lambda_star[0] - 2.0).abs() < 1e-12);
        assert_eq!(sol.active_set, vec![0]);
        assert!(sol.kkt_total <= 1e-10);
    }

    #[test]
    fn inactive_constraint_keeps_unconstrained_optimum() {
        // f(x) = x², constraint x <= 1: optimum x* = 0 with λ* = 0
        let p = ConvexQuadraticProgram::new(
            Mat::from_rows(&[vec![2.0]]),
            vec![0.0],
            Mat::from_rows(&[vec![1.0]]),
            vec![1.0],
        )
        .unwrap();
        let sol = active_set_solve(&p).unwrap();
        assert!(sol.x_star[0].abs() < 1e-12);
        assert!(sol.lambda_star[0].abs() < 1e-12);
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn parallel_and_sequential_agree() {
        for seed in 0..6u64 {
            let p = make_random_qp(seed, 8, 5, 7.0).unwrap();
            let a = active_set_solve(&p).unwrap();
            let b = active_set_solve_seq(&p).unwrap();
            assert_eq!(a.active_set, b.active_set);
            assert_eq!(a.x_star, b.x_star);
        }
    }

    #[test]
    fn enumeration_guard_rejects_large_m() {
        let p = make_random_qp(1, 25, 21, 2.0).unwrap();
        assert!(matches!(
            active_set_solve(&p),
            Err(OracleError::TooManyConstraints { m: 21 })
        ));
    }

    #[test]
    fn oracle_outputs_verify_as_saddles() {
        for seed in 1..8u64 {
            let p = make_random_qp(seed, 6, 3, 5.0).unwrap();
            let sol = active_set_solve(&p).unwrap();
            assert!(sol.kkt_total <= 1e-9, "kkt {}", sol.kkt_total);
            assert!(verify_saddle(&p, &sol.point()), "saddle check failed, seed {seed}");
        }
    }

    #[test]
    fn verify_saddle_rejects_non_saddles() {
        let p = p1();
        assert!(!verify_saddle(&p, &PrimalDualPoint::new(vec![0.0], vec![0.0])));
        // negative multiplier rejected before sampling
        assert!(!verify_saddle(&p, &PrimalDualPoint::new(vec![-1.0], vec![-0.1])));
        // the true saddle passes
        assert!(verify_saddle(&p, &PrimalDualPoint::new(vec![-1.0], vec![2.0])));
    }

    #[test]
    fn complementarity_holds_on_active_and_inactive_sets() {
        for seed in [11u64, 12, 13] {
            let p = make_random_qp(seed, 7, 4, 9.0).unwrap();
            let sol = active_set_solve(&p).unwrap();
            let cons = p.constraint_values(&sol.x_star);
            for i in 0..p.m() {
                if sol.active_set.contains(&i) {
                    assert!(cons[i].abs() <= 1e-9, "active constraint not tight");
                } else {
                    assert!(sol.lambda_star[i] == 0.0, "inactive multiplier nonzero");
                }
            }
        }
    }
}
