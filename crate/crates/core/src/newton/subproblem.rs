//! The linearized inclusion f(x_k) + A(u − x_k) + F(u) ∋ r, solved exactly
//! for F ≡ 0, a box normal cone, or finitely many affine branches.

use super::{inclusion_gap, Constraint, GeProblem, InexactnessModel, NewtonOptions};
use crate::error::{Error, Result};
use crate::linalg::least_norm_solve;
use crate::rng::{unit_direction, SplitMix64};
use crate::space::{Matrix, NormKind, Vector};

/// Largest dimension for the 3ⁿ active-set enumeration.
const MAX_BOX_DIM: usize = 8;
/// Fixed-point rounds for sizing the adversarial residual.
const ADVERSARIAL_ROUNDS: usize = 30;
/// Share of the residual budget the adversarial switch consumes.
const ADVERSARIAL_SHARE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub u: Vector,
    /// Active-set pattern (F/L/U per coordinate) or affine branch label.
    pub pattern: Option<String>,
    /// Norm of the residual the solution was shifted by.
    pub perturbation: f64,
}

fn infeasible(x: &Vector) -> Error {
    Error::SubproblemInfeasible { x: x.as_slice().to_vec() }
}

/// Solves f(x_k) + A(u − x_k) + F(u) ∋ 0 exactly, or, under the adversarial
/// switch, ∋ r with ‖r‖ = 0.9·η‖u − x_k‖ along a seeded direction.
pub fn solve_subproblem(
    xk: &Vector,
    a: &Matrix,
    problem: &GeProblem,
    model: &InexactnessModel,
    opts: &NewtonOptions,
    k: usize,
) -> Result<SubproblemSolution> {
    let (n, m) = problem.dims();
    if a.shape() != (m, n) {
        return Err(Error::DimensionMismatch { expected: m * n, got: a.nrows() * a.ncols() });
    }
    let fx = problem.f.eval(xk)?;
    let zero = Vector::zeros(m);
    let (u, pattern) = solve_shifted(problem, xk, a, &fx, &zero, opts.subproblem_tol)?;
    let exact = SubproblemSolution { u, pattern, perturbation: 0.0 };
    let eta = model.eta();
    if !opts.adversarial || eta == 0.0 {
        return Ok(exact);
    }
    let dir = unit_direction(m, NormKind::Euclidean, &mut SplitMix64::derive(opts.seed, k as u64));
    let mut s = ADVERSARIAL_SHARE * eta * (&exact.u - xk).norm();
    let mut best = None;
    for _ in 0..ADVERSARIAL_ROUNDS {
        let Ok((u, pattern)) = solve_shifted(problem, xk, a, &fx, &(&dir * s), opts.subproblem_tol) else {
            break;
        };
        let next = ADVERSARIAL_SHARE * eta * (&u - xk).norm();
        let (gap, allowed) = inclusion_gap(problem, model, xk, a, &u)?;
        if gap <= allowed {
            best = Some(SubproblemSolution { u, pattern, perturbation: s });
        }
        if (next - s).abs() <= 1e-12 * s.max(1e-300) {
            break;
        }
        s = next;
    }
    Ok(best.unwrap_or(exact))
}

/// Least-squares solution of M u = b nearest x: x + M⁺(b − M x).
fn nearest_solution(m: &Matrix, b: &Vector, x: &Vector) -> Result<Vector> {
    Ok(x + least_norm_solve(m, &(b - m * x))?)
}

/// Exact solution of f(x_k) + A(u − x_k) + F(u) ∋ r.
fn solve_shifted(
    problem: &GeProblem,
    xk: &Vector,
    a: &Matrix,
    fx: &Vector,
    r: &Vector,
    tol: f64,
) -> Result<(Vector, Option<String>)> {
    // A u + q + F(u) ∋ 0 with q = f(x_k) − A x_k − r.
    let q = fx - a * xk - r;
    match &problem.constraint {
        Constraint::Zero => {
            let rhs = -&q;
            let u = nearest_solution(a, &rhs, xk)?;
            if (a * &u - &rhs).norm() > tol * (1.0 + rhs.norm()) {
                return Err(infeasible(xk));
            }
            Ok((u, None))
        }
        Constraint::NormalConeBox { lo, hi } => {
            let (u, pattern) = solve_box(a, &q, lo, hi, xk, tol)?;
            Ok((u, Some(pattern)))
        }
        Constraint::FiniteAffine { branches } => {
            let mut best: Option<(f64, usize, Vector)> = None;
            for (i, br) in branches.iter().enumerate() {
                let lhs = a + &br.b;
                let rhs = -(&q + &br.c);
                let u = nearest_solution(&lhs, &rhs, xk)?;
                if (&lhs * &u - &rhs).norm() > tol * (1.0 + rhs.norm()) {
                    continue;
                }
                let d = (&u - xk).norm();
                if best.as_ref().is_none_or(|(bd, _, _)| d < bd - tol) {
                    best = Some((d, i, u));
                }
            }
            let (_, i, u) = best.ok_or_else(|| infeasible(xk))?;
            Ok((u, Some(format!("branch{i}"))))
        }
    }
}

/// Solves A u + q + N_[lo,hi](u) ∋ 0 by enumerating free/lower/upper
/// patterns. Among feasible patterns the solution nearest x_k wins, ties
/// going to the lexicographically smallest pattern.
pub(crate) fn solve_box(a: &Matrix, q: &Vector, lo: &Vector, hi: &Vector, xk: &Vector, tol: f64) -> Result<(Vector, String)> {
    let n = q.len();
    if n > MAX_BOX_DIM {
        return Err(Error::Unsupported(format!("active-set enumeration is limited to n <= {MAX_BOX_DIM}, got {n}")));
    }
    let mut best: Option<(f64, String, Vector)> = None;
    for code in 0..3usize.pow(n as u32) {
        let pattern: Vec<u8> = (0..n).map(|i| b"FLU"[code / 3usize.pow(i as u32) % 3]).collect();
        let Some(u) = box_pattern(a, q, lo, hi, xk, &pattern, tol)? else {
            continue;
        };
        let d = (&u - xk).norm();
        let label = String::from_utf8(pattern).expect("ascii pattern");
        let better = match &best {
            None => true,
            Some((bd, bl, _)) => d < bd - 1e-12 || (d <= bd + 1e-12 && label < *bl),
        };
        if better {
            best = Some((d, label, u));
        }
    }
    best.map(|(_, label, u)| (u, label)).ok_or_else(|| infeasible(xk))
}

/// The solution for one pattern, if it is feasible and complementary.
fn box_pattern(a: &Matrix, q: &Vector, lo: &Vector, hi: &Vector, xk: &Vector, pattern: &[u8], tol: f64) -> Result<Option<Vector>> {
    let n = q.len();
    let free: Vec<usize> = (0..n).filter(|&i| pattern[i] == b'F').collect();
    let mut u = Vector::from_fn(n, |i, _| match pattern[i] {
        b'L' => lo[i],
        b'U' => hi[i],
        _ => 0.0,
    });
    if !free.is_empty() {
        let aff = Matrix::from_fn(free.len(), free.len(), |r, c| a[(free[r], free[c])]);
        let w0 = a * &u + q;
        let rhs = Vector::from_fn(free.len(), |r, _| -w0[free[r]]);
        let xf = Vector::from_fn(free.len(), |r, _| xk[free[r]]);
        let uf = nearest_solution(&aff, &rhs, &xf)?;
        if (&aff * &uf - &rhs).norm() > tol * (1.0 + rhs.norm()) {
            return Ok(None);
        }
        for (r, &i) in free.iter().enumerate() {
            let scale = tol * (1.0 + lo[i].abs().max(hi[i].abs()).min(1e12));
            if uf[r] < lo[i] - scale || uf[r] > hi[i] + scale {
                return Ok(None);
            }
            u[i] = uf[r].clamp(lo[i], hi[i]);
        }
    }
    let w = a * &u + q;
    for i in 0..n {
        let ok = match pattern[i] {
            b'F' => w[i].abs() <= tol * (1.0 + q.norm()),
            b'L' => w[i] >= -tol,
            _ => w[i] <= tol,
        };
        if !ok {
            return Ok(None);
        }
    }
    Ok(Some(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::tests::abs_problem;
    use crate::setmap::SetMap;
    use crate::space::scalar;

    fn opts() -> NewtonOptions {
        NewtonOptions::default()
    }

    #[test]
    fn affine_equation_is_solved_in_one_step() {
        let a = Matrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let b = Vector::from_vec(vec![1.0, -2.0]);
        let (aa, bb) = (a.clone(), b.clone());
        let f = SetMap::single(crate::setmap::Procedure::new(2, 2, "Ax-b", move |x: &Vector| &aa * x - &bb));
        let p = GeProblem::new("affine", f, Constraint::Zero, None, 1e-8).unwrap();
        let xk = Vector::from_vec(vec![5.0, 5.0]);
        let sol = solve_subproblem(&xk, &a, &p, &InexactnessModel::Zero, &opts(), 0).unwrap();
        assert!((&a * &sol.u - &b).norm() < 1e-12);
    }

    #[test]
    fn shifted_identity_vi_projects_onto_the_box() {
        // f(x) = x − b on [0,1]³: the solution is the projection of b.
        let b = Vector::from_vec(vec![1.7, -0.4, 0.25]);
        let bb = b.clone();
        let f = SetMap::single(crate::setmap::Procedure::new(3, 3, "x-b", move |x: &Vector| x - &bb));
        let c = Constraint::NormalConeBox { lo: Vector::zeros(3), hi: Vector::from_element(3, 1.0) };
        let p = GeProblem::new("proj", f, c, None, 1e-8).unwrap();
        for xk in [Vector::zeros(3), Vector::from_vec(vec![0.9, 0.9, -3.0])] {
            let sol = solve_subproblem(&xk, &Matrix::identity(3, 3), &p, &InexactnessModel::Zero, &opts(), 0).unwrap();
            assert_eq!(sol.u.as_slice(), &[1.0, 0.0, 0.25]);
            assert_eq!(sol.pattern.as_deref(), Some("ULF"));
        }
    }

    #[test]
    fn abs_step_from_positive_side() {
        let (p, _) = abs_problem();
        let sol = solve_subproblem(&scalar(0.3), &Matrix::from_element(1, 1, 1.0), &p, &InexactnessModel::Zero, &opts(), 0).unwrap();
        assert!(sol.u[0].abs() < 1e-15);
    }

    #[test]
    fn degenerate_box_ties_break_lexicographically() {
        // A = 0, q = 0: every point of [0,1] solves; x_k = 0.5 is nearest
        // through the free pattern.
        let (u, label) = solve_box(&Matrix::zeros(1, 1), &Vector::zeros(1), &Vector::zeros(1), &Vector::from_element(1, 1.0), &scalar(0.5), 1e-10).unwrap();
        assert_eq!((u[0], label.as_str()), (0.5, "F"));
        // lo = hi: L and U give the same point; L sorts first.
        let (_, label) = solve_box(&Matrix::identity(1, 1), &scalar(3.0), &scalar(0.2), &scalar(0.2), &scalar(0.0), 1e-10).unwrap();
        assert_eq!(label, "L");
    }

    #[test]
    fn inconsistent_equation_is_infeasible() {
        let f = SetMap::scalar_fn("1", |_| 1.0);
        let p = GeProblem::new("const", f, Constraint::Zero, None, 1e-8).unwrap();
        let err = solve_subproblem(&scalar(0.0), &Matrix::zeros(1, 1), &p, &InexactnessModel::Zero, &opts(), 0);
        assert!(matches!(err, Err(Error::SubproblemInfeasible { .. })));
    }

    #[test]
    fn adversarial_step_uses_most_of_the_budget() {
        let (p, h) = crate::newton::tests::square_minus_one();
        let model = InexactnessModel::BallProportional { eta: 0.3 };
        let o = NewtonOptions { adversarial: true, ..opts() };
        let x = scalar(2.0);
        let a = h.matrices(&p.f, &x).unwrap().remove(0);
        let sol = solve_subproblem(&x, &a, &p, &model, &o, 0).unwrap();
        let (gap, allowed) = inclusion_gap(&p, &model, &x, &a, &sol.u).unwrap();
        assert!(gap <= allowed && gap >= 0.85 * allowed, "{gap} vs {allowed}");
        assert!((sol.perturbation - gap).abs() < 1e-9);
    }

    #[test]
    fn affine_branches_pick_the_nearest_solution() {
        // F(u) = {0, −2}: f(u) = u gives u ∈ {0, 2}; from x_k = 1.8 take 2.
        let f = SetMap::scalar_fn("x", |x| x);
        let branches = vec![
            super::super::AffineBranch { b: Matrix::zeros(1, 1), c: scalar(0.0) },
            super::super::AffineBranch { b: Matrix::zeros(1, 1), c: scalar(-2.0) },
        ];
        let p = GeProblem::new("branches", f, Constraint::FiniteAffine { branches }, Some(scalar(2.0)), 1e-8).unwrap();
        let sol = solve_subproblem(&scalar(1.8), &Matrix::identity(1, 1), &p, &InexactnessModel::Zero, &opts(), 0).unwrap();
        assert!((sol.u[0] - 2.0).abs() < 1e-12);
        assert_eq!(sol.pattern.as_deref(), Some("branch1"));
    }
}
