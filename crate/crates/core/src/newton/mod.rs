//! Inexact Newton-type iteration for generalized equations f(x) + F(x) ∋ 0:
//! pick A_k ∈ H(x_k) and accept x_{k+1} once
//! (f(x_k) + A_k(x_{k+1} − x_k) + F(x_{k+1})) ∩ R_k(x_k, x_{k+1}) ≠ ∅.

mod assumptions;
mod rate;
mod subproblem;

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use assumptions::{check_newton_assumptions, AssumptionOptions};
pub use rate::{detect_convergence_radius, rate_from_errors, rate_report, ConvergenceRadius, RadiusProbe, RadiusSearch, RateReport};
pub use subproblem::{solve_subproblem, SubproblemSolution};

use crate::error::{Error, Result};
use crate::rng::{uniform_in_ball, SplitMix64};
use crate::setmap::{Procedure, SetMap};
use crate::space::{check_dim, Matrix, NormKind, Vector};

/// Central-difference step for Jacobians.
pub const FD_STEP: f64 = 1e-6;
/// Sampled Jacobians closer than this (plus a radius-proportional part) are merged.
pub const DEDUP_TOL: f64 = 1e-9;
/// Merge tolerance per unit sampling radius, absorbing the drift of a
/// continuous Jacobian across the sampling ball.
pub const CLARKE_MERGE_PER_RADIUS: f64 = 100.0;

pub type JacobianFn = Arc<dyn Fn(&Vector) -> Matrix + Send + Sync>;
pub type PieceSelector = Arc<dyn Fn(&Vector) -> Vec<usize> + Send + Sync>;

/// F(x) = B x + c, one branch of a finite-valued affine F.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineBranch {
    #[serde(with = "crate::ser::matrix")]
    pub b: Matrix,
    #[serde(with = "crate::ser::vector")]
    pub c: Vector,
}

/// The set-valued part F of the generalized equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    Zero,
    NormalConeBox {
        #[serde(with = "crate::ser::vector")]
        lo: Vector,
        #[serde(with = "crate::ser::vector")]
        hi: Vector,
    },
    FiniteAffine { branches: Vec<AffineBranch> },
}

impl Constraint {
    fn as_setmap(&self, n: usize, m: usize) -> Result<SetMap> {
        match self {
            Constraint::Zero => Ok(SetMap::linear(Matrix::zeros(m, n))),
            Constraint::NormalConeBox { lo, hi } => {
                if n != m || lo.len() != n {
                    return Err(Error::InvalidInput(format!("normal cone constraint needs n = m = {}", lo.len())));
                }
                SetMap::normal_cone_box(lo.clone(), hi.clone())
            }
            Constraint::FiniteAffine { branches } => {
                if branches.iter().any(|br| br.b.shape() != (m, n) || br.c.len() != m) {
                    return Err(Error::InvalidInput("affine branch has the wrong shape".into()));
                }
                SetMap::finite(
                    branches
                        .iter()
                        .enumerate()
                        .map(|(i, br)| {
                            let br = br.clone();
                            Procedure::new(n, m, format!("branch{i}"), move |x: &Vector| &br.b * x + &br.c)
                        })
                        .collect(),
                )
            }
        }
    }
}

/// A generalized equation f(x) + F(x) ∋ 0 with an optional known solution.
#[derive(Debug, Clone)]
pub struct GeProblem {
    pub name: String,
    pub f: SetMap,
    pub constraint: Constraint,
    pub known_solution: Option<Vector>,
    big_f: SetMap,
}

impl GeProblem {
    pub fn new(
        name: impl Into<String>,
        f: SetMap,
        constraint: Constraint,
        known_solution: Option<Vector>,
        tol_feas: f64,
    ) -> Result<Self> {
        if !f.is_single_valued() {
            return Err(Error::InvalidInput(format!("f must be single-valued, got {}", f.describe())));
        }
        let (n, m) = f.dims();
        let big_f = constraint.as_setmap(n, m)?;
        let p = GeProblem { name: name.into(), f, constraint, known_solution, big_f };
        if let Some(xb) = &p.known_solution {
            check_dim(xb, n)?;
            let residual = p.residual(xb)?;
            if !(residual <= tol_feas) {
                return Err(Error::NotOnGraph { residual });
            }
        }
        Ok(p)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.f.dims()
    }

    /// F as a set-valued map.
    pub fn constraint_map(&self) -> &SetMap {
        &self.big_f
    }

    /// dist(0, f(x) + F(x)) in the Euclidean norm; ∞ off the domain of F.
    pub fn residual(&self, x: &Vector) -> Result<f64> {
        let v = match self.f.eval(x) {
            Ok(v) => v,
            Err(Error::OutsideDomain { .. }) | Err(Error::NonFinite(_)) => return Ok(f64::INFINITY),
            Err(e) => return Err(e),
        };
        self.shifted_residual(&v, x)
    }

    /// dist(0, v + F(u)).
    fn shifted_residual(&self, v: &Vector, u: &Vector) -> Result<f64> {
        self.big_f.values(u)?.dist(&-v, NormKind::Euclidean)
    }
}

/// Central-difference Jacobian of a single-valued map.
pub fn fd_jacobian(f: &SetMap, x: &Vector, h: f64) -> Result<Matrix> {
    let (n, m) = f.dims();
    check_dim(x, n)?;
    let mut jac = Matrix::zeros(m, n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        jac.set_column(j, &((f.eval(&xp)? - f.eval(&xm)?) / (2.0 * h)));
    }
    Ok(jac)
}

fn push_distinct(set: &mut Vec<Matrix>, a: Matrix, tol: f64) {
    if !set.iter().any(|b| (b - &a).norm() <= tol) {
        set.push(a);
    }
}

/// Finite-difference Jacobians at `count` seeded points of B(x, radius), with
/// near-duplicates merged.
pub fn clarke_sample(f: &SetMap, x: &Vector, radius: f64, count: usize, seed: u64) -> Result<Vec<Matrix>> {
    if !(radius > 0.0 && count > 0) {
        return Err(Error::InvalidInput("clarke sampling needs radius > 0 and count >= 1".into()));
    }
    let mut rng = SplitMix64::new(seed);
    let tol = DEDUP_TOL + CLARKE_MERGE_PER_RADIUS * radius;
    let mut out = Vec::new();
    for _ in 0..count {
        let p = uniform_in_ball(x, radius, NormKind::Euclidean, &mut rng);
        push_distinct(&mut out, fd_jacobian(f, &p, FD_STEP)?, tol);
    }
    Ok(out)
}

/// Either a finite set of matrices or a declared cover F + ρB.
#[derive(Debug, Clone)]
pub enum MatrixSet {
    Finite(Vec<Matrix>),
    Covered { centers: Vec<Matrix>, radius: f64 },
}

/// χ(𝒜) = inf{r > 0 : 𝒜 ⊆ 𝓕 + rB for a finite 𝓕}.
pub fn measure_noncompactness(set: &MatrixSet) -> f64 {
    match set {
        MatrixSet::Finite(_) => 0.0,
        MatrixSet::Covered { radius, .. } => *radius,
    }
}

/// How the generalized derivative H(x) is produced.
#[derive(Clone)]
pub enum Derivative {
    Exact(JacobianFn),
    FiniteDifference { h: f64 },
    ClarkeSample { radius: f64, count: usize, seed: u64 },
    /// Jacobians of smooth pieces; the selector lists the pieces active at x.
    Piecewise { pieces: Vec<JacobianFn>, active: PieceSelector },
}

impl fmt::Debug for Derivative {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Derivative::Exact(_) => write!(f, "Exact"),
            Derivative::FiniteDifference { h } => write!(f, "FiniteDifference(h={h})"),
            Derivative::ClarkeSample { radius, count, seed } => {
                write!(f, "ClarkeSample(radius={radius}, count={count}, seed={seed})")
            }
            Derivative::Piecewise { pieces, .. } => write!(f, "Piecewise({} pieces)", pieces.len()),
        }
    }
}

/// Which element of H(x_k) becomes A_k.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum SelectionPolicy {
    #[default]
    First,
    SeededRandom { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct DerivativeOracle {
    pub derivative: Derivative,
    pub policy: SelectionPolicy,
}

impl DerivativeOracle {
    pub fn exact(jac: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        DerivativeOracle { derivative: Derivative::Exact(Arc::new(jac)), policy: SelectionPolicy::First }
    }

    pub fn finite_difference() -> Self {
        DerivativeOracle { derivative: Derivative::FiniteDifference { h: FD_STEP }, policy: SelectionPolicy::First }
    }

    /// Clarke sampling with radius 1e-4 and 16 points.
    pub fn clarke(seed: u64) -> Self {
        DerivativeOracle {
            derivative: Derivative::ClarkeSample { radius: 1e-4, count: 16, seed },
            policy: SelectionPolicy::First,
        }
    }

    pub fn piecewise(pieces: Vec<JacobianFn>, active: impl Fn(&Vector) -> Vec<usize> + Send + Sync + 'static) -> Self {
        DerivativeOracle {
            derivative: Derivative::Piecewise { pieces, active: Arc::new(active) },
            policy: SelectionPolicy::First,
        }
    }

    pub fn with_policy(mut self, policy: SelectionPolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.derivative {
            Derivative::Exact(_) => "exact",
            Derivative::FiniteDifference { .. } => "finite_difference",
            Derivative::ClarkeSample { .. } => "clarke_sample",
            Derivative::Piecewise { .. } => "piecewise",
        }
    }

    /// H(x) as a finite list of m×n matrices.
    pub fn matrices(&self, f: &SetMap, x: &Vector) -> Result<Vec<Matrix>> {
        let (n, m) = f.dims();
        check_dim(x, n)?;
        let set = match &self.derivative {
            Derivative::Exact(j) => vec![j(x)],
            Derivative::FiniteDifference { h } => vec![fd_jacobian(f, x, *h)?],
            Derivative::ClarkeSample { radius, count, seed } => clarke_sample(f, x, *radius, *count, *seed)?,
            Derivative::Piecewise { pieces, active } => {
                let mut out = Vec::new();
                for i in active(x) {
                    let piece = pieces
                        .get(i)
                        .ok_or_else(|| Error::InvalidInput(format!("piece selector returned {i} of {}", pieces.len())))?;
                    push_distinct(&mut out, piece(x), DEDUP_TOL);
                }
                out
            }
        };
        if set.is_empty() {
            return Err(Error::InvalidInput(format!("H is empty at {:?}", x.as_slice())));
        }
        if let Some(a) = set.iter().find(|a| a.shape() != (m, n)) {
            return Err(Error::DimensionMismatch { expected: m * n, got: a.nrows() * a.ncols() });
        }
        Ok(set)
    }

    /// A_k for iteration k, with its index in H(x_k) and |H(x_k)|.
    pub fn select(&self, f: &SetMap, x: &Vector, k: usize) -> Result<(Matrix, usize, usize)> {
        let mut set = self.matrices(f, x)?;
        let len = set.len();
        let i = match self.policy {
            SelectionPolicy::First => 0,
            SelectionPolicy::SeededRandom { seed } => SplitMix64::derive(seed, k as u64).gen_range(0..len),
        };
        Ok((set.swap_remove(i), i, len))
    }
}

/// R_k(x, u): the residual budget of a step from x to u.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum InexactnessModel {
    #[default]
    Zero,
    /// R_k(x, u) = {y : ‖y‖ ≤ η‖u − x‖}.
    BallProportional { eta: f64 },
}

impl InexactnessModel {
    pub fn eta(&self) -> f64 {
        match self {
            InexactnessModel::Zero => 0.0,
            InexactnessModel::BallProportional { eta } => *eta,
        }
    }

    /// Radius of the ball R_k(x, u).
    pub fn radius(&self, x: &Vector, u: &Vector) -> f64 {
        self.eta() * (u - x).norm()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta() >= 0.0 && self.eta().is_finite()) {
            return Err(Error::InvalidInput(format!("eta must be finite and >= 0, got {}", self.eta())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Stop once dist(0, f(x_k) + F(x_k)) falls to this level.
    pub stop_tol: f64,
    /// Tolerance of the linear solves and of the acceptance test.
    pub subproblem_tol: f64,
    /// Perturb each exact subproblem solution to use 90% of the residual budget.
    pub adversarial: bool,
    pub seed: u64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions { max_iter: 50, stop_tol: 1e-12, subproblem_tol: 1e-10, adversarial: false, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: usize,
    #[serde(with = "crate::ser::matrix")]
    pub a: Matrix,
    /// Index of A_k in H(x_k) and the size of H(x_k).
    pub choice: usize,
    pub candidates: usize,
    pub pattern: Option<String>,
    /// dist(0, f(x_k) + A_k(x_{k+1} − x_k) + F(x_{k+1})).
    pub subproblem_residual: f64,
    /// η‖x_{k+1} − x_k‖.
    pub allowed: f64,
    /// Norm of the residual injected by the adversarial switch.
    pub perturbation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Converged,
    MaxIterations,
    SubproblemFailed { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub problem: String,
    pub derivative: String,
    pub policy: SelectionPolicy,
    pub model: InexactnessModel,
    pub options: NewtonOptions,
    #[serde(with = "crate::ser::vectors")]
    pub iterates: Vec<Vector>,
    #[serde(with = "crate::ser::ext_vec")]
    pub residuals: Vec<f64>,
    /// ‖x_k − x̄‖ when the solution is known.
    pub errors: Option<Vec<f64>>,
    pub steps: Vec<StepRecord>,
    pub termination: Termination,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.steps.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }

    /// One row per iterate: k, coordinates, residual, error, active pattern.
    pub fn to_csv(&self) -> String {
        let n = self.iterates.first().map_or(0, |x| x.len());
        let mut out = String::from("k");
        for i in 0..n {
            out.push_str(&format!(",x{i}"));
        }
        out.push_str(",residual,error,pattern\n");
        for (k, x) in self.iterates.iter().enumerate() {
            out.push_str(&k.to_string());
            for v in x.iter() {
                out.push_str(&format!(",{v:e}"));
            }
            let err = self.errors.as_ref().map_or(String::new(), |e| format!("{:e}", e[k]));
            let pattern = k.checked_sub(1).and_then(|j| self.steps[j].pattern.clone()).unwrap_or_default();
            out.push_str(&format!(",{:e},{err},{pattern}\n", self.residuals[k]));
        }
        out
    }

    /// Re-evaluates the acceptance test of every step; returns the first
    /// failing step index, if any.
    pub fn replay(&self, problem: &GeProblem) -> Result<Option<usize>> {
        for step in &self.steps {
            let (x, u) = (&self.iterates[step.k], &self.iterates[step.k + 1]);
            let (gap, allowed) = inclusion_gap(problem, &self.model, x, &step.a, u)?;
            if gap > allowed + self.options.subproblem_tol * (1.0 + allowed) {
                return Ok(Some(step.k));
            }
        }
        Ok(None)
    }
}

/// dist(0, f(x) + A(u − x) + F(u)) and the budget η‖u − x‖. The intersection
/// with the ball R_k(x, u) is nonempty iff the first is at most the second.
pub fn inclusion_gap(problem: &GeProblem, model: &InexactnessModel, x: &Vector, a: &Matrix, u: &Vector) -> Result<(f64, f64)> {
    let v = problem.f.eval(x)? + a * (u - x);
    Ok((problem.shifted_residual(&v, u)?, model.radius(x, u)))
}

/// Runs the iteration from x0 until the residual drops to `stop_tol`, the
/// iteration budget runs out, or a subproblem fails.
pub fn run_newton(
    problem: &GeProblem,
    h: &DerivativeOracle,
    model: &InexactnessModel,
    x0: &Vector,
    opts: &NewtonOptions,
) -> Result<IterationTrace> {
    model.validate()?;
    check_dim(x0, problem.dims().0)?;
    let mut trace = IterationTrace {
        problem: problem.name.clone(),
        derivative: h.name().to_string(),
        policy: h.policy,
        model: *model,
        options: opts.clone(),
        iterates: vec![x0.clone()],
        residuals: vec![problem.residual(x0)?],
        errors: problem.known_solution.as_ref().map(|xb| vec![(x0 - xb).norm()]),
        steps: Vec::new(),
        termination: Termination::MaxIterations,
    };
    if trace.residuals[0] <= opts.stop_tol {
        trace.termination = Termination::Converged;
        return Ok(trace);
    }
    for k in 0..opts.max_iter {
        let x = trace.iterates[k].clone();
        let (a, choice, candidates) = h.select(&problem.f, &x, k)?;
        let sol = match solve_subproblem(&x, &a, problem, model, opts, k) {
            Ok(sol) => sol,
            Err(e @ Error::SubproblemInfeasible { .. }) => {
                trace.termination = Termination::SubproblemFailed { message: e.to_string() };
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };
        let (gap, allowed) = inclusion_gap(problem, model, &x, &a, &sol.u)?;
        if gap > allowed + opts.subproblem_tol * (1.0 + allowed) {
            trace.termination = Termination::SubproblemFailed {
                message: format!("step {k} fails the acceptance test: {gap:e} > {allowed:e}"),
            };
            return Ok(trace);
        }
        let residual = problem.residual(&sol.u)?;
        if let (Some(errs), Some(xb)) = (trace.errors.as_mut(), problem.known_solution.as_ref()) {
            errs.push((&sol.u - xb).norm());
        }
        trace.steps.push(StepRecord {
            k,
            a,
            choice,
            candidates,
            pattern: sol.pattern,
            subproblem_residual: gap,
            allowed,
            perturbation: sol.perturbation,
        });
        trace.iterates.push(sol.u);
        trace.residuals.push(residual);
        if residual <= opts.stop_tol {
            trace.termination = Termination::Converged;
            return Ok(trace);
        }
    }
    Ok(trace)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::space::scalar;

    pub(crate) fn abs_problem() -> (GeProblem, DerivativeOracle) {
        let f = SetMap::scalar_fn("|x|", f64::abs);
        let p = GeProblem::new("abs", f, Constraint::Zero, Some(scalar(0.0)), 1e-8).unwrap();
        let pieces: Vec<JacobianFn> =
            vec![Arc::new(|_: &Vector| Matrix::from_element(1, 1, -1.0)), Arc::new(|_: &Vector| Matrix::from_element(1, 1, 1.0))];
        let h = DerivativeOracle::piecewise(pieces, |x: &Vector| match x[0].partial_cmp(&0.0) {
            Some(std::cmp::Ordering::Less) => vec![0],
            Some(std::cmp::Ordering::Greater) => vec![1],
            _ => vec![0, 1],
        });
        (p, h)
    }

    pub(crate) fn square_minus_one() -> (GeProblem, DerivativeOracle) {
        let f = SetMap::scalar_fn("x^2-1", |x| x * x - 1.0);
        let p = GeProblem::new("x2m1", f, Constraint::Zero, Some(scalar(1.0)), 1e-8).unwrap();
        (p, DerivativeOracle::exact(|x: &Vector| Matrix::from_element(1, 1, 2.0 * x[0])))
    }

    #[test]
    fn clarke_sample_of_abs_at_kink() {
        let f = SetMap::scalar_fn("|x|", f64::abs);
        let mut set: Vec<f64> = clarke_sample(&f, &scalar(0.0), 1e-3, 16, 3).unwrap().iter().map(|a| a[(0, 0)]).collect();
        set.sort_by(f64::total_cmp);
        assert_eq!(set.len(), 2);
        assert!((set[0] + 1.0).abs() < 1e-6 && (set[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn clarke_sample_of_smooth_and_affine_maps() {
        let sine = SetMap::scalar_fn("sin", f64::sin);
        let set = clarke_sample(&sine, &scalar(0.4), 1e-4, 16, 1).unwrap();
        assert_eq!(set.len(), 1);
        assert!((set[0][(0, 0)] - 0.4f64.cos()).abs() < 1e-4);
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let set = clarke_sample(&SetMap::linear(a.clone()), &Vector::from_vec(vec![0.3, -0.2]), 1e-4, 16, 1).unwrap();
        assert_eq!(set.len(), 1);
        assert!((&set[0] - a).norm() < 1e-8);
    }

    #[test]
    fn noncompactness_of_finite_and_covered_sets() {
        let a = Matrix::identity(2, 2);
        assert_eq!(measure_noncompactness(&MatrixSet::Finite(vec![a.clone(), -a.clone()])), 0.0);
        assert_eq!(measure_noncompactness(&MatrixSet::Finite(vec![])), 0.0);
        assert_eq!(measure_noncompactness(&MatrixSet::Covered { centers: vec![a], radius: 0.05 }), 0.05);
    }

    #[test]
    fn infeasible_known_solution_is_rejected() {
        let f = SetMap::scalar_fn("x", |x| x);
        assert!(matches!(GeProblem::new("bad", f, Constraint::Zero, Some(scalar(0.5)), 1e-8), Err(Error::NotOnGraph { .. })));
    }

    #[test]
    fn abs_converges_in_one_step() {
        let (p, h) = abs_problem();
        for x0 in [0.3, -0.3, 0.01, -0.01] {
            let t = run_newton(&p, &h, &InexactnessModel::Zero, &scalar(x0), &NewtonOptions::default()).unwrap();
            assert!(t.converged() && t.iterations() == 1, "{t:?}");
            assert_eq!(t.iterates[1][0], 0.0);
        }
        assert_eq!(h.matrices(&p.f, &scalar(0.0)).unwrap().len(), 2);
    }

    #[test]
    fn classical_newton_on_square_minus_one() {
        let (p, h) = square_minus_one();
        let t = run_newton(&p, &h, &InexactnessModel::Zero, &scalar(2.0), &NewtonOptions::default()).unwrap();
        // x_{k+1} = (x_k + 1/x_k)/2 computed independently.
        let mut x = 2.0f64;
        for k in 1..4 {
            x = 0.5 * (x + 1.0 / x);
            assert!((t.iterates[k][0] - x).abs() < 1e-14);
        }
        assert!((t.iterates[1][0] - 1.25).abs() < 1e-15 && (t.iterates[2][0] - 1.025).abs() < 1e-15);
        assert!(t.converged());
        assert_eq!(t.replay(&p).unwrap(), None);
    }

    #[test]
    fn seeded_random_policy_is_reproducible() {
        let (p, h) = abs_problem();
        let h = h.with_policy(SelectionPolicy::SeededRandom { seed: 5 });
        let picks: Vec<usize> = (0..16).map(|k| h.select(&p.f, &scalar(0.0), k).unwrap().1).collect();
        let again: Vec<usize> = (0..16).map(|k| h.select(&p.f, &scalar(0.0), k).unwrap().1).collect();
        assert_eq!(picks, again);
        assert!(picks.contains(&0) && picks.contains(&1));
    }

    #[test]
    fn csv_has_one_row_per_iterate() {
        let (p, h) = square_minus_one();
        let t = run_newton(&p, &h, &InexactnessModel::Zero, &scalar(2.0), &NewtonOptions::default()).unwrap();
        let csv = t.to_csv();
        assert!(csv.starts_with("k,x0,residual,error,pattern\n"));
        assert_eq!(csv.lines().count(), t.iterates.len() + 1);
    }
}
