//! Bundled examples with their reference values.

use std::sync::Arc;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::newton::{Constraint, DerivativeOracle, GeProblem, JacobianFn};
use crate::polyhedron::Polyhedron;
use crate::rng::SplitMix64;
use crate::setmap::{Procedure, SetMap};
use crate::space::{scalar, GraphPoint, Matrix, Vector};

pub const NAMES: [&str; 7] = ["two_branch", "sinkink", "staircase", "sum_remark", "abs_newton", "smooth2d_boxvi", "linear_random"];

/// Where a reference value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    /// Stated in closed form for the example.
    ClosedForm,
    /// Computed when the example is built.
    Computed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// |estimate − value| ≤ tol.
    Within,
    /// estimate ≤ value + tol.
    AtMost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reference {
    pub quantity: String,
    pub value: f64,
    pub tol: f64,
    pub comparison: Comparison,
    pub origin: Origin,
}

impl Reference {
    fn new(quantity: &str, value: f64, tol: f64, origin: Origin) -> Self {
        Reference { quantity: quantity.into(), value, tol, comparison: Comparison::Within, origin }
    }

    fn at_most(quantity: &str, value: f64, origin: Origin) -> Self {
        Reference { quantity: quantity.into(), value, tol: 0.0, comparison: Comparison::AtMost, origin }
    }

    pub fn holds(&self, estimate: f64) -> bool {
        match self.comparison {
            Comparison::Within => (estimate - self.value).abs() <= self.tol,
            Comparison::AtMost => estimate <= self.value + self.tol,
        }
    }
}

#[derive(Debug, Clone)]
pub enum Example {
    Map { map: SetMap, point: GraphPoint },
    /// F + G at (x̄, ȳ + z̄), with the summands kept for their own moduli.
    Sum { f: SetMap, g: SetMap, x: Vector, y: Vector, z: Vector },
    Problem { problem: GeProblem, derivative: DerivativeOracle, starts: Vec<Vector> },
    Linear { a: Matrix },
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: String,
    pub description: String,
    pub example: Example,
    pub references: Vec<Reference>,
}

impl CorpusEntry {
    pub fn reference(&self, quantity: &str) -> Option<&Reference> {
        self.references.iter().find(|r| r.quantity == quantity)
    }
}

pub fn load_example(name: &str, seed: u64) -> Result<CorpusEntry> {
    match name {
        "two_branch" => Ok(two_branch()),
        "sinkink" => Ok(sinkink()),
        "staircase" => Ok(staircase()),
        "sum_remark" => Ok(sum_remark()),
        "abs_newton" => abs_newton(),
        "smooth2d_boxvi" => smooth2d_boxvi(),
        "linear_random" => linear_random(seed),
        _ => Err(Error::UnknownExample(name.to_string())),
    }
}

fn origin() -> GraphPoint {
    GraphPoint::scalar(0.0, 0.0)
}

/// F(x) = {x, 0}.
pub fn two_branch_map() -> SetMap {
    SetMap::finite(vec![Procedure::scalar("x", |x| x), Procedure::scalar("0", |_| 0.0)]).expect("two branches")
}

fn two_branch() -> CorpusEntry {
    CorpusEntry {
        name: "two_branch".into(),
        description: "F(x) = {x, 0}: open at the origin but not around it".into(),
        example: Example::Map { map: two_branch_map(), point: origin() },
        references: vec![
            Reference::new("lopen", 1.0, 0.1, Origin::ClosedForm),
            Reference::new("sur", 0.0, 0.1, Origin::ClosedForm),
            Reference::new("lopen*semireg", 1.0, 0.02, Origin::ClosedForm),
        ],
    }
}

/// f(x) = x + x|x||sin(1/x)|, f(0) = 0.
pub fn sinkink_fn(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x + x * x.abs() * (1.0 / x).sin().abs()
    }
}

fn sinkink() -> CorpusEntry {
    CorpusEntry {
        name: "sinkink".into(),
        description: "f(x) = x + x|x||sin(1/x)|: differentiable at 0 but not strictly".into(),
        example: Example::Map { map: SetMap::scalar_fn("x + x|x||sin(1/x)|", sinkink_fn), point: origin() },
        references: vec![
            Reference::new("lopen", 1.0, 0.15, Origin::ClosedForm),
            Reference::new("sur", 0.0, 0.1, Origin::ClosedForm),
            Reference::new("min_point_quotient", 0.0, 0.1, Origin::ClosedForm),
        ],
    }
}

/// x for x ≤ 0, x − 1/n on (1/n, 1/(n−1)] for n ≥ 3, x − 1/2 beyond 1/2.
pub fn staircase_fn(x: f64) -> f64 {
    if x <= 0.0 {
        return x;
    }
    if x > 0.5 {
        return x - 0.5;
    }
    let mut n = (1.0 / x).floor() + 1.0;
    if x <= 1.0 / n {
        n += 1.0;
    }
    if x > 1.0 / (n - 1.0) {
        n -= 1.0;
    }
    x - 1.0 / n
}

/// The epigraph of [`staircase_fn`].
pub fn staircase_map() -> SetMap {
    SetMap::epigraph(Procedure::scalar("staircase", staircase_fn)).expect("scalar epigraph")
}

/// (x_n, y_n, t_n) = (1/n + 1/n², 1/n², 1/n), where the covering rate is 1/n.
pub fn staircase_probe(n: usize) -> (GraphPoint, f64) {
    let nf = n as f64;
    let x = 1.0 / nf + 1.0 / (nf * nf);
    (GraphPoint::scalar(x, staircase_fn(x)), 1.0 / nf)
}

fn staircase() -> CorpusEntry {
    let mut references = vec![Reference::new("sur", 0.0, 0.1, Origin::ClosedForm)];
    for n in 5..=10 {
        let v = 1.0 / n as f64;
        references.push(Reference::new(&format!("covering_rate_n{n}"), v, 0.1 * v, Origin::ClosedForm));
    }
    CorpusEntry {
        name: "staircase".into(),
        description: "epigraph of a staircase with steps at 1/n: lopen 1 on the graph, sur 0 at the origin".into(),
        example: Example::Map { map: staircase_map(), point: origin() },
        references,
    }
}

fn sum_remark() -> CorpusEntry {
    let f = SetMap::finite(vec![Procedure::scalar("x", |x| x), Procedure::scalar("-1", |_| -1.0)]).expect("branches");
    let g = SetMap::finite(vec![Procedure::scalar("0", |_| 0.0), Procedure::scalar("1", |_| 1.0)]).expect("branches");
    CorpusEntry {
        name: "sum_remark".into(),
        description: "F(x) = {x, -1}, G(x) = {0, 1}: lopen(F+G) = 1 while sur(F+G) = 0".into(),
        example: Example::Sum { f, g, x: scalar(0.0), y: scalar(0.0), z: scalar(0.0) },
        references: vec![
            Reference::new("sur_f", 1.0, 0.05, Origin::ClosedForm),
            Reference::new("lip_g", 0.0, 0.05, Origin::ClosedForm),
            Reference::new("lopen_sum", 1.0, 0.1, Origin::ClosedForm),
            Reference::new("sur_sum", 0.0, 0.1, Origin::ClosedForm),
        ],
    }
}

fn constant_jacobian(v: f64) -> JacobianFn {
    Arc::new(move |_: &Vector| Matrix::from_element(1, 1, v))
}

/// f(x) = |x|, F ≡ 0, H the one-sided derivatives (both at the kink).
pub fn abs_newton_parts() -> Result<(GeProblem, DerivativeOracle)> {
    let p = GeProblem::new("abs_newton", SetMap::scalar_fn("|x|", f64::abs), Constraint::Zero, Some(scalar(0.0)), 1e-8)?;
    let h = DerivativeOracle::piecewise(vec![constant_jacobian(-1.0), constant_jacobian(1.0)], |x: &Vector| {
        if x[0] < 0.0 {
            vec![0]
        } else if x[0] > 0.0 {
            vec![1]
        } else {
            vec![0, 1]
        }
    });
    Ok((p, h))
}

fn abs_newton() -> Result<CorpusEntry> {
    let (problem, derivative) = abs_newton_parts()?;
    Ok(CorpusEntry {
        name: "abs_newton".into(),
        description: "f(x) = |x| with H(0) = {-1, 1}: one Newton step from anywhere".into(),
        example: Example::Problem { problem, derivative, starts: [0.3, -0.3, 0.01, -0.01].map(scalar).to_vec() },
        references: vec![
            Reference::new("iterations", 1.0, 0.0, Origin::ClosedForm),
            Reference::new("sur_G_A", 1.0, 1e-12, Origin::ClosedForm),
        ],
    })
}

/// The smooth part g(x) = M x + 0.25(x₁², sin(x₁ + x₂)) and its Jacobian.
fn smooth2d_g(x: &Vector) -> Vector {
    let m = smooth2d_m();
    &m * x + Vector::from_vec(vec![0.25 * x[0] * x[0], 0.25 * (x[0] + x[1]).sin()])
}

fn smooth2d_m() -> Matrix {
    Matrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.5])
}

pub fn smooth2d_jacobian(x: &Vector) -> Matrix {
    let c = 0.25 * (x[0] + x[1]).cos();
    smooth2d_m() + Matrix::from_row_slice(2, 2, &[0.5 * x[0], 0.0, c, c])
}

/// f(x) = g(x) − g(x̄) + (0, 0.5) on the box [0,1]² with x̄ = (0.5, 0): the
/// second coordinate sits on its lower bound with a strictly positive multiplier.
pub fn smooth2d_parts() -> Result<(GeProblem, DerivativeOracle)> {
    let xbar = Vector::from_vec(vec![0.5, 0.0]);
    let shift = Vector::from_vec(vec![0.0, 0.5]) - smooth2d_g(&xbar);
    let f = SetMap::single(Procedure::new(2, 2, "g(x) - g(xbar) + (0, 0.5)", move |x: &Vector| smooth2d_g(x) + &shift));
    let box_ = Constraint::NormalConeBox { lo: Vector::zeros(2), hi: Vector::from_element(2, 1.0) };
    let p = GeProblem::new("smooth2d_boxvi", f, box_, Some(xbar), 1e-8)?;
    Ok((p, DerivativeOracle::exact(smooth2d_jacobian)))
}

fn smooth2d_boxvi() -> Result<CorpusEntry> {
    let (problem, derivative) = smooth2d_parts()?;
    Ok(CorpusEntry {
        name: "smooth2d_boxvi".into(),
        description: "smooth 2-D variational inequality on [0,1]^2 with one active bound".into(),
        example: Example::Problem { problem, derivative, starts: vec![Vector::from_vec(vec![0.8, 0.3])] },
        references: vec![Reference::at_most("t_hat_eta0.3", 0.5, Origin::ClosedForm)],
    })
}

/// f(x) = x² − 1 with its exact derivative; x̄ = 1.
pub fn quadratic_parts() -> Result<(GeProblem, DerivativeOracle)> {
    let p = GeProblem::new("x^2 - 1", SetMap::scalar_fn("x^2 - 1", |x| x * x - 1.0), Constraint::Zero, Some(scalar(1.0)), 1e-8)?;
    Ok((p, DerivativeOracle::exact(|x: &Vector| Matrix::from_element(1, 1, 2.0 * x[0]))))
}

/// F(x) = −a x + [−w, w], as the polyhedral graph |y + a x| ≤ w.
pub fn band_map(a: f64, w: f64) -> SetMap {
    let p = Polyhedron::new(Matrix::from_row_slice(2, 2, &[a, 1.0, -a, -1.0]), Vector::from_element(2, w)).expect("band");
    SetMap::polyhedral(1, 1, vec![p]).expect("nonempty band")
}

/// A seeded 2×3 matrix with standard normal entries, redrawn until surjective.
pub fn linear_random_matrix(seed: u64) -> Matrix {
    let mut rng = SplitMix64::new(seed);
    loop {
        let a = Matrix::from_fn(2, 3, |_, _| StandardNormal.sample(&mut rng));
        if linalg::rank(&a) == 2 {
            return a;
        }
    }
}

fn linear_random(seed: u64) -> Result<CorpusEntry> {
    let a = linear_random_matrix(seed);
    let sigma = linalg::singular_values(&a)[1];
    Ok(CorpusEntry {
        name: "linear_random".into(),
        description: format!("seeded surjective 2x3 matrix (seed {seed})"),
        example: Example::Linear { a },
        references: vec![Reference::new("sigma_min", sigma, 1e-9, Origin::Computed)],
    })
}

/// f = A + p on linear_random with p(x) = 0.15σ(sin x₂, 1 − cos x₁ + x₃²),
/// so that calm(p)(0) = 0.15σ. Returns (f, A, σ_min).
pub fn brouwer_perturbation(seed: u64) -> (SetMap, Matrix, f64) {
    let a = linear_random_matrix(seed);
    let sigma = linalg::singular_values(&a)[1];
    let k = 0.15 * sigma;
    let aa = a.clone();
    let f = SetMap::single(Procedure::new(3, 2, "A x + p(x)", move |x: &Vector| {
        &aa * x + Vector::from_vec(vec![k * x[1].sin(), k * (1.0 - x[0].cos() + x[2] * x[2])])
    }));
    (f, a, sigma)
}
