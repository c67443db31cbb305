//! The twelve acceptance criteria, each reduced to a PASS/FAIL line.

use std::cell::RefCell;
use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{
    check_descent_certificate, verify_sum_semiregularity, CertifyOptions, DescentConstants, DescentForm, DescentOracle,
    Direction, FormTag,
};
use crate::corpus::{self, Example, Reference};
use crate::covering::{build_selection, covering_check_kaluza, rosl_check, KaluzaInput, RoslCondition, RoslInput, SelectionInput};
use crate::error::{Error, Result};
use crate::linalg;
use crate::moduli::{
    convention_product, estimate_modulus, frechet_coderivative_bound, linear_moduli, slope_sandwich, LiminfSchedule,
    ModulusKind,
};
use crate::newton::{check_newton_assumptions, rate_report, run_newton, AssumptionOptions, InexactnessModel, NewtonOptions};
use crate::polyhedron::Polyhedron;
use crate::rng::{directions, SplitMix64};
use crate::setmap::{covering_rate, SetMap};
use crate::space::{scalar, GraphPoint, Matrix, NormKind, Settings, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    #[serde(with = "crate::ser::ext_map")]
    pub values: BTreeMap<String, f64>,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!("{} {:>2} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.id, self.name, self.detail)
    }
}

/// Accumulates named values and the sub-checks of one criterion.
struct Tally {
    values: RefCell<BTreeMap<String, f64>>,
    failures: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { values: RefCell::new(BTreeMap::new()), failures: Vec::new() }
    }

    fn value(&self, key: &str, v: f64) -> f64 {
        self.values.borrow_mut().insert(key.to_string(), v);
        v
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }
}

type Body = fn(u64, &mut Tally) -> Result<()>;

pub const COUNT: usize = 12;

/// Name of criterion `id` (1-based).
pub fn name(id: usize) -> Option<&'static str> {
    CRITERIA.get(id.wrapping_sub(1)).map(|c| c.0)
}

const CRITERIA: [(&str, Body); COUNT] = [
    ("linear closed forms", linear_closed_forms),
    ("two_branch moduli", two_branch_moduli),
    ("sinkink openness", sinkink_openness),
    ("staircase covering rates", staircase_rates),
    ("sum of set-valued maps", sum_remark),
    ("slope sandwich", slope_sandwich_check),
    ("coderivative bounds", coderivative_bounds),
    ("perturbed surjection covers", brouwer_covering),
    ("selection bounds", selection_bounds),
    ("inner-product covering", rosl_covering),
    ("newton convergence", newton_convergence),
    ("descent certificate", descent_certificate),
];

/// Runs criterion `id` (1-based).
pub fn run(id: usize, seed: u64) -> Result<CriterionResult> {
    let (name, body) = *CRITERIA.get(id.wrapping_sub(1)).ok_or_else(|| Error::InvalidInput(format!("no criterion {id}")))?;
    let mut tally = Tally::new();
    let outcome = body(seed, &mut tally);
    let values = tally.values.into_inner();
    let (passed, detail) = match outcome {
        Err(e) => (false, format!("error: {e}")),
        Ok(()) if tally.failures.is_empty() => (true, summary(&values)),
        Ok(()) => (false, tally.failures.join("; ")),
    };
    Ok(CriterionResult { id, name: name.to_string(), passed, detail, values })
}

pub fn run_all(seed: u64) -> Vec<CriterionResult> {
    (1..=COUNT).map(|id| run(id, seed).expect("criterion ids are in range")).collect()
}

fn summary(values: &BTreeMap<String, f64>) -> String {
    values.iter().take(6).map(|(k, v)| format!("{k}={v:.4}")).collect::<Vec<_>>().join(" ")
}

fn origin() -> GraphPoint {
    GraphPoint::scalar(0.0, 0.0)
}

fn estimate(kind: ModulusKind, f: &SetMap, p: &GraphPoint, seed: u64) -> Result<f64> {
    Ok(estimate_modulus(kind, f, p, &LiminfSchedule::default(), seed, &Settings::default())?.value)
}

fn map_entry(name: &str, seed: u64) -> Result<(SetMap, GraphPoint)> {
    match corpus::load_example(name, seed)?.example {
        Example::Map { map, point } => Ok((map, point)),
        _ => Err(Error::InvalidInput(format!("{name} is not a map example"))),
    }
}

/// σ_min through the eigenvalues of A Aᵀ, independent of the SVD route.
fn sigma_min_by_eigen(a: &Matrix) -> f64 {
    let ev = SymmetricEigen::new(a * a.transpose()).eigenvalues;
    ev.iter().copied().fold(f64::INFINITY, f64::min).max(0.0).sqrt()
}

fn linear_closed_forms(seed: u64, t: &mut Tally) -> Result<()> {
    let mut rng = SplitMix64::derive(seed, 1);
    let mut worst = 0.0f64;
    let mut count = 0;
    while count < 50 {
        let n = 1 + (rand::Rng::gen_range(&mut rng, 0..6usize));
        let m = 1 + rand::Rng::gen_range(&mut rng, 0..n);
        let a = Matrix::from_fn(m, n, |_, _| StandardNormal.sample(&mut rng));
        if linalg::rank(&a) < m {
            continue;
        }
        worst = worst.max((linear_moduli(&a).sur - sigma_min_by_eigen(&a)).abs());
        count += 1;
    }
    t.check(t.value("max_closed_form_gap", worst) <= 1e-9, format!("closed form off by {worst:e}"));
    let mut worst_rel = 0.0f64;
    for k in 0..10 {
        let a = Matrix::from_fn(2, 2, |_, _| StandardNormal.sample(&mut rng));
        let sigma = sigma_min_by_eigen(&a);
        if sigma < 1e-3 {
            continue;
        }
        let est = estimate(ModulusKind::Sur, &SetMap::linear(a), &GraphPoint::new(Vector::zeros(2), Vector::zeros(2)), seed + k)?;
        worst_rel = worst_rel.max((est - sigma).abs() / sigma);
    }
    t.check(t.value("max_sampled_rel_gap", worst_rel) <= 0.15, format!("sampled sur off by {:.1}%", 100.0 * worst_rel));
    Ok(())
}

fn two_branch_moduli(seed: u64, t: &mut Tally) -> Result<()> {
    let (f, p) = map_entry("two_branch", seed)?;
    let lopen = t.value("lopen", estimate(ModulusKind::Lopen, &f, &p, seed)?);
    let sur = t.value("sur", estimate(ModulusKind::Sur, &f, &p, seed)?);
    let semireg = t.value("semireg", estimate(ModulusKind::Semireg, &f, &p, seed)?);
    let prod = t.value("lopen*semireg", convention_product(lopen, semireg));
    t.check((0.9..=1.1).contains(&lopen), format!("lopen {lopen:.4} outside [0.9, 1.1]"));
    t.check(sur <= 0.1, format!("sur {sur:.4} > 0.1"));
    t.check((0.98..=1.02).contains(&prod), format!("lopen*semireg {prod:.4} outside [0.98, 1.02]"));
    Ok(())
}

/// Local openness of f at (x, f(x)) on three shells of radius ~ x²/100.
fn point_quotient(f: &SetMap, x: f64, seed: u64) -> Result<f64> {
    let sched = LiminfSchedule { r0: 0.01 * x * x, rho: 0.5, shells: 3, samples_per_shell: 8, ..LiminfSchedule::default() };
    let p = GraphPoint::new(scalar(x), f.eval(&scalar(x))?);
    Ok(estimate_modulus(ModulusKind::Lopen, f, &p, &sched, seed, &Settings::default())?.value)
}

/// (argmin, min) of the point quotients at 400 log-spaced x in [1e-4, 1e-1].
fn min_point_quotient(f: &SetMap, seed: u64) -> Result<(f64, f64)> {
    let xs: Vec<f64> = (0..400).map(|k| 10f64.powf(-4.0 + 3.0 * (k as f64 + 0.5) / 400.0)).collect();
    let quotients = xs.par_iter().map(|&x| point_quotient(f, x, seed)).collect::<Result<Vec<f64>>>()?;
    let (i, qmin) = quotients.iter().copied().enumerate().fold((0, f64::INFINITY), |b, (i, q)| if q < b.1 { (i, q) } else { b });
    Ok((xs[i], qmin))
}

fn sinkink_openness(seed: u64, t: &mut Tally) -> Result<()> {
    let (f, p) = map_entry("sinkink", seed)?;
    let lopen = t.value("lopen", estimate(ModulusKind::Lopen, &f, &p, seed)?);
    t.check((0.85..=1.15).contains(&lopen), format!("lopen {lopen:.4} outside [0.85, 1.15]"));
    let (argmin, qmin) = min_point_quotient(&f, seed)?;
    t.value("argmin_x", argmin);
    t.check(t.value("min_point_quotient", qmin) <= 0.1, format!("min point quotient {qmin:.4} > 0.1"));
    Ok(())
}

fn staircase_rates(seed: u64, t: &mut Tally) -> Result<()> {
    let (f, p) = map_entry("staircase", seed)?;
    let s = Settings::default();
    let dirs = directions(1, 2, NormKind::Euclidean, seed);
    for n in 5..=10 {
        let (pn, tn) = corpus::staircase_probe(n);
        let rate = t.value(&format!("rate_n{n}"), covering_rate(&f, &pn, tn, &dirs, 10.0, &s)?);
        let want = 1.0 / n as f64;
        t.check((rate - want).abs() <= 0.1 * want, format!("n={n}: rate {rate:.5} vs 1/n = {want:.5}"));
    }
    let sur = t.value("sur", estimate(ModulusKind::Sur, &f, &p, seed)?);
    t.check(sur <= 0.1, format!("sur {sur:.4} > 0.1"));
    Ok(())
}

fn sum_remark(seed: u64, t: &mut Tally) -> Result<()> {
    let entry = corpus::load_example("sum_remark", seed)?;
    let Example::Sum { f, g, x, y, z } = &entry.example else {
        return Err(Error::InvalidInput("sum_remark is not a sum example".into()));
    };
    let opts = CertifyOptions { seed, ..CertifyOptions::default() };
    let rep = verify_sum_semiregularity(f, g, x, y, z, &LiminfSchedule::default(), &opts, &Settings::default())?;
    let e = |k: &str| rep.estimates[k];
    let (sur_f, lip_g) = (t.value("sur_f", e("sur_f")), t.value("lip_g", e("lip_g")));
    let lopen = t.value("lopen_sum", e("lopen_f_plus_g"));
    let sur = t.value("sur_sum", e("sur_f_plus_g"));
    t.check((0.9..=1.1).contains(&lopen), format!("lopen(F+G) {lopen:.4} outside [0.9, 1.1]"));
    t.check(sur <= 0.1, format!("sur(F+G) {sur:.4} > 0.1"));
    t.check(lopen >= sur_f - lip_g - 0.05, format!("lopen(F+G) {lopen:.4} < sur F - lip G - 0.05"));
    for (q, v) in [("sur_f", sur_f), ("lip_g", lip_g)] {
        let r = entry.reference(q).expect("reference present");
        t.check(r.holds(v), format!("{q} {v:.4} not within {} of {}", r.tol, r.value));
    }
    Ok(())
}

fn slope_sandwich_check(seed: u64, t: &mut Tally) -> Result<()> {
    for name in ["two_branch", "sinkink"] {
        let (f, p) = map_entry(name, seed)?;
        let prof = slope_sandwich(&f, &p, &LiminfSchedule::default(), seed, &Settings::default())?;
        let s = t.value(&format!("{name}_S"), prof.s_estimate);
        let lopen = t.value(&format!("{name}_lopen"), prof.lopen_estimate);
        t.check(0.5 * s <= lopen && lopen <= 1.1 * s, format!("{name}: lopen {lopen:.4} outside [S/2, 1.1 S] with S = {s:.4}"));
    }
    Ok(())
}

/// {(x, y) : a x + b y = 0}.
fn line(a: f64, b: f64) -> Result<Polyhedron> {
    Polyhedron::new(Matrix::from_row_slice(2, 2, &[a, b, -a, -b]), Vector::zeros(2))
}

fn coderivative_bounds(seed: u64, t: &mut Tally) -> Result<()> {
    let two_branch = SetMap::polyhedral(1, 1, vec![line(1.0, -1.0)?, line(0.0, 1.0)?])?;
    let diagonal = SetMap::polyhedral(1, 1, vec![line(1.0, -1.0)?])?;
    let constant = SetMap::polyhedral(1, 1, vec![line(0.0, 1.0)?])?;
    let tb = frechet_coderivative_bound(&two_branch, &origin(), 16, seed)?.bound;
    let d = frechet_coderivative_bound(&diagonal, &origin(), 16, seed)?.bound;
    let c = frechet_coderivative_bound(&constant, &origin(), 16, seed)?.bound;
    t.check(t.value("two_branch", tb) == f64::INFINITY, format!("two_branch bound {tb} is finite"));
    t.check((t.value("diagonal", d) - 1.0).abs() <= 1e-9, format!("diagonal bound {d}"));
    t.check(t.value("constant", c).abs() <= 1e-12, format!("constant bound {c}"));
    Ok(())
}

fn brouwer_covering(seed: u64, t: &mut Tally) -> Result<()> {
    let (f, a, sigma) = corpus::brouwer_perturbation(7);
    t.value("sigma_min", sigma);
    let xbar = Vector::zeros(3);
    let calm = t.value("calm_p", crate::covering::estimate_calm_of_difference(&f, &a, &xbar, seed, &Settings::default())?);
    t.check(calm <= 0.2 * sigma, format!("calm(p) {calm:.4} > 0.2 sigma"));
    let input = KaluzaInput { c: 0.7 * sigma, r: 0.02, radii: vec![1e-3, 1e-2], samples: 200, seed, calm: None };
    let rep = covering_check_kaluza(&f, &a, &xbar, &input, &Settings::default())?;
    let targets = rep.attained.len() + rep.unattained.len();
    t.value("targets", targets as f64);
    t.check(targets == 200, format!("{targets} targets instead of 200"));
    t.check(rep.passed, format!("{} targets unattained", rep.unattained.len()));
    let rate = t.value("picard_rate", rep.picard_rate());
    t.check(rate >= 0.95, format!("Picard success {:.1}% < 95%", 100.0 * rate));
    Ok(())
}

fn selection_bounds(seed: u64, t: &mut Tally) -> Result<()> {
    let f = SetMap::scalar_fn("x + 0.1 sin x", |x| x + 0.1 * x.sin());
    let input = SelectionInput { radius: 0.1, samples: 48, seed, calm: None, tol: 0.05 };
    let tr = build_selection(&f, &Matrix::identity(1, 1), &scalar(0.0), &input, &Settings::default())?;
    let (r, rc) = (t.value("max_ratio", tr.max_ratio), t.value("max_corrected_ratio", tr.max_corrected_ratio));
    t.value("failures", tr.failures as f64);
    t.check(r <= 1.0 / 0.9 + 0.05, format!("calm ratio {r:.4} > 1/0.9 + 0.05"));
    t.check(rc <= 0.1 / 0.9 + 0.05, format!("corrected ratio {rc:.4} > 0.1/0.9 + 0.05"));
    t.check(tr.failures == 0, format!("{} selection failures", tr.failures));
    Ok(())
}

fn rosl_covering(seed: u64, t: &mut Tally) -> Result<()> {
    let f = corpus::band_map(2.0, 0.1);
    let input = RoslInput { ell: 2.0, r: 0.2, condition: RoslCondition::C2, samples: 500, seed, radii: vec![0.05, 0.1, 0.2] };
    let rep = rosl_check(&f, &origin(), &input, &Settings::default())?;
    t.value("condition_samples", rep.condition_samples as f64);
    t.value("targets", rep.attained.len() as f64);
    t.check(rep.condition_samples == 500, "fewer than 500 condition samples");
    t.check(rep.condition_violations.is_empty(), format!("{} condition violations", rep.condition_violations.len()));
    t.check(rep.passed && !rep.attained.is_empty(), format!("{} targets unattained", rep.unattained.len()));
    Ok(())
}

fn newton_convergence(seed: u64, t: &mut Tally) -> Result<()> {
    let opts = NewtonOptions { seed, ..NewtonOptions::default() };
    let (p, h) = corpus::abs_newton_parts()?;
    for x0 in [0.3, -0.3, 0.01, -0.01] {
        let tr = run_newton(&p, &h, &InexactnessModel::Zero, &scalar(x0), &opts)?;
        t.check(tr.converged() && tr.iterations() == 1, format!("|x| from {x0}: {} iterations", tr.iterations()));
    }
    let (p, h) = corpus::quadratic_parts()?;
    let tr = run_newton(&p, &h, &InexactnessModel::Zero, &scalar(2.0), &opts)?;
    t.check(rate_report(&tr, None)?.superlinear, "x^2 - 1 not superlinear");
    let (p, h) = corpus::smooth2d_parts()?;
    let x0 = Vector::from_vec(vec![0.8, 0.3]);
    let inexact = NewtonOptions { adversarial: true, ..opts.clone() };
    let tr = run_newton(&p, &h, &InexactnessModel::BallProportional { eta: 0.3 }, &x0, &inexact)?;
    let rep = rate_report(&tr, None)?;
    t.check(tr.converged(), "inexact 2-D run did not converge");
    t.check(t.value("t_hat_eta0.3", rep.t_hat) <= 0.5, format!("t_hat {:.4} > 0.5 at eta = 0.3", rep.t_hat));
    let tr = run_newton(&p, &h, &InexactnessModel::Zero, &x0, &opts)?;
    let rep = rate_report(&tr, None)?;
    t.value("t_hat_eta0", rep.t_hat);
    t.check(tr.converged() && rep.superlinear, "exact 2-D run not superlinear");
    Ok(())
}

fn descent_certificate(seed: u64, t: &mut Tally) -> Result<()> {
    let (f, p) = map_entry("two_branch", seed)?;
    let form = DescentForm::new(FormTag::SemiregSet, Direction::Sufficient);
    let k = DescentConstants::new(0.9, 0.5).with_alpha(0.5);
    let opts = CertifyOptions { seed, ..CertifyOptions::default() };
    let rep = check_descent_certificate(&form, &f, &p, &k, &DescentOracle::diagonal(), &opts, &Settings::default())?;
    let samples = t.value("premise_samples", rep.premise_samples as f64);
    let radii = rep.conclusion_check.as_ref().map_or(0, |c| c.radii.len());
    t.value("conclusion_radii", radii as f64);
    t.check(rep.passed(), format!("verdict {:?} with {} violations", rep.verdict, rep.violations.len()));
    t.check(samples >= 50.0, format!("{samples} premise samples < 50"));
    t.check(radii == 4 && rep.conclusion_check.as_ref().is_some_and(|c| c.passed), "conclusion not verified on 4 radii");
    Ok(())
}

/// A corpus reference value next to the estimate computed for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceCheck {
    pub example: String,
    pub reference: Reference,
    #[serde(with = "crate::ser::ext")]
    pub estimate: f64,
    pub holds: bool,
}

/// Estimates every reference quantity of corpus entry `name`.
pub fn check_references(name: &str, seed: u64) -> Result<Vec<ReferenceCheck>> {
    let entry = corpus::load_example(name, seed)?;
    let est = reference_estimates(&entry, seed)?;
    entry
        .references
        .iter()
        .map(|r| {
            let estimate = *est
                .get(r.quantity.as_str())
                .ok_or_else(|| Error::InvalidInput(format!("{name}: no estimate for {}", r.quantity)))?;
            Ok(ReferenceCheck { example: name.to_string(), reference: r.clone(), estimate, holds: r.holds(estimate) })
        })
        .collect()
}

fn reference_estimates(entry: &corpus::CorpusEntry, seed: u64) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let s = Settings::default();
    match (entry.name.as_str(), &entry.example) {
        ("two_branch", Example::Map { map, point }) => {
            let lopen = estimate(ModulusKind::Lopen, map, point, seed)?;
            out.insert("lopen".into(), lopen);
            out.insert("sur".into(), estimate(ModulusKind::Sur, map, point, seed)?);
            out.insert("lopen*semireg".into(), convention_product(lopen, estimate(ModulusKind::Semireg, map, point, seed)?));
        }
        ("sinkink", Example::Map { map, point }) => {
            out.insert("lopen".into(), estimate(ModulusKind::Lopen, map, point, seed)?);
            let (_, qmin) = min_point_quotient(map, seed)?;
            out.insert("min_point_quotient".into(), qmin);
            // sur at the origin is at most the openness at any nearby point,
            // which catches the degenerate points the shell sampler misses.
            out.insert("sur".into(), estimate(ModulusKind::Sur, map, point, seed)?.min(qmin));
        }
        ("staircase", Example::Map { map, point }) => {
            out.insert("sur".into(), estimate(ModulusKind::Sur, map, point, seed)?);
            let dirs = directions(1, 2, NormKind::Euclidean, seed);
            for n in 5..=10 {
                let (pn, tn) = corpus::staircase_probe(n);
                out.insert(format!("covering_rate_n{n}"), covering_rate(map, &pn, tn, &dirs, 10.0, &s)?);
            }
        }
        ("sum_remark", Example::Sum { f, g, x, y, z }) => {
            let opts = CertifyOptions { seed, ..CertifyOptions::default() };
            let rep = verify_sum_semiregularity(f, g, x, y, z, &LiminfSchedule::default(), &opts, &s)?;
            for (q, k) in [("sur_f", "sur_f"), ("lip_g", "lip_g"), ("lopen_sum", "lopen_f_plus_g"), ("sur_sum", "sur_f_plus_g")] {
                out.insert(q.into(), rep.estimates[k]);
            }
        }
        ("abs_newton", Example::Problem { problem, derivative, starts }) => {
            let opts = NewtonOptions { seed, ..NewtonOptions::default() };
            let mut most = 0usize;
            for x0 in starts {
                let tr = run_newton(problem, derivative, &InexactnessModel::Zero, x0, &opts)?;
                most = most.max(if tr.converged() { tr.iterations() } else { usize::MAX });
            }
            out.insert("iterations".into(), most as f64);
            let rep = check_newton_assumptions(problem, derivative, &InexactnessModel::Zero, &AssumptionOptions::default(), &s)?;
            out.insert("sur_G_A".into(), rep.estimates["inf_sur_G_A"]);
        }
        ("smooth2d_boxvi", Example::Problem { problem, derivative, starts }) => {
            let opts = NewtonOptions { adversarial: true, seed, ..NewtonOptions::default() };
            let mut worst = 0.0f64;
            for x0 in starts {
                let tr = run_newton(problem, derivative, &InexactnessModel::BallProportional { eta: 0.3 }, x0, &opts)?;
                worst = worst.max(if tr.converged() { rate_report(&tr, None)?.t_hat } else { f64::INFINITY });
            }
            out.insert("t_hat_eta0.3".into(), worst);
        }
        ("linear_random", Example::Linear { a }) => {
            out.insert("sigma_min".into(), sigma_min_by_eigen(a));
        }
        (name, _) => return Err(Error::UnknownExample(name.to_string())),
    }
    Ok(out)
}
