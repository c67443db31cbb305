//! Sampled checks of descent criteria for openness and regularity, and of
//! the perturbation and sum estimates. Failures carry replayable witnesses.

mod perturbation;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use perturbation::{
    verify_linear_perturbation, verify_setvalued_perturbation, verify_sum_distance_bound, verify_sum_semiregularity,
    SumDistanceInput,
};

use crate::error::{Error, Result};
use crate::moduli::{shell_seed, ModulusKind};
use crate::rng::{directions, shell_points};
use crate::setmap::{find_preimage_in, nearest_preimage, dist_to_preimage, SetMap};
use crate::space::{Ball, GraphPoint, NormKind, Settings, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormTag {
    /// Covering around the point, decrease measured in max{d, α ϱ}.
    Regularity,
    /// Metric subregularity: decrease of ϱ(·, ȳ) along the graph.
    Subregularity,
    /// Openness at a point of a single-valued map.
    SemiregSingle,
    /// Openness at a graph point of a set-valued map.
    SemiregSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Sufficient,
    Necessary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentForm {
    pub tag: FormTag,
    pub direction: Direction,
}

impl DescentForm {
    pub fn new(tag: FormTag, direction: Direction) -> Self {
        DescentForm { tag, direction }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DescentConstants {
    pub c: f64,
    pub r: f64,
    /// Weight of the value distance; required for regularity and semireg_set.
    #[serde(default)]
    pub alpha: Option<f64>,
    /// Rate used by the necessary direction; defaults to 0.9·c.
    #[serde(default)]
    pub c_prime: Option<f64>,
}

impl DescentConstants {
    pub fn new(c: f64, r: f64) -> Self {
        DescentConstants { c, r, alpha: None, c_prime: None }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        DescentConstants { alpha: Some(alpha), ..self }
    }

    fn validate(&self, form: &DescentForm) -> Result<()> {
        if !(self.c > 0.0 && self.r > 0.0) {
            return Err(Error::InvalidInput("descent constants need c > 0 and r > 0".into()));
        }
        if matches!(form.tag, FormTag::Regularity | FormTag::SemiregSet) {
            match self.alpha {
                Some(a) if a > 0.0 && a * self.c < 1.0 => {}
                _ => return Err(Error::InvalidInput("set-valued forms need alpha > 0 with alpha*c < 1".into())),
            }
        }
        if let Some(cp) = self.c_prime {
            if !(cp > 0.0 && cp < self.c) {
                return Err(Error::InvalidInput("c_prime must lie in (0, c)".into()));
            }
        }
        Ok(())
    }

    /// Rate entering the premise and the decrease inequality.
    fn effective(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Sufficient => self.c,
            Direction::Necessary => self.c_prime.unwrap_or(0.9 * self.c),
        }
    }
}

/// Premise data handed to a descent oracle.
#[derive(Debug, Clone)]
pub struct DescentQuery {
    pub x: Vector,
    pub v: Vector,
    pub y: Vector,
    pub c: f64,
    pub alpha: f64,
}

type OracleFn = dyn Fn(&DescentQuery) -> Option<(Vector, Vector)> + Send + Sync;

/// Supplies the pair (x′, v′) whose existence the criterion asserts. Must be
/// reentrant: it is called from several threads.
#[derive(Clone)]
pub struct DescentOracle {
    pub label: String,
    f: Arc<OracleFn>,
}

impl fmt::Debug for DescentOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DescentOracle({})", self.label)
    }
}

impl DescentOracle {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(&DescentQuery) -> Option<(Vector, Vector)> + Send + Sync + 'static,
    ) -> Self {
        DescentOracle { label: label.into(), f: Arc::new(f) }
    }

    /// (x′, v′) := (y, y), valid when y ∈ F(y).
    pub fn diagonal() -> Self {
        DescentOracle::new("(x', v') = (y, y)", |q| Some((q.y.clone(), q.y.clone())))
    }

    /// x′ := the preimage of y nearest to `base`, v′ := y.
    pub fn nearest_preimage(f: SetMap, base: Vector, reach: f64, settings: Settings) -> Self {
        DescentOracle::new("nearest preimage of y", move |q| {
            let region = Ball::closed(base.clone(), reach);
            nearest_preimage(&f, &base, &q.y, &region, &settings).ok().flatten().map(|x| (x, q.y.clone()))
        })
    }

    pub fn query(&self, q: &DescentQuery) -> Option<(Vector, Vector)> {
        (self.f)(q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertifyOptions {
    /// Targets y per shell (graph points per shell for subregularity).
    pub samples: usize,
    pub shells: usize,
    pub rho: f64,
    /// Graph points paired with every target, besides the reference point.
    pub graph_points: usize,
    pub seed: u64,
    /// Slack of conclusion inequalities: relative part.
    pub tol_rel: f64,
    /// Slack of conclusion inequalities: absolute part.
    pub tol_abs: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions { samples: 16, shells: 8, rho: 0.5, graph_points: 8, seed: 42, tol_rel: 0.05, tol_abs: 1e-6 }
    }
}

impl CertifyOptions {
    /// `bound` widened by the conclusion slack.
    pub fn slack(&self, bound: f64) -> f64 {
        bound.abs() * self.tol_rel + self.tol_abs
    }
}

/// A failed inequality `lhs < rhs` (strict) or `lhs ≤ rhs` with its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub label: String,
    pub inputs: BTreeMap<String, Vec<f64>>,
    #[serde(with = "crate::ser::ext")]
    pub lhs: f64,
    #[serde(with = "crate::ser::ext")]
    pub rhs: f64,
    pub strict: bool,
}

impl Violation {
    pub fn new(label: impl Into<String>, lhs: f64, rhs: f64, strict: bool) -> Self {
        Violation { label: label.into(), inputs: BTreeMap::new(), lhs, rhs, strict }
    }

    pub fn input(mut self, key: &str, v: &Vector) -> Self {
        self.inputs.insert(key.to_string(), v.as_slice().to_vec());
        self
    }

    pub fn scalar(mut self, key: &str, v: f64) -> Self {
        self.inputs.insert(key.to_string(), vec![v]);
        self
    }

    /// Whether the recorded sides really fail the inequality.
    pub fn fails(&self) -> bool {
        if self.strict {
            !(self.lhs < self.rhs)
        } else {
            !(self.lhs <= self.rhs)
        }
    }

    fn vec(&self, key: &str) -> Option<Vector> {
        self.inputs.get(key).map(|v| Vector::from_column_slice(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConclusionCheck {
    pub passed: bool,
    /// Radii t at which the covering inclusion was sampled.
    pub radii: Vec<f64>,
    pub targets_checked: usize,
    pub witnesses: Vec<Violation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Fewer than five premise-satisfying samples were found.
    Vacuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub check: String,
    pub form: Option<DescentForm>,
    #[serde(with = "crate::ser::ext_map")]
    pub constants: BTreeMap<String, f64>,
    #[serde(with = "crate::ser::ext_map")]
    pub estimates: BTreeMap<String, f64>,
    pub premise_samples: usize,
    pub violations: Vec<Violation>,
    pub conclusion_check: Option<ConclusionCheck>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
    pub seed: u64,
}

/// Minimum number of premise samples for a non-vacuous verdict.
pub const MIN_PREMISE_SAMPLES: usize = 5;

impl CertificateReport {
    pub(crate) fn new(check: &str, seed: u64) -> Self {
        CertificateReport {
            check: check.to_string(),
            form: None,
            constants: BTreeMap::new(),
            estimates: BTreeMap::new(),
            premise_samples: 0,
            violations: Vec::new(),
            conclusion_check: None,
            verdict: Verdict::Pass,
            notes: Vec::new(),
            seed,
        }
    }

    pub(crate) fn finish(mut self) -> Self {
        let concluded = self.conclusion_check.as_ref().is_none_or(|c| c.passed);
        self.verdict = if !self.violations.is_empty() || !concluded {
            Verdict::Fail
        } else if self.premise_samples < MIN_PREMISE_SAMPLES {
            Verdict::Vacuous
        } else {
            Verdict::Pass
        };
        self
    }

    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }
}

/// Weight of ϱ(v, v′) inside the max of the decrease inequality.
fn value_weight(tag: FormTag, k: &DescentConstants) -> f64 {
    match tag {
        FormTag::SemiregSingle => 0.0,
        FormTag::Regularity | FormTag::SemiregSet => k.alpha.unwrap_or(0.0),
        FormTag::Subregularity => k.r,
    }
}

/// Sides of the decrease inequality ϱ(v′, y) + c·max{d(x, x′), w ϱ(v, v′)} < ϱ(v, y).
fn decrease_sides(c: f64, w: f64, x: &Vector, v: &Vector, y: &Vector, xn: &Vector, vn: &Vector, norm: NormKind) -> (f64, f64) {
    let step = norm.dist(x, xn).max(w * norm.dist(v, vn));
    (norm.dist(vn, y) + c * step, norm.dist(v, y))
}

fn premise_holds(
    form: &DescentForm,
    k: &DescentConstants,
    c: f64,
    p: &GraphPoint,
    x: &Vector,
    v: &Vector,
    y: &Vector,
    norm: NormKind,
    tau: f64,
) -> bool {
    let (r, alpha) = (k.r, k.alpha.unwrap_or(0.0));
    let dx = norm.dist(x, &p.x);
    let dv = norm.dist(v, &p.y);
    let dvy = norm.dist(v, y);
    let dyb = norm.dist(&p.y, y);
    match form.tag {
        FormTag::SemiregSingle | FormTag::SemiregSet => {
            let (dist_term, v_reach) = if form.tag == FormTag::SemiregSingle {
                (dx, f64::INFINITY)
            } else {
                (dx.max(alpha * dv), r / alpha)
            };
            if !(dx < r && dv < v_reach && dyb < c * r) {
                return false;
            }
            match form.direction {
                Direction::Sufficient => dvy > tau && dvy <= dyb - c * dist_term + tau,
                Direction::Necessary => dyb > tau && dyb <= dvy - c * dist_term + tau,
            }
        }
        FormTag::Regularity => dx < r && dv < r && dyb < r && dvy > tau,
        // y plays the role of ȳ here; the caller passes y = ȳ.
        FormTag::Subregularity => dx < r && dv < r && dv > tau,
    }
}

/// Samples premise-satisfying tuples on geometric shells around `point`,
/// asks the oracle for a descent pair and checks the strict decrease. In the
/// sufficient direction the covering conclusion is then sampled as well.
pub fn check_descent_certificate(
    form: &DescentForm,
    f: &SetMap,
    point: &GraphPoint,
    constants: &DescentConstants,
    oracle: &DescentOracle,
    opts: &CertifyOptions,
    settings: &Settings,
) -> Result<CertificateReport> {
    constants.validate(form)?;
    if opts.shells == 0 || opts.samples == 0 || !(opts.rho > 0.0 && opts.rho < 1.0) {
        return Err(Error::InvalidInput("certify options need shells, samples >= 1 and 0 < rho < 1".into()));
    }
    if form.tag == FormTag::SemiregSingle && !f.is_single_valued() {
        return Err(Error::InvalidInput(format!("semireg_single needs a single-valued map, got {}", f.describe())));
    }
    f.require_on_graph(point, settings)?;
    let norm = settings.norm;
    let c = constants.effective(form.direction);
    let w = value_weight(form.tag, constants);
    let tau = settings.tol_strict;
    // Targets live in B(ȳ, c r) for the openness forms and in B(ȳ, r) otherwise.
    let y_reach = match form.tag {
        FormTag::SemiregSingle | FormTag::SemiregSet => c * constants.r,
        _ => constants.r,
    } * (1.0 - 1e-9);

    let per_shell = (0..opts.shells)
        .into_par_iter()
        .map(|j| -> Result<(usize, Vec<Violation>)> {
            let outer = y_reach * opts.rho.powi(j as i32);
            let inner = outer * opts.rho;
            let seed_j = shell_seed(opts.seed, ModulusKind::Lopen, j, 0xC0);
            let mut graph = vec![point.clone()];
            let g_count = if form.tag == FormTag::Subregularity { opts.samples } else { opts.graph_points };
            if g_count > 0 {
                for scale in [1.0, 0.25] {
                    let pts = f.graph_sample(point, outer * scale, g_count, seed_j ^ scale.to_bits(), settings)?;
                    graph.extend(pts);
                }
            }
            let ys: Vec<Vector> = if form.tag == FormTag::Subregularity {
                vec![point.y.clone()]
            } else {
                shell_points(&point.y, inner, outer, opts.samples, norm, seed_j)
            };
            let mut count = 0;
            let mut violations = Vec::new();
            for y in &ys {
                for g in &graph {
                    if form.tag == FormTag::Subregularity && f.residual(&point.y, &g.x, norm)? <= settings.tol_feas {
                        continue;
                    }
                    if !premise_holds(form, constants, c, point, &g.x, &g.y, y, norm, tau) {
                        continue;
                    }
                    count += 1;
                    let q = DescentQuery { x: g.x.clone(), v: g.y.clone(), y: y.clone(), c, alpha: w };
                    let base = Violation::new("descent", f64::INFINITY, norm.dist(&g.y, y), true)
                        .input("x", &g.x)
                        .input("v", &g.y)
                        .input("y", y);
                    let Some((xn, vn)) = oracle.query(&q) else {
                        violations.push(base);
                        continue;
                    };
                    let residual = f.residual(&vn, &xn, norm)?;
                    if residual > settings.tol_feas {
                        return Err(Error::OracleOffGraph {
                            x: g.x.as_slice().to_vec(),
                            v: g.y.as_slice().to_vec(),
                            y: y.as_slice().to_vec(),
                            residual,
                        });
                    }
                    let (lhs, rhs) = decrease_sides(c, w, &g.x, &g.y, y, &xn, &vn, norm);
                    if !(lhs < rhs - tau) {
                        violations.push(Violation { lhs, rhs, ..base }.input("x_new", &xn).input("v_new", &vn));
                    }
                }
            }
            Ok((count, violations))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = CertificateReport::new("descent", opts.seed);
    report.form = Some(*form);
    report.constants.insert("c".into(), constants.c);
    report.constants.insert("c_eff".into(), c);
    report.constants.insert("r".into(), constants.r);
    if let Some(a) = constants.alpha {
        report.constants.insert("alpha".into(), a);
    }
    for (count, v) in per_shell {
        report.premise_samples += count;
        report.violations.extend(v);
    }
    if matches!(form.tag, FormTag::Regularity | FormTag::SemiregSet | FormTag::Subregularity) {
        report.notes.push("completeness of the graph localization is assumed, not sampled".into());
    }
    if form.direction == Direction::Sufficient {
        report.conclusion_check = Some(match form.tag {
            FormTag::SemiregSingle | FormTag::SemiregSet => covering_conclusion(f, std::slice::from_ref(point), c, constants.r, opts, settings)?,
            FormTag::Regularity => {
                let mut centers = vec![point.clone()];
                centers.extend(f.graph_sample(point, 0.25 * constants.r, 3, opts.seed ^ 0xCE, settings)?);
                covering_conclusion(f, &centers, c, 0.5 * constants.r, opts, settings)?
            }
            FormTag::Subregularity => subregularity_conclusion(f, point, c, constants.r, opts, settings)?,
        });
    }
    Ok(report.finish())
}

/// Radii at which covering conclusions are sampled: four points of (0, r).
pub fn conclusion_radii(r: f64) -> Vec<f64> {
    [0.2, 0.4, 0.6, 0.8].iter().map(|s| s * r).collect()
}

/// Samples B[v, c t] ⊆ F(B[x, t]) around each center for t in `conclusion_radii(r)`.
fn covering_conclusion(
    f: &SetMap,
    centers: &[GraphPoint],
    c: f64,
    r: f64,
    opts: &CertifyOptions,
    settings: &Settings,
) -> Result<ConclusionCheck> {
    let m = f.dims().1;
    let radii = conclusion_radii(r);
    let dirs = directions(m, 16, settings.norm, opts.seed ^ 0xD1);
    let mut jobs = Vec::new();
    for p in centers {
        for &t in &radii {
            for e in &dirs {
                for s in [0.5, 1.0] {
                    jobs.push((p, t, &p.y + e * (c * t * s)));
                }
            }
        }
    }
    let witnesses = jobs
        .par_iter()
        .map(|(p, t, target)| -> Result<Option<Violation>> {
            let reach = t + opts.slack(*t);
            let ball = Ball::closed(p.x.clone(), reach);
            Ok(match find_preimage_in(f, target, &ball, settings)? {
                Some(_) => None,
                None => Some(
                    Violation::new("uncovered target", f64::INFINITY, reach, false)
                        .input("center_x", &p.x)
                        .input("center_y", &p.y)
                        .input("target", target)
                        .scalar("t", *t),
                ),
            })
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect::<Vec<_>>();
    Ok(ConclusionCheck { passed: witnesses.is_empty(), radii, targets_checked: jobs.len(), witnesses })
}

/// Samples dist(ȳ, F(x)) ≥ c·dist(x, F⁻¹(ȳ)) for x near x̄.
fn subregularity_conclusion(
    f: &SetMap,
    p: &GraphPoint,
    c: f64,
    r: f64,
    opts: &CertifyOptions,
    settings: &Settings,
) -> Result<ConclusionCheck> {
    let norm = settings.norm;
    let radii = conclusion_radii(r);
    let mut checked = 0;
    let mut witnesses = Vec::new();
    for (j, &t) in radii.iter().enumerate() {
        let xs = shell_points(&p.x, 0.5 * t, t, opts.samples, norm, shell_seed(opts.seed, ModulusKind::Psopen, j, 0xC1));
        for x in xs {
            checked += 1;
            let lhs = f.residual(&p.y, &x, norm)?;
            let d = dist_to_preimage(f, &x, &p.y, &Ball::closed(x.clone(), 2.0 * t), settings)?.min(norm.dist(&x, &p.x));
            let need = c * d;
            if lhs < need - opts.slack(need) {
                witnesses.push(Violation::new("subregularity gap", need - opts.slack(need), lhs, false).input("x", &x).input("y_bar", &p.y));
            }
        }
    }
    Ok(ConclusionCheck { passed: witnesses.is_empty(), radii, targets_checked: checked, witnesses })
}

/// Re-evaluates a witness of a descent report through the distance oracles:
/// decrease violations recompute both sides, uncovered targets rerun the
/// preimage search. Returns whether the failure is reproduced.
pub fn replay_witness(report: &CertificateReport, w: &Violation, f: &SetMap, settings: &Settings) -> Result<bool> {
    let norm = settings.norm;
    let form = report.form.ok_or_else(|| Error::InvalidInput("replay needs a descent report".into()))?;
    let missing = || Error::InvalidInput(format!("witness `{}` lacks inputs", w.label));
    match w.label.as_str() {
        "descent" => {
            let (x, v, y) = (w.vec("x").ok_or_else(missing)?, w.vec("v").ok_or_else(missing)?, w.vec("y").ok_or_else(missing)?);
            let (Some(xn), Some(vn)) = (w.vec("x_new"), w.vec("v_new")) else {
                return Ok(true);
            };
            let k = DescentConstants {
                c: report.constants["c"],
                r: report.constants["r"],
                alpha: report.constants.get("alpha").copied(),
                c_prime: None,
            };
            let c = report.constants["c_eff"];
            let (lhs, rhs) = decrease_sides(c, value_weight(form.tag, &k), &x, &v, &y, &xn, &vn, norm);
            Ok(!(lhs < rhs - settings.tol_strict) && f.residual(&vn, &xn, norm)? <= settings.tol_feas)
        }
        "uncovered target" => {
            let cx = w.vec("center_x").ok_or_else(missing)?;
            let target = w.vec("target").ok_or_else(missing)?;
            Ok(find_preimage_in(f, &target, &Ball::closed(cx, w.rhs), settings)?.is_none())
        }
        "subregularity gap" => {
            let (x, yb) = (w.vec("x").ok_or_else(missing)?, w.vec("y_bar").ok_or_else(missing)?);
            Ok(f.residual(&yb, &x, norm)? < w.lhs)
        }
        _ => Ok(w.fails()),
    }
}
