//! Constructive covering: Picard iteration on the Brouwer map
//! u ↦ (1/t)·B(A(tu) − f(x̄ + tu) + y), the selection of f⁻¹ it induces, and
//! sampled Kakutani-type covering checks for set-valued maps.
//!
//! All balls and norms here are Euclidean, matching the spectral norm of B.

mod rosl;

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use rosl::{rosl_check, RoslCondition, RoslInput};

use crate::certify::Violation;
use crate::error::{Error, Result};
use crate::linalg;
use crate::moduli::{estimate_modulus, linear_moduli, LiminfSchedule, ModulusKind};
use crate::rng::{unit_direction, uniform_in_ball, SplitMix64};
use crate::setmap::{find_preimage_in, SetMap};
use crate::space::{Ball, GraphPoint, Matrix, NormKind, Settings, Vector};

pub const PICARD_MAX_ITER: usize = 200;

/// Settings with the norm forced to Euclidean.
fn euclidean(settings: &Settings) -> Settings {
    Settings { norm: NormKind::Euclidean, ..*settings }
}

/// B = Aᵀ(AAᵀ)⁻¹ for a surjective A.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoInverse {
    #[serde(with = "crate::ser::matrix")]
    pub a: Matrix,
    #[serde(with = "crate::ser::matrix")]
    pub b: Matrix,
}

impl PseudoInverse {
    /// ‖B‖ = 1/σ_min(A).
    pub fn norm(&self) -> f64 {
        linalg::spectral_norm(&self.b)
    }
}

pub fn pseudo_inverse(a: &Matrix) -> Result<PseudoInverse> {
    let m = a.nrows();
    let rank = linalg::rank(a);
    if rank < m {
        return Err(Error::RankDeficient { rank, needed: m });
    }
    let b = a.transpose() * linalg::inverse(&(a * a.transpose()))?;
    Ok(PseudoInverse { a: a.clone(), b })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum Provenance {
    Picard { iterations: usize },
    Grid { resolution: usize },
    /// Closed-form preimage of a linear, polyhedral or normal-cone map.
    Analytic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreimageSolution {
    #[serde(with = "crate::ser::vector")]
    pub x: Vector,
    pub residual: f64,
    pub provenance: Provenance,
}

/// Fixed-point iteration for h_y from u = 0. Returns x̄ + tu and the
/// iteration count once ‖f(x̄ + tu) − y‖ ≤ tol with ‖u‖ ≤ 1.
fn picard(
    f: &SetMap,
    pinv: &PseudoInverse,
    xbar: &Vector,
    y: &Vector,
    t: f64,
    max_iter: usize,
    tol: f64,
) -> Result<Option<(Vector, f64, usize)>> {
    let mut u = Vector::zeros(xbar.len());
    for k in 0..=max_iter {
        let x = xbar + &u * t;
        let fx = match f.eval(&x) {
            Ok(v) => v,
            Err(Error::OutsideDomain { .. }) | Err(Error::NonFinite(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let res = (&fx - y).norm();
        if res <= tol && u.norm() <= 1.0 + 1e-12 {
            return Ok(Some((x, res, k)));
        }
        if k == max_iter {
            break;
        }
        u = &pinv.b * (&pinv.a * (&u * t) - fx + y) / t;
        if u.iter().any(|v| !v.is_finite()) {
            return Ok(None);
        }
    }
    Ok(None)
}

/// A point x ∈ B[x̄, t] with ‖f(x) − y‖ ≤ tol: Picard iteration first, then
/// (for n ≤ 2) the grid search, whose results meet max(tol, tol_feas).
/// The fixed point exists under the covering hypotheses, but the iteration
/// need not converge to it; `None` reports that neither route found one.
#[allow(clippy::too_many_arguments)]
pub fn solve_preimage_picard(
    f: &SetMap,
    a: &Matrix,
    xbar: &Vector,
    y: &Vector,
    t: f64,
    max_iter: usize,
    tol: f64,
    settings: &Settings,
) -> Result<Option<PreimageSolution>> {
    if !f.is_single_valued() {
        return Err(Error::InvalidInput(format!("Picard solver needs a single-valued map, got {}", f.describe())));
    }
    if !(t > 0.0 && tol > 0.0) {
        return Err(Error::InvalidInput("Picard solver needs t > 0 and tol > 0".into()));
    }
    let pinv = pseudo_inverse(a)?;
    crate::space::check_dim(xbar, a.ncols())?;
    crate::space::check_dim(y, a.nrows())?;
    let sol = if let Some((x, residual, iterations)) = picard(f, &pinv, xbar, y, t, max_iter, tol)? {
        Some(PreimageSolution { x, residual, provenance: Provenance::Picard { iterations } })
    } else if xbar.len() <= 2 {
        let s = euclidean(settings);
        find_preimage_in(f, y, &Ball::closed(xbar.clone(), t), &s)?
            .map(|x| -> Result<PreimageSolution> {
                let residual = (f.eval(&x)? - y).norm();
                Ok(PreimageSolution { x, residual, provenance: Provenance::Grid { resolution: s.grid_resolution } })
            })
            .transpose()?
            .filter(|s| s.residual <= tol.max(settings.tol_feas))
    } else {
        None
    };
    if let Some(s) = &sol {
        assert!(
            (&s.x - xbar).norm() <= t * (1.0 + 1e-9) + 1e-12 && s.residual <= tol.max(settings.tol_feas),
            "Picard solution left the ball or missed the target"
        );
    }
    Ok(sol)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRecord {
    pub index: usize,
    pub t: f64,
    pub y: Vec<f64>,
    pub x: Option<Vec<f64>>,
    #[serde(with = "crate::ser::ext")]
    pub residual: f64,
    pub provenance: Option<Provenance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringReport {
    pub check: String,
    #[serde(with = "crate::ser::ext_map")]
    pub constants: BTreeMap<String, f64>,
    pub radii: Vec<f64>,
    pub attained: Vec<TargetRecord>,
    pub unattained: Vec<TargetRecord>,
    pub condition_samples: usize,
    pub condition_violations: Vec<Violation>,
    pub passed: bool,
}

impl CoveringReport {
    fn new(check: &str) -> Self {
        CoveringReport {
            check: check.into(),
            constants: BTreeMap::new(),
            radii: Vec::new(),
            attained: Vec::new(),
            unattained: Vec::new(),
            condition_samples: 0,
            condition_violations: Vec::new(),
            passed: false,
        }
    }

    fn record(&mut self, mut records: Vec<TargetRecord>) {
        records.sort_by_key(|r| r.index);
        for r in records {
            if r.x.is_some() {
                self.attained.push(r);
            } else {
                self.unattained.push(r);
            }
        }
        self.passed = self.unattained.is_empty() && self.condition_violations.is_empty();
    }

    /// Fraction of all targets attained by the Picard iteration itself.
    pub fn picard_rate(&self) -> f64 {
        let total = self.attained.len() + self.unattained.len();
        if total == 0 {
            return 0.0;
        }
        let picard = self.attained.iter().filter(|r| matches!(r.provenance, Some(Provenance::Picard { .. }))).count();
        picard as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KaluzaInput {
    pub c: f64,
    pub r: f64,
    /// Radii t; defaults to four points of (0, r).
    #[serde(default)]
    pub radii: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
    /// Known value of calm(f − A)(x̄); estimated when absent.
    #[serde(default)]
    pub calm: Option<f64>,
}

/// calm(f − A)(x̄) from the sampled calmness estimator.
pub fn estimate_calm_of_difference(f: &SetMap, a: &Matrix, xbar: &Vector, seed: u64, settings: &Settings) -> Result<f64> {
    let diff = f.minus_linear(a)?;
    let p = GraphPoint::new(xbar.clone(), diff.eval(xbar)?);
    Ok(estimate_modulus(ModulusKind::Calm, &diff, &p, &LiminfSchedule::default(), seed, &euclidean(settings))?.value)
}

fn default_radii(r: f64) -> Vec<f64> {
    [0.25, 0.5, 0.75, 0.95].iter().map(|s| s * r).collect()
}

/// Checks B[f(x̄), c t] ⊆ f(B[x̄, t]) on sampled targets by solving for
/// preimages, after requiring c < sur A − calm(f − A)(x̄).
pub fn covering_check_kaluza(
    f: &SetMap,
    a: &Matrix,
    xbar: &Vector,
    input: &KaluzaInput,
    settings: &Settings,
) -> Result<CoveringReport> {
    if !(input.c > 0.0 && input.r > 0.0 && input.samples > 0) {
        return Err(Error::InvalidInput("covering check needs c > 0, r > 0 and samples >= 1".into()));
    }
    let sur = linear_moduli(a).sur;
    let calm = match input.calm {
        Some(v) => v,
        None => estimate_calm_of_difference(f, a, xbar, input.seed, settings)?,
    };
    if !(input.c < sur - calm) {
        return Err(Error::CoveringPrecondition { c: input.c, sur, calm });
    }
    let radii = if input.radii.is_empty() { default_radii(input.r) } else { input.radii.clone() };
    let fbar = f.eval(xbar)?;
    let m = fbar.len();
    let per = input.samples.div_ceil(radii.len());
    let mut targets = Vec::new();
    for (i, &t) in radii.iter().enumerate() {
        let mut rng = SplitMix64::derive(input.seed, i as u64);
        for k in 0..per {
            if targets.len() == input.samples {
                break;
            }
            // A quarter of the targets sit on the sphere of radius c t.
            let y = if k % 4 == 0 {
                &fbar + unit_direction(m, NormKind::Euclidean, &mut rng) * (input.c * t)
            } else {
                uniform_in_ball(&fbar, input.c * t, NormKind::Euclidean, &mut rng)
            };
            targets.push((targets.len(), t, y));
        }
    }
    let tol = settings.tol_feas;
    let records = targets
        .par_iter()
        .map(|(index, t, y)| -> Result<TargetRecord> {
            let sol = solve_preimage_picard(f, a, xbar, y, *t, PICARD_MAX_ITER, tol, settings)?;
            Ok(TargetRecord {
                index: *index,
                t: *t,
                y: y.as_slice().to_vec(),
                residual: sol.as_ref().map_or(f64::INFINITY, |s| s.residual),
                x: sol.as_ref().map(|s| s.x.as_slice().to_vec()),
                provenance: sol.map(|s| s.provenance),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut report = CoveringReport::new("kaluza");
    for (k, v) in [("c", input.c), ("r", input.r), ("sur_a", sur), ("calm_f_minus_a", calm)] {
        report.constants.insert(k.into(), v);
    }
    report.radii = radii;
    report.record(records);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionPair {
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
    /// ‖σ(y) − x̄‖/‖y − ȳ‖.
    pub ratio: f64,
    /// ‖σ(y) − B(y − ȳ) − x̄‖/‖y − ȳ‖.
    pub corrected_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub pairs: Vec<SelectionPair>,
    pub failures: usize,
    pub sur_a: f64,
    pub calm: f64,
    pub max_ratio: f64,
    pub max_corrected_ratio: f64,
    /// 1/(sur A − calm(f − A)(x̄)).
    pub bound_ratio: f64,
    /// calm(f − A)(x̄)/(sur A·(sur A − calm(f − A)(x̄))).
    pub bound_corrected: f64,
    pub tol: f64,
    pub within_bounds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectionInput {
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub calm: Option<f64>,
    /// Absolute slack on both bounds.
    pub tol: f64,
}

/// Samples the selection σ(y) of f⁻¹ produced by the Picard solver on
/// shells y ∈ B(ȳ, radius) and compares its calmness ratios with the bounds.
pub fn build_selection(f: &SetMap, a: &Matrix, xbar: &Vector, input: &SelectionInput, settings: &Settings) -> Result<SelectionTrace> {
    if !(input.radius > 0.0 && input.samples > 0) {
        return Err(Error::InvalidInput("selection needs radius > 0 and samples >= 1".into()));
    }
    let pinv = pseudo_inverse(a)?;
    let sur = linear_moduli(a).sur;
    let calm = match input.calm {
        Some(v) => v,
        None => estimate_calm_of_difference(f, a, xbar, input.seed, settings)?,
    };
    if !(sur > calm) {
        return Err(Error::CoveringPrecondition { c: 0.0, sur, calm });
    }
    let c = 0.99 * (sur - calm);
    let t = input.radius / c;
    let ybar = f.eval(xbar)?;
    let m = ybar.len();
    let mut rng = SplitMix64::new(input.seed);
    // Geometric radii so that the ratios approach their limit at ȳ.
    let ys: Vec<Vector> = (0..input.samples)
        .map(|k| {
            let s = input.radius * 0.5f64.powi((k % 12) as i32) * rng.gen_range(0.5..=1.0);
            &ybar + unit_direction(m, NormKind::Euclidean, &mut rng) * s
        })
        .collect();
    let solved = ys
        .par_iter()
        .map(|y| solve_preimage_picard(f, a, xbar, y, t, PICARD_MAX_ITER, settings.tol_feas * 1e-2, settings))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    let mut failures = 0;
    for (y, sol) in ys.iter().zip(solved) {
        let Some(sol) = sol.filter(|s| matches!(s.provenance, Provenance::Picard { .. })) else {
            failures += 1;
            continue;
        };
        let dy = (y - &ybar).norm();
        let dx = &sol.x - xbar;
        pairs.push(SelectionPair {
            y: y.as_slice().to_vec(),
            sigma: sol.x.as_slice().to_vec(),
            ratio: dx.norm() / dy,
            corrected_ratio: (dx - &pinv.b * (y - &ybar)).norm() / dy,
        });
    }
    let max_ratio = pairs.iter().map(|p| p.ratio).fold(0.0, f64::max);
    let max_corrected_ratio = pairs.iter().map(|p| p.corrected_ratio).fold(0.0, f64::max);
    let bound_ratio = 1.0 / (sur - calm);
    let bound_corrected = calm / (sur * (sur - calm));
    Ok(SelectionTrace {
        within_bounds: max_ratio <= bound_ratio + input.tol && max_corrected_ratio <= bound_corrected + input.tol,
        pairs,
        failures,
        sur_a: sur,
        calm,
        max_ratio,
        max_corrected_ratio,
        bound_ratio,
        bound_corrected,
        tol: input.tol,
    })
}
