//! Contraction factors of a finished run and an empirical convergence radius.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_newton, DerivativeOracle, GeProblem, InexactnessModel, IterationTrace, NewtonOptions};
use crate::error::{Error, Result};
use crate::rng::directions;
use crate::space::{NormKind, Vector};

/// Errors at or below this level are numerical noise: they end the ratio
/// series, and a step landing below it counts as full contraction.
const ERROR_FLOOR: f64 = 1e-13;
/// Each of the last three ratios must shrink by at least this factor.
const SUPERLINEAR_FACTOR: f64 = 5.0;
/// A run counts for the radius only if it ends this close to x̄ (relative).
const LANDING_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    /// Max of e_{k+1}/e_k over the last half of the ratio series.
    pub t_hat: f64,
    pub error_ratios: Vec<f64>,
    pub residual_ratios: Vec<f64>,
    pub superlinear: bool,
    /// True when x̄ was unknown and residual ratios stand in for errors.
    pub from_residuals: bool,
}

fn ratios(series: &[f64]) -> Vec<f64> {
    series
        .windows(2)
        .take_while(|w| w[0] > ERROR_FLOOR && w[0].is_finite())
        .map(|w| if w[1] <= ERROR_FLOOR { 0.0 } else { w[1] / w[0] })
        .collect()
}

/// (ratios, t_hat, superlinear) of an error sequence.
pub fn rate_from_errors(errors: &[f64]) -> (Vec<f64>, f64, bool) {
    let q = ratios(errors);
    let t_hat = q[q.len() / 2..].iter().copied().fold(f64::NAN, f64::max);
    let superlinear = q.len() >= 3 && {
        let last = &q[q.len() - 3..];
        last[0] > 0.0
            && last[1] < last[0]
            && last[2] < last[1]
            && last[1] * SUPERLINEAR_FACTOR <= last[0]
            && last[2] * SUPERLINEAR_FACTOR <= last[1]
    };
    (q, t_hat, superlinear)
}

pub fn rate_report(trace: &IterationTrace, xbar: Option<&Vector>) -> Result<RateReport> {
    let count = trace.iterates.len();
    if count < 3 {
        return Err(Error::TooFewIterates(count));
    }
    let errors: Option<Vec<f64>> = match xbar {
        Some(xb) => Some(trace.iterates.iter().map(|x| (x - xb).norm()).collect()),
        None => trace.errors.clone(),
    };
    let residual_ratios = ratios(&trace.residuals);
    let from_residuals = errors.is_none();
    let (error_ratios, t_hat, superlinear) = rate_from_errors(errors.as_deref().unwrap_or(&trace.residuals));
    Ok(RateReport {
        t_hat,
        error_ratios: if from_residuals { Vec::new() } else { error_ratios },
        residual_ratios,
        superlinear,
        from_residuals,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RadiusSearch {
    pub r_max: f64,
    pub directions: usize,
    pub bisections: usize,
    pub seed: u64,
}

impl Default for RadiusSearch {
    fn default() -> Self {
        RadiusSearch { r_max: 1.0, directions: 8, bisections: 12, seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusProbe {
    pub radius: f64,
    pub converged: bool,
    pub worst_t_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRadius {
    /// Largest probed radius from which every start converged to x̄ with t_hat < 1.
    pub radius: f64,
    pub probes: Vec<RadiusProbe>,
}

fn probe(
    problem: &GeProblem,
    xbar: &Vector,
    h: &DerivativeOracle,
    model: &InexactnessModel,
    opts: &NewtonOptions,
    dirs: &[Vector],
    radius: f64,
) -> Result<RadiusProbe> {
    let runs = dirs
        .par_iter()
        .map(|d| run_newton(problem, h, model, &(xbar + d * radius), opts))
        .collect::<Result<Vec<IterationTrace>>>()?;
    let mut converged = true;
    let mut worst = 0.0f64;
    for t in &runs {
        let landed = t.iterates.last().is_some_and(|x| (x - xbar).norm() <= LANDING_TOL * (1.0 + xbar.norm()));
        converged &= t.converged() && landed;
        if t.iterates.len() >= 3 {
            let t_hat = rate_report(t, Some(xbar))?.t_hat;
            if !(t_hat < 1.0) {
                converged = false;
            }
            worst = worst.max(t_hat);
        }
    }
    Ok(RadiusProbe { radius, converged, worst_t_hat: worst })
}

/// Bisects on ‖x0 − x̄‖ for the largest radius from which runs along seeded
/// directions all converge with t_hat < 1.
pub fn detect_convergence_radius(
    problem: &GeProblem,
    h: &DerivativeOracle,
    model: &InexactnessModel,
    opts: &NewtonOptions,
    search: &RadiusSearch,
) -> Result<ConvergenceRadius> {
    let xbar = problem
        .known_solution
        .clone()
        .ok_or_else(|| Error::InvalidInput("convergence radius needs a known solution".into()))?;
    if !(search.r_max > 0.0 && search.directions > 0) {
        return Err(Error::InvalidInput("radius search needs r_max > 0 and at least one direction".into()));
    }
    let dirs = directions(xbar.len(), search.directions, NormKind::Euclidean, search.seed);
    let mut probes = vec![probe(problem, &xbar, h, model, opts, &dirs, search.r_max)?];
    if probes[0].converged {
        return Ok(ConvergenceRadius { radius: search.r_max, probes });
    }
    let (mut lo, mut hi) = (0.0, search.r_max);
    for _ in 0..search.bisections {
        let mid = 0.5 * (lo + hi);
        let p = probe(problem, &xbar, h, model, opts, &dirs, mid)?;
        if p.converged {
            lo = mid;
        } else {
            hi = mid;
        }
        probes.push(p);
    }
    Ok(ConvergenceRadius { radius: lo, probes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::newton::tests::{abs_problem, square_minus_one};
    use crate::space::scalar;

    #[test]
    fn geometric_errors_give_their_ratio() {
        let errors: Vec<f64> = (0..12).map(|k| 0.5f64.powi(k)).collect();
        let (q, t_hat, superlinear) = rate_from_errors(&errors);
        assert_eq!(q.len(), 11);
        assert_eq!(t_hat, 0.5);
        assert!(!superlinear);
    }

    #[test]
    fn landing_below_the_floor_is_full_contraction() {
        let (q, _, superlinear) = rate_from_errors(&[0.2, 4.5e-3, 2.3e-6, 5.6e-13, 5.6e-17]);
        assert_eq!(q.last(), Some(&0.0));
        assert!(superlinear);
    }

    #[test]
    fn quadratic_convergence_is_superlinear() {
        let (p, h) = square_minus_one();
        let t = run_newton(&p, &h, &InexactnessModel::Zero, &scalar(2.0), &NewtonOptions::default()).unwrap();
        let r = rate_report(&t, None).unwrap();
        assert!(r.superlinear && !r.from_residuals, "{r:?}");
        assert!(r.t_hat < 0.05);
        // Residual ratios stand in without a known solution.
        let mut t2 = t.clone();
        t2.errors = None;
        let r2 = rate_report(&t2, None).unwrap();
        assert!(r2.from_residuals && r2.superlinear);
    }

    #[test]
    fn too_few_iterates() {
        let (p, h) = abs_problem();
        let t = run_newton(&p, &h, &InexactnessModel::Zero, &scalar(0.3), &NewtonOptions::default()).unwrap();
        assert!(matches!(rate_report(&t, None), Err(Error::TooFewIterates(2))));
    }

    #[test]
    fn radius_of_square_minus_one() {
        // From 1 − r the first step lands at ((1−r)² + 1)/(2(1−r)); runs
        // converge for every r < 1, diverging only as x0 → 0.
        let (p, h) = square_minus_one();
        let opts = NewtonOptions::default();
        let search = RadiusSearch { r_max: 2.0, directions: 2, bisections: 10, seed: 1 };
        let rad = detect_convergence_radius(&p, &h, &InexactnessModel::Zero, &opts, &search).unwrap();
        assert!(rad.radius > 0.5 && rad.radius <= 1.0, "{rad:?}");
    }
}
