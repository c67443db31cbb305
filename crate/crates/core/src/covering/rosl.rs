//! Inner-product conditions granting covering through Kakutani's theorem.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{euclidean, CoveringReport, Provenance, TargetRecord};
use crate::certify::Violation;
use crate::error::{Error, Result};
use crate::rng::{directions, uniform_in_ball, unit_direction, SplitMix64};
use crate::setmap::{find_preimage_in, SetMap};
use crate::space::{Ball, GraphPoint, NormKind, Settings, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RoslCondition {
    /// ∃ y ∈ F(x): ⟨y − ȳ, x − x̄⟩ ≥ ℓ‖x − x̄‖².
    C1,
    /// ∃ y ∈ F(x): ⟨ȳ − y, x − x̄⟩ ≥ ℓ‖x − x̄‖².
    C2,
    /// C2 for every ȳ ∈ F(x̄).
    #[serde(rename = "ROSLw")]
    RoslWeak,
    /// ∀ y ∈ F(x) ∃ y′ ∈ F(x′): ⟨y − y′, x′ − x⟩ ≥ ℓ‖x′ − x‖² on B[x̄, 2r].
    #[serde(rename = "ROSL")]
    Rosl,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoslInput {
    pub ell: f64,
    pub r: f64,
    pub condition: RoslCondition,
    pub samples: usize,
    pub seed: u64,
    /// Radii t ∈ (0, r] for the covering conclusion; defaults to r/4, r/2, r.
    #[serde(default)]
    pub radii: Vec<f64>,
}

fn support(f: &SetMap, x: &Vector, c: &Vector) -> Result<f64> {
    match f.values(x) {
        Ok(vs) => vs.support(c),
        Err(Error::OutsideDomain { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// inf over y ∈ F(x) of ⟨y, d⟩ plus sup over y′ ∈ F(x′) of ⟨−y′, d⟩: the best
/// attainable ⟨y − y′, d⟩ against the worst y.
fn worst_case_gap(f: &SetMap, x: &Vector, xp: &Vector, d: &Vector) -> Result<f64> {
    Ok(-support(f, x, &-d)? + support(f, xp, &-d)?)
}

/// Samples the chosen condition, and if it holds on every sample, the
/// matching covering conclusion.
pub fn rosl_check(f: &SetMap, point: &GraphPoint, input: &RoslInput, settings: &Settings) -> Result<CoveringReport> {
    let (n, m) = f.dims();
    if n != m {
        return Err(Error::InvalidInput(format!("inner-product conditions need F: R^n => R^n, got n = {n}, m = {m}")));
    }
    if !(input.ell > 0.0 && input.r > 0.0 && input.samples > 0) {
        return Err(Error::InvalidInput("rosl check needs ell > 0, r > 0 and samples >= 1".into()));
    }
    let s = euclidean(settings);
    f.require_on_graph(point, &s)?;
    let (xb, yb) = (&point.x, &point.y);
    let ell = input.ell;
    let mut rng = SplitMix64::new(input.seed);
    let reach = if input.condition == RoslCondition::Rosl { 2.0 * input.r } else { input.r };
    let sample_x = |rng: &mut SplitMix64, k: usize| {
        if k.is_multiple_of(4) {
            xb + unit_direction(n, NormKind::Euclidean, rng) * reach
        } else {
            uniform_in_ball(xb, reach, NormKind::Euclidean, rng)
        }
    };
    let mut report = CoveringReport::new(match input.condition {
        RoslCondition::C1 => "rosl_c1",
        RoslCondition::C2 => "rosl_c2",
        RoslCondition::RoslWeak => "rosl_weak",
        RoslCondition::Rosl => "rosl",
    });
    report.constants.insert("ell".into(), ell);
    report.constants.insert("r".into(), input.r);
    for k in 0..input.samples {
        let x = sample_x(&mut rng, k);
        let (anchor, gap, d) = match input.condition {
            RoslCondition::C1 => {
                let d = &x - xb;
                (xb.clone(), support(f, &x, &d)? - yb.dot(&d), d)
            }
            RoslCondition::C2 => {
                let d = &x - xb;
                (xb.clone(), yb.dot(&d) + support(f, &x, &-&d)?, d)
            }
            RoslCondition::RoslWeak => {
                let d = &x - xb;
                (xb.clone(), worst_case_gap(f, xb, &x, &d)?, d)
            }
            RoslCondition::Rosl => {
                let x0 = sample_x(&mut rng, k + 1);
                let d = &x - &x0;
                let gap = worst_case_gap(f, &x0, &x, &d)?;
                (x0, gap, d)
            }
        };
        report.condition_samples += 1;
        let need = ell * d.norm_squared();
        if gap < need - settings.tol_feas {
            report.condition_violations.push(
                Violation::new("inner-product condition", need, gap, false).input("x", &x).input("anchor", &anchor),
            );
        }
    }
    report.radii = if input.radii.is_empty() {
        vec![0.25 * input.r, 0.5 * input.r, input.r]
    } else {
        input.radii.clone()
    };
    if !report.condition_violations.is_empty() {
        report.passed = false;
        return Ok(report);
    }

    // (center x, center y, radius of the x-ball, target)
    let mut jobs: Vec<(Vector, Vector, f64, Vector)> = Vec::new();
    let dirs = directions(m, 16, NormKind::Euclidean, input.seed ^ 0xB0);
    let ball_targets = |jobs: &mut Vec<_>, cx: &Vector, cy: &Vector, t: f64| {
        for e in &dirs {
            for frac in [0.5, 1.0] {
                jobs.push((cx.clone(), cy.clone(), t, cy + e * (ell * t * frac)));
            }
        }
    };
    match input.condition {
        RoslCondition::C1 | RoslCondition::C2 => {
            for &t in &report.radii {
                ball_targets(&mut jobs, xb, yb, t);
            }
        }
        RoslCondition::RoslWeak => {
            // y with dist(y, F(x̄)) ≤ rℓ has a preimage within dist/ℓ of x̄.
            let values = f.values(xb)?;
            for _ in 0..input.samples {
                let y = uniform_in_ball(yb, input.r * ell, NormKind::Euclidean, &mut rng);
                let d = values.dist(&y, NormKind::Euclidean)?;
                if d <= input.r * ell {
                    jobs.push((xb.clone(), yb.clone(), d / ell, y));
                }
            }
        }
        RoslCondition::Rosl => {
            let mut centers = vec![point.clone()];
            centers.extend(f.graph_sample(point, input.r, 4, input.seed ^ 0xB1, &s)?);
            for c in centers.iter().filter(|c| (&c.x - xb).norm() <= input.r && (&c.y - yb).norm() <= input.r) {
                for &t in &report.radii {
                    ball_targets(&mut jobs, &c.x, &c.y, t);
                }
            }
        }
    }
    let records = jobs
        .par_iter()
        .enumerate()
        .map(|(index, (cx, _, t, y))| -> Result<TargetRecord> {
            let ball = Ball::closed(cx.clone(), t * (1.0 + 1e-9) + 1e-12);
            let found = find_preimage_in(f, y, &ball, &s)?;
            let provenance = if f.preimage_set(y)?.is_some() {
                Provenance::Analytic
            } else {
                Provenance::Grid { resolution: s.grid_resolution }
            };
            Ok(TargetRecord {
                index,
                t: *t,
                y: y.as_slice().to_vec(),
                residual: found.as_ref().map_or(Ok(f64::INFINITY), |x| f.residual(y, x, NormKind::Euclidean))?,
                x: found.as_ref().map(|x| x.as_slice().to_vec()),
                provenance: found.map(|_| provenance),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    report.record(records);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::band_map as band;
    use crate::space::Matrix;

    fn input(ell: f64, condition: RoslCondition) -> RoslInput {
        RoslInput { ell, r: 0.2, condition, samples: 200, seed: 9, radii: vec![0.05, 0.1, 0.2] }
    }

    #[test]
    fn linear_contraction_satisfies_c2() {
        let f = SetMap::linear(Matrix::from_element(1, 1, -2.0));
        let rep = rosl_check(&f, &GraphPoint::scalar(0.0, 0.0), &input(2.0, RoslCondition::C2), &Settings::default()).unwrap();
        assert!(rep.passed, "{rep:?}");
        // Boundary targets ±2t are attained exactly at ∓t.
        for r in rep.attained.iter().filter(|r| (r.y[0].abs() - 2.0 * r.t).abs() < 1e-12) {
            assert!((r.x.as_ref().unwrap()[0].abs() - r.t).abs() < 1e-9);
        }
        let bad = rosl_check(&f, &GraphPoint::scalar(0.0, 0.0), &input(2.0, RoslCondition::C1), &Settings::default()).unwrap();
        assert!(!bad.passed && bad.attained.is_empty());
    }

    #[test]
    fn identity_and_band_satisfy_c1() {
        let s = Settings::default();
        let o = GraphPoint::scalar(0.0, 0.0);
        assert!(rosl_check(&SetMap::identity(1), &o, &input(1.0, RoslCondition::C1), &s).unwrap().passed);
        assert!(rosl_check(&band(-1.0, 0.1), &o, &input(1.0, RoslCondition::C1), &s).unwrap().passed);
    }

    #[test]
    fn band_around_contraction() {
        let s = Settings::default();
        let o = GraphPoint::scalar(0.0, 0.0);
        let f = band(2.0, 0.1);
        for cond in [RoslCondition::C2, RoslCondition::RoslWeak, RoslCondition::Rosl] {
            let rep = rosl_check(&f, &o, &input(2.0, cond), &s).unwrap();
            assert!(rep.passed, "{cond:?}: {:?} {:?}", rep.condition_violations.first(), rep.unattained.first());
        }
        // 2x² + 0.1|x| ≥ 3.5x² fails once |x| > 1/15.
        assert!(!rosl_check(&f, &o, &input(3.5, RoslCondition::C2), &s).unwrap().passed);
    }
}
