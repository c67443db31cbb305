//! Perturbation and sum estimates checked against sampled moduli.

use serde::{Deserialize, Serialize};

use super::{CertificateReport, CertifyOptions, ConclusionCheck, Violation};
use crate::error::{Error, Result};
use crate::linalg;
use crate::moduli::{estimate_modulus, linear_moduli, LiminfSchedule, ModulusKind};
use crate::rng::{uniform_in_ball, SplitMix64};
use crate::setmap::{find_preimage_in, SetMap};
use crate::space::{Ball, GraphPoint, Matrix, Settings, Vector};

/// Smallest positive singular value: psopen of a linear operator at the origin.
fn linear_psopen(a: &Matrix) -> f64 {
    let rank = linalg::rank(a);
    if rank == 0 {
        return f64::INFINITY;
    }
    linalg::singular_values(a)[rank - 1]
}

struct Estimator<'a> {
    schedule: &'a LiminfSchedule,
    seed: u64,
    settings: &'a Settings,
}

impl Estimator<'_> {
    fn get(&self, kind: ModulusKind, f: &SetMap, p: &GraphPoint) -> Result<f64> {
        Ok(estimate_modulus(kind, f, p, self.schedule, self.seed, self.settings)?.value)
    }
}

/// Records `bound ≤ estimate` (up to slack) as a violation if it fails.
fn require_at_least(report: &mut CertificateReport, label: &str, estimate: f64, bound: f64, opts: &CertifyOptions) {
    let lhs = bound - opts.slack(bound);
    if !(lhs <= estimate) {
        report.violations.push(Violation::new(label, lhs, estimate, false));
    }
}

fn single_point(f: &SetMap, x: &Vector) -> Result<GraphPoint> {
    Ok(GraphPoint::new(x.clone(), f.eval(x)?))
}

/// Checks sur f(x0) ≥ sur A − lip(f − A)(x0) and
/// psopen f(x0) ≥ psopen A − calm(f − A)(x0) on sampled moduli.
pub fn verify_linear_perturbation(
    f: &SetMap,
    a: &Matrix,
    x0: &Vector,
    schedule: &LiminfSchedule,
    opts: &CertifyOptions,
    settings: &Settings,
) -> Result<CertificateReport> {
    let diff = f.minus_linear(a)?;
    let est = Estimator { schedule, seed: opts.seed, settings };
    let pd = single_point(&diff, x0)?;
    let pf = single_point(f, x0)?;
    let lip = est.get(ModulusKind::Lip, &diff, &pd)?;
    let calm = est.get(ModulusKind::Calm, &diff, &pd)?;
    let sur_a = linear_moduli(a).sur;
    let psopen_a = linear_psopen(a);
    let sur_f = est.get(ModulusKind::Sur, f, &pf)?;
    let psopen_f = est.get(ModulusKind::Psopen, f, &pf)?;

    let mut report = CertificateReport::new("linear_perturbation", opts.seed);
    for (k, v) in [
        ("lip_f_minus_a", lip),
        ("calm_f_minus_a", calm),
        ("sur_a", sur_a),
        ("psopen_a", psopen_a),
        ("sur_f", sur_f),
        ("psopen_f", psopen_f),
    ] {
        report.estimates.insert(k.into(), v);
    }
    report.premise_samples = schedule.shells * schedule.samples_per_shell;
    require_at_least(&mut report, "sur f >= sur A - lip(f - A)", sur_f, sur_a - lip, opts);
    require_at_least(&mut report, "psopen f >= psopen A - calm(f - A)", psopen_f, psopen_a - calm, opts);
    Ok(report.finish())
}

/// Checks sur(g + F)(x̄, g(x̄) + ȳ) ≥ sur F(x̄, ȳ) − lip g(x̄).
pub fn verify_setvalued_perturbation(
    big_f: &SetMap,
    g: &SetMap,
    point: &GraphPoint,
    schedule: &LiminfSchedule,
    opts: &CertifyOptions,
    settings: &Settings,
) -> Result<CertificateReport> {
    if !g.is_single_valued() {
        return Err(Error::InvalidInput(format!("perturbation g must be single-valued, got {}", g.describe())));
    }
    let est = Estimator { schedule, seed: opts.seed, settings };
    let pg = single_point(g, &point.x)?;
    let sum = SetMap::sum(g.clone(), big_f.clone())?;
    let ps = GraphPoint::new(point.x.clone(), &pg.y + &point.y);
    let sur_f = est.get(ModulusKind::Sur, big_f, point)?;
    let lip_g = est.get(ModulusKind::Lip, g, &pg)?;
    let sur_sum = est.get(ModulusKind::Sur, &sum, &ps)?;

    let mut report = CertificateReport::new("setvalued_perturbation", opts.seed);
    report.estimates.insert("sur_f".into(), sur_f);
    report.estimates.insert("lip_g".into(), lip_g);
    report.estimates.insert("sur_g_plus_f".into(), sur_sum);
    report.premise_samples = schedule.shells * schedule.samples_per_shell;
    require_at_least(&mut report, "sur(g + F) >= sur F - lip g", sur_sum, sur_f - lip_g, opts);
    Ok(report.finish())
}

/// Checks lopen(F + G)(x̄, ȳ + z̄) ≥ sur F(x̄, ȳ) − lip G(x̄, z̄) and reports
/// sur(F + G) alongside, which need not obey the same bound.
pub fn verify_sum_semiregularity(
    big_f: &SetMap,
    big_g: &SetMap,
    x: &Vector,
    y: &Vector,
    z: &Vector,
    schedule: &LiminfSchedule,
    opts: &CertifyOptions,
    settings: &Settings,
) -> Result<CertificateReport> {
    let est = Estimator { schedule, seed: opts.seed, settings };
    let pf = GraphPoint::new(x.clone(), y.clone());
    let pg = GraphPoint::new(x.clone(), z.clone());
    let sum = SetMap::sum(big_f.clone(), big_g.clone())?;
    let ps = GraphPoint::new(x.clone(), y + z);
    let sur_f = est.get(ModulusKind::Sur, big_f, &pf)?;
    let lip_g = est.get(ModulusKind::Lip, big_g, &pg)?;
    let lopen_sum = est.get(ModulusKind::Lopen, &sum, &ps)?;
    let sur_sum = est.get(ModulusKind::Sur, &sum, &ps)?;

    let mut report = CertificateReport::new("sum_semiregularity", opts.seed);
    report.estimates.insert("sur_f".into(), sur_f);
    report.estimates.insert("lip_g".into(), lip_g);
    report.estimates.insert("lopen_f_plus_g".into(), lopen_sum);
    report.estimates.insert("sur_f_plus_g".into(), sur_sum);
    report.premise_samples = schedule.shells * schedule.samples_per_shell;
    require_at_least(&mut report, "lopen(F + G) >= sur F - lip G", lopen_sum, sur_f - lip_g, opts);
    if sur_sum < (sur_f - lip_g) - opts.slack(sur_f - lip_g) {
        report.notes.push(format!(
            "sur(F + G) = {sur_sum:.4} falls below sur F - lip G = {:.4}; only openness at the point survives the sum",
            sur_f - lip_g
        ));
    }
    Ok(report.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SumDistanceInput {
    #[serde(with = "crate::ser::vector")]
    pub x: Vector,
    #[serde(with = "crate::ser::vector")]
    pub y: Vector,
    #[serde(with = "crate::ser::vector")]
    pub z: Vector,
    pub kappa: f64,
    pub ell: f64,
    pub beta: f64,
    pub samples: usize,
}

/// Checks dist(x̄, (F + G)⁻¹(y)) ≤ κ/(1 − κℓ)·dist(y, F(x̄) + z̄) for sampled
/// y ∈ B(ȳ + z̄, β), after sampling the regularity premise on F and the
/// excess premise on G over the neighbourhood of radius
/// a = 1.01·2β max{1, κ}/(1 − κℓ).
pub fn verify_sum_distance_bound(
    big_f: &SetMap,
    big_g: &SetMap,
    input: &SumDistanceInput,
    opts: &CertifyOptions,
    settings: &Settings,
) -> Result<CertificateReport> {
    let SumDistanceInput { x: xb, y: yb, z: zb, kappa, ell, beta, samples } = input;
    let (kappa, ell, beta, samples) = (*kappa, *ell, *beta, *samples);
    if !(kappa > 0.0 && ell >= 0.0 && kappa * ell < 1.0 && beta > 0.0 && samples > 0) {
        return Err(Error::InvalidInput("sum distance bound needs kappa > 0, ell >= 0, kappa*ell < 1, beta > 0".into()));
    }
    big_f.require_on_graph(&GraphPoint::new(xb.clone(), yb.clone()), settings)?;
    big_g.require_on_graph(&GraphPoint::new(xb.clone(), zb.clone()), settings)?;
    let norm = settings.norm;
    let factor = kappa / (1.0 - kappa * ell);
    let a = 1.01 * 2.0 * beta * kappa.max(1.0) / (1.0 - kappa * ell);
    let mut rng = SplitMix64::new(opts.seed);
    let mut report = CertificateReport::new("sum_distance_bound", opts.seed);
    for (k, v) in [("kappa", kappa), ("ell", ell), ("beta", beta), ("a", a), ("factor", factor)] {
        report.constants.insert(k.into(), v);
    }

    // Metric regularity of F on B(x̄, a) × B(ȳ, a).
    for _ in 0..samples {
        let x = uniform_in_ball(xb, a, norm, &mut rng);
        let y = uniform_in_ball(yb, a, norm, &mut rng);
        let bound = kappa * big_f.residual(&y, &x, norm)?;
        let reach = bound + opts.slack(bound);
        if find_preimage_in(big_f, &y, &Ball::closed(x.clone(), reach), settings)?.is_none() {
            report.violations.push(
                Violation::new("dist(x, F^-1(y)) <= kappa dist(y, F(x))", f64::INFINITY, reach, false)
                    .input("x", &x)
                    .input("y", &y),
            );
        }
    }
    // Excess of G(x) ∩ B(z̄, a) over G(x′).
    for _ in 0..samples {
        let x = uniform_in_ball(xb, a, norm, &mut rng);
        let xp = uniform_in_ball(xb, a, norm, &mut rng);
        let allowed = ell * norm.dist(&x, &xp);
        for v in big_g.values(&x)?.representatives(2.0 * a + zb.amax())? {
            if norm.dist(&v, zb) > a {
                continue;
            }
            let d = big_g.dist_to_value_set(&v, &xp, norm)?;
            if d > allowed + opts.slack(allowed) {
                report.violations.push(
                    Violation::new("G(x) within ell |x - x'| of G(x')", d, allowed + opts.slack(allowed), false)
                        .input("x", &x)
                        .input("x_prime", &xp)
                        .input("v", &v),
                );
            }
        }
    }
    if !report.violations.is_empty() {
        report.notes.push("premise violated on the sampled neighbourhood; conclusion not tested".into());
        return Ok(report.finish());
    }
    report.premise_samples = 2 * samples;

    let sum = SetMap::sum(big_f.clone(), big_g.clone())?;
    let center = yb + zb;
    let mut witnesses = Vec::new();
    for _ in 0..samples {
        let y = uniform_in_ball(&center, beta, norm, &mut rng);
        let bound = factor * big_f.dist_to_value_set(&(&y - zb), xb, norm)?;
        let reach = bound + opts.slack(bound);
        if find_preimage_in(&sum, &y, &Ball::closed(xb.clone(), reach), settings)?.is_none() {
            witnesses.push(
                Violation::new("dist(x, (F + G)^-1(y)) <= factor dist(y, F(x) + z)", f64::INFINITY, reach, false).input("y", &y),
            );
        }
    }
    report.conclusion_check =
        Some(ConclusionCheck { passed: witnesses.is_empty(), radii: vec![beta], targets_checked: samples, witnesses });
    Ok(report.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certify::Verdict;
    use crate::setmap::Procedure;
    use crate::space::scalar;

    fn quick() -> LiminfSchedule {
        LiminfSchedule { samples_per_shell: 16, shells: 6, ..Default::default() }
    }

    #[test]
    fn sine_perturbation_of_identity() {
        let f = SetMap::scalar_fn("x + 0.1 sin x", |x| x + 0.1 * x.sin());
        let one = Matrix::identity(1, 1);
        let rep = verify_linear_perturbation(&f, &one, &scalar(0.0), &quick(), &CertifyOptions::default(), &Settings::default()).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert!((rep.estimates["lip_f_minus_a"] - 0.1).abs() < 0.01);
        assert!(rep.estimates["sur_f"] >= 0.9 - 0.05);
    }

    #[test]
    fn quadratic_term_has_zero_strict_derivative() {
        let f = SetMap::scalar_fn("x + x^2", |x| x + x * x);
        let rep = verify_linear_perturbation(&f, &Matrix::identity(1, 1), &scalar(0.0), &quick(), &CertifyOptions::default(), &Settings::default()).unwrap();
        assert!(rep.passed());
        assert!(rep.estimates["lip_f_minus_a"] < 0.01);
        assert!((rep.estimates["sur_f"] - 1.0).abs() < 0.05);
    }

    #[test]
    fn epigraph_shift() {
        let s = Settings::default();
        let epi = SetMap::epigraph(Procedure::scalar("x", |x| x)).unwrap();
        let g = SetMap::scalar_fn("0.1x", |x| 0.1 * x);
        let rep = verify_setvalued_perturbation(&epi, &g, &GraphPoint::scalar(0.0, 0.0), &quick(), &CertifyOptions::default(), &s).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn linear_sum_keeps_its_rate() {
        let s = Settings::default();
        let id = SetMap::scalar_fn("x", |x| x);
        let g = SetMap::scalar_fn("0.3x", |x| 0.3 * x);
        let o = scalar(0.0);
        let rep = verify_sum_semiregularity(&id, &g, &o, &o, &o, &quick(), &CertifyOptions::default(), &s).unwrap();
        assert!(rep.passed());
        assert!((rep.estimates["lopen_f_plus_g"] - 1.3).abs() < 0.01);
    }

    #[test]
    fn sum_distance_bound_for_linear_maps() {
        let s = Settings::default();
        let f = SetMap::scalar_fn("2x", |x| 2.0 * x);
        let g = SetMap::scalar_fn("0.5x", |x| 0.5 * x);
        let input = SumDistanceInput { x: scalar(0.0), y: scalar(0.0), z: scalar(0.0), kappa: 0.5, ell: 0.5, beta: 0.1, samples: 50 };
        let rep = verify_sum_distance_bound(&f, &g, &input, &CertifyOptions::default(), &s).unwrap();
        assert_eq!(rep.verdict, Verdict::Pass, "{rep:?}");
        assert!((rep.constants["factor"] - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn sum_distance_premise_failure_skips_conclusion() {
        let s = Settings::default();
        let f = SetMap::scalar_fn("x", |x| x);
        // ℓ understates the Lipschitz constant 1 of G.
        let g = SetMap::scalar_fn("x", |x| x);
        let input = SumDistanceInput { x: scalar(0.0), y: scalar(0.0), z: scalar(0.0), kappa: 1.0, ell: 0.2, beta: 0.1, samples: 20 };
        let rep = verify_sum_distance_bound(&f, &g, &input, &CertifyOptions::default(), &s).unwrap();
        assert_eq!(rep.verdict, Verdict::Fail);
        assert!(rep.conclusion_check.is_none());
        assert!(rep.violations.iter().all(Violation::fails));
    }
}
