//! Sampled estimates of the regularity moduli, plus closed forms for linear
//! operators, convex processes, star-shaped graphs, the slope sandwich and
//! the Fréchet coderivative bound.

mod coderivative;
mod linear;
mod slope;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use coderivative::{frechet_coderivative_bound, CoderivativeBound};
pub use linear::{convex_process_sur, linear_moduli, starshape_bound, LinearModuli, StarShapeOutcome};
pub use slope::{slope_sandwich, SlopeProfile};

use crate::error::{Error, Result};
use crate::rng::{directions, shell_points, SplitMix64};
use crate::setmap::{covering_rate, dist_to_preimage, SetMap, ValueSet};
use crate::space::{Ball, GraphPoint, Settings, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModulusKind {
    Sur,
    Reg,
    Lip,
    Lopen,
    Semireg,
    Subreg,
    Psopen,
    Calm,
    Displacement,
}

impl ModulusKind {
    pub const ALL: [ModulusKind; 9] = [
        ModulusKind::Sur,
        ModulusKind::Reg,
        ModulusKind::Lip,
        ModulusKind::Lopen,
        ModulusKind::Semireg,
        ModulusKind::Subreg,
        ModulusKind::Psopen,
        ModulusKind::Calm,
        ModulusKind::Displacement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModulusKind::Sur => "sur",
            ModulusKind::Reg => "reg",
            ModulusKind::Lip => "lip",
            ModulusKind::Lopen => "lopen",
            ModulusKind::Semireg => "semireg",
            ModulusKind::Subreg => "subreg",
            ModulusKind::Psopen => "psopen",
            ModulusKind::Calm => "calm",
            ModulusKind::Displacement => "displacement",
        }
    }

    /// Rates are infima over shells; the constants (reg, lip, ...) suprema.
    pub fn is_rate(self) -> bool {
        matches!(self, ModulusKind::Sur | ModulusKind::Lopen | ModulusKind::Psopen | ModulusKind::Displacement)
    }

    /// The partner in the reciprocal pairs (sur, reg), (lopen, semireg),
    /// (psopen, subreg).
    pub fn reciprocal(self) -> Option<ModulusKind> {
        match self {
            ModulusKind::Sur => Some(ModulusKind::Reg),
            ModulusKind::Reg => Some(ModulusKind::Sur),
            ModulusKind::Lopen => Some(ModulusKind::Semireg),
            ModulusKind::Semireg => Some(ModulusKind::Lopen),
            ModulusKind::Psopen => Some(ModulusKind::Subreg),
            ModulusKind::Subreg => Some(ModulusKind::Psopen),
            _ => None,
        }
    }
}

impl std::str::FromStr for ModulusKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModulusKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown modulus kind `{s}`")))
    }
}

/// Geometric shells r_j = r0·rhoʲ used as a finite surrogate for lim inf/sup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LiminfSchedule {
    pub r0: f64,
    pub rho: f64,
    pub shells: usize,
    pub samples_per_shell: usize,
    /// Quotients above the cap are reported as ∞.
    #[serde(with = "crate::ser::ext")]
    pub cap: f64,
    /// Preimage searches look this many shell radii around the base point.
    pub preimage_reach: f64,
}

impl Default for LiminfSchedule {
    fn default() -> Self {
        LiminfSchedule { r0: 0.1, rho: 0.5, shells: 8, samples_per_shell: 64, cap: 1e6, preimage_reach: 10.0 }
    }
}

impl LiminfSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.rho > 0.0 && self.rho < 1.0) {
            return Err(Error::InvalidInput("schedule needs r0 > 0 and 0 < rho < 1".into()));
        }
        if self.shells < 3 || self.samples_per_shell == 0 {
            return Err(Error::InvalidInput("schedule needs at least 3 shells and 1 sample per shell".into()));
        }
        if !(self.cap > 1.0 && self.preimage_reach >= 1.0) {
            return Err(Error::InvalidInput("schedule needs cap > 1 and preimage_reach >= 1".into()));
        }
        Ok(())
    }

    /// Outer radius of shell j.
    pub fn radius(&self, j: usize) -> f64 {
        self.r0 * self.rho.powi(j as i32)
    }

    /// (inner, outer] radii of shell j.
    pub fn shell(&self, j: usize) -> (f64, f64) {
        (self.radius(j + 1), self.radius(j))
    }

    pub fn with_r0(self, r0: f64) -> Self {
        LiminfSchedule { r0, ..self }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    pub kind: ModulusKind,
    pub point: GraphPoint,
    #[serde(with = "crate::ser::ext")]
    pub value: f64,
    #[serde(with = "crate::ser::ext_pair")]
    pub bracket: (f64, f64),
    /// Per-shell statistic (infimum for rates, supremum otherwise).
    #[serde(with = "crate::ser::ext_vec")]
    pub shell_infima: Vec<f64>,
    pub schedule: LiminfSchedule,
    pub seed: u64,
    pub norm: crate::space::NormKind,
}

/// 1/v under the convention 1/0 = ∞ and 1/∞ = 0.
pub fn recip(v: f64) -> f64 {
    if v == 0.0 {
        f64::INFINITY
    } else if v.is_infinite() {
        0.0
    } else {
        1.0 / v
    }
}

/// Product under the convention 0·∞ = ∞·0 = 1.
pub fn convention_product(a: f64, b: f64) -> f64 {
    if (a == 0.0 && b.is_infinite()) || (a.is_infinite() && b == 0.0) {
        1.0
    } else {
        a * b
    }
}

pub(crate) fn shell_seed(seed: u64, kind: ModulusKind, j: usize, salt: u64) -> u64 {
    SplitMix64::derive(seed, (kind as u64) << 40 | (j as u64) << 8 | salt).next_u64()
}

fn capped(v: f64, cap: f64) -> f64 {
    if v > cap {
        f64::INFINITY
    } else {
        v
    }
}

/// Quotient a/b with a/0 = ∞ (a > 0), 0/0 = 0 and a/∞ = 0.
fn ratio(a: f64, b: f64) -> f64 {
    if b.is_infinite() {
        if a.is_infinite() {
            f64::INFINITY
        } else {
            0.0
        }
    } else if b == 0.0 {
        if a == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        a / b
    }
}

fn summarize(
    kind: ModulusKind,
    point: &GraphPoint,
    stats: Vec<f64>,
    schedule: &LiminfSchedule,
    seed: u64,
    settings: &Settings,
) -> ModulusEstimate {
    let value = *stats.last().expect("at least three shells");
    let tail = &stats[stats.len().saturating_sub(3)..];
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ModulusEstimate {
        kind,
        point: point.clone(),
        value,
        bracket: (lo, hi),
        shell_infima: stats,
        schedule: *schedule,
        seed,
        norm: settings.norm,
    }
}

/// Estimates a modulus of `f` at `point` by sampling its defining quotient
/// on geometric shells. Reciprocal pairs are computed from the same samples.
pub fn estimate_modulus(
    kind: ModulusKind,
    f: &SetMap,
    point: &GraphPoint,
    schedule: &LiminfSchedule,
    seed: u64,
    settings: &Settings,
) -> Result<ModulusEstimate> {
    schedule.validate()?;
    f.require_on_graph(point, settings)?;
    let stats = (0..schedule.shells)
        .into_par_iter()
        .map(|j| shell_statistic(kind, f, point, schedule, j, seed, settings))
        .collect::<Result<Vec<f64>>>()?;
    Ok(summarize(kind, point, stats, schedule, seed, settings))
}

fn shell_statistic(
    kind: ModulusKind,
    f: &SetMap,
    p: &GraphPoint,
    sch: &LiminfSchedule,
    j: usize,
    seed: u64,
    settings: &Settings,
) -> Result<f64> {
    let (r_in, r_out) = sch.shell(j);
    let norm = settings.norm;
    let n_samp = sch.samples_per_shell;
    let cap = sch.cap;
    match kind {
        ModulusKind::Lopen | ModulusKind::Semireg => {
            // Sampled liminf of ϱ(y, ȳ)/dist(x̄, F⁻¹(y)) over y ∉ F(x̄).
            let seed_kind = ModulusKind::Lopen;
            let ys = shell_points(&p.y, r_in, r_out, n_samp, norm, shell_seed(seed, seed_kind, j, 0));
            let region = Ball::closed(p.x.clone(), sch.preimage_reach * r_out);
            let mut best = f64::INFINITY;
            for y in &ys {
                if f.dist_to_value_set(y, &p.x, norm)? <= settings.tol_feas {
                    continue;
                }
                let d = dist_to_preimage(f, &p.x, y, &region, settings)?;
                best = best.min(ratio(norm.dist(y, &p.y), d));
            }
            let lopen = capped(best, cap);
            Ok(if kind == ModulusKind::Lopen { lopen } else { recip(lopen) })
        }
        ModulusKind::Psopen | ModulusKind::Subreg => {
            let seed_kind = ModulusKind::Psopen;
            let xs = shell_points(&p.x, r_in, r_out, n_samp, norm, shell_seed(seed, seed_kind, j, 0));
            let mut best = f64::INFINITY;
            for x in &xs {
                let num = f.residual(&p.y, x, norm)?;
                if num <= settings.tol_feas {
                    continue;
                }
                let region = Ball::closed(x.clone(), 2.0 * r_out);
                let den = dist_to_preimage(f, x, &p.y, &region, settings)?.min(norm.dist(x, &p.x));
                best = best.min(ratio(num, den));
            }
            let psopen = capped(best, cap);
            Ok(if kind == ModulusKind::Psopen { psopen } else { recip(psopen) })
        }
        ModulusKind::Displacement => {
            let xs = shell_points(&p.x, r_in, r_out, n_samp, norm, shell_seed(seed, kind, j, 0));
            let mut best = f64::INFINITY;
            for x in &xs {
                best = best.min(ratio(f.residual(&p.y, x, norm)?, norm.dist(x, &p.x)));
            }
            Ok(capped(best, cap))
        }
        ModulusKind::Calm => {
            let xs = shell_points(&p.x, r_in, r_out, n_samp, norm, shell_seed(seed, kind, j, 0));
            let base = f.values(&p.x)?;
            let reach = sch.preimage_reach * r_out;
            let mut rng = SplitMix64::new(shell_seed(seed, kind, j, 1));
            let mut worst: f64 = 0.0;
            for x in &xs {
                let vals = match f.values(x) {
                    Ok(v) => v,
                    Err(Error::OutsideDomain { .. }) | Err(Error::NonFinite(_)) => continue,
                    Err(e) => return Err(e),
                };
                for y in nearby_values(&vals, &p.y, reach, norm, &mut rng) {
                    worst = worst.max(ratio(base.dist(&y, norm)?, norm.dist(x, &p.x)));
                }
            }
            Ok(capped(worst, cap))
        }
        ModulusKind::Lip => {
            let pts = f.graph_sample(p, r_out, n_samp, shell_seed(seed, kind, j, 0), settings)?;
            let mut worst: f64 = 0.0;
            for (i, q) in pts.iter().enumerate() {
                let xs = shell_points(&q.x, r_in, r_out, 1, norm, shell_seed(seed, kind, j, 2 + i as u64));
                let x = &xs[0];
                worst = worst.max(ratio(f.residual(&q.y, x, norm)?, norm.dist(x, &q.x)));
            }
            Ok(capped(worst, cap))
        }
        ModulusKind::Sur | ModulusKind::Reg => {
            // Both quotients bound the same modulus; pooling keeps sur·reg = 1.
            let cover = covering_statistic(f, p, sch, j, seed, settings)?;
            let sur = if cover == 0.0 { 0.0 } else { cover.min(recip(reg_statistic(f, p, sch, j, seed, settings)?)) };
            Ok(if kind == ModulusKind::Sur { sur } else { recip(sur) })
        }
    }
}

/// Sampled sup of dist(x, F⁻¹(y))/dist(y, F(x)) on shell `j`.
fn reg_statistic(f: &SetMap, p: &GraphPoint, sch: &LiminfSchedule, j: usize, seed: u64, settings: &Settings) -> Result<f64> {
    let kind = ModulusKind::Reg;
    let (r_in, r_out) = sch.shell(j);
    let (norm, n_samp, cap) = (settings.norm, sch.samples_per_shell, sch.cap);
    let xs = shell_points(&p.x, r_in, r_out, n_samp, norm, shell_seed(seed, kind, j, 0));
    let ys = shell_points(&p.y, r_in, r_out, n_samp, norm, shell_seed(seed, kind, j, 1));
    let mut rng = SplitMix64::new(shell_seed(seed, kind, j, 2));
    let mut worst: f64 = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        let mut targets = vec![y.clone()];
        // Targets just off the graph, where the quotient is largest.
        if let Ok(vals) = f.values(x) {
            if let Some(v) = vals.nearest(&p.y, norm)? {
                let u = crate::rng::unit_direction(v.len(), norm, &mut rng);
                targets.push(v + u * r_in);
            }
        }
        for w in targets {
            let dv = f.residual(&w, x, norm)?;
            if dv <= settings.tol_feas {
                continue;
            }
            let region = Ball::closed(x.clone(), sch.preimage_reach * r_out);
            // No preimage within reach says nothing about the quotient.
            let dx = dist_to_preimage(f, x, &w, &region, settings)?;
            if dx.is_finite() {
                worst = worst.max(ratio(dx, dv));
            }
        }
    }
    Ok(capped(worst, cap))
}

/// Largest c with B[y, c t] ⊆ F(B[x, t]) over sampled graph points and radii.
fn covering_statistic(f: &SetMap, p: &GraphPoint, sch: &LiminfSchedule, j: usize, seed: u64, settings: &Settings) -> Result<f64> {
    let kind = ModulusKind::Sur;
    let r_out = sch.shell(j).1;
    let (norm, cap) = (settings.norm, sch.cap);
    let mut pts = vec![p.clone()];
    pts.extend(f.graph_sample(p, r_out, 15, shell_seed(seed, kind, j, 0), settings)?);
    let m = f.dims().1;
    let dirs = directions(m, 32, norm, shell_seed(seed, kind, j, 1));
    let mut best = cap * 2.0;
    for q in &pts {
        for frac in [0.25, 0.5, 0.75, 1.0] {
            best = covering_rate(f, q, frac * r_out, &dirs, best, settings)?;
            if best == 0.0 {
                return Ok(0.0);
            }
        }
    }
    Ok(capped(best, cap))
}

/// Points of F(x) near ȳ: all of a finite set within `reach`, a few samples
/// otherwise.
fn nearby_values(vals: &ValueSet, center: &Vector, reach: f64, norm: crate::space::NormKind, rng: &mut SplitMix64) -> Vec<Vector> {
    match vals {
        ValueSet::Finite(pts) => pts.iter().filter(|v| norm.dist(v, center) <= reach).cloned().collect(),
        other => (0..4).filter_map(|_| other.sample_near(center, reach, norm, rng)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setmap::Procedure;

    fn two_branch() -> SetMap {
        SetMap::finite(vec![Procedure::scalar("x", |x| x), Procedure::scalar("0", |_| 0.0)]).unwrap()
    }

    fn est(kind: ModulusKind, f: &SetMap) -> ModulusEstimate {
        let s = Settings::default();
        let sch = LiminfSchedule { samples_per_shell: 16, ..Default::default() };
        estimate_modulus(kind, f, &GraphPoint::scalar(0.0, 0.0), &sch, 42, &s).unwrap()
    }

    #[test]
    fn two_branch_is_open_at_origin_but_not_around() {
        let f = two_branch();
        let lopen = est(ModulusKind::Lopen, &f);
        assert!(lopen.bracket.0 >= 0.9 && lopen.bracket.1 <= 1.1, "{:?}", lopen.bracket);
        assert!(est(ModulusKind::Sur, &f).value <= 0.1);
    }

    #[test]
    fn identity_and_scaling() {
        let id = SetMap::scalar_fn("x", |x| x);
        assert!((est(ModulusKind::Lopen, &id).value - 1.0).abs() < 1e-4);
        let twice = SetMap::scalar_fn("2x", |x| 2.0 * x);
        assert!((est(ModulusKind::Displacement, &twice).value - 2.0).abs() < 1e-12);
        assert!((est(ModulusKind::Sur, &twice).value - 2.0).abs() < 1e-4);
        assert!((est(ModulusKind::Reg, &twice).value - 0.5).abs() < 1e-4);
        assert!((est(ModulusKind::Lip, &twice).value - 2.0).abs() < 1e-9);
        assert!((est(ModulusKind::Calm, &twice).value - 2.0).abs() < 1e-9);
    }

    #[test]
    fn reciprocal_pairs_share_samples() {
        let f = two_branch();
        let a = est(ModulusKind::Psopen, &f);
        let b = est(ModulusKind::Subreg, &f);
        for (p, q) in a.shell_infima.iter().zip(&b.shell_infima) {
            assert_eq!(convention_product(*p, *q), 1.0);
        }
    }

    #[test]
    fn off_graph_point_is_rejected() {
        let s = Settings::default();
        let r = estimate_modulus(
            ModulusKind::Lopen,
            &two_branch(),
            &GraphPoint::scalar(0.0, 1.0),
            &LiminfSchedule::default(),
            1,
            &s,
        );
        assert!(matches!(r, Err(Error::NotOnGraph { .. })));
    }

    #[test]
    fn schedule_validation() {
        assert!(LiminfSchedule { shells: 2, ..Default::default() }.validate().is_err());
        assert!(LiminfSchedule { rho: 1.0, ..Default::default() }.validate().is_err());
        assert!(LiminfSchedule::default().validate().is_ok());
    }
}
