//! The slope sandwich ½ S ≤ lopen ≤ S with φ(y) = ϱ(y, ȳ)/dist(x̄, F⁻¹(y)).

use serde::{Deserialize, Serialize};

use super::{shell_seed, LiminfSchedule, ModulusKind};
use crate::error::Result;
use crate::rng::shell_points;
use crate::setmap::{dist_to_preimage, SetMap};
use crate::space::{Ball, GraphPoint, Settings, Vector};

/// Relative slack of the sandwich flags.
pub const SANDWICH_TOL: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiSample {
    pub shell: usize,
    pub y: Vec<f64>,
    /// φ(y); ∞ for y ∈ F(x̄), 0 when no preimage was found.
    #[serde(with = "crate::ser::ext")]
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeProfile {
    pub samples: Vec<PhiSample>,
    #[serde(with = "crate::ser::ext_vec")]
    pub s_shells: Vec<f64>,
    #[serde(with = "crate::ser::ext_vec")]
    pub lopen_shells: Vec<f64>,
    /// Lower bound on S: the inner sup only runs over the sampled points.
    #[serde(with = "crate::ser::ext")]
    pub s_estimate: f64,
    #[serde(with = "crate::ser::ext")]
    pub lopen_estimate: f64,
    /// ½ S ≤ lopen·(1 + tol).
    pub lower_holds: bool,
    /// lopen ≤ S·(1 + tol).
    pub upper_holds: bool,
}

/// Samples φ on the lopen shells and evaluates
/// S = liminf ϱ(y, ȳ)·sup_{v ≠ y} (φ(y) − φ(v))/ϱ(y, v), with v ranging over
/// all samples and ȳ.
pub fn slope_sandwich(
    f: &SetMap,
    point: &GraphPoint,
    schedule: &LiminfSchedule,
    seed: u64,
    settings: &Settings,
) -> Result<SlopeProfile> {
    schedule.validate()?;
    f.require_on_graph(point, settings)?;
    let norm = settings.norm;
    let mut ys: Vec<(usize, Vector, bool, f64)> = Vec::new();
    for j in 0..schedule.shells {
        let (r_in, r_out) = schedule.shell(j);
        let seed_j = shell_seed(seed, ModulusKind::Lopen, j, 0);
        let region = Ball::closed(point.x.clone(), schedule.preimage_reach * r_out);
        for y in shell_points(&point.y, r_in, r_out, schedule.samples_per_shell, norm, seed_j) {
            let inside = f.dist_to_value_set(&y, &point.x, norm)? <= settings.tol_feas;
            let phi = if inside {
                f64::INFINITY
            } else {
                let d = dist_to_preimage(f, &point.x, &y, &region, settings)?;
                if d.is_infinite() {
                    0.0
                } else {
                    let q = norm.dist(&y, &point.y) / d;
                    if q > schedule.cap { f64::INFINITY } else { q }
                }
            };
            ys.push((j, y, inside, phi));
        }
    }
    let mut s_shells = vec![f64::INFINITY; schedule.shells];
    let mut lopen_shells = vec![f64::INFINITY; schedule.shells];
    for (i, (j, y, inside, phi)) in ys.iter().enumerate() {
        if *inside {
            continue;
        }
        lopen_shells[*j] = lopen_shells[*j].min(*phi);
        let ry = norm.dist(y, &point.y);
        // v = ȳ contributes φ(y) itself.
        let mut sup = *phi / 1.0;
        for (k, (_, v, _, phv)) in ys.iter().enumerate() {
            if k == i {
                continue;
            }
            let d = norm.dist(y, v);
            if d == 0.0 || phv.is_infinite() {
                continue;
            }
            sup = sup.max(ry * (phi - phv) / d);
        }
        s_shells[*j] = s_shells[*j].min(sup);
    }
    let s_estimate = *s_shells.last().expect("shells >= 3");
    let lopen_estimate = *lopen_shells.last().expect("shells >= 3");
    Ok(SlopeProfile {
        samples: ys
            .into_iter()
            .map(|(shell, y, _, phi)| PhiSample { shell, y: y.as_slice().to_vec(), phi })
            .collect(),
        lower_holds: 0.5 * s_estimate <= lopen_estimate * (1.0 + SANDWICH_TOL),
        upper_holds: lopen_estimate <= s_estimate * (1.0 + SANDWICH_TOL),
        s_shells,
        lopen_shells,
        s_estimate,
        lopen_estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setmap::Procedure;

    fn profile(f: &SetMap) -> SlopeProfile {
        let sch = LiminfSchedule { samples_per_shell: 16, ..Default::default() };
        slope_sandwich(f, &GraphPoint::scalar(0.0, 0.0), &sch, 42, &Settings::default()).unwrap()
    }

    #[test]
    fn two_branch_profile_is_flat() {
        let f = SetMap::finite(vec![Procedure::scalar("x", |x| x), Procedure::scalar("0", |_| 0.0)]).unwrap();
        let p = profile(&f);
        assert!((p.s_estimate - 1.0).abs() < 1e-4, "{}", p.s_estimate);
        assert!(p.lower_holds && p.upper_holds);
    }

    #[test]
    fn scaling_doubles_the_slope() {
        let p = profile(&SetMap::scalar_fn("2x", |x| 2.0 * x));
        assert!((p.s_estimate - 2.0).abs() < 1e-4);
        assert!((p.lopen_estimate - 2.0).abs() < 1e-4);
    }
}
