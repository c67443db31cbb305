//! Images of balls and covering rates sup{c : B[y, ct] ⊆ F(B[x, t])}.

use std::sync::Arc;

use crate::error::Result;
use crate::space::{Ball, GraphPoint, Settings, Vector};

use super::{find_preimage_in, Domain, Procedure, SetMap};

/// Geometric scan range and ratio for the sampled covering rate.
const SCAN_START: f64 = 1e-6;
const SCAN_RATIO: f64 = 2.0;
const BISECTIONS: usize = 24;

type ScalarFn = Arc<dyn Fn(f64) -> Option<f64> + Send + Sync>;

/// One continuous branch of a scalar map: a point value or an upward ray.
#[derive(Clone)]
struct Branch {
    f: ScalarFn,
    ray: bool,
}

fn scalar_branch(p: &Procedure, domain: &Option<Domain>) -> ScalarFn {
    let p = p.clone();
    let dom = domain.clone();
    Arc::new(move |x: f64| {
        if let Some(d) = &dom {
            if x < d.lo[0] || x > d.hi[0] {
                return None;
            }
        }
        p.eval(&Vector::from_element(1, x)).ok().map(|v| v[0])
    })
}

/// Decomposes a scalar map into continuous branches when its representation
/// allows it.
fn branches(f: &SetMap) -> Option<Vec<Branch>> {
    if f.dims() != (1, 1) {
        return None;
    }
    match f {
        SetMap::SingleValued { f, domain } => Some(vec![Branch { f: scalar_branch(f, domain), ray: false }]),
        SetMap::FiniteValued { branches, domain } => {
            Some(branches.iter().map(|b| Branch { f: scalar_branch(b, domain), ray: false }).collect())
        }
        SetMap::Epigraph { f, domain } => Some(vec![Branch { f: scalar_branch(f, domain), ray: true }]),
        SetMap::LinearOp { a } => {
            let a = a[(0, 0)];
            Some(vec![Branch { f: Arc::new(move |x| Some(a * x)), ray: false }])
        }
        SetMap::Sum(g, h) => {
            let (bg, bh) = (branches(g)?, branches(h)?);
            let mut out = Vec::with_capacity(bg.len() * bh.len());
            for p in &bg {
                for q in &bh {
                    let (pf, qf) = (p.f.clone(), q.f.clone());
                    out.push(Branch { f: Arc::new(move |x| Some(pf(x)? + qf(x)?)), ray: p.ray || q.ray });
                }
            }
            Some(out)
        }
        _ => None,
    }
}

/// Minimizes `g` over the grid on [a, b], then refines around the best node.
fn grid_min(g: &dyn Fn(f64) -> Option<f64>, a: f64, b: f64, res: usize, steps: usize) -> Option<f64> {
    let h = (b - a) / (res - 1) as f64;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..res {
        let x = if i + 1 == res { b } else { a + i as f64 * h };
        if let Some(v) = g(x) {
            if best.is_none_or(|(bv, _)| v < bv) {
                best = Some((v, x));
            }
        }
    }
    let (mut val, mut x) = best?;
    let mut step = h;
    for _ in 0..steps {
        loop {
            let mut moved = false;
            for s in [step, -step] {
                let z = (x + s).clamp(a, b);
                if let Some(v) = g(z) {
                    if v < val {
                        val = v;
                        x = z;
                        moved = true;
                    }
                }
            }
            if !moved {
                break;
            }
        }
        step *= 0.5;
    }
    Some(val)
}

/// F([c − t, c + t]) as a sorted union of closed intervals, for scalar maps
/// with continuous branches. `None` when the representation has no branch
/// decomposition.
pub fn image_intervals_1d(f: &SetMap, c: f64, t: f64, settings: &Settings) -> Option<Vec<(f64, f64)>> {
    let bs = branches(f)?;
    let res = settings.grid_resolution.max(3);
    let steps = settings.refine_steps + 10;
    let (a, b) = (c - t, c + t);
    let mut ivs: Vec<(f64, f64)> = Vec::new();
    for br in &bs {
        let g = br.f.clone();
        let Some(lo) = grid_min(&*g, a, b, res, steps) else { continue };
        let hi = if br.ray {
            f64::INFINITY
        } else {
            let neg = move |x: f64| g(x).map(|v| -v);
            -grid_min(&neg, a, b, res, steps)?
        };
        ivs.push((lo, hi));
    }
    ivs.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in ivs {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    Some(merged)
}

/// Estimated sup{c ≥ 0 : B[y, ct] ⊆ F(B[x, t])} along the unit `directions`,
/// truncated at `upto`. Scalar maps with continuous branches use the exact
/// image of the ball; other maps scan c geometrically and bisect the first
/// unattainable target against the preimage oracle.
pub fn covering_rate(
    f: &SetMap,
    p: &GraphPoint,
    t: f64,
    directions: &[Vector],
    upto: f64,
    settings: &Settings,
) -> Result<f64> {
    if let Some(ivs) = image_intervals_1d(f, p.x[0], t, settings) {
        let y = p.y[0];
        let tol = settings.tol_feas;
        let rate = ivs
            .iter()
            .find(|(lo, hi)| *lo <= y + tol && y <= *hi + tol)
            .map_or(0.0, |(lo, hi)| ((y - lo).min(hi - y)).max(0.0) / t);
        return Ok(rate.min(upto));
    }
    let ball = Ball::closed(p.x.clone(), t);
    let attainable = |c: f64, e: &Vector| -> Result<bool> {
        let w = &p.y + e * (c * t);
        Ok(find_preimage_in(f, &w, &ball, settings)?.is_some())
    };
    let mut best = upto;
    for e in directions {
        let mut prev = 0.0;
        let mut c = SCAN_START;
        let mut failed_at = None;
        while c < best {
            if !attainable(c, e)? {
                failed_at = Some(c);
                break;
            }
            prev = c;
            c *= SCAN_RATIO;
        }
        if failed_at.is_none() && !attainable(best, e)? {
            failed_at = Some(best);
        }
        let Some(mut hi) = failed_at else { continue };
        let mut lo = prev;
        for _ in 0..BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if attainable(mid, e)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        best = best.min(lo);
        if best == 0.0 {
            break;
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::directions;
    use crate::space::{Matrix, NormKind};

    #[test]
    fn two_branch_image_is_interval_union() {
        let f = SetMap::finite(vec![Procedure::scalar("x", |x| x), Procedure::scalar("0", |_| 0.0)]).unwrap();
        let ivs = image_intervals_1d(&f, 0.5, 0.1, &Settings::default()).unwrap();
        assert_eq!(ivs.len(), 2);
        assert_eq!(ivs[0], (0.0, 0.0));
        assert!((ivs[1].0 - 0.4).abs() < 1e-12 && (ivs[1].1 - 0.6).abs() < 1e-12);
    }

    #[test]
    fn linear_rates() {
        let s = Settings::default();
        let f = SetMap::scalar_fn("2x", |x| 2.0 * x);
        let r = covering_rate(&f, &GraphPoint::scalar(0.0, 0.0), 0.1, &directions(1, 2, NormKind::Euclidean, 1), 1e6, &s);
        assert!((r.unwrap() - 2.0).abs() < 1e-9);
        let a = SetMap::linear(Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]));
        let p = GraphPoint::new(Vector::zeros(2), Vector::zeros(2));
        let r = covering_rate(&a, &p, 0.1, &directions(2, 32, NormKind::Euclidean, 1), 1e6, &s).unwrap();
        assert!((r - 0.5).abs() < 5e-3, "{r}");
    }

    #[test]
    fn rate_is_truncated() {
        let s = Settings::default();
        let f = SetMap::scalar_fn("2x", |x| 2.0 * x);
        let r = covering_rate(&f, &GraphPoint::scalar(0.0, 0.0), 0.1, &[Vector::from_element(1, 1.0)], 0.7, &s);
        assert_eq!(r.unwrap(), 0.7);
    }
}
