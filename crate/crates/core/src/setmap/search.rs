//! Preimage searches: exact for analytic representations, grid plus
//! coordinate-descent refinement for procedural maps in dimension ≤ 2.

use crate::error::{Error, Result};
use crate::space::{Ball, NormKind, Settings, Vector};

use super::SetMap;

/// Candidate local minima refined per search.
const MAX_CANDIDATES: usize = 24;
/// Candidates chosen by residual value rather than by distance.
const LOWEST_CANDIDATES: usize = 8;
/// Moves tried per step length before halving.
const MOVES_PER_LEVEL: usize = 8;

fn region_tol(region: &Ball) -> f64 {
    1e-12 * (1.0 + region.radius)
}

/// A point of F⁻¹(y) ∩ region nearest to `x0`, or `None` if the search finds
/// none. Exact for linear, normal-cone, polyhedral and inverse-view maps.
pub fn nearest_preimage(
    f: &SetMap,
    x0: &Vector,
    y: &Vector,
    region: &Ball,
    settings: &Settings,
) -> Result<Option<Vector>> {
    let (n, m) = f.dims();
    crate::space::check_dim(x0, n)?;
    crate::space::check_dim(y, m)?;
    crate::space::check_dim(&region.center, n)?;
    let norm = settings.norm;
    if let Some(set) = f.preimage_set(y)? {
        let p = set.nearest(x0, norm)?;
        return Ok(p.filter(|p| region.contains(p, norm, region_tol(region))));
    }
    if f.residual(y, x0, norm)? <= settings.tol_feas && region.contains(x0, norm, region_tol(region)) {
        return Ok(Some(x0.clone()));
    }
    if n > 2 {
        return Err(Error::Unsupported(format!(
            "preimage search for {} in dimension {n} (grid search covers n <= 2)",
            f.describe()
        )));
    }
    Search::new(f, x0, y, region, settings).run()
}

/// dist(x0, F⁻¹(y) ∩ region), ∞ when no preimage is found.
pub fn dist_to_preimage(f: &SetMap, x0: &Vector, y: &Vector, region: &Ball, settings: &Settings) -> Result<f64> {
    Ok(nearest_preimage(f, x0, y, region, settings)?.map_or(f64::INFINITY, |p| settings.norm.dist(x0, &p)))
}

/// Some preimage of `y` inside `ball`, if found.
pub fn find_preimage_in(f: &SetMap, y: &Vector, ball: &Ball, settings: &Settings) -> Result<Option<Vector>> {
    nearest_preimage(f, &ball.center, y, ball, settings)
}

struct Search<'a> {
    f: &'a SetMap,
    x0: &'a Vector,
    y: &'a Vector,
    region: &'a Ball,
    settings: &'a Settings,
    norm: NormKind,
}

impl<'a> Search<'a> {
    fn new(f: &'a SetMap, x0: &'a Vector, y: &'a Vector, region: &'a Ball, settings: &'a Settings) -> Self {
        Search { f, x0, y, region, settings, norm: settings.norm }
    }

    fn rho(&self, x: &Vector) -> Result<f64> {
        if !self.region.contains(x, self.norm, region_tol(self.region)) {
            return Ok(f64::INFINITY);
        }
        self.f.residual(self.y, x, self.norm)
    }

    fn feasible(&self, x: &Vector) -> Result<bool> {
        Ok(self.rho(x)? <= self.settings.tol_feas)
    }

    fn run(&self) -> Result<Option<Vector>> {
        let n = self.x0.len();
        let res = self.settings.grid_resolution.max(3);
        let r = self.region.radius;
        if r == 0.0 {
            let c = &self.region.center;
            return Ok(self.feasible(c)?.then(|| c.clone()));
        }
        let h = 2.0 * r / (res - 1) as f64;
        let axis: Vec<f64> = (0..res).map(|i| -r + i as f64 * h).collect();
        let total = res.pow(n as u32);
        let index_point = |k: usize| -> Vector {
            let mut p = self.region.center.clone();
            let mut k = k;
            for i in 0..n {
                p[i] += axis[k % res];
                k /= res;
            }
            p
        };
        let mut values = Vec::with_capacity(total);
        for k in 0..total {
            values.push(self.rho(&index_point(k))?);
        }

        let mut best: Option<(f64, Vector)> = None;
        let consider = |p: Vector, best: &mut Option<(f64, Vector)>| {
            let d = self.norm.dist(self.x0, &p);
            if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                *best = Some((d, p));
            }
        };

        // Feasible grid points: keep the nearest, then pull it toward x0.
        let nearest_feasible = (0..total)
            .filter(|&k| values[k] <= self.settings.tol_feas)
            .map(index_point)
            .min_by(|a, b| self.norm.dist(self.x0, a).total_cmp(&self.norm.dist(self.x0, b)));
        if let Some(p) = nearest_feasible {
            let p = self.pull(p, h)?;
            consider(p, &mut best);
        }

        // Grid local minima of the residual, nearest to x0 first.
        let mut minima: Vec<usize> = (0..total)
            .filter(|&k| values[k].is_finite() && values[k] > self.settings.tol_feas)
            .filter(|&k| {
                let mut stride = 1;
                let mut rem = k;
                let mut flat = true;
                for _ in 0..n {
                    let i = rem % res;
                    rem /= res;
                    for nb in [(i > 0).then(|| k - stride), (i + 1 < res).then(|| k + stride)].into_iter().flatten() {
                        if values[nb] < values[k] {
                            return false;
                        }
                        flat &= values[nb] == values[k];
                    }
                    stride *= res;
                }
                // Interior points of a plateau carry no descent information.
                !flat
            })
            .collect();
        minima.sort_by(|&a, &b| {
            self.norm
                .dist(self.x0, &index_point(a))
                .total_cmp(&self.norm.dist(self.x0, &index_point(b)))
        });
        // The lowest residuals are always refined, wherever they sit.
        let mut by_value = minima.clone();
        by_value.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        by_value.truncate(LOWEST_CANDIDATES);
        let near: Vec<usize> = minima.into_iter().filter(|k| !by_value.contains(k)).collect();
        let mut chosen: Vec<Vector> = Vec::new();
        for k in by_value.into_iter().chain(near) {
            if chosen.len() == MAX_CANDIDATES {
                break;
            }
            let p = index_point(k);
            if chosen.iter().any(|q| NormKind::Max.dist(q, &p) <= 2.0 * h * (1.0 + 1e-9)) {
                continue;
            }
            if let Some((bd, _)) = &best {
                if self.norm.dist(self.x0, &p) > bd + 2.0 * h {
                    continue;
                }
            }
            chosen.push(p.clone());
            let q = self.descend(p, h)?;
            if self.feasible(&q)? {
                let q = self.pull(q, h)?;
                consider(q, &mut best);
            }
        }
        Ok(best.map(|(_, p)| p))
    }

    /// Coordinate descent on the residual with halving steps.
    fn descend(&self, mut p: Vector, h: f64) -> Result<Vector> {
        let n = p.len();
        let mut val = self.rho(&p)?;
        let mut step = h;
        for _ in 0..=self.settings.refine_steps {
            for _ in 0..MOVES_PER_LEVEL {
                if val <= self.settings.tol_feas {
                    return Ok(p);
                }
                let mut moved = false;
                for i in 0..n {
                    for s in [step, -step] {
                        let mut q = p.clone();
                        q[i] += s;
                        let v = self.rho(&q)?;
                        if v < val {
                            p = q;
                            val = v;
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
        Ok(p)
    }

    /// Moves a feasible point toward x0 while staying feasible.
    fn pull(&self, mut p: Vector, h: f64) -> Result<Vector> {
        let n = p.len();
        let mut step = self.norm.dist(self.x0, &p).max(h);
        for _ in 0..=self.settings.refine_steps + 8 {
            for _ in 0..MOVES_PER_LEVEL {
                let d = self.norm.dist(self.x0, &p);
                if d == 0.0 {
                    return Ok(p);
                }
                let mut moves: Vec<Vector> = Vec::with_capacity(2 * n + 1);
                let toward = self.x0 - &p;
                moves.push(&p + toward * (step / d).min(1.0));
                for i in 0..n {
                    for s in [step, -step] {
                        let mut q = p.clone();
                        q[i] += s;
                        moves.push(q);
                    }
                }
                let mut moved = false;
                for q in moves {
                    if self.norm.dist(self.x0, &q) < d && self.feasible(&q)? {
                        p = q;
                        moved = true;
                        break;
                    }
                }
                if !moved {
                    break;
                }
            }
            step *= 0.5;
        }
        Ok(p)
    }
}
