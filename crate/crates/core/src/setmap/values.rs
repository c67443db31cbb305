//! Value-set descriptors returned by `SetMap::values`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::polyhedron::{LpOutcome, Polyhedron};
use crate::rng::uniform_in_ball;
use crate::space::{NormKind, Vector};

/// A subset of ℝᵐ supporting distance, membership and sampling queries.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueSet {
    /// A finite set; empty means F(x) = ∅.
    Finite(Vec<Vector>),
    /// A product of closed intervals, bounds possibly infinite.
    Boxed { lo: Vector, hi: Vector },
    Poly(Polyhedron),
    Union(Vec<ValueSet>),
}

impl ValueSet {
    pub fn empty() -> Self {
        ValueSet::Finite(Vec::new())
    }

    pub fn singleton(v: Vector) -> Self {
        ValueSet::Finite(vec![v])
    }

    pub fn is_trivially_empty(&self) -> bool {
        match self {
            ValueSet::Finite(v) => v.is_empty(),
            ValueSet::Union(parts) => parts.iter().all(|p| p.is_trivially_empty()),
            _ => false,
        }
    }

    /// Distance from `y` (∞ for the empty set).
    pub fn dist(&self, y: &Vector, norm: NormKind) -> Result<f64> {
        match self {
            ValueSet::Finite(pts) => Ok(pts.iter().map(|p| norm.dist(p, y)).fold(f64::INFINITY, f64::min)),
            ValueSet::Boxed { lo, hi } => {
                let excess = Vector::from_fn(y.len(), |i, _| (lo[i] - y[i]).max(y[i] - hi[i]).max(0.0));
                Ok(norm.norm(&excess))
            }
            ValueSet::Poly(p) => p.dist(y, norm),
            ValueSet::Union(parts) => {
                let mut best = f64::INFINITY;
                for p in parts {
                    best = best.min(p.dist(y, norm)?);
                }
                Ok(best)
            }
        }
    }

    /// A nearest point of the set to `y`, if the set is nonempty.
    pub fn nearest(&self, y: &Vector, norm: NormKind) -> Result<Option<Vector>> {
        match self {
            ValueSet::Finite(pts) => Ok(pts
                .iter()
                .min_by(|a, b| norm.dist(a, y).total_cmp(&norm.dist(b, y)))
                .cloned()),
            ValueSet::Boxed { lo, hi } => Ok(Some(Vector::from_fn(y.len(), |i, _| y[i].clamp(lo[i], hi[i])))),
            ValueSet::Poly(p) => match norm {
                NormKind::Euclidean => p.project(y),
                NormKind::Max => {
                    // Nearest in the max norm: shrink the cube until it meets the set.
                    let d = p.dist(y, norm)?;
                    if !d.is_finite() {
                        return Ok(None);
                    }
                    let dim = y.len();
                    let mut a = p.a.clone().resize_vertically(p.rows() + 2 * dim, 0.0);
                    let mut b = p.b.clone().resize_vertically(p.rows() + 2 * dim, 0.0);
                    for j in 0..dim {
                        let r = p.rows() + 2 * j;
                        a[(r, j)] = 1.0;
                        b[r] = y[j] + d + 1e-12;
                        a[(r + 1, j)] = -1.0;
                        b[r + 1] = -y[j] + d + 1e-12;
                    }
                    Polyhedron::new(a, b)?.project(y)
                }
            },
            ValueSet::Union(parts) => {
                let mut best: Option<(f64, Vector)> = None;
                for p in parts {
                    if let Some(q) = p.nearest(y, norm)? {
                        let d = norm.dist(&q, y);
                        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                            best = Some((d, q));
                        }
                    }
                }
                Ok(best.map(|(_, q)| q))
            }
        }
    }

    pub fn contains(&self, y: &Vector, norm: NormKind, tol: f64) -> Result<bool> {
        Ok(self.dist(y, norm)? <= tol)
    }

    pub fn translate(&self, v: &Vector) -> ValueSet {
        match self {
            ValueSet::Finite(pts) => ValueSet::Finite(pts.iter().map(|p| p + v).collect()),
            ValueSet::Boxed { lo, hi } => ValueSet::Boxed { lo: lo + v, hi: hi + v },
            ValueSet::Poly(p) => ValueSet::Poly(Polyhedron { a: p.a.clone(), b: &p.b + &p.a * v }),
            ValueSet::Union(parts) => ValueSet::Union(parts.iter().map(|q| q.translate(v)).collect()),
        }
    }

    /// Minkowski sum. Supported when at least one side is finite or both are
    /// boxes.
    pub fn minkowski(&self, other: &ValueSet) -> Result<ValueSet> {
        use ValueSet::*;
        match (self, other) {
            (Finite(a), Finite(b)) => {
                let mut out = Vec::with_capacity(a.len() * b.len());
                for p in a {
                    for q in b {
                        out.push(p + q);
                    }
                }
                Ok(Finite(out))
            }
            (Finite(a), s) | (s, Finite(a)) => {
                if a.len() == 1 {
                    Ok(s.translate(&a[0]))
                } else {
                    Ok(Union(a.iter().map(|p| s.translate(p)).collect()))
                }
            }
            (Boxed { lo: l1, hi: h1 }, Boxed { lo: l2, hi: h2 }) => Ok(Boxed { lo: l1 + l2, hi: h1 + h2 }),
            (Union(parts), s) | (s, Union(parts)) => {
                Ok(Union(parts.iter().map(|p| p.minkowski(s)).collect::<Result<Vec<_>>>()?))
            }
            _ => Err(Error::Unsupported("Minkowski sum of two non-finite polyhedral value sets".into())),
        }
    }

    /// sup ⟨c, y⟩ over the set (−∞ if empty, +∞ if unbounded).
    pub fn support(&self, c: &Vector) -> Result<f64> {
        match self {
            ValueSet::Finite(pts) => Ok(pts.iter().map(|p| p.dot(c)).fold(f64::NEG_INFINITY, f64::max)),
            ValueSet::Boxed { lo, hi } => {
                let mut s = 0.0;
                for i in 0..c.len() {
                    if c[i] > 0.0 {
                        s += c[i] * hi[i];
                    } else if c[i] < 0.0 {
                        s += c[i] * lo[i];
                    }
                }
                Ok(s)
            }
            ValueSet::Poly(p) => Ok(match p.maximize(c)? {
                LpOutcome::Empty => f64::NEG_INFINITY,
                LpOutcome::Unbounded => f64::INFINITY,
                LpOutcome::Optimal { value, .. } => value,
            }),
            ValueSet::Union(parts) => {
                let mut best = f64::NEG_INFINITY;
                for p in parts {
                    best = best.max(p.support(c)?);
                }
                Ok(best)
            }
        }
    }

    /// Finitely many representative points: all points of a finite set, the
    /// vertices (bounded) or clipped corners of a box, polytope vertices.
    pub fn representatives(&self, clip: f64) -> Result<Vec<Vector>> {
        match self {
            ValueSet::Finite(pts) => Ok(pts.clone()),
            ValueSet::Boxed { lo, hi } => {
                let m = lo.len();
                let mut out = Vec::new();
                for mask in 0..(1usize << m) {
                    out.push(Vector::from_fn(m, |i, _| {
                        let v = if mask >> i & 1 == 1 { hi[i] } else { lo[i] };
                        v.clamp(-clip, clip)
                    }));
                }
                out.dedup();
                Ok(out)
            }
            ValueSet::Poly(p) => {
                let v = p.vertices()?;
                if v.len() > 16 {
                    return Err(Error::Unsupported(format!("polytope with {} vertices (limit 16)", v.len())));
                }
                Ok(v)
            }
            ValueSet::Union(parts) => {
                let mut out = Vec::new();
                for p in parts {
                    out.extend(p.representatives(clip)?);
                }
                Ok(out)
            }
        }
    }

    /// A seeded point of the set within `radius` of `center`, if one is found.
    /// Boxes put half their samples on a finite face, where openness usually
    /// fails.
    pub fn sample_near(&self, center: &Vector, radius: f64, norm: NormKind, rng: &mut impl Rng) -> Option<Vector> {
        match self {
            ValueSet::Finite(pts) => {
                let near: Vec<&Vector> = pts.iter().filter(|p| norm.dist(p, center) <= radius).collect();
                (!near.is_empty()).then(|| near[rng.gen_range(0..near.len())].clone())
            }
            ValueSet::Boxed { lo, hi } => {
                let m = lo.len();
                let wlo = Vector::from_fn(m, |i, _| lo[i].max(center[i] - radius));
                let whi = Vector::from_fn(m, |i, _| hi[i].min(center[i] + radius));
                if (0..m).any(|i| wlo[i] > whi[i]) {
                    return None;
                }
                for _ in 0..16 {
                    let mut y = Vector::from_fn(m, |i, _| {
                        if whi[i] > wlo[i] {
                            rng.gen_range(wlo[i]..=whi[i])
                        } else {
                            wlo[i]
                        }
                    });
                    if rng.gen_bool(0.5) {
                        let faces: Vec<(usize, f64)> = (0..m)
                            .flat_map(|i| [(i, lo[i]), (i, hi[i])])
                            .filter(|(i, v)| v.is_finite() && *v >= wlo[*i] && *v <= whi[*i])
                            .collect();
                        if !faces.is_empty() {
                            let (i, v) = faces[rng.gen_range(0..faces.len())];
                            y[i] = v;
                        }
                    }
                    if norm.dist(&y, center) <= radius {
                        return Some(y);
                    }
                }
                None
            }
            ValueSet::Poly(p) => {
                for _ in 0..16 {
                    let w = uniform_in_ball(center, radius, norm, rng);
                    if let Ok(Some(q)) = p.project(&w) {
                        if norm.dist(&q, center) <= radius {
                            return Some(q);
                        }
                    }
                }
                None
            }
            ValueSet::Union(parts) => {
                if parts.is_empty() {
                    return None;
                }
                let start = rng.gen_range(0..parts.len());
                (0..parts.len()).find_map(|k| parts[(start + k) % parts.len()].sample_near(center, radius, norm, rng))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SplitMix64;
    use crate::space::scalar;

    #[test]
    fn box_distance_and_support() {
        let b = ValueSet::Boxed { lo: scalar(f64::NEG_INFINITY), hi: scalar(0.0) };
        assert_eq!(b.dist(&scalar(0.5), NormKind::Euclidean).unwrap(), 0.5);
        assert_eq!(b.dist(&scalar(-3.0), NormKind::Euclidean).unwrap(), 0.0);
        assert_eq!(b.support(&scalar(1.0)).unwrap(), 0.0);
        assert_eq!(b.support(&scalar(-1.0)).unwrap(), f64::INFINITY);
    }

    #[test]
    fn minkowski_of_finite_sets_enumerates_pairs() {
        let a = ValueSet::Finite(vec![scalar(0.2), scalar(-1.0)]);
        let b = ValueSet::Finite(vec![scalar(0.0), scalar(1.0)]);
        match a.minkowski(&b).unwrap() {
            ValueSet::Finite(v) => {
                let mut got: Vec<f64> = v.iter().map(|p| p[0]).collect();
                got.sort_by(f64::total_cmp);
                assert_eq!(got, vec![-1.0, 0.0, 0.2, 1.2]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn box_samples_hit_faces() {
        let b = ValueSet::Boxed { lo: scalar(0.0), hi: scalar(f64::INFINITY) };
        let mut rng = SplitMix64::new(1);
        let pts: Vec<Vector> = (0..100).filter_map(|_| b.sample_near(&scalar(0.0), 0.1, NormKind::Euclidean, &mut rng)).collect();
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().any(|p| p[0] == 0.0));
        assert!(pts.iter().all(|p| p[0] >= 0.0 && p[0] <= 0.1));
    }
}
