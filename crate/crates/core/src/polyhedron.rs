//! Small exact polyhedral computations in half-space form {z : a z ≤ b}.
//!
//! Everything is done by enumerating active sets, which is exact (up to
//! floating point) and affordable in the handful of dimensions this crate
//! targets. Enumeration sizes are capped and reported as unsupported beyond.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::space::{Matrix, NormKind, Vector};

const FEAS_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-10;
const MAX_SUBSETS: u128 = 400_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Polyhedron {
    /// Constraint normals, one per row, normalized to unit length.
    pub a: Matrix,
    pub b: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Empty,
    Unbounded,
    Optimal { value: f64, point: Vector },
}

/// Generators of a polyhedral cone: a lineality basis and extreme rays of the
/// pointed part.
#[derive(Debug, Clone, Default)]
pub struct ConeGenerators {
    pub lineality: Vec<Vector>,
    pub rays: Vec<Vector>,
}

impl ConeGenerators {
    pub fn is_trivial(&self) -> bool {
        self.lineality.is_empty() && self.rays.is_empty()
    }
}

fn binom(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Visits every size-`s` subset of `0..k` in lexicographic order.
fn for_each_subset(k: usize, s: usize, mut f: impl FnMut(&[usize])) {
    if s > k {
        return;
    }
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        f(&idx);
        let mut i = s;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + k - s {
                break;
            }
            if i == 0 {
                return;
            }
        }
        if idx[i] == i + k - s {
            return;
        }
        idx[i] += 1;
        for j in i + 1..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn select_rows(a: &Matrix, rows: &[usize]) -> Matrix {
    Matrix::from_fn(rows.len(), a.ncols(), |i, j| a[(rows[i], j)])
}

/// Orthonormal basis of the null space of `m` (columns = ambient dimension).
pub fn null_space(m: &Matrix) -> Vec<Vector> {
    let d = m.ncols();
    if m.nrows() == 0 {
        return (0..d).map(|i| Vector::from_fn(d, |j, _| if i == j { 1.0 } else { 0.0 })).collect();
    }
    // Pad to a square-or-taller matrix so the SVD returns a full V.
    let rows = m.nrows().max(d);
    let padded = Matrix::from_fn(rows, d, |i, j| if i < m.nrows() { m[(i, j)] } else { 0.0 });
    let svd = SVD::new(padded, false, true);
    let vt = svd.v_t.expect("requested V^T");
    let smax = svd.singular_values.max().max(1.0);
    (0..d)
        .filter(|&i| svd.singular_values[i] <= RANK_TOL * smax)
        .map(|i| vt.row(i).transpose().into_owned())
        .collect()
}

fn full_row_rank(m: &Matrix) -> bool {
    if m.nrows() == 0 {
        return true;
    }
    if m.nrows() > m.ncols() {
        return false;
    }
    let sv = m.clone().singular_values();
    let smax = sv.max();
    smax > 0.0 && sv.min() > RANK_TOL * smax.max(1.0)
}

impl Polyhedron {
    /// Builds {z : a z ≤ b}. Rows are normalized; zero rows with b ≥ 0 are
    /// dropped, zero rows with b < 0 are kept (they make the set empty).
    pub fn new(a: Matrix, b: Vector) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        if a.iter().chain(b.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("polyhedron data".into()));
        }
        let d = a.ncols();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..a.nrows() {
            let r = a.row(i);
            let nrm = r.norm();
            if nrm <= 1e-14 {
                if b[i] < 0.0 {
                    rows.push(vec![0.0; d]);
                    rhs.push(b[i]);
                }
                continue;
            }
            rows.push(r.iter().map(|v| v / nrm).collect());
            rhs.push(b[i] / nrm);
        }
        let a = Matrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Ok(Polyhedron { a, b: Vector::from_vec(rhs) })
    }

    /// The whole space ℝᵈ.
    pub fn whole(d: usize) -> Self {
        Polyhedron { a: Matrix::zeros(0, d), b: Vector::zeros(0) }
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn contains(&self, z: &Vector, tol: f64) -> bool {
        (0..self.rows()).all(|i| self.a.row(i).dot(&z.transpose()) <= self.b[i] + tol)
    }

    /// Indices of constraints active at `z`.
    pub fn active(&self, z: &Vector, tol: f64) -> Vec<usize> {
        (0..self.rows())
            .filter(|&i| (self.a.row(i).dot(&z.transpose()) - self.b[i]).abs() <= tol)
            .collect()
    }

    /// Fixes the leading `fixed.len()` coordinates and returns the section in
    /// the remaining ones.
    pub fn section_leading(&self, fixed: &Vector) -> Result<Polyhedron> {
        let n = fixed.len();
        let d = self.dim();
        if n > d {
            return Err(Error::DimensionMismatch { expected: d, got: n });
        }
        let ax = self.a.columns(0, n);
        let ay = self.a.columns(n, d - n).into_owned();
        Polyhedron::new(ay, &self.b - ax * fixed)
    }

    /// Fixes the trailing `fixed.len()` coordinates.
    pub fn section_trailing(&self, fixed: &Vector) -> Result<Polyhedron> {
        let m = fixed.len();
        let d = self.dim();
        if m > d {
            return Err(Error::DimensionMismatch { expected: d, got: m });
        }
        let ax = self.a.columns(0, d - m).into_owned();
        let ay = self.a.columns(d - m, m);
        Polyhedron::new(ax, &self.b - ay * fixed)
    }

    fn check_budget(&self, max_size: usize) -> Result<()> {
        let total: u128 = (0..=max_size.min(self.rows())).map(|s| binom(self.rows(), s)).sum();
        if total > MAX_SUBSETS {
            return Err(Error::Unsupported(format!(
                "active-set enumeration too large ({} rows in dimension {})",
                self.rows(),
                self.dim()
            )));
        }
        Ok(())
    }

    /// Euclidean projection of `z`; `None` when the polyhedron is empty.
    ///
    /// The projection is the feasible point closest to `z` among the
    /// equality-constrained projections onto every linearly independent
    /// active set of size ≤ dim, so taking the best feasible candidate is exact.
    pub fn project(&self, z: &Vector) -> Result<Option<Vector>> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: z.len() });
        }
        if self.contains(z, FEAS_TOL) {
            return Ok(Some(z.clone()));
        }
        self.check_budget(self.dim())?;
        let mut best: Option<(f64, Vector)> = None;
        for s in 1..=self.dim().min(self.rows()) {
            for_each_subset(self.rows(), s, |idx| {
                let g = select_rows(&self.a, idx);
                if !full_row_rank(&g) {
                    return;
                }
                let h = Vector::from_fn(idx.len(), |i, _| self.b[idx[i]]);
                let gram = &g * g.transpose();
                let Some(inv) = gram.try_inverse() else { return };
                let lambda = inv * (&g * z - h);
                let p = z - g.transpose() * lambda;
                if !self.contains(&p, FEAS_TOL) {
                    return;
                }
                let d = (z - &p).norm();
                if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
                    best = Some((d, p));
                }
            });
        }
        Ok(best.map(|(_, p)| p))
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(self.project(&Vector::zeros(self.dim()))?.is_none())
    }

    /// Distance from `z` in the given norm (∞ if empty).
    pub fn dist(&self, z: &Vector, norm: NormKind) -> Result<f64> {
        match norm {
            NormKind::Euclidean => Ok(self.project(z)?.map_or(f64::INFINITY, |p| (z - p).norm())),
            NormKind::Max => {
                if self.contains(z, FEAS_TOL) {
                    return Ok(0.0);
                }
                // min t  s.t.  a w ≤ b,  |w_i − z_i| ≤ t, in the lifted space (w, t).
                let d = self.dim();
                let k = self.rows();
                let rows = k + 2 * d;
                let mut a = Matrix::zeros(rows, d + 1);
                let mut b = Vector::zeros(rows);
                for i in 0..k {
                    for j in 0..d {
                        a[(i, j)] = self.a[(i, j)];
                    }
                    b[i] = self.b[i];
                }
                for j in 0..d {
                    a[(k + 2 * j, j)] = 1.0;
                    a[(k + 2 * j, d)] = -1.0;
                    b[k + 2 * j] = z[j];
                    a[(k + 2 * j + 1, j)] = -1.0;
                    a[(k + 2 * j + 1, d)] = -1.0;
                    b[k + 2 * j + 1] = -z[j];
                }
                let lifted = Polyhedron::new(a, b)?;
                let mut c = Vector::zeros(d + 1);
                c[d] = -1.0;
                match lifted.maximize(&c)? {
                    LpOutcome::Empty => Ok(f64::INFINITY),
                    LpOutcome::Unbounded => Err(Error::Unsupported("unbounded distance LP".into())),
                    LpOutcome::Optimal { value, .. } => Ok((-value).max(0.0)),
                }
            }
        }
    }

    /// Maximizes ⟨c, z⟩ over the polyhedron by vertex and ray enumeration.
    pub fn maximize(&self, c: &Vector) -> Result<LpOutcome> {
        let d = self.dim();
        if c.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: c.len() });
        }
        let Some(feasible) = self.project(&Vector::zeros(d))? else {
            return Ok(LpOutcome::Empty);
        };
        let lineality = null_space(&self.a);
        let scale = c.norm().max(1.0);
        if lineality.iter().any(|l| l.dot(c).abs() > 1e-12 * scale) {
            return Ok(LpOutcome::Unbounded);
        }
        // Restrict to the orthogonal complement of the lineality space, where
        // the polyhedron is pointed.
        let mut rows: Vec<Vector> = (0..self.rows()).map(|i| self.a.row(i).transpose()).collect();
        let mut rhs: Vec<f64> = self.b.iter().copied().collect();
        for l in &lineality {
            let shift = l.dot(&feasible);
            rows.push(l.clone());
            rhs.push(shift);
            rows.push(-l);
            rhs.push(-shift);
        }
        let a = Matrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        let pointed = Polyhedron { a, b: Vector::from_vec(rhs) };
        let cone = cone_generators(&pointed.a)?;
        if cone.rays.iter().any(|r| r.dot(c) > 1e-12 * scale) {
            return Ok(LpOutcome::Unbounded);
        }
        pointed.check_budget(d)?;
        let mut best: Option<(f64, Vector)> = None;
        for_each_subset(pointed.rows(), d, |idx| {
            let g = select_rows(&pointed.a, idx);
            let Some(inv) = g.clone().try_inverse() else { return };
            if !full_row_rank(&g) {
                return;
            }
            let h = Vector::from_fn(d, |i, _| pointed.b[idx[i]]);
            let v = inv * h;
            if !pointed.contains(&v, FEAS_TOL) {
                return;
            }
            let val = c.dot(&v);
            if best.as_ref().is_none_or(|(bv, _)| val > *bv) {
                best = Some((val, v));
            }
        });
        Ok(match best {
            Some((value, point)) => LpOutcome::Optimal { value, point },
            None => LpOutcome::Optimal { value: c.dot(&feasible), point: feasible },
        })
    }

    /// Vertices of a bounded polyhedron.
    pub fn vertices(&self) -> Result<Vec<Vector>> {
        let d = self.dim();
        self.check_budget(d)?;
        let mut out: Vec<Vector> = Vec::new();
        for_each_subset(self.rows(), d, |idx| {
            let g = select_rows(&self.a, idx);
            if !full_row_rank(&g) {
                return;
            }
            let Some(inv) = g.try_inverse() else { return };
            let h = Vector::from_fn(d, |i, _| self.b[idx[i]]);
            let v = inv * h;
            if self.contains(&v, FEAS_TOL) && !out.iter().any(|w| (w - &v).norm() <= 1e-9) {
                out.push(v);
            }
        });
        Ok(out)
    }
}

/// Generators of the cone {d : a d ≤ 0}.
pub fn cone_generators(a: &Matrix) -> Result<ConeGenerators> {
    let dim = a.ncols();
    let lineality = null_space(a);
    let w = dim - lineality.len();
    if w == 0 {
        return Ok(ConeGenerators { lineality, rays: Vec::new() });
    }
    let k = a.nrows();
    if binom(k, w - 1) > MAX_SUBSETS {
        return Err(Error::Unsupported("cone ray enumeration too large".into()));
    }
    let mut rays: Vec<Vector> = Vec::new();
    for_each_subset(k, w - 1, |idx| {
        let mut rows: Vec<Vector> = idx.iter().map(|&i| a.row(i).transpose()).collect();
        rows.extend(lineality.iter().cloned());
        let m = Matrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
        let ns = null_space(&m);
        if ns.len() != 1 {
            return;
        }
        for cand in [ns[0].clone(), -&ns[0]] {
            let ok = (0..k).all(|i| a.row(i).dot(&cand.transpose()) <= FEAS_TOL);
            if ok && !rays.iter().any(|r| (r - &cand).norm() <= 1e-9) {
                rays.push(cand);
            }
        }
    });
    Ok(ConeGenerators { lineality, rays })
}

/// Half-space description {w : m w ≤ 0} of the cone generated by the rows of
/// `generators` (the polar of the polar).
pub fn cone_hrep(generators: &Matrix) -> Result<Matrix> {
    let polar = cone_generators(generators)?;
    let dim = generators.ncols();
    let mut rows: Vec<Vector> = polar.rays.clone();
    for l in &polar.lineality {
        rows.push(l.clone());
        rows.push(-l);
    }
    Ok(Matrix::from_fn(rows.len(), dim, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(rows: &[&[f64]], b: &[f64]) -> Polyhedron {
        let d = rows[0].len();
        let a = Matrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
        Polyhedron::new(a, Vector::from_column_slice(b)).unwrap()
    }

    #[test]
    fn subsets_are_lexicographic() {
        let mut seen = Vec::new();
        for_each_subset(4, 2, |s| seen.push(s.to_vec()));
        assert_eq!(seen, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        let mut count = 0;
        for_each_subset(3, 0, |_| count += 1);
        assert_eq!(count, 1);
    }

    #[test]
    fn projection_onto_unit_square() {
        let p = poly(&[&[1.0, 0.0], &[-1.0, 0.0], &[0.0, 1.0], &[0.0, -1.0]], &[1.0, 0.0, 1.0, 0.0]);
        let z = Vector::from_column_slice(&[2.0, 0.5]);
        let q = p.project(&z).unwrap().unwrap();
        assert!((q - Vector::from_column_slice(&[1.0, 0.5])).norm() < 1e-12);
        let z = Vector::from_column_slice(&[2.0, 3.0]);
        assert!((p.dist(&z, NormKind::Euclidean).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert!((p.dist(&z, NormKind::Max).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn projection_onto_affine_line() {
        // {x : x1 + x2 = 1} as two inequalities.
        let p = poly(&[&[1.0, 1.0], &[-1.0, -1.0]], &[1.0, -1.0]);
        let d = p.dist(&Vector::zeros(2), NormKind::Euclidean).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-12);
        let d = p.dist(&Vector::zeros(2), NormKind::Max).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_polyhedron() {
        let p = poly(&[&[1.0], &[-1.0]], &[0.0, -1.0]);
        assert!(p.is_empty().unwrap());
        assert_eq!(p.dist(&Vector::zeros(1), NormKind::Euclidean).unwrap(), f64::INFINITY);
    }

    #[test]
    fn lp_on_halfplane_and_triangle() {
        let half = poly(&[&[0.0, 1.0]], &[1.0]);
        match half.maximize(&Vector::from_column_slice(&[0.0, 1.0])).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value - 1.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(half.maximize(&Vector::from_column_slice(&[1.0, 0.0])).unwrap(), LpOutcome::Unbounded);
        let tri = poly(&[&[-1.0, 0.0], &[0.0, -1.0], &[1.0, 1.0]], &[0.0, 0.0, 1.0]);
        match tri.maximize(&Vector::from_column_slice(&[2.0, 1.0])).unwrap() {
            LpOutcome::Optimal { value, .. } => assert!((value - 2.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
        assert_eq!(tri.vertices().unwrap().len(), 3);
    }

    #[test]
    fn cone_generators_of_quadrant_and_line() {
        let a = Matrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
        let g = cone_generators(&a).unwrap();
        assert!(g.lineality.is_empty());
        assert_eq!(g.rays.len(), 2);
        // {d : d2 ≤ 0, −d2 ≤ 0} is the horizontal line.
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, -1.0]);
        let g = cone_generators(&a).unwrap();
        assert_eq!(g.lineality.len(), 1);
        assert!(g.rays.is_empty());
    }

    #[test]
    fn hrep_of_generated_cone() {
        // cone generated by (1, -1) only: a ray.
        let gen = Matrix::from_row_slice(1, 2, &[1.0, -1.0]);
        let m = cone_hrep(&gen).unwrap();
        let inside = Vector::from_column_slice(&[2.0, -2.0]);
        let outside = Vector::from_column_slice(&[-1.0, 1.0]);
        assert!((0..m.nrows()).all(|i| m.row(i).dot(&inside.transpose()) <= 1e-9));
        assert!((0..m.nrows()).any(|i| m.row(i).dot(&outside.transpose()) > 1e-9));
        // no generators: {0}
        let m = cone_hrep(&Matrix::zeros(0, 2)).unwrap();
        let p = Polyhedron::new(m, Vector::zeros(4)).unwrap();
        assert!(p.contains(&Vector::zeros(2), 0.0));
        assert!(!p.contains(&Vector::from_column_slice(&[1e-3, 0.0]), 1e-9));
    }
}
