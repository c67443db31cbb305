//! Finite-dimensional geometry: vectors, norms, balls, graph points and the
//! numerical settings shared by every distance oracle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Builds a vector, rejecting empty input and non-finite entries.
pub fn vector(coords: &[f64]) -> Result<Vector> {
    if coords.is_empty() {
        return Err(Error::InvalidInput("vector must have dimension >= 1".into()));
    }
    if let Some(bad) = coords.iter().find(|c| !c.is_finite()) {
        return Err(Error::NonFinite(format!("vector entry {bad}")));
    }
    Ok(Vector::from_column_slice(coords))
}

/// One-dimensional vector shorthand.
pub fn scalar(v: f64) -> Vector {
    Vector::from_element(1, v)
}

/// Builds a matrix from row slices.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let m = rows.len();
    if m == 0 {
        return Err(Error::InvalidInput("matrix needs at least one row".into()));
    }
    let n = rows[0].len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidInput("matrix rows must share a positive length".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("matrix entry".into()));
    }
    Ok(Matrix::from_fn(m, n, |i, j| rows[i][j]))
}

pub fn matrix_rows(a: &Matrix) -> Vec<Vec<f64>> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)]).collect())
        .collect()
}

pub fn check_dim(v: &Vector, expected: usize) -> Result<()> {
    if v.len() != expected {
        return Err(Error::DimensionMismatch { expected, got: v.len() });
    }
    Ok(())
}

/// Norm on each factor space. Products of spaces always use the max of the
/// component distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Euclidean,
    Max,
}

impl NormKind {
    pub fn norm(self, v: &Vector) -> f64 {
        match self {
            NormKind::Euclidean => v.norm(),
            NormKind::Max => v.amax(),
        }
    }

    pub fn dist(self, a: &Vector, b: &Vector) -> f64 {
        match self {
            NormKind::Euclidean => a.metric_distance(b),
            NormKind::Max => a
                .iter()
                .zip(b.iter())
                .fold(0.0_f64, |m, (p, q)| m.max((p - q).abs())),
        }
    }

    /// Distance in X × Y with the max product metric.
    pub fn product_dist(self, a: &GraphPoint, b: &GraphPoint) -> f64 {
        self.dist(&a.x, &b.x).max(self.dist(&a.y, &b.y))
    }

    /// Rescales a nonzero vector to unit length in this norm.
    pub fn normalize(self, v: &Vector) -> Option<Vector> {
        let n = self.norm(v);
        (n > 0.0 && n.is_finite()).then(|| v / n)
    }

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Euclidean => "euclidean",
            NormKind::Max => "max",
        }
    }
}

impl std::str::FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(NormKind::Euclidean),
            "max" => Ok(NormKind::Max),
            other => Err(Error::InvalidInput(format!("unknown norm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ball {
    pub center: Vector,
    pub radius: f64,
    pub closed: bool,
}

impl Ball {
    pub fn closed(center: Vector, radius: f64) -> Self {
        assert!(radius >= 0.0, "ball radius must be nonnegative");
        Ball { center, radius, closed: true }
    }

    pub fn open(center: Vector, radius: f64) -> Self {
        assert!(radius >= 0.0, "ball radius must be nonnegative");
        Ball { center, radius, closed: false }
    }

    pub fn contains(&self, p: &Vector, norm: NormKind, tol: f64) -> bool {
        let d = norm.dist(&self.center, p);
        if self.closed {
            d <= self.radius + tol
        } else {
            d < self.radius + tol
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }
}

/// A point (x, y) of a graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphPoint {
    #[serde(with = "crate::ser::vector")]
    pub x: Vector,
    #[serde(with = "crate::ser::vector")]
    pub y: Vector,
}

impl GraphPoint {
    pub fn new(x: Vector, y: Vector) -> Self {
        GraphPoint { x, y }
    }

    pub fn scalar(x: f64, y: f64) -> Self {
        GraphPoint { x: scalar(x), y: scalar(y) }
    }
}

/// Numerical settings shared by the distance oracles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    pub norm: NormKind,
    /// Absolute feasibility tolerance for membership tests.
    pub tol_feas: f64,
    /// Slack for strict inequalities in premises.
    pub tol_strict: f64,
    /// Grid points per axis for preimage searches in dimension ≤ 2.
    pub grid_resolution: usize,
    /// Halving steps of the coordinate-descent refinement.
    pub refine_steps: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            norm: NormKind::Euclidean,
            tol_feas: 1e-8,
            tol_strict: 1e-12,
            grid_resolution: 401,
            refine_steps: 30,
        }
    }
}

impl Settings {
    pub fn with_norm(norm: NormKind) -> Self {
        Settings { norm, ..Settings::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vector_rejects_nan_and_empty() {
        assert!(vector(&[]).is_err());
        assert!(vector(&[1.0, f64::NAN]).is_err());
        assert!(vector(&[1.0, f64::INFINITY]).is_err());
        assert_eq!(vector(&[1.0, 2.0]).unwrap().len(), 2);
    }

    #[test]
    fn norms_agree_in_one_dimension() {
        let a = scalar(0.3);
        let b = scalar(-1.2);
        assert_eq!(NormKind::Euclidean.dist(&a, &b), NormKind::Max.dist(&a, &b));
    }

    #[test]
    fn max_norm_of_vector() {
        let v = vector(&[3.0, -4.0]).unwrap();
        assert_eq!(NormKind::Max.norm(&v), 4.0);
        assert_eq!(NormKind::Euclidean.norm(&v), 5.0);
    }

    #[test]
    fn product_metric_is_max_of_components() {
        let a = GraphPoint::scalar(0.0, 0.0);
        let b = GraphPoint::scalar(0.5, -2.0);
        assert_eq!(NormKind::Euclidean.product_dist(&a, &b), 2.0);
    }

    #[test]
    fn open_and_closed_balls() {
        let b = Ball::closed(scalar(0.0), 1.0);
        assert!(b.contains(&scalar(1.0), NormKind::Euclidean, 0.0));
        let o = Ball::open(scalar(0.0), 1.0);
        assert!(!o.contains(&scalar(1.0), NormKind::Euclidean, 0.0));
    }
}
