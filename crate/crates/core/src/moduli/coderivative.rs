//! Fréchet coderivatives of maps with polyhedral graphs.
//!
//! The Fréchet normal cone to a finite union of polyhedra at z is the
//! intersection of the normal cones of the pieces containing z; each of
//! those is generated by the active constraint normals. Dual vectors are
//! measured in the Euclidean norm.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyhedron::{cone_generators, cone_hrep, Polyhedron};
use crate::rng::directions;
use crate::setmap::SetMap;
use crate::space::{GraphPoint, Matrix, NormKind, Vector};

const ACTIVE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoderivativeBound {
    /// inf over unit y* of min{‖x*‖ : x* ∈ D̂*F(x̄, ȳ)(y*)}; ∞ if no y* admits one.
    #[serde(with = "crate::ser::ext")]
    pub bound: f64,
    /// Whether D̂*F⁻¹(ȳ, x̄)(0) = {0}.
    pub inverse_at_zero_trivial: bool,
    pub pieces_at_point: usize,
    /// Rows M of the normal cone {w : M w ≤ 0} over (x*, y*).
    #[serde(with = "crate::ser::matrix")]
    pub normal_cone: Matrix,
}

/// Half-space description of the Fréchet normal cone to the graph at `z`.
fn normal_cone(pieces: &[Polyhedron], z: &Vector) -> Result<(Matrix, usize)> {
    let d = z.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut count = 0;
    for p in pieces.iter().filter(|p| p.contains(z, ACTIVE_TOL)) {
        count += 1;
        let act = p.active(z, ACTIVE_TOL);
        let gens = Matrix::from_fn(act.len(), d, |i, j| p.a[(act[i], j)]);
        let m = cone_hrep(&gens)?;
        for i in 0..m.nrows() {
            rows.push(m.row(i).iter().copied().collect());
        }
    }
    if count == 0 {
        return Err(Error::NotOnGraph { residual: f64::NAN });
    }
    Ok((Matrix::from_fn(rows.len(), d, |i, j| rows[i][j]), count))
}

pub fn frechet_coderivative_bound(
    f: &SetMap,
    point: &GraphPoint,
    sphere_samples: usize,
    seed: u64,
) -> Result<CoderivativeBound> {
    let SetMap::PolyhedralGraph { n, m, pieces } = f else {
        return Err(Error::Unsupported(format!("coderivative of {} (needs a polyhedral graph)", f.describe())));
    };
    let (n, m) = (*n, *m);
    crate::space::check_dim(&point.x, n)?;
    crate::space::check_dim(&point.y, m)?;
    let mut z = point.x.clone().resize_vertically(n + m, 0.0);
    z.rows_mut(n, m).copy_from(&point.y);
    let (cone, count) = normal_cone(pieces, &z)?;
    let mx = cone.columns(0, n).into_owned();
    let my = cone.columns(n, m).into_owned();
    // (x*, −y*) ∈ N̂  ⟺  M_x x* ≤ M_y y*.
    let mut bound = f64::INFINITY;
    for ystar in directions(m, sphere_samples.max(1), NormKind::Euclidean, seed) {
        let feasible = Polyhedron::new(mx.clone(), &my * &ystar)?;
        bound = bound.min(feasible.dist(&Vector::zeros(n), NormKind::Euclidean)?);
    }
    let inverse_at_zero_trivial = cone_generators(&my)?.is_trivial();
    Ok(CoderivativeBound { bound, inverse_at_zero_trivial, pieces_at_point: count, normal_cone: cone })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(a: f64, b: f64) -> Polyhedron {
        // {(x, y) : a x + b y = 0}
        Polyhedron::new(Matrix::from_row_slice(2, 2, &[a, b, -a, -b]), Vector::zeros(2)).unwrap()
    }

    fn origin() -> GraphPoint {
        GraphPoint::scalar(0.0, 0.0)
    }

    #[test]
    fn two_branch_has_trivial_normal_cone() {
        let f = SetMap::polyhedral(1, 1, vec![line(1.0, -1.0), line(0.0, 1.0)]).unwrap();
        let c = frechet_coderivative_bound(&f, &origin(), 8, 1).unwrap();
        assert_eq!(c.bound, f64::INFINITY);
        assert!(c.inverse_at_zero_trivial);
        assert_eq!(c.pieces_at_point, 2);
    }

    #[test]
    fn diagonal_and_constant_maps() {
        let diag = SetMap::polyhedral(1, 1, vec![line(1.0, -1.0)]).unwrap();
        let c = frechet_coderivative_bound(&diag, &origin(), 8, 1).unwrap();
        assert!((c.bound - 1.0).abs() < 1e-9);
        assert!(c.inverse_at_zero_trivial);
        let constant = SetMap::polyhedral(1, 1, vec![line(0.0, 1.0)]).unwrap();
        let c = frechet_coderivative_bound(&constant, &origin(), 8, 1).unwrap();
        assert!(c.bound.abs() < 1e-12);
        assert!(!c.inverse_at_zero_trivial);
    }

    #[test]
    fn procedural_maps_are_rejected() {
        let f = SetMap::scalar_fn("x", |x| x);
        assert!(matches!(frechet_coderivative_bound(&f, &origin(), 4, 1), Err(Error::Unsupported(_))));
    }
}
