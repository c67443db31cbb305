//! Dense linear algebra on top of nalgebra's SVD.

use nalgebra::SVD;

use crate::error::{Error, Result};
use crate::space::{Matrix, Vector};

/// Relative tolerance under which a singular value counts as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Singular values in decreasing order (min(m, n) of them).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut sv: Vec<f64> = a.clone().singular_values().iter().copied().collect();
    sv.sort_by(|p, q| q.total_cmp(p));
    sv
}

pub fn rank(a: &Matrix) -> usize {
    let sv = singular_values(a);
    let smax = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|&&s| s > RANK_TOL * smax.max(1.0)).count()
}

pub fn spectral_norm(a: &Matrix) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// min over unit h of ‖A h‖: the n-th singular value, 0 when n > m.
pub fn lower_bound(a: &Matrix) -> f64 {
    if a.ncols() > a.nrows() {
        return 0.0;
    }
    singular_values(a).last().copied().unwrap_or(0.0)
}

/// Least-norm least-squares solution of A x = b.
pub fn least_norm_solve(a: &Matrix, b: &Vector) -> Result<Vector> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
    }
    let svd = SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.max();
    let eps = RANK_TOL * smax.max(1.0);
    svd.solve(b, eps).map_err(|e| Error::InvalidInput(e.to_string()))
}

/// Inverse of a square matrix, rank-checked.
pub fn inverse(a: &Matrix) -> Result<Matrix> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.ncols() });
    }
    let r = rank(a);
    if r < n {
        return Err(Error::RankDeficient { rank: r, needed: n });
    }
    a.clone().try_inverse().ok_or(Error::RankDeficient { rank: r, needed: n })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_singular_values() {
        let a = Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 0.5]);
        assert_eq!(singular_values(&a), vec![3.0, 0.5]);
        assert_eq!(rank(&a), 2);
        assert_eq!(lower_bound(&a), 0.5);
    }

    #[test]
    fn wide_matrix_has_no_lower_bound() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        assert_eq!(lower_bound(&a), 0.0);
        assert_eq!(rank(&a), 1);
    }

    #[test]
    fn least_norm_solution_of_underdetermined_system() {
        let a = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = least_norm_solve(&a, &Vector::from_element(1, 2.0)).unwrap();
        assert!((x - Vector::from_element(2, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn singular_inverse_is_rejected() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(inverse(&a), Err(Error::RankDeficient { rank: 1, .. })));
    }
}
