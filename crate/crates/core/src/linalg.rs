//! Small symmetric-matrix helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenvalues below this are treated as this value when inverting.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Symmetric inverse square root via eigen-decomposition.
///
/// Returns the matrix and the number of eigenvalues that had to be floored.
pub fn inv_sqrt_sym(m: &DMatrix<f64>, floor: f64) -> (DMatrix<f64>, usize) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut floored = 0;
    let d = eig.eigenvalues.map(|l| {
        if l < floor {
            floored += 1;
        }
        1.0 / l.max(floor).sqrt()
    });
    (&eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose(), floored)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    symmetrize(m).symmetric_eigenvalues().min()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Clips eigenvalues at `floor` and rescales back to unit diagonal.
pub fn clip_to_correlation(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let d = eig.eigenvalues.map(|l| l.max(floor));
    let clipped = &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose();
    let s: DVector<f64> = clipped.diagonal().map(|v| 1.0 / v.sqrt());
    let mut out = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| clipped[(i, j)] * s[i] * s[j]);
    for i in 0..m.nrows() {
        out[(i, i)] = 1.0;
    }
    symmetrize(&out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_square_root_squares_to_inverse() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let (r, floored) = inv_sqrt_sym(&m, EIGEN_FLOOR);
        assert_eq!(floored, 0);
        let id = &r * &m * &r;
        assert!((id - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn clipping_repairs_indefinite_matrix() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        assert!(min_eigenvalue(&m) < 0.0);
        let c = clip_to_correlation(&m, 1e-6);
        assert!(min_eigenvalue(&c) > 0.0);
        for i in 0..3 {
            assert_eq!(c[(i, i)], 1.0);
        }
        assert!((&c - c.transpose()).norm() == 0.0);
    }
}
