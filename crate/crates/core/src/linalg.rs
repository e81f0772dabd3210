//! Conversions between `ndarray` storage and the `nalgebra` decompositions.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use ndarray::{Array1, Array2};

pub(crate) fn to_dmatrix(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Thin SVD with singular values in decreasing order.
pub(crate) struct ThinSvd {
    pub u: Array2<f64>,
    pub s: Array1<f64>,
    pub vt: Array2<f64>,
}

pub(crate) fn thin_svd(a: &Array2<f64>) -> ThinSvd {
    let svd = SVD::new(to_dmatrix(a), true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v requested");
    ThinSvd {
        u: from_dmatrix(u),
        s: Array1::from_iter(svd.singular_values.iter().copied()),
        vt: from_dmatrix(vt),
    }
}

/// Eigenpairs of a symmetric matrix, sorted by decreasing eigenvalue.
pub(crate) fn symmetric_eigen_desc(a: &Array2<f64>) -> (Array1<f64>, Array2<f64>) {
    let eig = SymmetricEigen::new(to_dmatrix(a));
    let mut order: Vec<usize> = (0..a.nrows()).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let values = Array1::from_iter(order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = Array2::from_shape_fn((a.nrows(), order.len()), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn svd_reconstructs_and_sorts() {
        let a = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.5]];
        let svd = thin_svd(&a);
        assert!(svd.s[0] >= svd.s[1]);
        let rec = svd.u.dot(&Array2::from_diag(&svd.s)).dot(&svd.vt);
        for (x, y) in rec.iter().zip(a.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_sorted_descending() {
        let a = array![[2.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 1.0]];
        let (vals, vecs) = symmetric_eigen_desc(&a);
        assert_eq!(vals.to_vec(), vec![5.0, 2.0, 1.0]);
        assert!((vecs[[1, 0]].abs() - 1.0).abs() < 1e-12);
    }
}
