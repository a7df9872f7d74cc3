//! SVD backend shared by the matrix statistics and the estimator.
//!
//! All decompositions go through faer; singular values come back sorted
//! nonincreasing and the factors are thin (q = min(rows, cols) columns).

use nalgebra::DMatrix;

pub(crate) struct ThinSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

fn to_faer(m: &DMatrix<f64>) -> faer::Mat<f64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub(crate) fn thin_svd(m: &DMatrix<f64>) -> ThinSvd {
    let svd = to_faer(m).thin_svd().expect("svd did not converge");
    let q = m.nrows().min(m.ncols());
    let u = svd.U();
    let v = svd.V();
    let s = svd.S().column_vector();
    ThinSvd {
        u: DMatrix::from_fn(m.nrows(), q, |i, j| u[(i, j)]),
        s: (0..q).map(|i| s[i]).collect(),
        v: DMatrix::from_fn(m.ncols(), q, |i, j| v[(i, j)]),
    }
}

pub(crate) fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    to_faer(m).singular_values().expect("svd did not converge")
}
