//! Small dense factorizations, backed by nalgebra.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub(crate) fn to_nalgebra(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.data())
}

pub(crate) fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
    Matrix::new(m.nrows(), m.ncols(), m.as_slice().to_vec()).expect("nalgebra matrices are non-empty here")
}

/// Solves `X · gram = rhs` for symmetric positive definite `gram`.
pub fn solve_right_spd(rhs: &Matrix, gram: &Matrix) -> Result<Matrix> {
    let k = gram.rows();
    if gram.cols() != k || rhs.cols() != k {
        return Err(Error::shape(format!(
            "cannot solve X·G = B with G {}x{} and B {}x{}",
            gram.rows(),
            gram.cols(),
            rhs.rows(),
            rhs.cols()
        )));
    }
    let chol = to_nalgebra(gram).cholesky().ok_or_else(|| {
        Error::numeric(format!("{k}x{k} normal matrix is not positive definite; use a positive ridge weight"))
    })?;
    // G Xᵀ = Bᵀ
    let bt = to_nalgebra(&rhs.transpose());
    let xt = chol.solve(&bt);
    let x = from_nalgebra(&xt).transpose();
    if !x.is_finite() {
        return Err(Error::numeric("normal-equation solve produced non-finite values"));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let g = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let x_true = Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 0.25], vec![3.0, 0.0]]).unwrap();
        let b = x_true.matmul(&g).unwrap();
        let x = solve_right_spd(&b, &g).unwrap();
        let mut d = x.clone();
        d.axpy(-1.0, &x_true);
        assert!(d.frobenius_norm() < 1e-12);
    }

    #[test]
    fn singular_gram_is_numeric_error() {
        let g = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![1.0, 1.0]]).unwrap();
        assert!(solve_right_spd(&b, &g).unwrap_err().is_numeric());
    }
}
