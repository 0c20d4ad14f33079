//! Small dense helpers for covariance matrices.

use crate::error::{Error, Result};
use crate::scalar::{cmp, Scalar};

/// Lower-triangular factor `L` with `L Lᵀ = C` for a symmetric positive
/// semidefinite `C`. Zero pivots are allowed when the rest of their column
/// vanishes; anything else is reported as not PSD.
pub fn cholesky_psd(c: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = c.len();
    if c.iter().any(|row| row.len() != n) {
        return Err(Error::param("C", "covariance matrix must be square"));
    }
    let scale = c
        .iter()
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    let tol = 1e-12 * scale * n as f64;
    for i in 0..n {
        for j in 0..i {
            if !c[i][j].is_finite() || (c[i][j] - c[j][i]).abs() > tol {
                return Err(Error::param("C", "covariance matrix must be symmetric"));
            }
        }
    }
    let mut l = vec![vec![0.0; n]; n];
    for j in 0..n {
        let d = c[j][j] - (0..j).map(|k| l[j][k] * l[j][k]).sum::<f64>();
        if d < -tol {
            return Err(Error::param(
                "C",
                "covariance matrix is not positive semidefinite",
            ));
        }
        if d <= tol {
            for i in j + 1..n {
                let r = c[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
                if r.abs() > tol.sqrt() * scale.sqrt() {
                    return Err(Error::param(
                        "C",
                        "covariance matrix is not positive semidefinite",
                    ));
                }
            }
            continue;
        }
        let djj = d.sqrt();
        l[j][j] = djj;
        for i in j + 1..n {
            let r = c[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = r / djj;
        }
    }
    Ok(l)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    if a.len() != n || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidInput("linear system must be square".into()));
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| cmp(a[i][col].abs(), a[j][col].abs()))
            .unwrap();
        if !(a[pivot][col].abs() > T::zero()) || !a[pivot][col].is_finite() {
            return Err(Error::Precondition("singular Jacobian".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[row][k] = a[row][k] - f * v;
            }
            let v = b[col];
            b[row] = b[row] - f * v;
        }
    }
    let mut x = vec![T::zero(); n];
    for row in (0..n).rev() {
        let tail: T = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factors_positive_definite_matrix() {
        let c = vec![vec![4.0, 2.0], vec![2.0, 3.0]];
        let l = cholesky_psd(&c).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| l[i][k] * l[j][k]).sum();
                assert!((v - c[i][j]).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn accepts_singular_psd_and_rejects_indefinite() {
        assert!(cholesky_psd(&[vec![1.0, 1.0], vec![1.0, 1.0]]).is_ok());
        assert!(cholesky_psd(&[vec![0.0, 0.0], vec![0.0, 2.0]]).is_ok());
        assert!(cholesky_psd(&[vec![1.0, 2.0], vec![2.0, 1.0]]).is_err());
        assert!(cholesky_psd(&[vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
    }

    #[test]
    fn dense_solve() {
        let x = solve_dense(vec![vec![0.0, 2.0], vec![3.0, 1.0]], vec![4.0, 5.0]).unwrap();
        assert!((x[0] - 1.0f64).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        assert!(solve_dense(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_err());
    }
}
