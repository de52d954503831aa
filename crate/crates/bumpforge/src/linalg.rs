//! Dense LU factorization with partial pivoting and a Jacobi eigensolver,
//! sized for the small N x N crossing systems that arise here (N is the
//! number of positive threshold crossings, rarely more than a handful).

use crate::error::{Error, Result};

/// Packed LU factors of a square matrix with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
    det: f64,
}

impl Lu {
    /// Factor `a`; fails with `SingularMatrix` on an exactly zero pivot.
    /// Threshold checks on the determinant are the caller's policy.
    pub fn factor(a: &[Vec<f64>]) -> Result<Lu> {
        let n = a.len();
        assert!(a.iter().all(|row| row.len() == n), "matrix must be square");
        let mut lu: Vec<f64> = a.iter().flatten().copied().collect();
        let mut piv: Vec<usize> = (0..n).collect();
        let mut det = 1.0;

        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&i, &j| {
                    lu[i * n + col]
                        .abs()
                        .total_cmp(&lu[j * n + col].abs())
                })
                .expect("non-empty column");
            if lu[pivot_row * n + col] == 0.0 {
                return Err(Error::SingularMatrix(format!(
                    "zero pivot in column {col}"
                )));
            }
            if pivot_row != col {
                for k in 0..n {
                    lu.swap(col * n + k, pivot_row * n + k);
                }
                piv.swap(col, pivot_row);
                det = -det;
            }
            let pivot = lu[col * n + col];
            det *= pivot;
            for row in col + 1..n {
                let factor = lu[row * n + col] / pivot;
                lu[row * n + col] = factor;
                for k in col + 1..n {
                    lu[row * n + k] -= factor * lu[col * n + k];
                }
            }
        }
        Ok(Lu { n, lu, piv, det })
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    /// Solve `A x = b` using the stored factors.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for row in 1..n {
            for col in 0..row {
                x[row] = x[row] - self.lu[row * n + col] * x[col];
            }
        }
        for row in (0..n).rev() {
            for col in row + 1..n {
                x[row] = x[row] - self.lu[row * n + col] * x[col];
            }
            x[row] /= self.lu[row * n + row];
        }
        x
    }
}

/// Determinant via LU; 0.0 for an exactly singular matrix.
pub fn determinant(a: &[Vec<f64>]) -> f64 {
    match Lu::factor(a) {
        Ok(lu) => lu.det(),
        Err(_) => 0.0,
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps, ascending.
/// Symmetry is the caller's contract; only the upper triangle is trusted.
pub fn symmetric_eigenvalues(a: &[Vec<f64>]) -> Vec<f64> {
    let n = a.len();
    let mut m: Vec<f64> = a.iter().flatten().copied().collect();
    let scale: f64 = m.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);

    for _sweep in 0..100 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(m[p * n + q].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let tau = (m[q * n + q] - m[p * n + p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| m[i * n + i]).collect();
    eig.sort_by(f64::total_cmp);
    eig
}
