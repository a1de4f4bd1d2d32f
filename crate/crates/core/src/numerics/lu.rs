use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Largest accepted 1-norm condition number.
pub const MAX_CONDITION: f64 = 1e12;

/// Partial-pivot LU factorization `P·A = L·U`, packed in one matrix.
#[derive(Debug, Clone)]
pub struct Lu {
    packed: Matrix,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &Matrix) -> Result<Lu> {
        if !a.is_square() {
            return Err(Error::InvalidShape(format!(
                "LU needs a square matrix, got {}x{}",
                a.rows(),
                a.cols()
            )));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs();
        for k in 0..n {
            let (pivot_row, pivot) = (k..n)
                .map(|i| (i, lu[(i, k)].abs()))
                .max_by(|x, y| x.1.total_cmp(&y.1))
                .expect("non-empty pivot range");
            if !(pivot > scale * f64::EPSILON * n as f64) || pivot == 0.0 {
                return Err(Error::SingularMatrix(format!("zero pivot in column {k}")));
            }
            if pivot_row != k {
                perm.swap(k, pivot_row);
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
            }
            let diag = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / diag;
                lu[(i, k)] = factor;
                if factor == 0.0 {
                    continue;
                }
                for j in (k + 1)..n {
                    lu[(i, j)] -= factor * lu[(k, j)];
                }
            }
        }
        Ok(Lu { packed: lu, perm })
    }

    /// Solves `A·x = b` for a single right-hand side.
    pub fn solve_vec(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.packed.rows();
        if b.len() != n {
            return Err(Error::InvalidShape(format!(
                "right-hand side of length {} for order {n}",
                b.len()
            )));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.packed[(i, j)] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = ((i + 1)..n).map(|j| self.packed[(i, j)] * x[j]).sum();
            x[i] = (x[i] - s) / self.packed[(i, i)];
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<Matrix> {
        let n = self.packed.rows();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve_vec(&e)?;
            for (i, v) in col.into_iter().enumerate() {
                inv[(i, j)] = v;
            }
        }
        Ok(inv)
    }
}

fn norm1(a: &Matrix) -> f64 {
    (0..a.cols())
        .map(|j| (0..a.rows()).map(|i| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse via partial-pivot LU; rejects matrices whose condition number
/// exceeds [`MAX_CONDITION`].
pub fn invert(a: &Matrix) -> Result<Matrix> {
    let inv = Lu::new(a)?.inverse()?;
    let cond = norm1(a) * norm1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return Err(Error::SingularMatrix(format!(
            "condition number {cond:e} exceeds {MAX_CONDITION:e}"
        )));
    }
    Ok(inv)
}

/// Cholesky factor `L` with `A = L·Lᵀ`, or `None` if `A` is not positive definite.
pub fn cholesky(a: &Matrix) -> Option<Matrix> {
    if !a.is_square() {
        return None;
    }
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let d = a[(i, i)] - s;
                if !(d > 0.0) {
                    return None;
                }
                l[(i, i)] = d.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    Some(l)
}
