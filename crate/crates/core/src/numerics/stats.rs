use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Columns with a population standard deviation at or below this are constant.
pub const MIN_STD: f64 = 1e-12;

/// Per-column mean and population (divide-by-N) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl ColumnStats {
    pub fn of(x: &Matrix) -> ColumnStats {
        let mean = x.column_means();
        let mut var = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for ((v, &xi), &m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                let d = xi - m;
                *v += d * d;
            }
        }
        let n = x.rows() as f64;
        let std = var.into_iter().map(|v| (v / n).sqrt()).collect();
        ColumnStats { mean, std }
    }

    /// Zero mean, unit standard deviation: the identity map.
    pub fn identity(cols: usize) -> ColumnStats {
        ColumnStats {
            mean: vec![0.0; cols],
            std: vec![1.0; cols],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    /// Standardizes one sample into `out`.
    pub fn apply_row(&self, x: &[f64], out: &mut [f64]) {
        for (((o, &v), &m), &s) in out.iter_mut().zip(x).zip(&self.mean).zip(&self.std) {
            *o = (v - m) / s;
        }
    }

    fn check(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.len() || self.std.len() != self.len() {
            return Err(Error::InvalidShape(format!(
                "stats cover {} columns, matrix has {}",
                self.len(),
                x.cols()
            )));
        }
        Ok(())
    }
}

/// Standardizes each column to zero mean and unit population variance.
pub fn standardize(x: &Matrix) -> Result<(Matrix, ColumnStats)> {
    if x.rows() < 2 {
        return Err(Error::InvalidShape(format!(
            "standardization needs at least 2 rows, got {}",
            x.rows()
        )));
    }
    let stats = ColumnStats::of(x);
    if let Some((column, &std)) = stats.std.iter().enumerate().find(|(_, &s)| !(s > MIN_STD)) {
        return Err(Error::DegenerateColumn { column, std });
    }
    let z = apply_stats(x, &stats)?;
    Ok((z, stats))
}

pub fn apply_stats(x: &Matrix, stats: &ColumnStats) -> Result<Matrix> {
    stats.check(x)?;
    let mut out = x.clone();
    for i in 0..x.rows() {
        stats.apply_row(x.row(i), out.row_mut(i));
    }
    Ok(out)
}

pub fn undo_stats(x: &Matrix, stats: &ColumnStats) -> Result<Matrix> {
    stats.check(x)?;
    let mut out = x.clone();
    for i in 0..x.rows() {
        for (((o, &v), &m), &s) in out
            .row_mut(i)
            .iter_mut()
            .zip(x.row(i))
            .zip(&stats.mean)
            .zip(&stats.std)
        {
            *o = v * s + m;
        }
    }
    Ok(out)
}

/// Sample covariance `XᵀX/(N−1)` of already-centered columns.
pub fn centered_covariance(x: &Matrix) -> Result<Matrix> {
    if x.rows() < 2 {
        return Err(Error::InvalidShape(
            "covariance needs at least 2 rows".into(),
        ));
    }
    Ok(x.t_matmul(x)?.scale(1.0 / (x.rows() as f64 - 1.0)))
}
