use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{centered_covariance, dot, standardize, sym_eig, ColumnStats, Matrix};

/// Linear PCA fitted on standardized training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PcaModel {
    /// m×a loadings with orthonormal columns.
    pub loadings: Matrix,
    /// Retained variances, descending.
    pub eigenvalues: Vec<f64>,
    /// Every covariance eigenvalue, descending (retained ones first).
    pub all_eigenvalues: Vec<f64>,
    pub train_stats: ColumnStats,
}

pub fn fit_pca(x: &Matrix, a: usize) -> Result<PcaModel> {
    let m = x.cols();
    if a == 0 || a > m {
        return Err(Error::InvalidConfig(format!(
            "component count {a} must lie in 1..={m}"
        )));
    }
    let (z, train_stats) = standardize(x)?;
    let eig = sym_eig(&centered_covariance(&z)?)?;
    let all_eigenvalues: Vec<f64> = eig.values.iter().map(|&v| v.max(0.0)).collect();
    Ok(PcaModel {
        loadings: eig.vectors.columns(0, a)?,
        eigenvalues: all_eigenvalues[..a].to_vec(),
        all_eigenvalues,
        train_stats,
    })
}

impl PcaModel {
    pub fn components(&self) -> usize {
        self.loadings.cols()
    }

    /// Scores of already-standardized rows.
    pub fn scores(&self, z: &Matrix) -> Result<Matrix> {
        z.matmul(&self.loadings)
    }

    /// `‖Z − Z·P·Pᵀ‖²_F` for standardized rows.
    pub fn reconstruction_error(&self, z: &Matrix) -> Result<f64> {
        let t = self.scores(z)?;
        Ok(z.sub(&t.matmul_t(&self.loadings)?)?.frobenius_sq())
    }

    /// Hotelling T² and SPE of one raw sample.
    pub fn statistics(&self, x: &[f64]) -> Result<(f64, f64)> {
        let m = self.loadings.rows();
        if x.len() != m {
            return Err(Error::InvalidShape(format!(
                "sample has {} values, model expects {m}",
                x.len()
            )));
        }
        let mut z = vec![0.0; m];
        self.train_stats.apply_row(x, &mut z);
        let t = self.loadings.vec_matmul(&z)?;
        let floor = 1e-12 * self.eigenvalues[0].max(f64::MIN_POSITIVE);
        let t2 = t
            .iter()
            .zip(&self.eigenvalues)
            .map(|(ti, &l)| ti * ti / l.max(floor))
            .sum();
        let spe = dot(&z, &z) - dot(&t, &t);
        Ok((t2, spe.max(0.0)))
    }
}
