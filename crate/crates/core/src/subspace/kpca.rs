use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, sym_eig, ColumnStats, Matrix, MIN_STD};
use crate::subspace::KernelConfig;

/// Eigenvalues below this fraction of the largest are treated as rank noise.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Kernel PCA fitted on standardized training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KpcaModel {
    pub training: Matrix,
    pub config: KernelConfig,
    /// N×a scaled eigenvectors, `λᵢ‖αᵢ‖² = 1`.
    pub alphas: Matrix,
    /// Retained eigenvalues of the centered Gram matrix.
    pub eigenvalues: Vec<f64>,
    /// Number of eigenvalues above the rank tolerance.
    pub positive_rank: usize,
    pub gram_row_means: Vec<f64>,
    pub gram_grand_mean: f64,
    pub train_stats: ColumnStats,
}

/// Column statistics where constant columns are centered but left unscaled.
fn lenient_stats(x: &Matrix) -> ColumnStats {
    let mut stats = ColumnStats::of(x);
    for s in &mut stats.std {
        if !(*s > MIN_STD) {
            *s = 1.0;
        }
    }
    stats
}

/// `H·K·H` with `H = I − 11ᵀ/N`.
pub fn center_gram(k: &Matrix) -> (Matrix, Vec<f64>, f64) {
    let n = k.rows();
    let row_means: Vec<f64> = k.row_sums().into_iter().map(|s| s / n as f64).collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    let centered = Matrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - row_means[j] + grand);
    (centered, row_means, grand)
}

pub fn fit_kpca(x: &Matrix, a: usize, config: KernelConfig) -> Result<KpcaModel> {
    config.validate()?;
    let n = x.rows();
    if a == 0 || a > n {
        return Err(Error::InvalidConfig(format!(
            "component count {a} must lie in 1..={n}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidShape("KPCA needs at least 2 rows".into()));
    }
    let train_stats = lenient_stats(x);
    let mut training = x.clone();
    for i in 0..n {
        train_stats.apply_row(x.row(i), training.row_mut(i));
    }

    let (centered, gram_row_means, gram_grand_mean) = center_gram(&config.gram(&training));
    let eig = sym_eig(&centered)?;
    let top = eig.values.first().copied().unwrap_or(0.0);
    let positive = if top > 0.0 {
        eig.values
            .iter()
            .take_while(|&&v| v > RANK_TOLERANCE * top)
            .count()
    } else {
        0
    };
    if positive < a {
        return Err(Error::InsufficientRank(format!(
            "centered Gram matrix has {positive} positive eigenvalues, {a} requested"
        )));
    }
    let alphas = Matrix::from_fn(n, a, |i, c| eig.vectors[(i, c)] / eig.values[c].sqrt());
    Ok(KpcaModel {
        training,
        config,
        alphas,
        eigenvalues: eig.values[..a].to_vec(),
        positive_rank: positive,
        gram_row_means,
        gram_grand_mean,
        train_stats,
    })
}

impl KpcaModel {
    pub fn components(&self) -> usize {
        self.alphas.cols()
    }

    pub fn training_size(&self) -> usize {
        self.training.rows()
    }

    /// Centered kernel vector of a raw sample and its centered self-kernel.
    fn centered_kernel(&self, x: &[f64]) -> Result<(Vec<f64>, f64)> {
        let m = self.training.cols();
        if x.len() != m {
            return Err(Error::InvalidShape(format!(
                "sample has {} values, model expects {m}",
                x.len()
            )));
        }
        let mut z = vec![0.0; m];
        self.train_stats.apply_row(x, &mut z);
        let n = self.training.rows();
        let mut k: Vec<f64> = (0..n)
            .map(|i| self.config.eval(&z, self.training.row(i)))
            .collect();
        let mean = k.iter().sum::<f64>() / n as f64;
        for (ki, &r) in k.iter_mut().zip(&self.gram_row_means) {
            *ki += self.gram_grand_mean - r - mean;
        }
        let self_kernel = self.config.eval(&z, &z) - 2.0 * mean + self.gram_grand_mean;
        Ok((k, self_kernel))
    }

    /// Scores on the retained components; Θ(N·m + N·a) per sample.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (k, _) = self.centered_kernel(x)?;
        self.alphas.vec_matmul(&k)
    }

    /// Hotelling T² and the feature-space residual `k̄(x,x) − ‖t‖²`.
    pub fn statistics(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (k, self_kernel) = self.centered_kernel(x)?;
        let t = self.alphas.vec_matmul(&k)?;
        let scale = self.training.rows() as f64 - 1.0;
        let t2 = t
            .iter()
            .zip(&self.eigenvalues)
            .map(|(ti, &l)| ti * ti / (l / scale))
            .sum();
        let spe = self_kernel - dot(&t, &t);
        Ok((t2, spe.max(0.0)))
    }

    /// Scores of the training set, `K̄·α`.
    pub fn training_scores(&self) -> Result<Matrix> {
        let n = self.training.rows();
        let mut out = Matrix::zeros(n, self.components());
        for i in 0..n {
            let k: Vec<f64> = (0..n)
                .map(|j| {
                    self.config.eval(self.training.row(i), self.training.row(j))
                        - self.gram_row_means[i]
                        - self.gram_row_means[j]
                        + self.gram_grand_mean
                })
                .collect();
            out.row_mut(i).copy_from_slice(&self.alphas.vec_matmul(&k)?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn data(n: usize, m: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(n, m, |_, j| rng.gen_range(-1.0..1.0) * (1.0 + j as f64))
    }

    #[test]
    fn centered_rows_sum_to_zero() {
        let x = data(25, 3, 1);
        let k = KernelConfig::Rbf { width: 4.0 }.gram(&x);
        let (c, _, _) = center_gram(&k);
        assert!(c.row_sums().iter().all(|s| s.abs() <= 1e-8));
    }

    #[test]
    fn identical_rows_have_no_rank() {
        let x = Matrix::filled(10, 3, 2.5);
        let err = fit_kpca(&x, 1, KernelConfig::Rbf { width: 1.0 }).unwrap_err();
        assert!(matches!(err, Error::InsufficientRank(_)));
    }

    #[test]
    fn training_rows_project_to_stored_scores() {
        let x = data(40, 4, 3);
        let model = fit_kpca(&x, 3, KernelConfig::Rbf { width: 6.0 }).unwrap();
        let scores = model.training_scores().unwrap();
        for i in [0, 17, 39] {
            let t = model.project(x.row(i)).unwrap();
            for (a, b) in t.iter().zip(scores.row(i)) {
                assert!((a - b).abs() < 1e-8);
            }
        }
        let means = scores.column_means();
        assert!(means.iter().all(|m| m.abs() < 1e-8));
    }

    #[test]
    fn full_expansion_leaves_no_residual() {
        let x = data(30, 3, 4);
        let rbf = KernelConfig::Rbf { width: 2.0 };
        let rank = fit_kpca(&x, 1, rbf).unwrap().positive_rank;
        let model = fit_kpca(&x, rank, rbf).unwrap();
        let partial = fit_kpca(&x, 2, rbf).unwrap();
        assert!(partial.statistics(x.row(0)).unwrap().1 > 1e-3);
        for i in 0..30 {
            let (_, spe) = model.statistics(x.row(i)).unwrap();
            assert!(spe < 1e-6, "row {i}: spe {spe}");
        }
    }

    #[test]
    fn zero_score_gives_zero_t2() {
        // the training mean maps to the centroid under the linear kernel
        let x = data(30, 3, 5);
        let model = fit_kpca(&x, 2, KernelConfig::Linear).unwrap();
        let (t2, _) = model.statistics(&model.train_stats.mean).unwrap();
        assert!(t2.abs() < 1e-20);
    }
}
