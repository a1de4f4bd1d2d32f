use crate::error::{Error, Result};
use crate::monitor::{spe, Monitor, Precision, Thresholds};
use crate::numerics::{dot, ColumnStats, Matrix};

use super::config::{NetworkConfig, Variant};
use super::network::Network;

/// A trained network ready for online monitoring.
#[derive(Debug, Clone)]
pub struct DaePcaModel {
    pub config: NetworkConfig,
    pub variant: Variant,
    pub network: Network,
    /// BN statistics of the selected checkpoint's training pass.
    pub frozen_bn: ColumnStats,
    /// d×a orthonormal projection; the d×d identity for [`Variant::Dae`].
    pub projection: Matrix,
    /// Feature covariance `TᵀT/(N−1)`.
    pub lambda: Matrix,
    pub input_stats: ColumnStats,
    pub thresholds: Thresholds,
    precision: Precision,
}

fn dense_row(w: &Matrix, b: &Matrix, h: &[f64], relu: bool) -> Result<Vec<f64>> {
    let mut out = w.vec_matmul(h)?;
    for (o, &c) in out.iter_mut().zip(b.as_slice()) {
        *o += c;
        if relu && *o < 0.0 {
            *o = 0.0;
        }
    }
    Ok(out)
}

impl DaePcaModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        config: NetworkConfig,
        variant: Variant,
        network: Network,
        frozen_bn: ColumnStats,
        projection: Matrix,
        lambda: Matrix,
        input_stats: ColumnStats,
        thresholds: Thresholds,
    ) -> Result<DaePcaModel> {
        let d = config.d;
        let features = if variant.uses_pca() { config.a } else { d };
        if projection.shape() != (d, features) || lambda.shape() != (features, features) {
            return Err(Error::InvalidShape(format!(
                "projection {}x{} and covariance {}x{} do not fit d = {d}, {features} features",
                projection.rows(),
                projection.cols(),
                lambda.rows(),
                lambda.cols()
            )));
        }
        if frozen_bn.len() != d || input_stats.len() != config.m {
            return Err(Error::InvalidShape(
                "normalization statistics do not match the network widths".into(),
            ));
        }
        if frozen_bn.std.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::NumericalFailure(
                "frozen BN statistics contain a non-positive std".into(),
            ));
        }
        let precision = Precision::new(&lambda)?;
        Ok(DaePcaModel {
            config,
            variant,
            network,
            frozen_bn,
            projection,
            lambda,
            input_stats,
            thresholds,
            precision,
        })
    }

    /// Number of monitored features (`a`, or `d` without the PCA module).
    pub fn features(&self) -> usize {
        self.projection.cols()
    }

    /// Features `t` and standardized residual `x̃` of one raw sample.
    pub fn score_online(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let m = self.config.m;
        if x.len() != m {
            return Err(Error::InvalidShape(format!(
                "sample has {} values, model expects {m}",
                x.len()
            )));
        }
        let net = &self.network;
        let depth = net.depth();
        let mut z = vec![0.0; m];
        self.input_stats.apply_row(x, &mut z);

        let mut h = z.clone();
        for i in 0..depth {
            let (w, b) = net.encoder_layer(i);
            h = dense_row(w, b, &h, i + 1 < depth)?;
        }
        let mut phi_bar = vec![0.0; h.len()];
        self.frozen_bn.apply_row(&h, &mut phi_bar);

        let (t, mut fs) = if self.variant.uses_pca() {
            let t = self.projection.vec_matmul(&phi_bar)?;
            let fs: Vec<f64> = (0..self.projection.rows())
                .map(|i| dot(self.projection.row(i), &t))
                .collect();
            (t, fs)
        } else {
            (phi_bar.clone(), phi_bar)
        };
        let (scale, shift) = (net.inverse_bn_scale(), net.inverse_bn_shift());
        for ((v, &s), &c) in fs.iter_mut().zip(scale.as_slice()).zip(shift.as_slice()) {
            *v = *v * s + c;
        }
        let mut h = fs;
        for i in 0..depth {
            let (w, b) = net.decoder_layer(i);
            h = dense_row(w, b, &h, i + 1 < depth)?;
        }
        let residual = z.iter().zip(&h).map(|(a, b)| a - b).collect();
        Ok((t, residual))
    }

    /// Row-by-row scoring of a raw batch: `(T, X̃)`.
    pub fn score_batch(&self, x: &Matrix) -> Result<(Matrix, Matrix)> {
        let mut t = Matrix::zeros(x.rows(), self.features());
        let mut r = Matrix::zeros(x.rows(), self.config.m);
        for i in 0..x.rows() {
            let (ti, ri) = self.score_online(x.row(i))?;
            t.row_mut(i).copy_from_slice(&ti);
            r.row_mut(i).copy_from_slice(&ri);
        }
        Ok((t, r))
    }

    /// Features of a raw batch through whole-matrix products.
    pub fn training_scores(&self, x: &Matrix) -> Result<Matrix> {
        let mut z = x.clone();
        for i in 0..x.rows() {
            self.input_stats.apply_row(x.row(i), z.row_mut(i));
        }
        let p = self.variant.uses_pca().then_some(&self.projection);
        Ok(self.network.forward_frozen(&z, &self.frozen_bn, p)?.0)
    }

    /// `(T², SPE)` of one raw sample.
    pub fn statistics(&self, x: &[f64]) -> Result<(f64, f64)> {
        let (t, r) = self.score_online(x)?;
        Ok((self.precision.quadratic(&t)?, spe(&r)))
    }
}

impl Monitor for DaePcaModel {
    fn variables(&self) -> usize {
        self.config.m
    }

    fn statistics(&self, x: &[f64]) -> Result<(f64, f64)> {
        DaePcaModel::statistics(self, x)
    }
}
