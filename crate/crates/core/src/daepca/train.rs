use std::path::Path;

use log::debug;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::autodiff::{AdamState, Tape};
use crate::error::{Error, Result};
use crate::monitor::{Monitor, Thresholds};
use crate::numerics::{apply_stats, standardize, ColumnStats, Matrix};

use super::config::{LossWeights, NetworkConfig, Variant};
use super::model::DaePcaModel;
use super::network::{cayley_projection, loss_tape, orthogonality_error, Network};

/// Validation error recorded at one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Checkpoint {
    pub iteration: usize,
    pub val_error: f64,
}

/// Per-iteration history of a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub loss_x: Vec<f64>,
    pub loss_phi: Vec<f64>,
    pub omega_t: Vec<f64>,
    pub total: Vec<f64>,
    /// `‖PᵀP − I‖²_F` of the projection used at each iteration.
    pub orthogonality: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub selected_iteration: usize,
    /// `‖T‖²_F / N` on the training set at the selected checkpoint.
    pub compactness: f64,
    pub weights: LossWeights,
}

#[derive(Serialize)]
struct ReportRow {
    iteration: usize,
    loss_x: f64,
    loss_phi: f64,
    omega_t: f64,
    total: f64,
    orthogonality: f64,
    val_error: Option<f64>,
}

impl TrainReport {
    pub fn iterations(&self) -> usize {
        self.total.len()
    }

    pub fn selected_val_error(&self) -> f64 {
        self.checkpoints
            .iter()
            .find(|c| c.iteration == self.selected_iteration)
            .map_or(f64::NAN, |c| c.val_error)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let fmt = |e: csv::Error| Error::FormatError {
            path: "<train report>".into(),
            msg: e.to_string(),
        };
        let mut w = csv::Writer::from_writer(out);
        let mut cps = self.checkpoints.iter().peekable();
        for i in 0..self.iterations() {
            let val_error = match cps.peek() {
                Some(c) if c.iteration == i => cps.next().map(|c| c.val_error),
                _ => None,
            };
            w.serialize(ReportRow {
                iteration: i,
                loss_x: self.loss_x[i],
                loss_phi: self.loss_phi[i],
                omega_t: self.omega_t[i],
                total: self.total[i],
                orthogonality: self.orthogonality[i],
                val_error,
            })
            .map_err(fmt)?;
        }
        w.flush().map_err(|e| Error::io("<train report>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

fn projection_of(net: &Network, cfg: &NetworkConfig, variant: Variant) -> Result<Option<Matrix>> {
    if variant.uses_pca() {
        cayley_projection(net.m0(), cfg.a).map(Some)
    } else {
        Ok(None)
    }
}

/// Full-batch Adam training with validation-based checkpoint selection.
///
/// Both matrices hold raw, fault-free samples. The returned model carries
/// BN statistics, covariance and control limits from the selected
/// checkpoint.
pub fn train(
    x_train: &Matrix,
    x_val: &Matrix,
    cfg: &NetworkConfig,
    variant: Variant,
) -> Result<(DaePcaModel, TrainReport)> {
    cfg.validate()?;
    for (name, x) in [("training", x_train), ("validation", x_val)] {
        if x.cols() != cfg.m {
            return Err(Error::InvalidShape(format!(
                "{name} data has {} columns, network expects m = {}",
                x.cols(),
                cfg.m
            )));
        }
    }
    if x_val.rows() == 0 {
        return Err(Error::InvalidShape("validation set is empty".into()));
    }
    let n = x_train.rows();
    let (z, input_stats) = standardize(x_train)?;
    let zv = apply_stats(x_val, &input_stats)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Network::init(cfg, &mut rng);
    let phi0 = ColumnStats::of(&net.encode(&z)?);
    net.set_inverse_bn(&ColumnStats {
        std: phi0.std.iter().map(|s| (s * s + cfg.bn_epsilon).sqrt()).collect(),
        mean: phi0.mean,
    });

    let weights = cfg.weights(n);
    let mut adam = AdamState::new(cfg.adam, net.tensors());
    let mut report = TrainReport {
        loss_x: Vec::with_capacity(cfg.iter_max),
        loss_phi: Vec::with_capacity(cfg.iter_max),
        omega_t: Vec::with_capacity(cfg.iter_max),
        total: Vec::with_capacity(cfg.iter_max),
        orthogonality: Vec::with_capacity(cfg.iter_max),
        checkpoints: Vec::new(),
        selected_iteration: 0,
        compactness: f64::NAN,
        weights,
    };
    let mut best: Option<(f64, Network, ColumnStats)> = None;
    let val_scale = (zv.rows() * cfg.m) as f64;

    for iter in 0..cfg.iter_max {
        let mut tape = Tape::new();
        let out = net.forward_tape(&mut tape, &z, cfg, variant)?;
        let loss = loss_tape(&mut tape, &z, &out, &weights, variant)?;
        let total = tape.value(loss.total).to_scalar()?;
        if !total.is_finite() {
            return Err(Error::NumericalFailure(format!(
                "loss is {total} at iteration {iter}"
            )));
        }
        report.loss_x.push(tape.value(loss.loss_x).to_scalar()?);
        report.loss_phi.push(tape.value(loss.loss_phi).to_scalar()?);
        report.omega_t.push(tape.value(loss.omega_t).to_scalar()?);
        report.total.push(total);
        report
            .orthogonality
            .push(out.projection.map_or(0.0, |p| orthogonality_error(tape.value(p))));

        if (iter + 1) % cfg.checkpoint_interval == 0 || iter + 1 == cfg.iter_max {
            let p = out.projection.map(|p| tape.value(p).clone());
            let (_, xv_hat) = net.forward_frozen(&zv, &out.bn, p.as_ref())?;
            let val_error = zv.sub(&xv_hat)?.frobenius_sq() / val_scale;
            debug!("iteration {iter}: loss {total:.6e}, validation error {val_error:.6e}");
            report.checkpoints.push(Checkpoint {
                iteration: iter,
                val_error,
            });
            if best.as_ref().map_or(val_error.is_finite(), |b| val_error < b.0) {
                report.selected_iteration = iter;
                best = Some((val_error, net.clone(), out.bn.clone()));
            }
        }

        let grads = tape.backward(loss.total)?;
        let grads: Vec<Matrix> = out.params.iter().map(|&p| grads.wrt(p)).collect();
        adam.update(net.tensors_mut(), &grads, cfg.lr.at(iter as u64))
            .map_err(|e| match e {
                Error::NumericalFailure(msg) => {
                    Error::NumericalFailure(format!("{msg} (iteration {iter})"))
                }
                other => other,
            })?;
    }

    let (_, net, frozen_bn) = best.ok_or_else(|| {
        Error::NumericalFailure("no checkpoint produced a finite validation error".into())
    })?;
    let projection = projection_of(&net, cfg, variant)?;
    let (t, _) = net.forward_frozen(&z, &frozen_bn, projection.as_ref())?;
    let lambda = t.t_matmul(&t)?.scale(1.0 / (n as f64 - 1.0));
    report.compactness = t.frobenius_sq() / n as f64;
    let projection = projection.unwrap_or_else(|| Matrix::identity(cfg.d));

    let placeholder = Thresholds {
        j_t2: 1.0,
        j_spe: 1.0,
        alpha: cfg.alpha,
    };
    let mut model = DaePcaModel::new(
        cfg.clone(),
        variant,
        net,
        frozen_bn,
        projection,
        lambda,
        input_stats,
        placeholder,
    )?;
    let stats = model.statistics_batch(x_train)?;
    model.thresholds = Thresholds::fit(&stats, cfg.alpha, &cfg.kde)?;
    Ok((model, report))
}
