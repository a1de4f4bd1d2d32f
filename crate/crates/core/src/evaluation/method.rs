use serde::{Deserialize, Serialize};

use crate::daepca::{train, DaePcaModel, NetworkConfig, TrainReport, Variant};
use crate::error::{Error, Result};
use crate::monitor::{detect, Monitor, StatSeries, Thresholds};
use crate::numerics::Matrix;
use crate::subspace::{fit_kpca, fit_pca, KernelConfig, KpcaModel, PcaModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Kpca,
    Dae,
    DaePca1,
    DaePca2,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Pca,
        Method::Kpca,
        Method::Dae,
        Method::DaePca1,
        Method::DaePca2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Pca => "pca",
            Method::Kpca => "kpca",
            Method::Dae => "dae",
            Method::DaePca1 => "daepca1",
            Method::DaePca2 => "daepca2",
        }
    }

    /// Network variant, or `None` for the closed-form baselines.
    pub fn variant(self) -> Option<Variant> {
        match self {
            Method::Pca | Method::Kpca => None,
            Method::Dae => Some(Variant::Dae),
            Method::DaePca1 => Some(Variant::DaePca1),
            Method::DaePca2 => Some(Variant::DaePca2),
        }
    }

    /// Whether repeated fits with different seeds can differ.
    pub fn is_stochastic(self) -> bool {
        self.variant().is_some()
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

/// A method plus everything needed to fit it. PCA and KPCA use
/// `network.a` components and the same `alpha`/KDE settings as the networks.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodConfig {
    pub method: Method,
    pub network: NetworkConfig,
    pub kernel: KernelConfig,
}

/// A fitted monitor of any kind together with its control limits.
#[derive(Debug, Clone)]
pub enum TrainedModel {
    Pca(PcaModel, Thresholds),
    Kpca(KpcaModel, Thresholds),
    Network(DaePcaModel),
}

impl TrainedModel {
    pub fn monitor(&self) -> &dyn Monitor {
        match self {
            TrainedModel::Pca(m, _) => m,
            TrainedModel::Kpca(m, _) => m,
            TrainedModel::Network(m) => m,
        }
    }

    pub fn thresholds(&self) -> &Thresholds {
        match self {
            TrainedModel::Pca(_, t) | TrainedModel::Kpca(_, t) => t,
            TrainedModel::Network(m) => &m.thresholds,
        }
    }

    pub fn series(&self, x: &Matrix) -> Result<StatSeries> {
        Ok(detect(&self.monitor().statistics_batch(x)?, self.thresholds()))
    }
}

/// Fits `cfg.method` on fault-free data; `seed` overrides the network seed.
pub fn fit_method(
    x_train: &Matrix,
    x_val: &Matrix,
    cfg: &MethodConfig,
    seed: u64,
) -> Result<(TrainedModel, Option<TrainReport>)> {
    let net = &cfg.network;
    let limits = |m: &dyn Monitor| -> Result<Thresholds> {
        Thresholds::fit(&m.statistics_batch(x_train)?, net.alpha, &net.kde)
    };
    match cfg.method.variant() {
        None if cfg.method == Method::Pca => {
            let model = fit_pca(x_train, net.a)?;
            let th = limits(&model)?;
            Ok((TrainedModel::Pca(model, th), None))
        }
        None => {
            let model = fit_kpca(x_train, net.a, cfg.kernel)?;
            let th = limits(&model)?;
            Ok((TrainedModel::Kpca(model, th), None))
        }
        Some(variant) => {
            let mut ncfg = net.clone();
            ncfg.seed = seed;
            ncfg.m = x_train.cols();
            let (model, report) = train(x_train, x_val, &ncfg, variant)?;
            Ok((TrainedModel::Network(model), Some(report)))
        }
    }
}
