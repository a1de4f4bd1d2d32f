use serde::{Deserialize, Serialize};

use crate::autodiff::{AdamConfig, LrSchedule};
use crate::error::{Error, Result};
use crate::monitor::KdeConfig;

/// Which loss the network is trained with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Plain autoencoder: the PCA module is bypassed and `T = Φ̄`.
    Dae,
    /// Reconstruction plus the PCA-module loss.
    DaePca1,
    /// `DaePca1` plus the compactness term `λ₃·‖T‖²_F/N`.
    DaePca2,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Dae => "dae",
            Variant::DaePca1 => "daepca1",
            Variant::DaePca2 => "daepca2",
        }
    }

    pub fn uses_pca(self) -> bool {
        self != Variant::Dae
    }

    pub(crate) fn code(self) -> u8 {
        match self {
            Variant::Dae => 0,
            Variant::DaePca1 => 1,
            Variant::DaePca2 => 2,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Variant> {
        match c {
            0 => Some(Variant::Dae),
            1 => Some(Variant::DaePca1),
            2 => Some(Variant::DaePca2),
            _ => None,
        }
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Variant> {
        match s {
            "dae" => Ok(Variant::Dae),
            "daepca1" => Ok(Variant::DaePca1),
            "daepca2" => Ok(Variant::DaePca2),
            other => Err(Error::InvalidConfig(format!("unknown network variant {other:?}"))),
        }
    }
}

/// Architecture and training settings.
///
/// Loss weights left as `None` resolve at training time to `1/(N·m)`,
/// `1/(N·d)` and `2/a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub m: usize,
    pub d: usize,
    pub a: usize,
    /// Hidden widths between input and feature layer; `None` means `[2m]`.
    pub encoder_hidden: Option<Vec<usize>>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub lambda3: Option<f64>,
    pub iter_max: usize,
    pub seed: u64,
    pub adam: AdamConfig,
    pub lr: LrSchedule,
    pub bn_epsilon: f64,
    pub checkpoint_interval: usize,
    /// Confidence level of the control limits.
    pub alpha: f64,
    pub kde: KdeConfig,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            m: 33,
            d: 33,
            a: 30,
            encoder_hidden: None,
            lambda1: None,
            lambda2: None,
            lambda3: None,
            iter_max: 20_000,
            seed: 0,
            adam: AdamConfig::default(),
            lr: LrSchedule::default(),
            bn_epsilon: 1e-8,
            checkpoint_interval: 100,
            alpha: 0.99,
            kde: KdeConfig::default(),
        }
    }
}

/// Resolved loss weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl NetworkConfig {
    pub fn new(m: usize, d: usize, a: usize) -> NetworkConfig {
        NetworkConfig {
            m,
            d,
            a,
            ..NetworkConfig::default()
        }
    }

    pub fn hidden_widths(&self) -> Vec<usize> {
        self.encoder_hidden
            .clone()
            .unwrap_or_else(|| vec![2 * self.m])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.d == 0 {
            return bad(format!("widths must be positive, got m = {}, d = {}", self.m, self.d));
        }
        if self.a == 0 || self.a > self.d {
            return bad(format!("a = {} must lie in 1..={}", self.a, self.d));
        }
        if self.hidden_widths().contains(&0) {
            return bad("hidden layer widths must be positive".into());
        }
        for (name, v) in [
            ("lambda1", self.lambda1),
            ("lambda2", self.lambda2),
            ("lambda3", self.lambda3),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return bad(format!("{name} must be finite and >= 0, got {v}"));
                }
            }
        }
        if self.iter_max == 0 {
            return bad("iter_max must be at least 1".into());
        }
        if self.checkpoint_interval == 0 {
            return bad("checkpoint_interval must be at least 1".into());
        }
        if !(self.bn_epsilon >= 0.0) {
            return bad(format!("bn_epsilon must be >= 0, got {}", self.bn_epsilon));
        }
        if !(self.lr.base > 0.0 && self.lr.factor > 0.0 && self.lr.period > 0) {
            return bad("learning-rate schedule needs positive base, factor and period".into());
        }
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.adam;
        if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && epsilon > 0.0) {
            return bad("Adam needs betas in [0, 1) and epsilon > 0".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        Ok(())
    }

    /// Loss weights for a training set of `n` rows.
    pub fn weights(&self, n: usize) -> LossWeights {
        let n = n as f64;
        LossWeights {
            lambda1: self.lambda1.unwrap_or(1.0 / (n * self.m as f64)),
            lambda2: self.lambda2.unwrap_or(1.0 / (n * self.d as f64)),
            lambda3: self.lambda3.unwrap_or(2.0 / self.a as f64),
        }
    }
}
