use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum BandwidthRule {
    /// `h = 1.06 · σ̂ · N^(−1/5)`.
    Silverman,
    Fixed,
}

/// Parzen estimator settings for control limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KdeConfig {
    pub bandwidth_rule: BandwidthRule,
    pub fixed_bandwidth: Option<f64>,
    /// Resolution of the initial bracketing scan.
    pub grid_points: usize,
    pub search_tolerance: f64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        Self {
            bandwidth_rule: BandwidthRule::Silverman,
            fixed_bandwidth: None,
            grid_points: 64,
            search_tolerance: 1e-8,
        }
    }
}

pub const MIN_KDE_SAMPLES: usize = 30;

/// Gaussian-kernel density estimate of a univariate sample.
#[derive(Debug, Clone)]
pub struct GaussianKde {
    samples: Vec<f64>,
    bandwidth: f64,
}

fn normal_cdf(u: f64) -> f64 {
    0.5 * libm::erfc(-u / std::f64::consts::SQRT_2)
}

impl GaussianKde {
    pub fn new(values: &[f64], cfg: &KdeConfig) -> Result<GaussianKde> {
        if cfg.grid_points < 64 {
            return Err(Error::InvalidConfig(format!(
                "KDE grid needs at least 64 points, got {}",
                cfg.grid_points
            )));
        }
        if !(cfg.search_tolerance > 0.0) {
            return Err(Error::InvalidConfig("KDE search tolerance must be > 0".into()));
        }
        if values.len() < MIN_KDE_SAMPLES {
            return Err(Error::DegenerateSample(format!(
                "KDE needs at least {MIN_KDE_SAMPLES} values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::DegenerateSample("sample contains non-finite values".into()));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(Error::DegenerateSample("sample is constant".into()));
        }
        let bandwidth = match cfg.bandwidth_rule {
            BandwidthRule::Silverman => 1.06 * sd * n.powf(-0.2),
            BandwidthRule::Fixed => match cfg.fixed_bandwidth {
                Some(h) if h > 0.0 => h,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "fixed bandwidth rule needs a positive bandwidth, got {other:?}"
                    )))
                }
            },
        };
        let mut samples = values.to_vec();
        samples.sort_by(f64::total_cmp);
        Ok(GaussianKde { samples, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let h = self.bandwidth;
        let sum: f64 = self.samples.iter().map(|&s| normal_cdf((x - s) / h)).sum();
        sum / self.samples.len() as f64
    }

    /// Smallest `x` with `cdf(x) ≥ alpha`, to within `cfg.search_tolerance`.
    pub fn quantile(&self, alpha: f64, cfg: &KdeConfig) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        let h = self.bandwidth;
        let mut lo = self.samples[0];
        let mut hi = self.samples[self.samples.len() - 1] + 5.0 * h;
        while self.cdf(lo) >= alpha {
            lo -= 5.0 * h;
        }
        while self.cdf(hi) < alpha {
            hi += 5.0 * h;
        }
        // coarse scan narrows the bracket before bisection
        let step = (hi - lo) / cfg.grid_points as f64;
        let mut prev = lo;
        for k in 1..=cfg.grid_points {
            let x = lo + step * k as f64;
            if self.cdf(x) >= alpha {
                lo = prev;
                hi = x;
                break;
            }
            prev = x;
        }
        while hi - lo > cfg.search_tolerance * hi.abs().max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) >= alpha {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Control limit at confidence `alpha` from a fault-free statistic sample.
pub fn kde_threshold(values: &[f64], alpha: f64, cfg: &KdeConfig) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    GaussianKde::new(values, cfg)?.quantile(alpha, cfg)
}
