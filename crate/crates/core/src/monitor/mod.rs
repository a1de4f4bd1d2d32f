//! Detection statistics, KDE control limits and Bayesian fusion.

mod kde;
mod stats;

pub use kde::{kde_threshold, BandwidthRule, GaussianKde, KdeConfig, MIN_KDE_SAMPLES};
pub use stats::{
    bic, detect, hotelling_t2, monitor_series, spe, Monitor, Precision, StatSeries, Thresholds,
    STAT_CLAMP,
};
