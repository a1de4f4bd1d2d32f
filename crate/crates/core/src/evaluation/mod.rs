//! Fault-detection evaluation: detection/false-alarm rates, detection delay,
//! multi-seed trials with mean ± std aggregation, and online timing.

mod bench;
mod method;
mod rates;
mod trials;

pub use bench::{benchmark_online, save_timing_csv, BenchEntry, TimingReport, MIN_REPETITIONS};
pub use method::{fit_method, Method, MethodConfig, TrainedModel};
pub use rates::{detection_delay, far, fdr, DEFAULT_RUN_LENGTH};
pub use trials::{
    aggregate, evaluate_model, run_trials, save_summaries, save_wide_table, trial_seeds,
    EvalSummary, FaultSummary, MeanStd, Rate, SpaceRates, TrialResult,
};
