use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::dataio::Dataset;
use crate::error::{Error, Result};

use super::bench::TimingReport;
use super::method::{fit_method, Method, MethodConfig};
use super::rates::{detection_delay, far, fdr, DEFAULT_RUN_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceRates {
    pub fdr: f64,
    pub far: f64,
}

/// Detection outcome of one fitted model on one faulty sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub fault_id: u32,
    pub seed: u64,
    /// Principal subspace (T² against its limit).
    pub ps: SpaceRates,
    /// Residual subspace (SPE against its limit).
    pub rs: SpaceRates,
    /// Full space (BIC against 1 − α).
    pub fs: SpaceRates,
    /// Full-space delay in samples, if the fault was ever detected.
    pub detection_delay: Option<usize>,
    /// Wall time to score the sequence (batch path).
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> MeanStd {
        let n = values.len() as f64;
        if values.is_empty() {
            return MeanStd {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

/// Aggregate over trials for one fault.
#[derive(Debug, Clone, PartialEq)]
pub struct FaultSummary {
    pub fault_id: u32,
    pub label: String,
    pub trials: usize,
    pub fdr: [MeanStd; 3],
    pub far: [MeanStd; 3],
    /// Over the trials that detected the fault.
    pub delay: MeanStd,
    pub detected: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub method: Method,
    /// Seeds of the trials that completed, in trial order.
    pub seeds: Vec<u64>,
    /// Seeds whose training failed numerically, with the reason.
    pub excluded: Vec<(u64, String)>,
    pub trials: Vec<TrialResult>,
    pub faults: Vec<FaultSummary>,
    /// Median batch scoring time of the first test set over trials.
    pub timing: Vec<TimingReport>,
}

/// Scores every test set of `ds` with one fitted model.
pub fn evaluate_model(
    model: &super::TrainedModel,
    ds: &Dataset,
    seed: u64,
    run_length: usize,
) -> Result<Vec<TrialResult>> {
    ds.tests
        .iter()
        .map(|t| {
            let start = std::time::Instant::now();
            let s = model.series(&t.data)?;
            let seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
            let rates = |alarms: &[bool]| -> Result<SpaceRates> {
                Ok(SpaceRates {
                    fdr: fdr(alarms, t.onset)?,
                    far: far(alarms, t.onset)?,
                })
            };
            Ok(TrialResult {
                fault_id: t.fault_id,
                seed,
                ps: rates(&s.ps_alarms())?,
                rs: rates(&s.rs_alarms())?,
                fs: rates(s.fs_alarms())?,
                detection_delay: detection_delay(s.fs_alarms(), t.onset, run_length)?,
                seconds,
            })
        })
        .collect()
}

/// Per-fault mean ± std in the order faults first appear.
pub fn aggregate(trials: &[TrialResult], ds: &Dataset) -> Vec<FaultSummary> {
    let mut out = Vec::new();
    for t in &ds.tests {
        let rows: Vec<&TrialResult> = trials.iter().filter(|r| r.fault_id == t.fault_id).collect();
        let col = |f: &dyn Fn(&TrialResult) -> f64| {
            MeanStd::of(&rows.iter().map(|r| f(r)).collect::<Vec<_>>())
        };
        let delays: Vec<f64> = rows
            .iter()
            .filter_map(|r| r.detection_delay.map(|d| d as f64))
            .collect();
        out.push(FaultSummary {
            fault_id: t.fault_id,
            label: t.label.clone(),
            trials: rows.len(),
            fdr: [col(&|r| r.ps.fdr), col(&|r| r.rs.fdr), col(&|r| r.fs.fdr)],
            far: [col(&|r| r.ps.far), col(&|r| r.rs.far), col(&|r| r.fs.far)],
            delay: MeanStd::of(&delays),
            detected: delays.len(),
        });
    }
    out
}

/// Seeds used by [`run_trials`]: `base, base + 1, …`.
pub fn trial_seeds(base: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Fits `n_trials` models with distinct seeds and scores every test set.
///
/// Deterministic baselines are fitted once. Trials whose training fails
/// numerically are excluded and listed in the summary.
pub fn run_trials(
    ds: &Dataset,
    cfg: &MethodConfig,
    n_trials: usize,
    base_seed: u64,
) -> Result<EvalSummary> {
    if n_trials == 0 {
        return Err(Error::InvalidConfig("n_trials must be at least 1".into()));
    }
    ds.validate()?;
    let n = if cfg.method.is_stochastic() { n_trials } else { 1 };
    let seeds = trial_seeds(base_seed, n);
    let outcomes: Vec<(u64, Result<Vec<TrialResult>>)> = seeds
        .par_iter()
        .map(|&seed| {
            let res = fit_method(&ds.train, &ds.val, cfg, seed)
                .and_then(|(model, _)| evaluate_model(&model, ds, seed, DEFAULT_RUN_LENGTH));
            (seed, res)
        })
        .collect();

    let mut summary = EvalSummary {
        method: cfg.method,
        seeds: Vec::new(),
        excluded: Vec::new(),
        trials: Vec::new(),
        faults: Vec::new(),
        timing: Vec::new(),
    };
    for (seed, res) in outcomes {
        match res {
            Ok(rows) => {
                summary.seeds.push(seed);
                summary.trials.extend(rows);
            }
            Err(Error::NumericalFailure(msg)) => {
                warn!("{} trial with seed {seed} excluded: {msg}", cfg.method);
                summary.excluded.push((seed, msg));
            }
            Err(e) => return Err(e),
        }
    }
    if summary.seeds.is_empty() {
        return Err(Error::NumericalFailure(format!(
            "all {n} {} trials failed numerically",
            cfg.method
        )));
    }
    summary.faults = aggregate(&summary.trials, ds);
    if let Some(first) = ds.tests.first() {
        let mut times: Vec<f64> = summary
            .trials
            .iter()
            .filter(|t| t.fault_id == first.fault_id)
            .map(|t| t.seconds)
            .collect();
        times.sort_by(f64::total_cmp);
        summary.timing.push(TimingReport {
            method: cfg.method.name().to_owned(),
            n_train: ds.train.rows(),
            samples: first.data.rows(),
            seconds: times[times.len() / 2],
            repetitions: times.len(),
        });
    }
    Ok(summary)
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    fault: u32,
    label: &'a str,
    trials: usize,
    ps_fdr: String,
    rs_fdr: String,
    fs_fdr: String,
    ps_far: String,
    rs_far: String,
    fs_far: String,
    ps_fdr_mean: f64,
    ps_fdr_std: f64,
    rs_fdr_mean: f64,
    rs_fdr_std: f64,
    fs_fdr_mean: f64,
    fs_fdr_std: f64,
    ps_far_mean: f64,
    ps_far_std: f64,
    rs_far_mean: f64,
    rs_far_std: f64,
    fs_far_mean: f64,
    fs_far_std: f64,
    delay_mean: Option<f64>,
    detected: usize,
}

#[derive(Serialize)]
struct TrialRow {
    method: &'static str,
    seed: u64,
    fault: u32,
    ps_fdr: f64,
    rs_fdr: f64,
    fs_fdr: f64,
    ps_far: f64,
    rs_far: f64,
    fs_far: f64,
    delay: Option<usize>,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::FormatError {
        path: path.to_path_buf(),
        msg: e.to_string(),
    }
}

impl EvalSummary {
    pub fn fault(&self, fault_id: u32) -> Option<&FaultSummary> {
        self.faults.iter().find(|f| f.fault_id == fault_id)
    }

    /// One row per fault: formatted `mean ± std` columns, then raw numbers.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        save_summaries(std::slice::from_ref(self), path)
    }

    pub fn save_trials_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
        for t in &self.trials {
            w.serialize(TrialRow {
                method: self.method.name(),
                seed: t.seed,
                fault: t.fault_id,
                ps_fdr: t.ps.fdr,
                rs_fdr: t.rs.fdr,
                fs_fdr: t.fs.fdr,
                ps_far: t.ps.far,
                rs_far: t.rs.far,
                fs_far: t.fs.far,
                delay: t.detection_delay,
            })
            .map_err(csv_err(path))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Writes several methods' summaries into one table.
pub fn save_summaries(summaries: &[EvalSummary], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for s in summaries {
        for f in &s.faults {
            w.serialize(SummaryRow {
                method: s.method.name(),
                fault: f.fault_id,
                label: &f.label,
                trials: f.trials,
                ps_fdr: f.fdr[0].to_string(),
                rs_fdr: f.fdr[1].to_string(),
                fs_fdr: f.fdr[2].to_string(),
                ps_far: f.far[0].to_string(),
                rs_far: f.far[1].to_string(),
                fs_far: f.far[2].to_string(),
                ps_fdr_mean: f.fdr[0].mean,
                ps_fdr_std: f.fdr[0].std,
                rs_fdr_mean: f.fdr[1].mean,
                rs_fdr_std: f.fdr[1].std,
                fs_fdr_mean: f.fdr[2].mean,
                fs_fdr_std: f.fdr[2].std,
                ps_far_mean: f.far[0].mean,
                ps_far_std: f.far[0].std,
                rs_far_mean: f.far[1].mean,
                rs_far_std: f.far[1].std,
                fs_far_mean: f.far[2].mean,
                fs_far_std: f.far[2].std,
                delay_mean: (f.detected > 0).then_some(f.delay.mean),
                detected: f.detected,
            })
            .map_err(csv_err(path))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Which rate a wide table reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    Fdr,
    Far,
}

/// One row per fault, `PS/RS/FS` columns per method, as `mean ± std`.
///
/// Faults are taken from the first summary; methods missing a fault get
/// empty cells.
pub fn save_wide_table(summaries: &[EvalSummary], rate: Rate, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    let mut header = vec!["fault".to_string(), "label".to_string()];
    for s in summaries {
        for space in ["ps", "rs", "fs"] {
            header.push(format!("{}_{space}", s.method.name()));
        }
    }
    w.write_record(&header).map_err(csv_err(path))?;
    let Some(first) = summaries.first() else {
        return w.flush().map_err(|e| Error::io(path, e));
    };
    for f in &first.faults {
        let mut row = vec![f.fault_id.to_string(), f.label.clone()];
        for s in summaries {
            match s.fault(f.fault_id) {
                Some(g) if g.trials > 0 => {
                    let cells = match rate {
                        Rate::Fdr => &g.fdr,
                        Rate::Far => &g.far,
                    };
                    row.extend(cells.iter().map(|c| c.to_string()));
                }
                _ => row.extend(std::iter::repeat(String::new()).take(3)),
            }
        }
        w.write_record(&row).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
