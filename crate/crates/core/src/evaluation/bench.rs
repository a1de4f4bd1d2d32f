use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::monitor::Monitor;
use crate::numerics::Matrix;

pub const MIN_REPETITIONS: usize = 5;

/// Median wall time to score one test sequence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingReport {
    pub method: String,
    /// Training rows behind the model (the KPCA cost driver).
    pub n_train: usize,
    pub samples: usize,
    pub seconds: f64,
    pub repetitions: usize,
}

/// A model to time, with a display name and its training-set size.
pub struct BenchEntry<'a> {
    pub name: String,
    pub model: &'a dyn Monitor,
    pub n_train: usize,
}

fn score_all(model: &dyn Monitor, x: &Matrix) -> Result<f64> {
    // fold the results so the work cannot be optimized away
    let mut acc = 0.0;
    for i in 0..x.rows() {
        let (t2, spe) = model.statistics(x.row(i))?;
        acc += t2 + spe;
    }
    Ok(acc)
}

/// Times online (T², SPE) scoring of `test`, sample by sample.
///
/// Each model is warmed up with one untimed pass; runs are sequential on
/// the calling thread.
pub fn benchmark_online(
    entries: &[BenchEntry<'_>],
    test: &Matrix,
    repetitions: usize,
) -> Result<Vec<TimingReport>> {
    if repetitions < MIN_REPETITIONS {
        return Err(Error::InvalidConfig(format!(
            "timing needs at least {MIN_REPETITIONS} repetitions, got {repetitions}"
        )));
    }
    let mut out = Vec::with_capacity(entries.len());
    for e in entries {
        std::hint::black_box(score_all(e.model, test)?);
        let mut times: Vec<f64> = (0..repetitions)
            .map(|_| {
                let start = Instant::now();
                let acc = score_all(e.model, test);
                let dt = start.elapsed().as_secs_f64();
                std::hint::black_box(acc).map(|_| dt)
            })
            .collect::<Result<_>>()?;
        times.sort_by(f64::total_cmp);
        let mid = times.len() / 2;
        let seconds = if times.len() % 2 == 1 {
            times[mid]
        } else {
            0.5 * (times[mid - 1] + times[mid])
        };
        out.push(TimingReport {
            method: e.name.clone(),
            n_train: e.n_train,
            samples: test.rows(),
            seconds: seconds.max(f64::MIN_POSITIVE),
            repetitions,
        });
    }
    Ok(out)
}

pub fn save_timing_csv(reports: &[TimingReport], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let fmt = |e: csv::Error| Error::FormatError {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(fmt)?;
    for r in reports {
        w.serialize(r).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
