use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use daepca::daepca::{load_model, save_model, MAGIC};
use daepca::dataio::{load_csv, load_dataset, load_te, save_dataset, synthesize, Dataset};
use daepca::evaluation::{
    benchmark_online, far, fdr, fit_method, run_trials, save_summaries, save_timing_csv,
    save_wide_table, BenchEntry, Method, Rate, TrainedModel,
};
use daepca::monitor::Thresholds;
use daepca::subspace::{KpcaModel, PcaModel};
use log::info;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::plot::trace_svg;

pub const NETWORK_MODEL_FILE: &str = "model.dpca";
pub const BASELINE_MODEL_FILE: &str = "model.json";

/// On-disk form of the closed-form baselines.
#[derive(Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase", deny_unknown_fields)]
enum BaselineFile {
    Pca {
        model: PcaModel,
        thresholds: Thresholds,
    },
    Kpca {
        model: KpcaModel,
        thresholds: Thresholds,
    },
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn load_data(cfg: &RunConfig, data: Option<&Path>) -> Result<Dataset> {
    let ds = match (&cfg.data.te_dir, data) {
        (Some(te), None) => load_te(te, &cfg.data.te)?,
        (_, dir) => {
            let dir = dir.unwrap_or(&cfg.data.dir);
            load_dataset(dir).with_context(|| format!("loading dataset from {}", dir.display()))?
        }
    };
    info!(
        "dataset: {} variables, {} train / {} val rows, {} test sets",
        ds.variables(),
        ds.train.rows(),
        ds.val.rows(),
        ds.tests.len()
    );
    Ok(ds)
}

pub fn synth(cfg: &RunConfig, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut sc = cfg.synth.clone();
    if let Some(s) = seed {
        sc.seed = s;
    }
    let ds = synthesize(&sc)?;
    save_dataset(&ds, out)?;
    info!(
        "wrote {} train, {} val and {} test sequences to {}",
        ds.train.rows(),
        ds.val.rows(),
        ds.tests.len(),
        out.display()
    );
    Ok(())
}

/// Writes a fitted model; returns the model path.
pub fn save_trained(model: &TrainedModel, dir: &Path) -> Result<PathBuf> {
    let (path, text) = match model {
        TrainedModel::Network(m) => {
            let path = dir.join(NETWORK_MODEL_FILE);
            save_model(m, &path)?;
            return Ok(path);
        }
        TrainedModel::Pca(model, th) => (
            dir.join(BASELINE_MODEL_FILE),
            serde_json::to_string(&BaselineFile::Pca {
                model: model.clone(),
                thresholds: *th,
            })?,
        ),
        TrainedModel::Kpca(model, th) => (
            dir.join(BASELINE_MODEL_FILE),
            serde_json::to_string(&BaselineFile::Kpca {
                model: model.clone(),
                thresholds: *th,
            })?,
        ),
    };
    std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

/// Reads either model format, telling them apart by the container magic.
pub fn load_trained(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(MAGIC) {
        return Ok(TrainedModel::Network(load_model(path)?));
    }
    let file: BaselineFile = serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is neither a network container nor a baseline model", path.display()))?;
    Ok(match file {
        BaselineFile::Pca { model, thresholds } => TrainedModel::Pca(model, thresholds),
        BaselineFile::Kpca { model, thresholds } => TrainedModel::Kpca(model, thresholds),
    })
}

pub fn train(cfg: &RunConfig, seed: u64, data: Option<&Path>, out: &Path) -> Result<()> {
    let ds = load_data(cfg, data)?;
    let mc = cfg.method_config(cfg.method);
    info!("training {} (seed {seed})", cfg.method);
    let (model, report) = fit_method(&ds.train, &ds.val, &mc, seed)?;
    create_dir(out)?;
    let path = save_trained(&model, out)?;
    let th = model.thresholds();
    info!(
        "limits at alpha = {}: T² {:.4}, SPE {:.4}",
        th.alpha, th.j_t2, th.j_spe
    );
    if let Some(r) = report {
        let csv = out.join("train_report.csv");
        r.save_csv(&csv)?;
        info!(
            "selected iteration {} (validation error {:.6}); report in {}",
            r.selected_iteration,
            r.selected_val_error(),
            csv.display()
        );
    }
    println!("{}", path.display());
    Ok(())
}

pub struct DetectArgs<'a> {
    pub model: &'a Path,
    pub input: Option<&'a Path>,
    pub fault: Option<u32>,
    pub onset: Option<usize>,
    pub data: Option<&'a Path>,
}

pub fn detect(cfg: &RunConfig, args: DetectArgs<'_>, out: &Path) -> Result<()> {
    let model = load_trained(args.model)?;
    let (x, onset, stem) = match (args.input, args.fault) {
        (Some(path), None) => {
            let (x, _) = load_csv(path)?;
            let stem = path
                .file_stem()
                .map_or("input".into(), |s| s.to_string_lossy().into_owned());
            (x, args.onset, stem)
        }
        (None, Some(id)) => {
            let ds = load_data(cfg, args.data)?;
            let Some(t) = ds.test(id) else {
                bail!("dataset has no test set for fault {id}");
            };
            (t.data.clone(), args.onset.or(Some(t.onset)), format!("fault_{id:02}"))
        }
        _ => bail!("give exactly one of --input or --fault"),
    };
    if x.cols() != model.monitor().variables() {
        bail!(
            "input has {} columns but the model expects {}",
            x.cols(),
            model.monitor().variables()
        );
    }
    let series = model.series(&x)?;
    create_dir(out)?;
    let csv = out.join(format!("stats_{stem}.csv"));
    series.save_csv(&csv)?;
    let svg = out.join(format!("trace_{stem}.svg"));
    let title = format!("Detection results: {stem}");
    std::fs::write(&svg, trace_svg(&series, onset, &title))
        .with_context(|| format!("writing {}", svg.display()))?;
    let alarms = series.fs_alarms();
    let frac = 100.0 * alarms.iter().filter(|&&a| a).count() as f64 / alarms.len().max(1) as f64;
    println!("samples: {}", alarms.len());
    println!("alarm fraction: {frac:.2}%");
    if let Some(k) = onset.filter(|&k| k > 0 && k < alarms.len()) {
        println!("FS FDR: {:.2}%", fdr(alarms, k)?);
        println!("FS FAR: {:.2}%", far(alarms, k)?);
    }
    info!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, seed: u64, data: Option<&Path>, out: &Path) -> Result<()> {
    let ds = load_data(cfg, data)?;
    let mut summaries = Vec::new();
    for method in cfg.eval_methods() {
        info!("evaluating {method} over {} trial(s)", cfg.trials);
        let s = run_trials(&ds, &cfg.method_config(method), cfg.trials, seed)?;
        for (seed, why) in &s.excluded {
            println!("{method}: seed {seed} excluded ({why})");
        }
        summaries.push(s);
    }
    create_dir(out)?;
    save_summaries(&summaries, out.join("eval_summary.csv"))?;
    save_wide_table(&summaries, Rate::Fdr, out.join("fdr_table.csv"))?;
    save_wide_table(&summaries, Rate::Far, out.join("far_table.csv"))?;
    let timing: Vec<_> = summaries.iter().flat_map(|s| s.timing.clone()).collect();
    save_timing_csv(&timing, out.join("eval_timing.csv"))?;
    for s in &summaries {
        s.save_trials_csv(out.join(format!("eval_trials_{}.csv", s.method)))?;
    }

    println!("{:<8} {:>5} {:<16} {:>16} {:>16} {:>16}", "method", "fault", "label", "FS FDR", "FS FAR", "delay");
    for s in &summaries {
        for f in &s.faults {
            let delay = if f.detected > 0 {
                format!("{:.1}", f.delay.mean)
            } else {
                "-".into()
            };
            println!(
                "{:<8} {:>5} {:<16} {:>16} {:>16} {:>16}",
                s.method.name(),
                f.fault_id,
                f.label,
                f.fdr[2].to_string(),
                f.far[2].to_string(),
                delay
            );
        }
    }
    info!("tables written to {}", out.display());
    Ok(())
}

pub fn bench(cfg: &RunConfig, seed: u64, data: Option<&Path>, out: &Path) -> Result<()> {
    let ds = load_data(cfg, data)?;
    let test = match cfg.bench.fault {
        Some(id) => ds.test(id).with_context(|| format!("no test set for fault {id}"))?,
        None => ds.tests.first().context("dataset has no test sets")?,
    };
    let sizes = if cfg.bench.n_train.is_empty() {
        vec![ds.train.rows()]
    } else {
        cfg.bench.n_train.clone()
    };
    let mut fitted: Vec<(Method, usize, TrainedModel)> = Vec::new();
    for &n in &sizes {
        if n == 0 || n > ds.train.rows() {
            bail!("bench.n_train entry {n} outside 1..={}", ds.train.rows());
        }
        let x = ds.train.row_range(0, n)?;
        for &method in &cfg.bench.methods {
            info!("fitting {method} on {n} rows");
            let (model, _) = fit_method(&x, &ds.val, &cfg.method_config(method), seed)?;
            fitted.push((method, n, model));
        }
    }
    let entries: Vec<BenchEntry<'_>> = fitted
        .iter()
        .map(|(method, n, model)| BenchEntry {
            name: method.name().to_owned(),
            model: model.monitor(),
            n_train: *n,
        })
        .collect();
    let reports = benchmark_online(&entries, &test.data, cfg.bench.repetitions)?;
    create_dir(out)?;
    let csv = out.join("timing.csv");
    save_timing_csv(&reports, &csv)?;
    println!("{:<8} {:>7} {:>8} {:>12}", "method", "n_train", "samples", "seconds");
    for r in &reports {
        println!("{:<8} {:>7} {:>8} {:>12.6}", r.method, r.n_train, r.samples, r.seconds);
    }
    info!("wrote {}", csv.display());
    Ok(())
}
