use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{load_csv, save_csv, Dataset, TestSet};

/// Index file of a dataset directory.
pub const MANIFEST: &str = "dataset.json";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    train: String,
    val: String,
    tests: Vec<TestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TestEntry {
    fault_id: u32,
    label: String,
    onset: usize,
    file: String,
}

/// File name used for a test sequence in a dataset directory.
pub fn test_file_name(fault_id: u32) -> String {
    format!("test_{fault_id:02}.csv")
}

/// Writes `train.csv`, `val.csv`, one CSV per test set and a manifest.
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    ds.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let names = &ds.variable_names;
    save_csv(&ds.train, names, dir.join("train.csv"))?;
    save_csv(&ds.val, names, dir.join("val.csv"))?;
    let mut tests = Vec::with_capacity(ds.tests.len());
    for t in &ds.tests {
        let file = test_file_name(t.fault_id);
        save_csv(&t.data, names, dir.join(&file))?;
        tests.push(TestEntry {
            fault_id: t.fault_id,
            label: t.label.clone(),
            onset: t.onset,
            file,
        });
    }
    let manifest = Manifest {
        train: "train.csv".into(),
        val: "val.csv".into(),
        tests,
    };
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}

/// Reads a directory written by [`save_dataset`].
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    let dir = dir.as_ref();
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::FormatError {
        path: path.clone(),
        msg: e.to_string(),
    })?;
    let (train, variable_names) = load_csv(dir.join(&manifest.train))?;
    let (val, val_names) = load_csv(dir.join(&manifest.val))?;
    let mismatch = |file: &str| Error::FormatError {
        path: dir.join(file),
        msg: "header differs from train.csv".into(),
    };
    if val_names != variable_names {
        return Err(mismatch(&manifest.val));
    }
    let mut tests = Vec::with_capacity(manifest.tests.len());
    for t in manifest.tests {
        let (data, names) = load_csv(dir.join(&t.file))?;
        if names != variable_names {
            return Err(mismatch(&t.file));
        }
        tests.push(TestSet {
            fault_id: t.fault_id,
            label: t.label,
            data,
            onset: t.onset,
        });
    }
    let ds = Dataset {
        train,
        val,
        tests,
        variable_names,
    };
    ds.validate()?;
    Ok(ds)
}
