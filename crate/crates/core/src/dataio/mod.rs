//! Dataset handling: Tennessee Eastman text files, a synthetic surrogate
//! process with injectable faults, and CSV import/export.

mod dir;
mod synth;
mod te;

use std::path::Path;

pub use dir::{load_dataset, save_dataset, test_file_name, MANIFEST};
pub use synth::{inject_fault, synthesize, FaultKind, FaultSpec, SynthConfig};
pub use te::{load_te, read_te_file, save_te, TeLayout};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// One faulty sequence whose first `onset` rows are fault-free.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub fault_id: u32,
    pub label: String,
    pub data: Matrix,
    pub onset: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train: Matrix,
    pub val: Matrix,
    pub tests: Vec<TestSet>,
    pub variable_names: Vec<String>,
}

impl Dataset {
    pub fn variables(&self) -> usize {
        self.train.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.variables();
        if self.train.rows() == 0 || self.val.rows() == 0 {
            return Err(Error::InvalidShape("train and validation sets must be nonempty".into()));
        }
        if self.val.cols() != m || self.tests.iter().any(|t| t.data.cols() != m) {
            return Err(Error::InvalidShape("dataset matrices differ in column count".into()));
        }
        if self.variable_names.len() != m {
            return Err(Error::InvalidShape(format!(
                "{} variable names for {m} columns",
                self.variable_names.len()
            )));
        }
        if let Some(t) = self.tests.iter().find(|t| t.onset >= t.data.rows()) {
            return Err(Error::InvalidShape(format!(
                "onset {} of test {} is outside its {} rows",
                t.onset,
                t.label,
                t.data.rows()
            )));
        }
        let finite = self.train.is_finite()
            && self.val.is_finite()
            && self.tests.iter().all(|t| t.data.is_finite());
        if !finite {
            return Err(Error::NumericalFailure("dataset contains non-finite values".into()));
        }
        Ok(())
    }

    pub fn test(&self, fault_id: u32) -> Option<&TestSet> {
        self.tests.iter().find(|t| t.fault_id == fault_id)
    }
}

/// Writes `m` with a header row of `names`.
pub fn save_csv(m: &Matrix, names: &[String], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if names.len() != m.cols() {
        return Err(Error::InvalidShape(format!(
            "{} names for {} columns",
            names.len(),
            m.cols()
        )));
    }
    let fmt = |e: csv::Error| Error::FormatError {
        path: path.to_path_buf(),
        msg: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::FormatError {
            path: path.to_path_buf(),
            msg: format!("{other:?}"),
        },
    })?;
    w.write_record(names).map_err(fmt)?;
    for i in 0..m.rows() {
        w.serialize(m.row(i)).map_err(fmt)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a headed numeric CSV; a header-only file gives zero rows.
pub fn load_csv(path: impl AsRef<Path>) -> Result<(Matrix, Vec<String>)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = r.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => {
            return Err(Error::FormatError {
                path: path.to_path_buf(),
                msg: e.to_string(),
            })
        }
        None => {
            return Err(Error::FormatError {
                path: path.to_path_buf(),
                msg: "empty file, expected a header row".into(),
            })
        }
    };
    let names: Vec<String> = header.iter().map(str::to_owned).collect();
    let mut data = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| Error::FormatError {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != names.len() {
            return Err(Error::FormatError {
                path: path.to_path_buf(),
                msg: format!("line {line} has {} fields, header has {}", rec.len(), names.len()),
            });
        }
        for tok in rec.iter() {
            match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => data.push(v),
                _ => {
                    return Err(Error::ParseError {
                        path: path.to_path_buf(),
                        line,
                        msg: format!("invalid numeric token {tok:?}"),
                    })
                }
            }
        }
    }
    let rows = data.len() / names.len().max(1);
    Ok((Matrix::from_vec(rows, names.len(), data)?, names))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("v{i}")).collect()
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Matrix::from_fn(10, 3, |_, _| rng.gen_range(-1e3..1e3) / 7.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        save_csv(&m, &names(3), &path).unwrap();
        let (back, header) = load_csv(&path).unwrap();
        assert_eq!(header, names(3));
        assert_eq!(back, m);
    }

    #[test]
    fn csv_edges() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("empty.csv");
        std::fs::write(&empty, "").unwrap();
        assert!(matches!(load_csv(&empty), Err(Error::FormatError { .. })));

        let header_only = dir.path().join("h.csv");
        std::fs::write(&header_only, "a,b,c\n").unwrap();
        let (m, n) = load_csv(&header_only).unwrap();
        assert_eq!(m.shape(), (0, 3));
        assert_eq!(n, vec!["a", "b", "c"]);

        let bad = dir.path().join("bad.csv");
        std::fs::write(&bad, "a,b\n1,2\n3,x\n").unwrap();
        assert!(matches!(load_csv(&bad), Err(Error::ParseError { line: 3, .. })));
        assert!(matches!(
            load_csv(dir.path().join("nope.csv")),
            Err(Error::FileNotFound(_))
        ));
    }

    #[test]
    fn te_layout_round_trip() {
        let cfg = SynthConfig {
            observed_dim: 33,
            n_train: 80,
            n_val: 20,
            n_test: 200,
            faults: vec![FaultSpec {
                kind: FaultKind::Step,
                magnitude: 1.0,
                onset: 160,
                sensors: vec![0],
            }],
            ..SynthConfig::default()
        };
        let mut ds = synthesize(&cfg).unwrap();
        let layout = TeLayout::default();
        ds.variable_names = layout.names.clone();
        let dir = tempfile::tempdir().unwrap();
        save_te(&ds, dir.path(), &layout).unwrap();
        let back = load_te(dir.path(), &layout).unwrap();
        assert_eq!(back.train.shape(), ds.train.shape());
        assert_eq!(back.tests.len(), 1);
        assert_eq!(back.tests[0].onset, 160);
        let diff = back.train.sub(&ds.train).unwrap().max_abs();
        assert!(diff <= 1e-12, "{diff}");
    }

    #[test]
    fn dataset_dir_round_trip() {
        let cfg = SynthConfig {
            observed_dim: 5,
            n_train: 40,
            n_val: 10,
            n_test: 30,
            faults: vec![FaultSpec {
                kind: FaultKind::Sticking,
                magnitude: 0.0,
                onset: 12,
                sensors: vec![3],
            }],
            seed: 9,
            ..SynthConfig::default()
        };
        let ds = synthesize(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        assert!(dir.path().join(test_file_name(1)).exists());
        assert_eq!(load_dataset(dir.path()).unwrap(), ds);
        std::fs::remove_file(dir.path().join(MANIFEST)).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::FileNotFound(_))));
    }
}
