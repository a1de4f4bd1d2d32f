use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::{Dataset, TestSet};

/// Where the monitored variables live in Tennessee Eastman text files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeLayout {
    /// Fields per sample in every file.
    pub fields: usize,
    /// Zero-based indices of the selected variables.
    pub columns: Vec<usize>,
    pub names: Vec<String>,
    /// Fault-free files, stacked in this order before splitting.
    pub normal_files: Vec<String>,
    /// Test file name with `{id}` replaced by the two-digit fault number.
    pub test_pattern: String,
    pub faults: Vec<u32>,
    /// Share of fault-free rows, in file order, used for training.
    pub train_fraction: f64,
    pub onset: usize,
}

impl Default for TeLayout {
    fn default() -> Self {
        // XMEAS(1..=22) are fields 0..22, XMV(1..=11) are fields 41..52
        let columns: Vec<usize> = (0..22).chain(41..52).collect();
        let names = (1..=22)
            .map(|i| format!("XMEAS{i}"))
            .chain((1..=11).map(|i| format!("XMV{i}")))
            .collect();
        Self {
            fields: 52,
            columns,
            names,
            normal_files: vec!["d00.dat".into(), "d00_te.dat".into()],
            test_pattern: "d{id}_te.dat".into(),
            faults: (1..=21).collect(),
            train_fraction: 0.8,
            onset: 160,
        }
    }
}

impl TeLayout {
    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() || self.columns.iter().any(|&c| c >= self.fields) {
            return Err(Error::InvalidConfig(format!(
                "layout columns must be nonempty and below {}",
                self.fields
            )));
        }
        if self.names.len() != self.columns.len() {
            return Err(Error::InvalidConfig(format!(
                "layout has {} columns but {} names",
                self.columns.len(),
                self.names.len()
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.normal_files.is_empty() {
            return Err(Error::InvalidConfig("layout lists no fault-free files".into()));
        }
        Ok(())
    }

    pub fn test_file(&self, id: u32) -> String {
        self.test_pattern.replace("{id}", &format!("{id:02}"))
    }
}

/// Parses a whitespace-delimited numeric file into rows of `fields` values.
///
/// A file stored variable-major (exactly `fields` lines of equal length,
/// as the classic `d00.dat` is) is transposed.
pub fn read_te_file(path: &Path, fields: usize) -> Result<Matrix> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|tok| match tok.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(Error::ParseError {
                    path: path.to_path_buf(),
                    line: line_no,
                    msg: format!("invalid numeric token {tok:?}"),
                }),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line_no, values));
    }
    if rows.is_empty() {
        return Err(Error::FormatError {
            path: path.to_path_buf(),
            msg: "file contains no samples".into(),
        });
    }
    let width = rows[0].1.len();
    let transposed = width != fields
        && rows.len() == fields
        && rows.iter().all(|(_, r)| r.len() == width);
    if transposed {
        let m = Matrix::from_fn(fields, width, |i, j| rows[i].1[j]);
        return Ok(m.transpose());
    }
    if let Some((line, r)) = rows.iter().find(|(_, r)| r.len() != fields) {
        return Err(Error::FormatError {
            path: path.to_path_buf(),
            msg: format!("line {line} has {} fields, expected {fields}", r.len()),
        });
    }
    let data = rows.into_iter().flat_map(|(_, r)| r).collect::<Vec<_>>();
    Matrix::from_vec(data.len() / fields, fields, data)
}

/// Loads the fault-free and faulty TE files found in `dir`.
///
/// The first normal file is required; further normal files and test files
/// that are absent are skipped with a warning.
pub fn load_te(dir: impl AsRef<Path>, layout: &TeLayout) -> Result<Dataset> {
    layout.validate()?;
    let dir = dir.as_ref();
    let select = |m: &Matrix| m.select_columns(&layout.columns);

    let mut normal: Option<Matrix> = None;
    for (k, name) in layout.normal_files.iter().enumerate() {
        let path = dir.join(name);
        if k > 0 && !path.exists() {
            warn!("fault-free file {} not found, skipped", path.display());
            continue;
        }
        let part = select(&read_te_file(&path, layout.fields)?)?;
        normal = Some(match normal {
            Some(prev) => prev.vstack(&part)?,
            None => part,
        });
    }
    let normal = normal.expect("first normal file is required");
    let n = normal.rows();
    let n_train = (n as f64 * layout.train_fraction).round() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::FormatError {
            path: dir.join(&layout.normal_files[0]),
            msg: format!("{n} fault-free rows are too few to split"),
        });
    }

    let mut tests = Vec::new();
    for &id in &layout.faults {
        let path: PathBuf = dir.join(layout.test_file(id));
        if !path.exists() {
            warn!("test file {} not found, skipped", path.display());
            continue;
        }
        let data = select(&read_te_file(&path, layout.fields)?)?;
        if layout.onset >= data.rows() {
            return Err(Error::FormatError {
                path,
                msg: format!("{} rows leave no samples after onset {}", data.rows(), layout.onset),
            });
        }
        tests.push(TestSet {
            fault_id: id,
            label: format!("IDV({id})"),
            data,
            onset: layout.onset,
        });
    }

    let ds = Dataset {
        train: normal.row_range(0, n_train)?,
        val: normal.row_range(n_train, n)?,
        tests,
        variable_names: layout.names.clone(),
    };
    ds.validate()?;
    Ok(ds)
}

fn write_rows(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::new();
    for i in 0..m.rows() {
        let line: Vec<String> = m.row(i).iter().map(|v| format!("{v:e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes a dataset as TE-style files; unselected fields are zero.
///
/// Fault-free rows go to the first normal file; faulty sets use the test
/// pattern with their fault id.
pub fn save_te(ds: &Dataset, dir: impl AsRef<Path>, layout: &TeLayout) -> Result<()> {
    layout.validate()?;
    ds.validate()?;
    let dir = dir.as_ref();
    if ds.variables() != layout.columns.len() {
        return Err(Error::InvalidShape(format!(
            "dataset has {} variables, layout selects {}",
            ds.variables(),
            layout.columns.len()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let widen = |m: &Matrix| {
        let mut full = Matrix::zeros(m.rows(), layout.fields);
        for i in 0..m.rows() {
            for (k, &c) in layout.columns.iter().enumerate() {
                full.row_mut(i)[c] = m.row(i)[k];
            }
        }
        full
    };
    write_rows(&dir.join(&layout.normal_files[0]), &widen(&ds.train.vstack(&ds.val)?))?;
    for t in &ds.tests {
        write_rows(&dir.join(layout.test_file(t.fault_id)), &widen(&t.data))?;
    }
    Ok(())
}
