//! Binary model container.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! b"DPCA1"                      magic
//! u8                            variant (0 dae, 1 daepca1, 2 daepca2)
//! u64                           number of arrays that follow
//! { u64 rows, u64 cols, f64[rows*cols] row-major }*
//! ```
//!
//! Arrays appear in this order: every network tensor, frozen-BN mean and
//! std, projection, covariance, input mean and std, and a 1×3 row holding
//! `[j_t2, j_spe, alpha]`. The network configuration goes to a JSON sidecar
//! next to the container (`<path>.json`).

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::monitor::Thresholds;
use crate::numerics::{ColumnStats, Matrix};

use super::config::{NetworkConfig, Variant};
use super::model::DaePcaModel;
use super::network::Network;

pub const MAGIC: &[u8; 5] = b"DPCA1";

/// Sidecar path for a model container.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn put_array(out: &mut Vec<u8>, m: &Matrix) {
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

/// Serializes the model body (without the sidecar).
pub fn encode_model(model: &DaePcaModel) -> Vec<u8> {
    let row = |v: &[f64]| Matrix::row_vector(v);
    let th = &model.thresholds;
    let mut arrays: Vec<Matrix> = model.network.tensors().to_vec();
    arrays.extend([
        row(&model.frozen_bn.mean),
        row(&model.frozen_bn.std),
        model.projection.clone(),
        model.lambda.clone(),
        row(&model.input_stats.mean),
        row(&model.input_stats.std),
        row(&[th.j_t2, th.j_spe, th.alpha]),
    ]);
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(model.variant.code());
    out.extend_from_slice(&(arrays.len() as u64).to_le_bytes());
    for a in &arrays {
        put_array(&mut out, a);
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn fail(&self, msg: impl Into<String>) -> Error {
        Error::FormatError {
            path: self.path.to_path_buf(),
            msg: format!("{} (byte offset {})", msg.into(), self.pos),
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail("truncated model file"));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn array(&mut self) -> Result<Matrix> {
        let rows = self.u64()? as usize;
        let cols = self.u64()? as usize;
        let count = rows
            .checked_mul(cols)
            .filter(|c| c.checked_mul(8).is_some_and(|b| b <= self.bytes.len()))
            .ok_or_else(|| self.fail(format!("implausible array shape {rows}x{cols}")))?;
        let raw = self.take(count * 8)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Matrix::from_vec(rows, cols, data)
    }
}

/// Rebuilds a model from a container body and its configuration.
pub fn decode_model(bytes: &[u8], config: NetworkConfig, path: &Path) -> Result<DaePcaModel> {
    config.validate()?;
    let mut r = Reader {
        bytes,
        pos: 0,
        path,
    };
    if r.take(MAGIC.len())? != MAGIC {
        return Err(r.fail("missing DPCA1 magic"));
    }
    let code = r.take(1)?[0];
    let variant = Variant::from_code(code).ok_or_else(|| r.fail(format!("unknown variant {code}")))?;
    let count = r.u64()? as usize;
    if count > bytes.len() / 16 {
        return Err(r.fail(format!("implausible array count {count}")));
    }
    let mut arrays = (0..count).map(|_| r.array()).collect::<Result<Vec<_>>>()?;
    if r.pos != bytes.len() {
        return Err(r.fail("trailing bytes after last array"));
    }
    if arrays.len() < 7 {
        return Err(r.fail(format!("expected at least 7 arrays, found {}", arrays.len())));
    }
    let tail = arrays.split_off(arrays.len() - 7);
    let network = Network::from_tensors(&config, arrays)?;
    let [bn_mean, bn_std, projection, lambda, in_mean, in_std, th]: [Matrix; 7] =
        tail.try_into().expect("seven arrays");
    let stats = |mean: Matrix, std: Matrix| ColumnStats {
        mean: mean.into_vec(),
        std: std.into_vec(),
    };
    if th.shape() != (1, 3) {
        return Err(r.fail("threshold row must be 1x3"));
    }
    let thresholds = Thresholds {
        j_t2: th[(0, 0)],
        j_spe: th[(0, 1)],
        alpha: th[(0, 2)],
    };
    DaePcaModel::new(
        config,
        variant,
        network,
        stats(bn_mean, bn_std),
        projection,
        lambda,
        stats(in_mean, in_std),
        thresholds,
    )
}

/// Writes the container to `path` and the configuration to its sidecar.
pub fn save_model(model: &DaePcaModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_model(model))
        .map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&model.config).expect("config serializes");
    std::fs::write(&side, json + "\n").map_err(|e| Error::io(side, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<DaePcaModel> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let side = sidecar_path(path);
    let text = std::fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let config: NetworkConfig = serde_json::from_str(&text).map_err(|e| Error::FormatError {
        path: side.clone(),
        msg: e.to_string(),
    })?;
    decode_model(&bytes, config, path)
}
