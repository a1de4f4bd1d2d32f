use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dot, Matrix};

/// Default RBF width for the 33-variable TE setup: (5·√330)² = 8250.
pub const TE_RBF_WIDTH: f64 = 8250.0;

/// Kernel function used by KPCA.
///
/// The RBF form is `exp(−‖x − y‖² / c)` with `c` the configured width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    Rbf { width: f64 },
    Linear,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig::Rbf {
            width: TE_RBF_WIDTH,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelConfig::Rbf { width } if !(width > 0.0) || !width.is_finite() => Err(
                Error::InvalidConfig(format!("RBF width must be positive, got {width}")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelConfig::Rbf { width } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / width).exp()
            }
            KernelConfig::Linear => dot(x, y),
        }
    }

    /// Gram matrix over the rows of `x`; exactly symmetric.
    pub fn gram(&self, x: &Matrix) -> Matrix {
        let n = x.rows();
        let mut k = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let v = self.eval(x.row(i), x.row(j));
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }
}

/// `K(x, y)` for equal-length vectors.
pub fn kernel_eval(cfg: &KernelConfig, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::InvalidShape(format!(
            "kernel arguments have lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    Ok(cfg.eval(x, y))
}
