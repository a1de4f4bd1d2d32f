use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, dot, Matrix};
use crate::subspace::{KpcaModel, PcaModel};

use super::kde::{kde_threshold, KdeConfig};

/// Control limits at confidence `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub j_t2: f64,
    pub j_spe: f64,
    pub alpha: f64,
}

impl Thresholds {
    pub fn new(j_t2: f64, j_spe: f64, alpha: f64) -> Result<Thresholds> {
        if !(j_t2 > 0.0 && j_spe > 0.0) || !j_t2.is_finite() || !j_spe.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "control limits must be positive and finite, got T² {j_t2}, SPE {j_spe}"
            )));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("alpha must lie in (0, 1), got {alpha}")));
        }
        Ok(Thresholds { j_t2, j_spe, alpha })
    }

    /// KDE limits from statistics of fault-free samples.
    pub fn fit(stats: &[(f64, f64)], alpha: f64, kde: &KdeConfig) -> Result<Thresholds> {
        let t2: Vec<f64> = stats.iter().map(|s| s.0).collect();
        let spe: Vec<f64> = stats.iter().map(|s| s.1).collect();
        Thresholds::new(
            kde_threshold(&t2, alpha, kde)?,
            kde_threshold(&spe, alpha, kde)?,
            alpha,
        )
    }
}

/// Anything that maps one raw sample to its (T², SPE) pair.
pub trait Monitor: Send + Sync {
    fn variables(&self) -> usize;

    fn statistics(&self, x: &[f64]) -> Result<(f64, f64)>;

    fn statistics_batch(&self, x: &Matrix) -> Result<Vec<(f64, f64)>> {
        (0..x.rows()).map(|i| self.statistics(x.row(i))).collect()
    }
}

impl Monitor for PcaModel {
    fn variables(&self) -> usize {
        self.loadings.rows()
    }

    fn statistics(&self, x: &[f64]) -> Result<(f64, f64)> {
        PcaModel::statistics(self, x)
    }
}

impl Monitor for KpcaModel {
    fn variables(&self) -> usize {
        self.training.cols()
    }

    fn statistics(&self, x: &[f64]) -> Result<(f64, f64)> {
        KpcaModel::statistics(self, x)
    }
}

/// Relative diagonal jitter tried, in order, when Λ is not numerically PD.
const JITTER_STEPS: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];

/// Cholesky factor of a (possibly jittered) covariance, for repeated T².
#[derive(Debug, Clone)]
pub struct Precision {
    factor: Matrix,
    jitter: f64,
}

impl Precision {
    pub fn new(lambda: &Matrix) -> Result<Precision> {
        if !lambda.is_square() || lambda.rows() == 0 {
            return Err(Error::InvalidShape(format!(
                "covariance must be square and nonempty, got {}x{}",
                lambda.rows(),
                lambda.cols()
            )));
        }
        if !lambda.is_finite() {
            return Err(Error::NumericalFailure("covariance has non-finite entries".into()));
        }
        let n = lambda.rows();
        let scale = (lambda.trace() / n as f64).abs().max(f64::MIN_POSITIVE);
        for rel in JITTER_STEPS {
            let jitter = rel * scale;
            let mut shifted = lambda.clone();
            for i in 0..n {
                shifted.as_mut_slice()[i * n + i] += jitter;
            }
            if let Some(factor) = cholesky(&shifted) {
                return Ok(Precision { factor, jitter });
            }
        }
        Err(Error::SingularMatrix(
            "covariance is not positive definite after jitter".into(),
        ))
    }

    /// Diagonal shift that was needed to factor Λ.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.factor.rows()
    }

    /// `tᵀ Λ⁻¹ t` by forward substitution.
    pub fn quadratic(&self, t: &[f64]) -> Result<f64> {
        let n = self.dim();
        if t.len() != n {
            return Err(Error::InvalidShape(format!(
                "score vector has {} entries, covariance is {n}x{n}",
                t.len()
            )));
        }
        let l = self.factor.as_slice();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let s = dot(&l[i * n..i * n + i], &y[..i]);
            y[i] = (t[i] - s) / l[i * n + i];
        }
        Ok(dot(&y, &y))
    }
}

pub fn hotelling_t2(t: &[f64], lambda: &Matrix) -> Result<f64> {
    Precision::new(lambda)?.quadratic(t)
}

pub fn spe(residual: &[f64]) -> f64 {
    dot(residual, residual)
}

/// Smallest statistic-to-limit ratio used by [`bic`].
pub const STAT_CLAMP: f64 = 1e-12;

/// Fault posterior of one statistic given its normal/fault likelihood ratio.
fn fault_posterior(ratio: f64, alpha: f64) -> f64 {
    // dividing through by P(x|F) keeps S = J exact: (1−α)/((1−α) + α)
    let prior_fault = 1.0 - alpha;
    prior_fault / (prior_fault + alpha * (1.0 / ratio - ratio).exp())
}

/// Bayesian fusion of T² and SPE into one fault probability.
///
/// Each statistic gives `P(x|N) = exp(−S/J)` and `P(x|F) = exp(−J/S)`; the
/// two fault posteriors are averaged with weights `P(x|F)`. Statistics are
/// floored at `STAT_CLAMP·J` and NaN is treated as +∞.
pub fn bic(t2: f64, spe: f64, th: &Thresholds) -> f64 {
    let ratio = |s: f64, j: f64| {
        if s.is_nan() {
            f64::INFINITY
        } else {
            (s / j).max(STAT_CLAMP)
        }
    };
    let r = [ratio(t2, th.j_t2), ratio(spe, th.j_spe)];
    // weights exp(−J/S) normalized in log space
    let logw = [-1.0 / r[0], -1.0 / r[1]];
    let top = logw[0].max(logw[1]);
    let w = [(logw[0] - top).exp(), (logw[1] - top).exp()];
    let num = w[0] * fault_posterior(r[0], th.alpha) + w[1] * fault_posterior(r[1], th.alpha);
    (num / (w[0] + w[1])).clamp(0.0, 1.0)
}

/// Per-sample statistics and full-space alarms of a monitored sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct StatSeries {
    pub t2: Vec<f64>,
    pub spe: Vec<f64>,
    pub bic: Vec<f64>,
    pub alarm: Vec<bool>,
    pub thresholds: Thresholds,
}

pub fn detect(stats: &[(f64, f64)], th: &Thresholds) -> StatSeries {
    let t2: Vec<f64> = stats.iter().map(|s| s.0).collect();
    let spe: Vec<f64> = stats.iter().map(|s| s.1).collect();
    let bic: Vec<f64> = stats.iter().map(|&(a, b)| bic(a, b, th)).collect();
    let alarm = bic.iter().map(|&b| b > 1.0 - th.alpha).collect();
    StatSeries {
        t2,
        spe,
        bic,
        alarm,
        thresholds: *th,
    }
}

/// Scores every row of `x` with `model` and applies the alarm rule.
pub fn monitor_series<M: Monitor + ?Sized>(
    model: &M,
    x: &Matrix,
    th: &Thresholds,
) -> Result<StatSeries> {
    Ok(detect(&model.statistics_batch(x)?, th))
}

#[derive(Serialize)]
struct Row {
    index: usize,
    t2: f64,
    spe: f64,
    bic: f64,
    alarm: bool,
}

impl StatSeries {
    pub fn len(&self) -> usize {
        self.t2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t2.is_empty()
    }

    /// Principal-subspace alarms: `T² > J_T²`.
    pub fn ps_alarms(&self) -> Vec<bool> {
        self.t2.iter().map(|&v| v > self.thresholds.j_t2).collect()
    }

    /// Residual-subspace alarms: `SPE > J_SPE`.
    pub fn rs_alarms(&self) -> Vec<bool> {
        self.spe.iter().map(|&v| v > self.thresholds.j_spe).collect()
    }

    pub fn fs_alarms(&self) -> &[bool] {
        &self.alarm
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for i in 0..self.len() {
            w.serialize(Row {
                index: i,
                t2: self.t2[i],
                spe: self.spe[i],
                bic: self.bic[i],
                alarm: self.alarm[i],
            })
            .map_err(|e| Error::FormatError {
                path: "<stat series>".into(),
                msg: e.to_string(),
            })?;
        }
        w.flush().map_err(|e| Error::io("<stat series>", e))
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn th() -> Thresholds {
        Thresholds::new(12.0, 3.5, 0.99).unwrap()
    }

    #[test]
    fn t2_small_cases() {
        let eye = Matrix::identity(2);
        assert_eq!(hotelling_t2(&[0.0, 0.0], &eye).unwrap(), 0.0);
        assert!((hotelling_t2(&[1.0, 1.0], &eye).unwrap() - 2.0).abs() < 1e-15);
        assert!(hotelling_t2(&[1.0], &eye).is_err());
    }

    #[test]
    fn t2_matches_explicit_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b = Matrix::from_fn(6, 4, |_, _| rng.gen_range(-1.0..1.0));
        let lambda = b.t_matmul(&b).unwrap().add(&Matrix::identity(4).scale(0.1)).unwrap();
        let inv = crate::numerics::invert(&lambda).unwrap();
        let t: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let expected = dot(&t, &inv.vec_matmul(&t).unwrap());
        let got = hotelling_t2(&t, &lambda).unwrap();
        assert!((got - expected).abs() <= 1e-10 * expected.max(1.0));
    }

    #[test]
    fn t2_jitter_and_failure() {
        let singular = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let p = Precision::new(&singular).unwrap();
        assert!(p.jitter() > 0.0);
        let negative = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(matches!(Precision::new(&negative), Err(Error::SingularMatrix(_))));
    }

    #[test]
    fn spe_values() {
        assert_eq!(spe(&[0.0, 0.0]), 0.0);
        assert_eq!(spe(&[3.0, 4.0]), 25.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..37).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let mut looped = 0.0;
        for x in &v {
            looped += x * x;
        }
        assert!((spe(&v) - looped).abs() <= 1e-12 * looped);
    }

    #[test]
    fn bic_fixed_point() {
        let th = th();
        let b = bic(th.j_t2, th.j_spe, &th);
        assert!((b - 0.01).abs() < 1e-12, "{b}");
        let s = detect(&[(th.j_t2, th.j_spe)], &th);
        assert!(!s.alarm[0]);
    }

    #[test]
    fn bic_limits() {
        let th = th();
        assert!(bic(1e9, 1e9, &th) > 1.0 - 1e-9);
        assert_eq!(bic(f64::INFINITY, f64::INFINITY, &th), 1.0);
        let tiny = bic(1e-12 * th.j_t2, 1e-12 * th.j_spe, &th);
        assert!(tiny < 1.0 - th.alpha);
        assert_eq!(bic(0.0, 0.0, &th), tiny);
        assert!(bic(f64::NAN, 0.0, &th).is_finite());
        let strong = detect(&[(100.0 * th.j_t2, 100.0 * th.j_spe)], &th);
        assert!(strong.alarm[0] && strong.bic[0] > 0.99);
    }

    #[test]
    fn bic_hand_evaluation() {
        // T² at twice its limit, SPE at half of it
        let th = Thresholds::new(1.0, 1.0, 0.9).unwrap();
        let (pn1, pf1) = ((-2.0f64).exp(), (-0.5f64).exp());
        let (pn2, pf2) = ((-0.5f64).exp(), (-2.0f64).exp());
        let post = |pn: f64, pf: f64| pf * 0.1 / (pn * 0.9 + pf * 0.1);
        let expected = (pf1 * post(pn1, pf1) + pf2 * post(pn2, pf2)) / (pf1 + pf2);
        assert!((bic(2.0, 0.5, &th) - expected).abs() < 1e-14);
    }

    #[test]
    fn bic_is_not_monotone_everywhere() {
        // With SPE far above its limit, raising T² toward its own limit moves
        // weight from the saturated SPE posterior onto the weaker T² one.
        let th = th();
        let low = bic(1e-3 * th.j_t2, 1e3 * th.j_spe, &th);
        let mid = bic(th.j_t2, 1e3 * th.j_spe, &th);
        assert!(low > 0.99);
        assert!(mid < 0.8);
    }

    #[test]
    fn bic_in_unit_interval() {
        let th = th();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let a = 10f64.powf(rng.gen_range(-15.0..15.0));
            let b = 10f64.powf(rng.gen_range(-15.0..15.0));
            let v = bic(a, b, &th);
            assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn detect_is_per_sample() {
        let th = th();
        let stats = vec![(1.0, 0.2), (50.0, 9.0), (0.5, 0.1), (13.0, 3.0)];
        let all = detect(&stats, &th);
        assert_eq!(all.alarm.iter().filter(|&&a| a).count(), 1);
        assert!(all.alarm[1]);
        let rev: Vec<_> = stats.iter().rev().copied().collect();
        let mut back = detect(&rev, &th).bic;
        back.reverse();
        assert_eq!(back, all.bic);
        assert_eq!(all.ps_alarms(), vec![false, true, false, true]);
        assert_eq!(all.rs_alarms(), vec![false, true, false, false]);
    }

    #[test]
    fn csv_export() {
        let th = th();
        let s = detect(&[(1.0, 0.25), (1.0 / 3.0, 99.0)], &th);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("index,t2,spe,bic,alarm"));
        assert!(lines.next().unwrap().starts_with("0,1.0,0.25,"));
        let second = lines.next().unwrap();
        let t2: f64 = second.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(t2, 1.0 / 3.0);
        assert!(second.ends_with(",true"));
    }

    #[test]
    fn threshold_validation() {
        assert!(Thresholds::new(0.0, 1.0, 0.9).is_err());
        assert!(Thresholds::new(1.0, 1.0, 1.0).is_err());
        assert!(Thresholds::new(1.0, f64::INFINITY, 0.9).is_err());
    }
}
