use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

use super::{Dataset, TestSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Constant offset of `magnitude` after onset.
    Step,
    /// Extra Gaussian noise with std `magnitude` after onset.
    RandomVariation,
    /// Linear ramp from 0 at onset to `magnitude` at the last sample.
    SlowDrift,
    /// Sensor frozen at its onset reading; `magnitude` is unused.
    Sticking,
}

impl FaultKind {
    pub fn name(self) -> &'static str {
        match self {
            FaultKind::Step => "step",
            FaultKind::RandomVariation => "random_variation",
            FaultKind::SlowDrift => "slow_drift",
            FaultKind::Sticking => "sticking",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub magnitude: f64,
    pub onset: usize,
    /// Affected observed variables.
    pub sensors: Vec<usize>,
}

/// Surrogate nonlinear process: a slowly varying latent state observed
/// through a fixed random two-layer mixing `x = W₂·tanh(W₁·z) + noise`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub observed_dim: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub noise_std: f64,
    /// AR(1) coefficient of the latent state, in [0, 1).
    pub smoothness: f64,
    pub faults: Vec<FaultSpec>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            latent_dim: 4,
            hidden_dim: 10,
            observed_dim: 20,
            n_train: 1168,
            n_val: 292,
            n_test: 960,
            noise_std: 0.1,
            smoothness: 0.95,
            faults: vec![FaultSpec {
                kind: FaultKind::Step,
                magnitude: 0.8,
                onset: 160,
                sensors: vec![0, 1],
            }],
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.latent_dim == 0 || self.hidden_dim == 0 {
            return bad("latent and hidden dimensions must be positive".into());
        }
        if self.observed_dim < self.latent_dim {
            return bad(format!(
                "observed_dim {} is below latent_dim {}",
                self.observed_dim, self.latent_dim
            ));
        }
        if self.n_train < 2 || self.n_val == 0 || self.n_test == 0 {
            return bad("need at least 2 training rows and nonempty validation/test sets".into());
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if !(0.0..1.0).contains(&self.smoothness) {
            return bad(format!("smoothness must lie in [0, 1), got {}", self.smoothness));
        }
        for (k, f) in self.faults.iter().enumerate() {
            if !(f.magnitude >= 0.0) || !f.magnitude.is_finite() {
                return bad(format!("fault {k}: magnitude must be >= 0"));
            }
            if f.onset >= self.n_test {
                return bad(format!("fault {k}: onset {} not below {}", f.onset, self.n_test));
            }
            if f.sensors.is_empty() || f.sensors.iter().any(|&s| s >= self.observed_dim) {
                return bad(format!("fault {k}: sensors must be nonempty and < observed_dim"));
            }
        }
        Ok(())
    }
}

struct Mixing {
    w1: Matrix,
    b1: Vec<f64>,
    w2: Matrix,
}

impl Mixing {
    fn observe(&self, z: &[f64]) -> Vec<f64> {
        let mut h = self.w1.vec_matmul(z).expect("latent width");
        for (v, b) in h.iter_mut().zip(&self.b1) {
            *v = (*v + b).tanh();
        }
        self.w2.vec_matmul(&h).expect("hidden width")
    }
}

/// Stationary AR(1) latent path observed through the mixing, plus noise.
fn sequence(cfg: &SynthConfig, mix: &Mixing, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let k = cfg.latent_dim;
    let phi = cfg.smoothness;
    let innovation = (1.0 - phi * phi).sqrt();
    let mut z: Vec<f64> = (0..k).map(|_| rng.sample(StandardNormal)).collect();
    let mut out = Matrix::zeros(n, cfg.observed_dim);
    for t in 0..n {
        if t > 0 {
            for v in z.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                *v = phi * *v + innovation * e;
            }
        }
        let x = mix.observe(&z);
        for (o, xv) in out.row_mut(t).iter_mut().zip(x) {
            let e: f64 = rng.sample(StandardNormal);
            *o = xv + cfg.noise_std * e;
        }
    }
    out
}

/// Applies `fault` in place to rows at and after its onset.
pub fn inject_fault(data: &mut Matrix, fault: &FaultSpec, rng: &mut impl Rng) {
    let n = data.rows();
    let span = (n - fault.onset).max(1) as f64;
    let frozen: Vec<f64> = fault.sensors.iter().map(|&s| data[(fault.onset, s)]).collect();
    for t in fault.onset..n {
        let row = data.row_mut(t);
        for (k, &s) in fault.sensors.iter().enumerate() {
            match fault.kind {
                FaultKind::Step => row[s] += fault.magnitude,
                FaultKind::RandomVariation => {
                    let e: f64 = rng.sample(StandardNormal);
                    row[s] += fault.magnitude * e;
                }
                FaultKind::SlowDrift => {
                    row[s] += fault.magnitude * (t - fault.onset + 1) as f64 / span
                }
                FaultKind::Sticking => row[s] = frozen[k],
            }
        }
    }
}

/// Generates train/validation/test data; identical seeds give identical sets.
pub fn synthesize(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (k, h, m) = (cfg.latent_dim, cfg.hidden_dim, cfg.observed_dim);
    let mix = Mixing {
        w1: Matrix::from_fn(k, h, |_, _| {
            1.5 * rng.sample::<f64, _>(StandardNormal) / (k as f64).sqrt()
        }),
        b1: (0..h).map(|_| rng.gen_range(-0.5..0.5)).collect(),
        w2: Matrix::from_fn(h, m, |_, _| {
            rng.sample::<f64, _>(StandardNormal) / (h as f64).sqrt()
        }),
    };

    let normal = sequence(cfg, &mix, cfg.n_train + cfg.n_val, &mut rng);
    let mut tests = Vec::with_capacity(cfg.faults.len());
    for (i, fault) in cfg.faults.iter().enumerate() {
        // a dedicated stream per fault keeps the clean path independent of the fault
        let mut data = sequence(cfg, &mix, cfg.n_test, &mut rng);
        let mut fault_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9E37_79B9 + i as u64));
        inject_fault(&mut data, fault, &mut fault_rng);
        tests.push(TestSet {
            fault_id: i as u32 + 1,
            label: fault.kind.name().to_owned(),
            data,
            onset: fault.onset,
        });
    }

    let ds = Dataset {
        train: normal.row_range(0, cfg.n_train)?,
        val: normal.row_range(cfg.n_train, cfg.n_train + cfg.n_val)?,
        tests,
        variable_names: (1..=m).map(|i| format!("x{i}")).collect(),
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_fault(kind: FaultKind, magnitude: f64) -> SynthConfig {
        SynthConfig {
            n_train: 300,
            n_val: 50,
            n_test: 500,
            faults: vec![FaultSpec {
                kind,
                magnitude,
                onset: 100,
                sensors: vec![3],
            }],
            seed: 17,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic() {
        let cfg = with_fault(FaultKind::Step, 1.0);
        assert_eq!(synthesize(&cfg).unwrap(), synthesize(&cfg).unwrap());
        let other = SynthConfig { seed: 18, ..cfg.clone() };
        assert_ne!(synthesize(&other).unwrap().train, synthesize(&cfg).unwrap().train);
    }

    #[test]
    fn null_fault_looks_normal() {
        let ds = synthesize(&with_fault(FaultKind::Step, 0.0)).unwrap();
        let test = &ds.tests[0].data;
        let clean = synthesize(&with_fault(FaultKind::Sticking, 0.0)).unwrap();
        assert_ne!(test, &clean.tests[0].data);
        // the null step leaves the generated sequence untouched
        let reference = synthesize(&with_fault(FaultKind::SlowDrift, 0.0)).unwrap();
        assert_eq!(test, &reference.tests[0].data);
        let train_means = ds.train.column_means();
        let stats = crate::numerics::ColumnStats::of(&ds.train);
        let test_means = test.column_means();
        for j in 0..test.cols() {
            // AR(1) with φ = 0.95 inflates the std error of a mean by √((1+φ)/(1−φ))
            let se = stats.std[j] * (39.0f64 / test.rows() as f64).sqrt()
                + stats.std[j] * (39.0f64 / ds.train.rows() as f64).sqrt();
            assert!((test_means[j] - train_means[j]).abs() <= 3.0 * se, "column {j}");
        }
    }

    #[test]
    fn step_shifts_target_sensor() {
        let base = synthesize(&with_fault(FaultKind::Step, 0.0)).unwrap();
        let cfg = with_fault(FaultKind::Step, 1.0);
        let ds = synthesize(&cfg).unwrap();
        let post = |m: &Matrix| m.row_range(100, 500).unwrap().column_means();
        let shift = post(&ds.tests[0].data)[3] - post(&base.tests[0].data)[3];
        assert!((shift - 1.0).abs() <= 0.1);
        assert_eq!(
            ds.tests[0].data.row_range(0, 100).unwrap(),
            base.tests[0].data.row_range(0, 100).unwrap()
        );
        assert_eq!(post(&ds.tests[0].data)[2], post(&base.tests[0].data)[2]);
    }

    #[test]
    fn other_fault_kinds() {
        let stuck = synthesize(&with_fault(FaultKind::Sticking, 0.0)).unwrap();
        let d = &stuck.tests[0].data;
        assert!((100..500).all(|t| d[(t, 3)] == d[(100, 3)]));
        let drift = synthesize(&with_fault(FaultKind::SlowDrift, 2.0)).unwrap();
        let base = synthesize(&with_fault(FaultKind::Step, 0.0)).unwrap();
        let delta = drift.tests[0].data[(499, 3)] - base.tests[0].data[(499, 3)];
        assert!((delta - 2.0).abs() < 1e-12);
        let noisy = synthesize(&with_fault(FaultKind::RandomVariation, 1.0)).unwrap();
        let diff = noisy.tests[0].data.sub(&base.tests[0].data).unwrap();
        let var = (100..500).map(|t| diff[(t, 3)].powi(2)).sum::<f64>() / 400.0;
        assert!((var - 1.0).abs() < 0.25);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = SynthConfig {
            observed_dim: 2,
            ..SynthConfig::default()
        };
        assert!(matches!(synthesize(&cfg), Err(Error::InvalidConfig(_))));
        cfg = with_fault(FaultKind::Step, -1.0);
        assert!(synthesize(&cfg).is_err());
        cfg = with_fault(FaultKind::Step, 1.0);
        cfg.faults[0].onset = 500;
        assert!(synthesize(&cfg).is_err());
        cfg = with_fault(FaultKind::Step, 1.0);
        cfg.faults[0].sensors = vec![20];
        assert!(synthesize(&cfg).is_err());
    }
}
