use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Moment accumulators for a fixed list of parameters.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Vec<Matrix>,
    second: Vec<Matrix>,
    step: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, params: &[Matrix]) -> AdamState {
        let zeros = || {
            params
                .iter()
                .map(|p| Matrix::zeros(p.rows(), p.cols()))
                .collect()
        };
        AdamState {
            config,
            first: zeros(),
            second: zeros(),
            step: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, i: usize) -> &Matrix {
        &self.first[i]
    }

    pub fn second_moment(&self, i: usize) -> &Matrix {
        &self.second[i]
    }

    /// One bias-corrected Adam update of every parameter, in place.
    pub fn update(&mut self, params: &mut [Matrix], grads: &[Matrix], lr: f64) -> Result<()> {
        if params.len() != self.first.len() || grads.len() != params.len() {
            return Err(Error::InvalidShape(format!(
                "Adam state tracks {} parameters, got {} parameters and {} gradients",
                self.first.len(),
                params.len(),
                grads.len()
            )));
        }
        if !(lr > 0.0) {
            return Err(Error::InvalidConfig(format!("learning rate must be > 0, got {lr}")));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            p.check_same_shape(g, "update parameter with gradient")?;
            p.check_same_shape(&self.first[i], "update parameter with moments")?;
            if !g.is_finite() {
                return Err(Error::NumericalFailure(format!(
                    "non-finite gradient for parameter {i} at Adam step {}",
                    self.step + 1
                )));
            }
        }

        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let t = self.step as i32;
        let bias1 = 1.0 - beta1.powi(t);
        let bias2 = 1.0 - beta2.powi(t);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
        {
            for (((pv, &gv), mv), vv) in p
                .as_mut_slice()
                .iter_mut()
                .zip(g.as_slice())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                *mv = beta1 * *mv + (1.0 - beta1) * gv;
                *vv = beta2 * *vv + (1.0 - beta2) * gv * gv;
                let m_hat = *mv / bias1;
                let v_hat = *vv / bias2;
                *pv -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

/// Piecewise-constant decay: `base · factor^⌊iter / period⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrSchedule {
    pub base: f64,
    pub factor: f64,
    pub period: u64,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self {
            base: 0.01,
            factor: 0.7,
            period: 350,
        }
    }
}

impl LrSchedule {
    pub fn at(&self, iter: u64) -> f64 {
        self.base * self.factor.powi((iter / self.period) as i32)
    }
}

/// Learning rate at `iter` under the default schedule.
pub fn lr_schedule(iter: u64) -> f64 {
    LrSchedule::default().at(iter)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_by_hand() {
        let mut params = vec![Matrix::scalar(0.0)];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        state
            .update(&mut params, &[Matrix::scalar(1.0)], 0.01)
            .unwrap();
        assert!((state.first_moment(0)[(0, 0)] - 0.1).abs() < 1e-15);
        assert!((state.second_moment(0)[(0, 0)] - 0.001).abs() < 1e-15);
        let expected = -0.01 / (1.0 + 1e-8);
        assert!((params[0][(0, 0)] - expected).abs() < 1e-15);
        assert_eq!(state.step(), 1);
    }

    #[test]
    fn two_steps_match_recurrence() {
        // scripted evaluation of the recurrences, gradients 0.5 then -2.0
        let (b1, b2, eps, lr) = (0.9f64, 0.999f64, 1e-8, 0.05);
        let mut theta = 1.0f64;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (t, g) in [(1, 0.5f64), (2, -2.0)] {
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let mh = m / (1.0 - b1.powi(t));
            let vh = v / (1.0 - b2.powi(t));
            theta -= lr * mh / (vh.sqrt() + eps);
        }

        let mut params = vec![Matrix::scalar(1.0)];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        state.update(&mut params, &[Matrix::scalar(0.5)], lr).unwrap();
        state.update(&mut params, &[Matrix::scalar(-2.0)], lr).unwrap();
        assert!((params[0][(0, 0)] - theta).abs() < 1e-15);
        assert_eq!(state.step(), 2);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let init = Matrix::from_fn(2, 3, |i, j| i as f64 - j as f64 * 0.5);
        let mut params = vec![init.clone()];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        for _ in 0..10 {
            state
                .update(&mut params, &[Matrix::zeros(2, 3)], 0.01)
                .unwrap();
        }
        assert_eq!(params[0], init);
    }

    #[test]
    fn nan_gradient_aborts() {
        let mut params = vec![Matrix::scalar(0.0)];
        let mut state = AdamState::new(AdamConfig::default(), &params);
        let err = state
            .update(&mut params, &[Matrix::scalar(f64::NAN)], 0.01)
            .unwrap_err();
        assert!(matches!(err, Error::NumericalFailure(_)));
        assert_eq!(state.step(), 0);
    }

    #[test]
    fn schedule_values() {
        assert_eq!(lr_schedule(0), 0.01);
        assert_eq!(lr_schedule(349), 0.01);
        assert!((lr_schedule(350) - 0.007).abs() < 1e-15);
        assert!((lr_schedule(700) - 0.0049).abs() < 1e-15);
    }
}
