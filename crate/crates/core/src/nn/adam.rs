//! Adaptive-moment optimizer with a linear learning-rate decay schedule.

use serde::{Deserialize, Serialize};

/// Linear interpolation from `lr_start` at step 0 to `lr_end` at `total_steps`,
/// constant afterwards.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LinearDecay {
    pub lr_start: f64,
    pub lr_end: f64,
    pub total_steps: u64,
}

impl LinearDecay {
    pub fn constant(lr: f64) -> Self {
        Self {
            lr_start: lr,
            lr_end: lr,
            total_steps: 1,
        }
    }

    pub fn lr(&self, step: u64) -> f64 {
        let frac = if self.total_steps == 0 {
            1.0
        } else {
            (step as f64 / self.total_steps as f64).min(1.0)
        };
        self.lr_start + (self.lr_end - self.lr_start) * frac
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    /// One update in place. `lr` should come from the schedule for this step.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grads[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grads[i] * grads[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}
