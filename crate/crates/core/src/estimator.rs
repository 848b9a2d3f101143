//! Online joint-status estimator: a GRU over proprioceptive features that
//! emits per-joint fault probabilities, trained against ground-truth masking
//! labels concurrently with the policy.

use serde::{Deserialize, Serialize};

use crate::nn::{Adam, GruNet};
use crate::sim::JOINT_COUNT;

/// Feature layout: pitch, q, qd, phase sin/cos, previous commanded torques.
pub const FEATURE_DIM: usize = 1 + JOINT_COUNT + JOINT_COUNT + 2 + JOINT_COUNT;
/// Output layout: system-healthy flag plus one flag per joint.
pub const STATUS_DIM: usize = JOINT_COUNT + 1;

/// Build the estimator input for one control step. Torques are the commanded
/// values before fault masking: the mismatch between commanded effort and the
/// observed motion is the fault signal. Velocities and torques are scaled
/// into roughly unit range so the recurrent gates stay unsaturated.
pub fn proprio_features(
    pitch: f64,
    q: &[f64],
    qd: &[f64],
    phase_enc: [f64; 2],
    prev_cmd_torques: &[f64],
    torque_limit: &[f64],
) -> Vec<f64> {
    let mut f = Vec::with_capacity(FEATURE_DIM);
    f.push(pitch);
    f.extend_from_slice(q);
    f.extend(qd.iter().map(|v| v * 0.1));
    f.extend_from_slice(&phase_enc);
    f.extend(
        prev_cmd_torques
            .iter()
            .zip(torque_limit.iter())
            .map(|(t, l)| t / l),
    );
    debug_assert_eq!(f.len(), FEATURE_DIM);
    f
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatusEstimate {
    /// Sigmoid probabilities, length [`STATUS_DIM`].
    pub p: Vec<f64>,
    /// Thresholded status: s_k = 1 iff p_k > threshold (strict).
    pub s: Vec<f64>,
}

pub fn threshold_status(p: &[f64], threshold: f64) -> Vec<f64> {
    p.iter().map(|&v| if v > threshold { 1.0 } else { 0.0 }).collect()
}

/// One labeled window of estimator experience for truncated BPTT.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledWindow {
    /// Hidden state at window start, recorded during the rollout.
    pub h0: Vec<f64>,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Estimator {
    pub net: GruNet,
    opt: Adam,
    pub threshold: f64,
    pub lr: f64,
}

impl Estimator {
    pub fn new(hidden_size: usize, threshold: f64, lr: f64, master_seed: u64) -> Self {
        let net = GruNet::init(FEATURE_DIM, hidden_size, STATUS_DIM, master_seed, 3);
        let opt = Adam::new(net.params().len());
        Self {
            net,
            opt,
            threshold,
            lr,
        }
    }

    pub fn zero_hidden(&self) -> Vec<f64> {
        self.net.zero_hidden()
    }

    /// One inference step. The threshold applies only at the decision stage;
    /// probabilities are retained for the loss.
    pub fn estimate(&self, features: &[f64], hidden: &mut Vec<f64>) -> StatusEstimate {
        let (p, h_new) = self.net.step(features, hidden);
        *hidden = h_new;
        let s = threshold_status(&p, self.threshold);
        StatusEstimate { p, s }
    }

    /// One truncated-BPTT pass over the collected windows: the windows are
    /// visited in order with one optimizer step each, so the estimator keeps
    /// adapting continuously. Empty input is a no-op. Returns the mean BCE
    /// over all steps before their updates.
    pub fn online_update(&mut self, windows: &[LabeledWindow]) -> f64 {
        let total_steps: usize = windows.iter().map(|w| w.features.len()).sum();
        if total_steps == 0 {
            return 0.0;
        }
        let mut loss_sum = 0.0;
        let mut grads = vec![0.0; self.net.params().len()];
        for window in windows {
            let steps = window.features.len().max(1) as f64;
            let (outs, cache) = self.net.forward_seq(&window.features, &window.h0);
            let mut d_logits = Vec::with_capacity(outs.len());
            for (p, label) in outs.iter().zip(window.labels.iter()) {
                let (loss, mut grad) = bce_loss_and_grad(p, label);
                loss_sum += loss;
                for g in &mut grad {
                    *g /= steps;
                }
                d_logits.push(grad);
            }
            grads.iter_mut().for_each(|g| *g = 0.0);
            self.net.backward_seq(&cache, &d_logits, &mut grads);
            self.opt.step(self.net.params_mut(), &grads, self.lr);
        }
        loss_sum / total_steps as f64
    }

    /// Mean BCE over windows without updating parameters.
    pub fn evaluate_bce(&self, windows: &[LabeledWindow]) -> f64 {
        let total_steps: usize = windows.iter().map(|w| w.features.len()).sum();
        if total_steps == 0 {
            return 0.0;
        }
        let mut loss_sum = 0.0;
        for window in windows {
            let (outs, _) = self.net.forward_seq(&window.features, &window.h0);
            for (p, label) in outs.iter().zip(window.labels.iter()) {
                loss_sum += bce_loss(p, label);
            }
        }
        loss_sum / total_steps as f64
    }
}

/// Mean binary cross-entropy over the status vector, probabilities clamped
/// 1e-7 away from the boundaries.
pub fn bce_loss(p: &[f64], label: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), label.len());
    let k = p.len() as f64;
    p.iter()
        .zip(label.iter())
        .map(|(&pi, &yi)| {
            let pc = pi.clamp(1e-7, 1.0 - 1e-7);
            -(yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln())
        })
        .sum::<f64>()
        / k
}

/// BCE and its gradient with respect to the pre-sigmoid logits: (p - y) / K.
pub fn bce_loss_and_grad(p: &[f64], label: &[f64]) -> (f64, Vec<f64>) {
    let k = p.len() as f64;
    let grad = p
        .iter()
        .zip(label.iter())
        .map(|(&pi, &yi)| (pi - yi) / k)
        .collect();
    (bce_loss(p, label), grad)
}
