//! Actuator-fault scenarios: sampling, torque masking, and ground-truth
//! joint-status labels for the estimator.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::sim::RobotModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultType {
    Healthy,
    /// The joint is held at its position at fault onset by a stiff PD law.
    JointLocking,
    /// The joint produces zero torque but moves freely.
    PowerLoss,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FaultScenario {
    pub kind: FaultType,
    /// Faulted joint index, meaningful unless Healthy.
    pub joint: usize,
    /// Onset time within the episode (s).
    pub onset: f64,
    /// Joint position latched at the first masked control step.
    pub locked_position: Option<f64>,
}

impl FaultScenario {
    pub fn healthy() -> Self {
        Self {
            kind: FaultType::Healthy,
            joint: 0,
            onset: 0.0,
            locked_position: None,
        }
    }

    pub fn pinned(kind: FaultType, joint: usize, onset: f64) -> Self {
        Self {
            kind,
            joint,
            onset,
            locked_position: None,
        }
    }

    /// Whether the fault is active at time t (onset inclusive).
    pub fn active(&self, t: f64) -> bool {
        self.kind != FaultType::Healthy && t >= self.onset
    }

    /// Record the locked reference position at the first masked step.
    pub fn latch(&mut self, t: f64, q: &[f64]) {
        if self.kind == FaultType::JointLocking && self.active(t) && self.locked_position.is_none()
        {
            self.locked_position = Some(q[self.joint]);
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FaultConfig {
    /// Probability that an episode is assigned a fault at all.
    pub p_fault: f64,
    /// Onset sampled uniformly over this fraction of the episode horizon.
    pub onset_window: (f64, f64),
}

impl Default for FaultConfig {
    fn default() -> Self {
        Self {
            p_fault: 0.9,
            onset_window: (0.0, 0.4),
        }
    }
}

/// Sample one scenario: Healthy with probability 1 - p_fault, otherwise
/// locking or power loss equiprobably on a uniformly chosen joint, with the
/// onset drawn uniformly over the configured window of the horizon.
pub fn sample_scenario(
    rng: &mut ChaCha8Rng,
    joint_count: usize,
    horizon_s: f64,
    config: &FaultConfig,
) -> FaultScenario {
    assert!(joint_count >= 1);
    assert!((0.0..=1.0).contains(&config.p_fault));
    if rng.gen::<f64>() >= config.p_fault {
        return FaultScenario::healthy();
    }
    let kind = if rng.gen::<f64>() < 0.5 {
        FaultType::JointLocking
    } else {
        FaultType::PowerLoss
    };
    let joint = rng.gen_range(0..joint_count);
    let (w0, w1) = config.onset_window;
    let onset = rng.gen_range(w0 * horizon_s..=w1 * horizon_s);
    FaultScenario {
        kind,
        joint,
        onset,
        locked_position: None,
    }
}

/// Apply the torque-masking rule for the faulted joint:
/// locking overrides with Kp (q0 - q) - Kd qd, power loss zeroes the torque,
/// and every other joint passes through unchanged.
pub fn mask_torque(
    torques: &[f64],
    scenario: &FaultScenario,
    q: &[f64],
    qd: &[f64],
    model: &RobotModel,
    t: f64,
) -> Vec<f64> {
    let mut out = torques.to_vec();
    if !scenario.active(t) {
        return out;
    }
    let j = scenario.joint;
    match scenario.kind {
        FaultType::Healthy => {}
        FaultType::JointLocking => {
            // Fall back to the current position when the latch has not run,
            // which equals latching at this very step.
            let q0 = scenario.locked_position.unwrap_or(q[j]);
            out[j] = model.kp[j] * (q0 - q[j]) - model.kd[j] * qd[j];
        }
        FaultType::PowerLoss => {
            out[j] = 0.0;
        }
    }
    out
}

/// Ground-truth status vector of length J+1: element 0 is the system-healthy
/// flag, elements 1..=J flag the faulted joint. Locking and power loss map to
/// the same flag.
pub fn ground_truth_label(scenario: &FaultScenario, t: f64, joint_count: usize) -> Vec<f64> {
    let mut label = vec![0.0; joint_count + 1];
    if scenario.active(t) {
        label[1 + scenario.joint] = 1.0;
    } else {
        label[0] = 1.0;
    }
    label
}
