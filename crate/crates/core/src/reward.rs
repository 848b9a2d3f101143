//! Reward terms and phase-dependent weight presets.
//!
//! Thirteen terms in three groups: task (velocity tracking, foot-contact
//! sync), regulation (posture and smoothness), and fallibility (trajectory
//! mimicking, contact-force tracking, termination). The fault-phase preset
//! differs from the nominal one only in the contact-force-tracking weight and
//! the termination penalty.

use serde::{Deserialize, Serialize};

use crate::gait::{support_phase, GaitSchedule, SupportPhase};

pub const TERM_COUNT: usize = 13;

pub const TERM_NAMES: [&str; TERM_COUNT] = [
    "lin_vel_tracking",
    "ang_vel_tracking",
    "foot_contact",
    "body_orientation",
    "joint_torque",
    "joint_velocity",
    "joint_acceleration",
    "feet_contact_force",
    "torque_difference",
    "contact_force_difference",
    "trajectory_mimicking",
    "contact_force_tracking",
    "termination_penalty",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub lin_vel: f64,
    pub ang_vel: f64,
    pub foot_contact: f64,
    pub orientation: f64,
    pub torque: f64,
    pub joint_vel: f64,
    pub joint_acc: f64,
    pub contact_force: f64,
    pub torque_diff: f64,
    pub contact_force_diff: f64,
    pub mimic: f64,
    pub force_tracking: f64,
    pub termination: f64,
}

impl RewardWeights {
    /// Scales active before faults are enabled.
    pub fn nominal() -> Self {
        Self {
            lin_vel: 0.4,
            ang_vel: 0.2,
            foot_contact: 0.2,
            orientation: 0.3,
            torque: 0.05,
            joint_vel: 0.05,
            joint_acc: 0.05,
            contact_force: 0.1,
            torque_diff: 0.7,
            contact_force_diff: 0.2,
            mimic: 0.35,
            force_tracking: 0.0,
            termination: 0.0,
        }
    }

    /// Scales active once the curriculum enables motor failures.
    pub fn fault() -> Self {
        Self {
            force_tracking: 0.3,
            termination: -100.0,
            ..Self::nominal()
        }
    }

    pub fn as_array(&self) -> [f64; TERM_COUNT] {
        [
            self.lin_vel,
            self.ang_vel,
            self.foot_contact,
            self.orientation,
            self.torque,
            self.joint_vel,
            self.joint_acc,
            self.contact_force,
            self.torque_diff,
            self.contact_force_diff,
            self.mimic,
            self.force_tracking,
            self.termination,
        ]
    }
}

/// Everything one control step feeds into the reward.
#[derive(Debug, Clone)]
pub struct RewardInputs<'a> {
    pub v_cmd: [f64; 2],
    pub v_base: [f64; 2],
    pub w_cmd: f64,
    pub w_base: f64,
    /// Left/right loaded flags from the F_z threshold.
    pub feet_loaded: [bool; 2],
    pub phi: f64,
    pub roll: f64,
    pub pitch: f64,
    pub tau: &'a [f64],
    pub tau_prev: &'a [f64],
    pub qd: &'a [f64],
    pub qd_prev: &'a [f64],
    /// Control-step duration for the acceleration finite difference.
    pub dt: f64,
    pub fz: [f64; 2],
    pub fz_prev: [f64; 2],
    pub q: &'a [f64],
    pub q_ref: &'a [f64],
    pub fz_ref: [f64; 2],
    pub terminated: bool,
    /// Body weight W (N) for the contact-force regulation term.
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct RewardBreakdown {
    pub raw: [f64; TERM_COUNT],
    pub weighted: [f64; TERM_COUNT],
    pub task: f64,
    pub regulation: f64,
    pub fall: f64,
    pub total: f64,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>()
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Whether a foot counts as loaded for the contact-sync indicator.
pub fn foot_loaded(fz: f64, weight: f64, threshold_frac: f64) -> bool {
    fz > threshold_frac * weight
}

/// Velocity tracking and foot-contact synchronization terms.
pub fn task_rewards(
    v_cmd: [f64; 2],
    v_base: [f64; 2],
    w_cmd: f64,
    w_base: f64,
    feet_loaded: [bool; 2],
    phi: f64,
    schedule: &GaitSchedule,
) -> [f64; 3] {
    let dv = [v_cmd[0] - v_base[0], v_cmd[1] - v_base[1]];
    let lin = (-norm_sq(&dv) / (0.45 * 0.45)).exp();
    let dw = w_cmd - w_base;
    let ang = (-(dw * dw) / (0.35 * 0.35)).exp();
    let expected = match support_phase(phi, schedule) {
        SupportPhase::Dsp => [true, true],
        SupportPhase::Rssp => [false, true],
        SupportPhase::Lssp => [true, false],
    };
    let contact = if feet_loaded == expected { 1.0 } else { 0.0 };
    [lin, ang, contact]
}

/// Posture, effort, and smoothness terms.
#[allow(clippy::too_many_arguments)]
pub fn regulation_rewards(
    roll: f64,
    pitch: f64,
    tau: &[f64],
    tau_prev: &[f64],
    qd: &[f64],
    qd_prev: &[f64],
    dt: f64,
    fz: [f64; 2],
    fz_prev: [f64; 2],
    weight: f64,
) -> [f64; 7] {
    let orientation = (-500.0 * (roll * roll + pitch * pitch)).exp();
    let torque = (-norm(tau) / 100.0).exp();
    let joint_vel = (-norm(qd) / 100.0).exp();
    let qdd: Vec<f64> = qd
        .iter()
        .zip(qd_prev.iter())
        .map(|(a, b)| (a - b) / dt)
        .collect();
    let joint_acc = (-norm(&qdd) / 0.05).exp();
    let overload: f64 = fz.iter().map(|&f| relu(f - 1.4 * weight)).sum();
    let contact_force = (-overload / 140.0).exp();
    let dtau: Vec<f64> = tau.iter().zip(tau_prev.iter()).map(|(a, b)| a - b).collect();
    let torque_diff = (-norm(&dtau) / (1.20 * 1.20)).exp();
    let df: f64 = fz
        .iter()
        .zip(fz_prev.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    let contact_force_diff = (-df / 100.0).exp();
    [
        orientation,
        torque,
        joint_vel,
        joint_acc,
        contact_force,
        torque_diff,
        contact_force_diff,
    ]
}

/// Trajectory mimicking, contact-force tracking, and the termination flag.
pub fn fallibility_rewards(
    q: &[f64],
    q_ref: &[f64],
    fz: [f64; 2],
    fz_ref: [f64; 2],
    terminated: bool,
) -> [f64; 3] {
    let dq: Vec<f64> = q_ref.iter().zip(q.iter()).map(|(a, b)| a - b).collect();
    let mimic = (-norm_sq(&dq) / 0.5).exp();
    let df: f64 = fz_ref
        .iter()
        .zip(fz.iter())
        .map(|(a, b)| (a - b).abs())
        .sum();
    let tracking = (-df / 10.0).exp();
    let term = if terminated { 1.0 } else { 0.0 };
    [mimic, tracking, term]
}

/// Assemble all thirteen terms under the active weight preset.
pub fn total_reward(
    inputs: &RewardInputs,
    weights: &RewardWeights,
    schedule: &GaitSchedule,
) -> RewardBreakdown {
    let task = task_rewards(
        inputs.v_cmd,
        inputs.v_base,
        inputs.w_cmd,
        inputs.w_base,
        inputs.feet_loaded,
        inputs.phi,
        schedule,
    );
    let regulation = regulation_rewards(
        inputs.roll,
        inputs.pitch,
        inputs.tau,
        inputs.tau_prev,
        inputs.qd,
        inputs.qd_prev,
        inputs.dt,
        inputs.fz,
        inputs.fz_prev,
        inputs.weight,
    );
    let fall = fallibility_rewards(
        inputs.q,
        inputs.q_ref,
        inputs.fz,
        inputs.fz_ref,
        inputs.terminated,
    );

    let mut raw = [0.0; TERM_COUNT];
    raw[..3].copy_from_slice(&task);
    raw[3..10].copy_from_slice(&regulation);
    raw[10..].copy_from_slice(&fall);

    let w = weights.as_array();
    let mut weighted = [0.0; TERM_COUNT];
    for i in 0..TERM_COUNT {
        weighted[i] = raw[i] * w[i];
    }
    let task_sum: f64 = weighted[..3].iter().sum();
    let reg_sum: f64 = weighted[3..10].iter().sum();
    let fall_sum: f64 = weighted[10..].iter().sum();
    RewardBreakdown {
        raw,
        weighted,
        task: task_sum,
        regulation: reg_sum,
        fall: fall_sum,
        total: task_sum + reg_sum + fall_sum,
    }
}
