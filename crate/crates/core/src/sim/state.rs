//! Generalized state of the planar biped.

use serde::{Deserialize, Serialize};

use super::model::{RobotModel, JOINT_COUNT};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    /// Hip point position (x, z) in meters.
    pub base_pos: [f64; 2],
    /// Base pitch (rad), positive counter-clockwise in the x-z plane.
    pub base_pitch: f64,
    /// Hip point velocity (m/s).
    pub base_vel: [f64; 2],
    /// Pitch rate (rad/s).
    pub base_omega: f64,
    /// Joint positions, length [`JOINT_COUNT`].
    pub q: Vec<f64>,
    /// Joint velocities.
    pub qd: Vec<f64>,
    /// Vertical contact force per foot (left, right), N.
    pub foot_fz: [f64; 2],
    /// Simulation time (s).
    pub time: f64,
}

impl SimState {
    /// Standing at rest with straight legs, hip at the given height.
    pub fn standing(base_height: f64) -> Self {
        Self {
            base_pos: [0.0, base_height],
            base_pitch: 0.0,
            base_vel: [0.0, 0.0],
            base_omega: 0.0,
            q: vec![0.0; JOINT_COUNT],
            qd: vec![0.0; JOINT_COUNT],
            foot_fz: [0.0, 0.0],
            time: 0.0,
        }
    }

    /// Standing with feet settled at the static contact penetration, so the
    /// configuration is an exact equilibrium of the penalty contact model.
    pub fn settled_standing(model: &RobotModel) -> Self {
        // Four contact points share the weight.
        let penetration = model.weight() / (4.0 * model.contact.k_normal);
        Self::standing(model.standing_height() - penetration)
    }

    pub fn is_finite(&self) -> bool {
        self.base_pos.iter().all(|v| v.is_finite())
            && self.base_pitch.is_finite()
            && self.base_vel.iter().all(|v| v.is_finite())
            && self.base_omega.is_finite()
            && self.q.iter().all(|v| v.is_finite())
            && self.qd.iter().all(|v| v.is_finite())
            && self.foot_fz.iter().all(|v| v.is_finite())
            && self.time.is_finite()
    }


    pub(crate) fn gen_vel(&self) -> [f64; 3 + JOINT_COUNT] {
        let mut out = [0.0; 3 + JOINT_COUNT];
        out[0] = self.base_vel[0];
        out[1] = self.base_vel[1];
        out[2] = self.base_omega;
        out[3..].copy_from_slice(&self.qd);
        out
    }
}
