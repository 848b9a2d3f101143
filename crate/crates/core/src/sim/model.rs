//! Physical description of the planar biped and its actuation.

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Actuated joint count: hip, knee, ankle per leg in the sagittal plane.
pub const JOINT_COUNT: usize = 6;
/// Generalized coordinates: base x, base z, base pitch, then the six joints.
pub const DOF: usize = 3 + JOINT_COUNT;

/// Joint indices within the q vector.
pub mod joint {
    pub const L_HIP: usize = 0;
    pub const L_KNEE: usize = 1;
    pub const L_ANKLE: usize = 2;
    pub const R_HIP: usize = 3;
    pub const R_KNEE: usize = 4;
    pub const R_ANKLE: usize = 5;

    pub const NAMES: [&str; 6] = [
        "l_hip", "l_knee", "l_ankle", "r_hip", "r_knee", "r_ankle",
    ];
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegmentParams {
    pub mass: f64,
    pub length: f64,
    /// Distance from the proximal joint to the segment COM.
    pub com_offset: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TorsoParams {
    pub mass: f64,
    /// COM height above the hip point.
    pub com_height: f64,
    pub inertia: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FootParams {
    pub mass: f64,
    /// Heel and toe sit at -half_length and +half_length from the ankle.
    pub half_length: f64,
    /// Sole depth below the ankle joint.
    pub ankle_height: f64,
    pub inertia: f64,
}

/// Ground-contact penalty parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ContactParams {
    /// Normal spring stiffness (N/m).
    pub k_normal: f64,
    /// Normal damping (N*s/m).
    pub c_normal: f64,
    /// Tangential damping before the Coulomb clamp (N*s/m).
    pub k_tangent: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TerminationParams {
    /// Terminate when base height drops below this fraction of standing height.
    pub height_frac: f64,
    /// Terminate when |pitch| exceeds this (strict inequality at the limit).
    pub pitch_limit: f64,
    /// Planar self-collision proxy: feet may not separate past this along x.
    pub max_foot_split: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotModel {
    pub gravity: f64,
    pub torso: TorsoParams,
    pub thigh: SegmentParams,
    pub shank: SegmentParams,
    pub foot: FootParams,
    /// Per-joint PD gains used when a joint locks (N*m/rad, N*m*s/rad).
    pub kp: [f64; JOINT_COUNT],
    pub kd: [f64; JOINT_COUNT],
    pub torque_limit: [f64; JOINT_COUNT],
    /// Viscous joint damping (N*m*s/rad).
    pub joint_damping: [f64; JOINT_COUNT],
    /// Dry joint friction magnitude (N*m), applied with a smooth sign.
    pub joint_friction: [f64; JOINT_COUNT],
    pub contact: ContactParams,
    pub termination: TerminationParams,
}

impl Default for RobotModel {
    fn default() -> Self {
        let mirror = |hip: f64, knee: f64, ankle: f64| [hip, knee, ankle, hip, knee, ankle];
        Self {
            gravity: 9.81,
            torso: TorsoParams {
                mass: 16.0,
                com_height: 0.25,
                inertia: 16.0 * 0.5 * 0.5 / 12.0,
            },
            thigh: SegmentParams {
                mass: 4.5,
                length: 0.4,
                com_offset: 0.2,
                inertia: 4.5 * 0.4 * 0.4 / 12.0,
            },
            shank: SegmentParams {
                mass: 2.5,
                length: 0.4,
                com_offset: 0.2,
                inertia: 2.5 * 0.4 * 0.4 / 12.0,
            },
            foot: FootParams {
                mass: 1.0,
                half_length: 0.11,
                ankle_height: 0.06,
                inertia: 1.0 * (0.22 * 0.22 + 0.06 * 0.06) / 12.0,
            },
            kp: mirror(200.0, 200.0, 100.0),
            kd: mirror(15.0, 15.0, 5.0),
            torque_limit: mirror(80.0, 80.0, 40.0),
            joint_damping: [0.5; JOINT_COUNT],
            joint_friction: [0.1; JOINT_COUNT],
            contact: ContactParams {
                k_normal: 4.0e4,
                c_normal: 200.0,
                k_tangent: 300.0,
            },
            termination: TerminationParams {
                height_frac: 0.5,
                pitch_limit: 0.8,
                max_foot_split: 0.7,
            },
        }
    }
}

impl RobotModel {
    pub fn joint_count(&self) -> usize {
        JOINT_COUNT
    }

    pub fn total_mass(&self) -> f64 {
        self.torso.mass + 2.0 * (self.thigh.mass + self.shank.mass + self.foot.mass)
    }

    /// Total weight W in newtons.
    pub fn weight(&self) -> f64 {
        self.total_mass() * self.gravity
    }

    /// Hip height above the ground with both legs straight and feet flat.
    pub fn standing_height(&self) -> f64 {
        self.thigh.length + self.shank.length + self.foot.ankle_height
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let err = |field: &str, message: &str| {
            Err(ConfigError::Invalid {
                field: format!("model.{field}"),
                message: message.to_string(),
            })
        };
        if self.gravity <= 0.0 {
            return err("gravity", "must be strictly positive");
        }
        for (name, mass) in [
            ("torso.mass", self.torso.mass),
            ("thigh.mass", self.thigh.mass),
            ("shank.mass", self.shank.mass),
            ("foot.mass", self.foot.mass),
        ] {
            if mass <= 0.0 {
                return err(name, "mass must be strictly positive");
            }
        }
        for (name, len) in [
            ("thigh.length", self.thigh.length),
            ("shank.length", self.shank.length),
            ("foot.half_length", self.foot.half_length),
            ("foot.ankle_height", self.foot.ankle_height),
            ("torso.com_height", self.torso.com_height),
        ] {
            if len <= 0.0 {
                return err(name, "length must be strictly positive");
            }
        }
        for j in 0..JOINT_COUNT {
            if self.torque_limit[j] <= 0.0 {
                return err("torque_limit", "limits must be strictly positive");
            }
            if self.kp[j] < 0.0 || self.kd[j] < 0.0 {
                return err("kp/kd", "gains must be non-negative");
            }
            if self.joint_damping[j] < 0.0 || self.joint_friction[j] < 0.0 {
                return err("joint_damping/joint_friction", "must be non-negative");
            }
        }
        if self.contact.k_normal <= 0.0 {
            return err("contact.k_normal", "must be strictly positive");
        }
        Ok(())
    }
}
