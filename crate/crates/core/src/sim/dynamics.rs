//! Articulated dynamics of the planar biped.
//!
//! The equations of motion are assembled per substep from analytic COM
//! Jacobians: M(q) qdd = Q - sum_k Jv_k^T m_k a_bias_k, where the bias
//! accelerations are the centripetal terms of each kinematic chain. Ground
//! contact is a penalty model (normal spring-damper, Coulomb-clamped
//! tangential damper) at two points per foot.

use nalgebra::{DMatrix, DVector};

use super::model::{RobotModel, DOF, JOINT_COUNT};
use super::state::SimState;
use super::terrain::Terrain;
use crate::error::SimError;

const N_BODIES: usize = 7;
const N_CONTACTS: usize = 4;

/// Generalized-coordinate indices of the rotational dofs per body:
/// torso, l-thigh, l-shank, l-foot, r-thigh, r-shank, r-foot.
const BODY_DOFS: [&[usize]; N_BODIES] = [
    &[2],
    &[2, 3],
    &[2, 3, 4],
    &[2, 3, 4, 5],
    &[2, 6],
    &[2, 6, 7],
    &[2, 6, 7, 8],
];

#[derive(Debug, Clone, Copy)]
pub(crate) struct PointKin {
    pub pos: [f64; 2],
    pub vel: [f64; 2],
    /// Rows are x and z; columns are generalized coordinates.
    pub jac: [[f64; DOF]; 2],
}

impl PointKin {
    fn at_rest(pos: [f64; 2]) -> Self {
        Self {
            pos,
            vel: [0.0; 2],
            jac: [[0.0; DOF]; 2],
        }
    }
}

pub(crate) struct BodyKin {
    pub com: PointKin,
    pub omega: f64,
    pub abias: [f64; 2],
    pub mass: f64,
    pub inertia: f64,
}

pub(crate) struct Kinematics {
    pub bodies: Vec<BodyKin>,
    /// l-heel, l-toe, r-heel, r-toe.
    pub contacts: [PointKin; N_CONTACTS],
    /// Ankle positions (left, right), used by the foot-split check.
    pub ankles: [[f64; 2]; 2],
}

fn rot(theta: f64, v: [f64; 2]) -> [f64; 2] {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Velocity direction of a point rotating about an anchor (unit rate, CCW).
fn perp(p: [f64; 2], anchor: [f64; 2]) -> [f64; 2] {
    [-(p[1] - anchor[1]), p[0] - anchor[0]]
}

fn point_kin(pos: [f64; 2], axes: &[(usize, [f64; 2])], vel_gen: &[f64; DOF]) -> PointKin {
    let mut pk = PointKin::at_rest(pos);
    pk.jac[0][0] = 1.0;
    pk.jac[1][1] = 1.0;
    for &(dof, anchor) in axes {
        let d = perp(pos, anchor);
        pk.jac[0][dof] = d[0];
        pk.jac[1][dof] = d[1];
    }
    for r in 0..2 {
        pk.vel[r] = pk.jac[r].iter().zip(vel_gen.iter()).map(|(j, v)| j * v).sum();
    }
    pk
}

/// Centripetal acceleration of a chain of world-frame segments, each turning
/// at its cumulative angular rate.
fn bias_acc(segments: &[([f64; 2], f64)]) -> [f64; 2] {
    let mut a = [0.0; 2];
    for &(seg, omega) in segments {
        a[0] -= omega * omega * seg[0];
        a[1] -= omega * omega * seg[1];
    }
    a
}

pub(crate) fn kinematics(model: &RobotModel, state: &SimState) -> Kinematics {
    let vel_gen = state.gen_vel();
    let base = state.base_pos;
    let pitch = state.base_pitch;
    let w_base = state.base_omega;

    let mut bodies = Vec::with_capacity(N_BODIES);

    // Torso.
    let torso_com = {
        let offset = rot(pitch, [0.0, model.torso.com_height]);
        let pos = [base[0] + offset[0], base[1] + offset[1]];
        let pk = point_kin(pos, &[(2, base)], &vel_gen);
        bodies.push(BodyKin {
            com: pk,
            omega: w_base,
            abias: bias_acc(&[(offset, w_base)]),
            mass: model.torso.mass,
            inertia: model.torso.inertia,
        });
        pos
    };
    let _ = torso_com;

    let mut contacts = [PointKin::at_rest([0.0; 2]); N_CONTACTS];
    let mut ankles = [[0.0; 2]; 2];

    for side in 0..2 {
        let jq = 3 * side; // joint array offset: hip, knee, ankle
        let d_hip = 3 + jq; // generalized-coordinate indices
        let d_knee = 4 + jq;
        let d_ankle = 5 + jq;

        let th_thigh = pitch + state.q[jq];
        let th_shank = th_thigh + state.q[jq + 1];
        let th_foot = th_shank + state.q[jq + 2];
        let w_thigh = w_base + state.qd[jq];
        let w_shank = w_thigh + state.qd[jq + 1];
        let w_foot = w_shank + state.qd[jq + 2];

        let hip = base;
        let thigh_vec = rot(th_thigh, [0.0, -model.thigh.length]);
        let knee = [hip[0] + thigh_vec[0], hip[1] + thigh_vec[1]];
        let shank_vec = rot(th_shank, [0.0, -model.shank.length]);
        let ankle = [knee[0] + shank_vec[0], knee[1] + shank_vec[1]];
        ankles[side] = ankle;

        // Thigh.
        let thigh_com_vec = rot(th_thigh, [0.0, -model.thigh.com_offset]);
        let thigh_com = [hip[0] + thigh_com_vec[0], hip[1] + thigh_com_vec[1]];
        bodies.push(BodyKin {
            com: point_kin(thigh_com, &[(2, base), (d_hip, hip)], &vel_gen),
            omega: w_thigh,
            abias: bias_acc(&[(thigh_com_vec, w_thigh)]),
            mass: model.thigh.mass,
            inertia: model.thigh.inertia,
        });

        // Shank.
        let shank_com_vec = rot(th_shank, [0.0, -model.shank.com_offset]);
        let shank_com = [knee[0] + shank_com_vec[0], knee[1] + shank_com_vec[1]];
        bodies.push(BodyKin {
            com: point_kin(
                shank_com,
                &[(2, base), (d_hip, hip), (d_knee, knee)],
                &vel_gen,
            ),
            omega: w_shank,
            abias: bias_acc(&[(thigh_vec, w_thigh), (shank_com_vec, w_shank)]),
            mass: model.shank.mass,
            inertia: model.shank.inertia,
        });

        // Foot.
        let foot_com_vec = rot(th_foot, [0.0, -0.5 * model.foot.ankle_height]);
        let foot_com = [ankle[0] + foot_com_vec[0], ankle[1] + foot_com_vec[1]];
        let leg_axes = [
            (2usize, base),
            (d_hip, hip),
            (d_knee, knee),
            (d_ankle, ankle),
        ];
        bodies.push(BodyKin {
            com: point_kin(foot_com, &leg_axes, &vel_gen),
            omega: w_foot,
            abias: bias_acc(&[
                (thigh_vec, w_thigh),
                (shank_vec, w_shank),
                (foot_com_vec, w_foot),
            ]),
            mass: model.foot.mass,
            inertia: model.foot.inertia,
        });

        for (ci, sx) in [(-1.0), 1.0].iter().enumerate() {
            let local = [sx * model.foot.half_length, -model.foot.ankle_height];
            let cv = rot(th_foot, local);
            let cpos = [ankle[0] + cv[0], ankle[1] + cv[1]];
            contacts[2 * side + ci] = point_kin(cpos, &leg_axes, &vel_gen);
        }
    }

    Kinematics {
        bodies,
        contacts,
        ankles,
    }
}

/// Per-point and per-foot contact forces.
#[derive(Debug, Clone, Copy, Default)]
pub struct ContactForces {
    /// Normal force per point: l-heel, l-toe, r-heel, r-toe.
    pub point_normal: [f64; N_CONTACTS],
    /// Tangential force per point after the Coulomb clamp.
    pub point_tangent: [f64; N_CONTACTS],
    /// Per-foot vertical force (left, right).
    pub foot_fz: [f64; 2],
    /// Per-foot tangential force (left, right).
    pub foot_ft: [f64; 2],
}

fn contact_forces_kin(kin: &Kinematics, model: &RobotModel, terrain: &Terrain) -> ContactForces {
    let mut out = ContactForces::default();
    for (i, pt) in kin.contacts.iter().enumerate() {
        let ground = terrain.height(pt.pos[0]);
        let pen = ground - pt.pos[1];
        if pen <= 0.0 {
            continue;
        }
        let fn_raw = model.contact.k_normal * pen - model.contact.c_normal * pt.vel[1];
        let f_n = fn_raw.max(0.0);
        let limit = terrain.friction * f_n;
        let f_t = (-model.contact.k_tangent * pt.vel[0]).clamp(-limit, limit);
        out.point_normal[i] = f_n;
        out.point_tangent[i] = f_t;
        let foot = i / 2;
        out.foot_fz[foot] += f_n;
        out.foot_ft[foot] += f_t;
    }
    out
}

/// Penalty contact forces at the given state.
pub fn contact_forces(state: &SimState, model: &RobotModel, terrain: &Terrain) -> ContactForces {
    contact_forces_kin(&kinematics(model, state), model, terrain)
}

/// advance one substep with clamped torques and an optional external force on
/// the torso COM.
pub fn step_with_force(
    state: &SimState,
    torques: &[f64],
    model: &RobotModel,
    terrain: &Terrain,
    dt: f64,
    ext_force: [f64; 2],
) -> Result<SimState, SimError> {
    assert!(dt > 0.0, "dt must be positive");
    assert_eq!(torques.len(), JOINT_COUNT);
    if !state.is_finite() {
        return Err(SimError::NumericalDivergence {
            time: state.time,
            detail: "input state is not finite".into(),
        });
    }

    let kin = kinematics(model, state);
    let vel_gen = state.gen_vel();

    // Mass matrix.
    let mut m = DMatrix::<f64>::zeros(DOF, DOF);
    for body in &kin.bodies {
        for row in 0..2 {
            let jr = &body.com.jac[row];
            for a in 0..DOF {
                if jr[a] == 0.0 {
                    continue;
                }
                for b in 0..DOF {
                    m[(a, b)] += body.mass * jr[a] * jr[b];
                }
            }
        }
    }
    for (body, dofs) in kin.bodies.iter().zip(BODY_DOFS.iter()) {
        for &a in *dofs {
            for &b in *dofs {
                m[(a, b)] += body.inertia;
            }
        }
    }

    // Generalized forces.
    let mut rhs = DVector::<f64>::zeros(DOF);
    let g = model.gravity;
    for body in &kin.bodies {
        for d in 0..DOF {
            // gravity minus the centripetal bias term
            rhs[d] += body.com.jac[1][d] * (-body.mass * g)
                - body.mass
                    * (body.com.jac[0][d] * body.abias[0] + body.com.jac[1][d] * body.abias[1]);
        }
    }
    for j in 0..JOINT_COUNT {
        let tau = torques[j].clamp(-model.torque_limit[j], model.torque_limit[j]);
        let qd = state.qd[j];
        rhs[3 + j] +=
            tau - model.joint_damping[j] * qd - model.joint_friction[j] * (qd / 0.01).tanh();
    }
    let cf = contact_forces_kin(&kin, model, terrain);
    for (i, pt) in kin.contacts.iter().enumerate() {
        let (ft, fnm) = (cf.point_tangent[i], cf.point_normal[i]);
        if fnm == 0.0 && ft == 0.0 {
            continue;
        }
        for d in 0..DOF {
            rhs[d] += pt.jac[0][d] * ft + pt.jac[1][d] * fnm;
        }
    }
    if ext_force != [0.0, 0.0] {
        let torso = &kin.bodies[0].com;
        for d in 0..DOF {
            rhs[d] += torso.jac[0][d] * ext_force[0] + torso.jac[1][d] * ext_force[1];
        }
    }

    let qdd = m
        .cholesky()
        .ok_or_else(|| SimError::NumericalDivergence {
            time: state.time,
            detail: "mass matrix not positive definite".into(),
        })?
        .solve(&rhs);

    // Semi-implicit Euler.
    let mut next = state.clone();
    let mut vel_new = vel_gen;
    for d in 0..DOF {
        vel_new[d] += qdd[d] * dt;
    }
    next.base_vel = [vel_new[0], vel_new[1]];
    next.base_omega = vel_new[2];
    next.base_pos[0] += vel_new[0] * dt;
    next.base_pos[1] += vel_new[1] * dt;
    next.base_pitch += vel_new[2] * dt;
    for j in 0..JOINT_COUNT {
        next.qd[j] = vel_new[3 + j];
        next.q[j] += vel_new[3 + j] * dt;
    }
    next.time += dt;

    let cf_next = contact_forces(&next, model, terrain);
    next.foot_fz = cf_next.foot_fz;

    check_divergence(&next)?;
    Ok(next)
}

/// Advance one substep with no external push.
pub fn step(
    state: &SimState,
    torques: &[f64],
    model: &RobotModel,
    terrain: &Terrain,
    dt: f64,
) -> Result<SimState, SimError> {
    step_with_force(state, torques, model, terrain, dt, [0.0, 0.0])
}

fn check_divergence(state: &SimState) -> Result<(), SimError> {
    if !state.is_finite() {
        return Err(SimError::NumericalDivergence {
            time: state.time,
            detail: "state contains non-finite values".into(),
        });
    }
    let pos_ok = state.base_pos.iter().all(|v| v.abs() < 1.0e3);
    let vel_ok = state.base_vel.iter().all(|v| v.abs() < 1.0e3)
        && state.base_omega.abs() < 1.0e3
        && state.qd.iter().all(|v| v.abs() < 1.0e4);
    if !pos_ok || !vel_ok {
        return Err(SimError::NumericalDivergence {
            time: state.time,
            detail: "state magnitude bound exceeded".into(),
        });
    }
    Ok(())
}

/// Total kinetic plus gravitational potential energy.
pub fn mechanical_energy(state: &SimState, model: &RobotModel) -> f64 {
    let kin = kinematics(model, state);
    kin.bodies
        .iter()
        .map(|b| {
            let v2 = b.com.vel[0] * b.com.vel[0] + b.com.vel[1] * b.com.vel[1];
            0.5 * b.mass * v2 + 0.5 * b.inertia * b.omega * b.omega
                + b.mass * model.gravity * b.com.pos[1]
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationReason {
    BaseHeight,
    Pitch,
    FootSplit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminationFlag {
    Running,
    Terminated(TerminationReason),
}

impl TerminationFlag {
    pub fn is_terminated(&self) -> bool {
        matches!(self, TerminationFlag::Terminated(_))
    }
}

/// Check fall and self-collision-proxy conditions against flat ground at z=0.
pub fn check_termination(state: &SimState, model: &RobotModel) -> TerminationFlag {
    check_termination_above(state, model, 0.0)
}

/// Same check with the ground height under the base supplied by the caller.
pub fn check_termination_above(
    state: &SimState,
    model: &RobotModel,
    ground: f64,
) -> TerminationFlag {
    let height = state.base_pos[1] - ground;
    if height < model.termination.height_frac * model.standing_height() {
        return TerminationFlag::Terminated(TerminationReason::BaseHeight);
    }
    if state.base_pitch.abs() > model.termination.pitch_limit {
        return TerminationFlag::Terminated(TerminationReason::Pitch);
    }
    let kin = kinematics(model, state);
    if (kin.ankles[0][0] - kin.ankles[1][0]).abs() > model.termination.max_foot_split {
        return TerminationFlag::Terminated(TerminationReason::FootSplit);
    }
    TerminationFlag::Running
}

/// Ankle x/z positions (left, right), used for logging and initial placement.
pub fn ankle_positions(state: &SimState, model: &RobotModel) -> [[f64; 2]; 2] {
    kinematics(model, state).ankles
}

/// Lowest sole point over both feet.
pub fn lowest_contact_z(state: &SimState, model: &RobotModel) -> f64 {
    let kin = kinematics(model, state);
    kin.contacts
        .iter()
        .map(|c| c.pos[1])
        .fold(f64::INFINITY, f64::min)
}
