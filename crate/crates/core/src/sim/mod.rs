//! Deterministic planar biped simulator with penalty ground contact.

mod dynamics;
mod model;
mod state;
mod terrain;

pub use dynamics::{
    ankle_positions, check_termination, check_termination_above, contact_forces,
    lowest_contact_z, mechanical_energy, step, step_with_force, ContactForces, TerminationFlag,
    TerminationReason,
};
pub use model::{joint, ContactParams, FootParams, RobotModel, SegmentParams, TerminationParams,
    TorsoParams, DOF, JOINT_COUNT};
pub use state::SimState;
pub use terrain::Terrain;
