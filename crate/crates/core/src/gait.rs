//! Cyclic gait phase with policy-driven modulation, scripted joint and
//! contact-force references, and support-phase classification.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::sim::JOINT_COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SupportPhase {
    /// Double support.
    Dsp,
    /// Right single support (left leg swings).
    Rssp,
    /// Left single support (right leg swings).
    Lssp,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhaseState {
    /// Phase in [0, 1).
    pub phi: f64,
    /// Reference gait period (s).
    pub t_ref: f64,
}

impl PhaseState {
    pub fn new(phi: f64, t_ref: f64) -> Self {
        assert!(t_ref > 0.0);
        Self {
            phi: phi.rem_euclid(1.0),
            t_ref,
        }
    }

    /// Sine/cosine phase encoding.
    pub fn encode(&self) -> [f64; 2] {
        let a = 2.0 * std::f64::consts::PI * self.phi;
        [a.sin(), a.cos()]
    }
}

/// phi' = (phi + dt/T_ref + a) mod 1, with the modulation action clamped.
pub fn advance_phase(ps: PhaseState, dt: f64, a_phase: f64, clamp: f64) -> PhaseState {
    debug_assert!(dt > 0.0);
    let a = a_phase.clamp(-clamp, clamp);
    PhaseState {
        phi: (ps.phi + dt / ps.t_ref + a).rem_euclid(1.0),
        t_ref: ps.t_ref,
    }
}

/// Support phases as right-closed intervals over the cycle: entry i covers
/// (end[i-1], end[i]], with the first interval also containing phi = 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaitSchedule {
    /// (interval end, phase) pairs; ends strictly increasing, last end = 1.0.
    pub intervals: Vec<(f64, SupportPhase)>,
}

impl Default for GaitSchedule {
    fn default() -> Self {
        Self {
            intervals: vec![
                (0.1, SupportPhase::Dsp),
                (0.5, SupportPhase::Rssp),
                (0.6, SupportPhase::Dsp),
                (1.0, SupportPhase::Lssp),
            ],
        }
    }
}

impl GaitSchedule {
    /// Sample a phase inside the double-support windows, where both feet are
    /// planted and an episode can start from a statically sound stance.
    pub fn sample_dsp_phase(&self, u: f64) -> f64 {
        let mut windows = Vec::new();
        let mut start = 0.0;
        let mut total = 0.0;
        for &(end, phase) in &self.intervals {
            if phase == SupportPhase::Dsp {
                windows.push((start, end));
                total += end - start;
            }
            start = end;
        }
        if windows.is_empty() || total <= 0.0 {
            return u.rem_euclid(1.0);
        }
        let mut target = u.rem_euclid(1.0) * total;
        for (s, e) in windows {
            let len = e - s;
            if target <= len {
                return s + target;
            }
            target -= len;
        }
        0.0
    }

    /// Swing window (start, end) of one leg: the interval where the opposite
    /// leg is the single support.
    pub fn swing_window(&self, left: bool) -> (f64, f64) {
        let target = if left {
            SupportPhase::Rssp
        } else {
            SupportPhase::Lssp
        };
        let mut start = 0.0;
        for &(end, phase) in &self.intervals {
            if phase == target {
                return (start, end);
            }
            start = end;
        }
        panic!("schedule missing a single-support phase");
    }
}

/// Map phi onto the right-closed circle (0, 1]: the boundary point of two
/// intervals belongs to the earlier one, and 0 is identified with 1.
fn canonical_phi(phi: f64) -> f64 {
    let p = phi.rem_euclid(1.0);
    if p == 0.0 {
        1.0
    } else {
        p
    }
}

pub fn support_phase(phi: f64, schedule: &GaitSchedule) -> SupportPhase {
    let phi = canonical_phi(phi);
    for &(end, phase) in &schedule.intervals {
        if phi <= end {
            return phase;
        }
    }
    schedule.intervals.last().unwrap().1
}

/// Scripted gait reference: sinusoidal swing profiles per leg with a
/// half-cycle offset, and a trapezoidal vertical-force profile whose plateau
/// equals the body weight so the two feet sum to W at every phase.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reference {
    pub schedule: GaitSchedule,
    /// Hip swing amplitude (rad).
    pub step_angle: f64,
    /// Knee lift amplitude during swing (rad).
    pub lift_angle: f64,
    /// Ankle amplitude during swing (rad).
    pub ankle_angle: f64,
    /// Body weight (N), the plateau of the force profile.
    pub weight: f64,
}

impl Reference {
    pub fn new(schedule: GaitSchedule, weight: f64) -> Self {
        Self {
            schedule,
            step_angle: 0.3,
            lift_angle: 0.5,
            ankle_angle: 0.0,
            weight,
        }
    }

    /// Joint reference for one leg at phase `phi`. The ankle compensates hip
    /// and knee so the sole stays parallel to the ground: feet land flat and
    /// stance poses are kinematically consistent with level contact.
    fn leg_reference(&self, phi: f64, left: bool) -> [f64; 3] {
        let (s0, s1) = self.schedule.swing_window(left);
        let swing_len = s1 - s0;
        let stance_len = 1.0 - swing_len;
        let (hip, knee, lift) = if phi > s0 && phi <= s1 {
            // Swing: hip travels retracted -> protracted with a knee bump.
            let u = (phi - s0) / swing_len;
            let bump = (std::f64::consts::PI * u).sin().powi(2);
            (
                self.step_angle * -(std::f64::consts::PI * u).cos(),
                self.lift_angle * bump,
                self.ankle_angle * bump,
            )
        } else {
            // Stance: hip moves back linearly from protracted to retracted.
            let v = (phi - s1).rem_euclid(1.0) / stance_len;
            (self.step_angle * (1.0 - 2.0 * v), 0.0, 0.0)
        };
        [hip, knee, -(hip + knee) + lift]
    }

    /// Trapezoidal vertical-force reference for one foot.
    fn foot_force(&self, phi: f64, left: bool) -> f64 {
        let (s0, s1) = self.schedule.swing_window(left);
        if phi > s0 && phi <= s1 {
            return 0.0;
        }
        // Ramp down across the double support leading into the swing and up
        // across the one following it; plateau elsewhere in stance.
        let (other0, other1) = self.swing_of_other(left);
        let w = self.weight;
        // Double-support windows are the gaps between the two swing windows.
        // Entering our swing at s0: the DSP just before it is
        // (end of other swing .. s0) -- there our load ramps down.
        let ramp_down = (other1, s0);
        let ramp_up = (s1, if other0 < s1 { other0 + 1.0 } else { other0 });
        let phi_unwrapped = if phi <= s1 { phi + 1.0 } else { phi };
        // phi lies in stance: between s1 and s0 (+1 wrap).
        if phi_in(phi, ramp_down.0, ramp_down.1) {
            let u = (phi - ramp_down.0).rem_euclid(1.0) / (ramp_down.1 - ramp_down.0).rem_euclid(1.0);
            w * (1.0 - u)
        } else if phi_unwrapped > ramp_up.0 && phi_unwrapped <= ramp_up.1 {
            let u = (phi_unwrapped - ramp_up.0) / (ramp_up.1 - ramp_up.0);
            w * u
        } else {
            w
        }
    }

    fn swing_of_other(&self, left: bool) -> (f64, f64) {
        self.schedule.swing_window(!left)
    }
}

fn phi_in(phi: f64, start: f64, end: f64) -> bool {
    if start <= end {
        phi > start && phi <= end
    } else {
        phi > start || phi <= end
    }
}

/// Evaluate the periodic reference: per-joint angles and per-foot forces.
pub fn reference_at(phi: f64, reference: &Reference) -> (Vec<f64>, f64, f64) {
    let phi = canonical_phi(phi);
    let left = reference.leg_reference(phi, true);
    let right = reference.leg_reference(phi, false);
    let mut q = Vec::with_capacity(JOINT_COUNT);
    q.extend_from_slice(&left);
    q.extend_from_slice(&right);
    (
        q,
        reference.foot_force(phi, true),
        reference.foot_force(phi, false),
    )
}

/// Dump reference curves over one cycle for plotting.
pub fn write_reference_csv(path: &Path, reference: &Reference, samples: usize) -> std::io::Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(
        f,
        "phi,l_hip,l_knee,l_ankle,r_hip,r_knee,r_ankle,fz_left,fz_right,support"
    )?;
    for i in 0..samples {
        let phi = i as f64 / samples as f64;
        let (q, fl, fr) = reference_at(phi, reference);
        let support = match support_phase(phi, &reference.schedule) {
            SupportPhase::Dsp => "dsp",
            SupportPhase::Rssp => "rssp",
            SupportPhase::Lssp => "lssp",
        };
        let joints: Vec<String> = q.iter().map(|v| v.to_string()).collect();
        writeln!(f, "{phi},{},{fl},{fr},{support}", joints.join(","))?;
    }
    Ok(())
}
