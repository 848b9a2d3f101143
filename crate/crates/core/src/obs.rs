//! Observation frames and the strided history buffer feeding the policy.

use serde::{Deserialize, Serialize};

use crate::estimator::STATUS_DIM;
use crate::sim::JOINT_COUNT;

/// Frames kept visible to the policy.
pub const N_HISTORY: usize = 10;
/// Stride between selected frames.
pub const N_STRIDE: usize = 2;
/// Ring capacity covering offsets 0, 2, ..., 18.
pub const RING_CAPACITY: usize = N_HISTORY * N_STRIDE;

/// One frame: pitch, q, qd, phase sin/cos, command (vx, vy, wz),
/// base velocity (vx, vz, pitch rate), thresholded joint status.
pub const FRAME_DIM: usize = 1 + JOINT_COUNT + JOINT_COUNT + 2 + 3 + 3 + STATUS_DIM;

/// Policy and critic input: the strided history, newest first.
pub const POLICY_INPUT_DIM: usize = N_HISTORY * FRAME_DIM;

/// Offsets (ages in control steps) of the selected frames.
pub fn strided_offsets() -> [usize; N_HISTORY] {
    let mut out = [0; N_HISTORY];
    for (i, o) in out.iter_mut().enumerate() {
        *o = i * N_STRIDE;
    }
    out
}

#[allow(clippy::too_many_arguments)]
pub fn assemble_frame(
    pitch: f64,
    q: &[f64],
    qd: &[f64],
    phase_enc: [f64; 2],
    command: [f64; 3],
    base_vel_obs: [f64; 3],
    status: &[f64],
) -> Vec<f64> {
    let mut f = Vec::with_capacity(FRAME_DIM);
    f.push(pitch);
    f.extend_from_slice(q);
    f.extend_from_slice(qd);
    f.extend_from_slice(&phase_enc);
    f.extend_from_slice(&command);
    f.extend_from_slice(&base_vel_obs);
    f.extend_from_slice(status);
    debug_assert_eq!(f.len(), FRAME_DIM);
    f
}

/// Index range of the status slice within a frame, used by the
/// no-status-observation ablation.
pub fn status_range() -> std::ops::Range<usize> {
    FRAME_DIM - STATUS_DIM..FRAME_DIM
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryBuffer {
    frames: Vec<Vec<f64>>,
    /// Ring index of the newest frame.
    head: usize,
    /// Frames pushed since the last reset; older slots read as zero.
    count: usize,
}

impl Default for HistoryBuffer {
    fn default() -> Self {
        Self::new()
    }
}

impl HistoryBuffer {
    pub fn new() -> Self {
        Self {
            frames: vec![vec![0.0; FRAME_DIM]; RING_CAPACITY],
            head: 0,
            count: 0,
        }
    }

    pub fn reset(&mut self) {
        for f in &mut self.frames {
            f.iter_mut().for_each(|v| *v = 0.0);
        }
        self.head = 0;
        self.count = 0;
    }

    pub fn push(&mut self, frame: Vec<f64>) {
        assert_eq!(frame.len(), FRAME_DIM);
        self.head = (self.head + 1) % RING_CAPACITY;
        self.frames[self.head] = frame;
        self.count += 1;
    }

    pub fn frames_pushed(&self) -> usize {
        self.count
    }

    /// Frame at the given age (0 = newest); zeros before episode start.
    pub fn frame_at(&self, age: usize) -> Option<&[f64]> {
        if age < self.count && age < RING_CAPACITY {
            let idx = (self.head + RING_CAPACITY - age) % RING_CAPACITY;
            Some(&self.frames[idx])
        } else {
            None
        }
    }

    /// Concatenate the strided selection, newest first, zero-filled where the
    /// episode has not yet produced a frame.
    pub fn policy_input(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(POLICY_INPUT_DIM);
        for age in strided_offsets() {
            match self.frame_at(age) {
                Some(f) => out.extend_from_slice(f),
                None => out.extend(std::iter::repeat(0.0).take(FRAME_DIM)),
            }
        }
        out
    }
}
