//! Fault-tolerant bipedal locomotion training at desk scale: a planar biped
//! simulator with actuator fault injection, an online joint-status estimator,
//! phase-modulated gait references, curriculum-gated policy optimization, and
//! an evaluation harness for success rates and velocity-tracking error.

pub mod config;
pub mod env;
pub mod checkpoint;
pub mod episode;
pub mod error;
pub mod eval;
pub mod pendulum;
pub mod trainer;
pub mod obs;
pub mod estimator;
pub mod fault;
pub mod reward;
pub mod gait;
pub mod sim;
pub mod nn;
pub mod rng;
