//! One locomotion environment: the simulator plus fault injection, gait
//! phase, reward evaluation, estimator features, and the observation history.
//!
//! The full per-episode runtime (including the RNG stream) is serializable so
//! training can resume from a checkpoint bit-identically.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::estimator::{proprio_features, Estimator, StatusEstimate};
use crate::fault::{ground_truth_label, mask_torque, sample_scenario, FaultScenario};
use crate::gait::{advance_phase, reference_at, PhaseState, Reference};
use crate::obs::{assemble_frame, HistoryBuffer};
use crate::reward::{foot_loaded, total_reward, RewardBreakdown, RewardInputs, RewardWeights};
use crate::rng::stream;
use crate::sim::{
    check_termination_above, lowest_contact_z, step_with_force, RobotModel, SimState, JOINT_COUNT,
};

/// Training stage from the curriculum controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CurriculumStage {
    Nominal,
    FaultsEnabled,
    FaultsAndPush,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PushEvent {
    pub start: f64,
    pub duration: f64,
    pub force_x: f64,
}

/// Per-episode scenario pinning for evaluation runs.
#[derive(Debug, Clone)]
pub struct EpisodeSetup {
    pub scenario: Option<FaultScenario>,
    pub command: Option<[f64; 3]>,
    /// Disables dynamics randomization and observation noise.
    pub deterministic_dynamics: bool,
    /// Schedule a seeded push even with randomization disabled.
    pub pushes: bool,
}

impl EpisodeSetup {
    pub fn training() -> Self {
        Self {
            scenario: None,
            command: None,
            deterministic_dynamics: false,
            pushes: false,
        }
    }

    pub fn pinned(scenario: FaultScenario, command: [f64; 3], pushes: bool) -> Self {
        Self {
            scenario: Some(scenario),
            command: Some(command),
            deterministic_dynamics: true,
            pushes,
        }
    }
}

/// Everything returned to the trainer after one control step.
pub struct StepOutcome {
    pub reward: RewardBreakdown,
    pub terminated: bool,
    pub truncated: bool,
    /// Episode length in seconds when the episode just ended.
    pub episode_len_s: Option<f64>,
    /// Estimator training sample for this step.
    pub est_features: Vec<f64>,
    pub est_label: Vec<f64>,
    pub est_hidden_before: Vec<f64>,
    pub est_probabilities: Vec<f64>,
    pub est_status: Vec<f64>,
    /// Applied (post-mask, post-clamp) torques.
    pub applied_torques: Vec<f64>,
    pub base_velocity: [f64; 2],
    pub base_omega: f64,
    pub command: [f64; 3],
    pub phase: f64,
    pub fault_active: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LocomotionEnv {
    pub rng: ChaCha8Rng,
    /// Randomized per-episode model.
    pub model: RobotModel,
    pub sim: SimState,
    pub phase: PhaseState,
    pub scenario: FaultScenario,
    pub command: [f64; 3],
    pub push: Option<PushEvent>,
    pub history: HistoryBuffer,
    pub est_hidden: Vec<f64>,
    motor_scale: [f64; JOINT_COUNT],
    /// Actuation delay as a fraction of one control step.
    delay_frac: f64,
    /// Raw policy torques from the previous step (delay line input).
    prev_cmd_raw: Vec<f64>,
    /// Clamped commanded torques from the previous step (estimator feature).
    prev_cmd_clamped: Vec<f64>,
    prev_applied: Vec<f64>,
    prev_qd: Vec<f64>,
    prev_fz: [f64; 2],
    /// Features and pre-step hidden state of the frame the policy just saw.
    pending_features: Vec<f64>,
    pending_hidden: Vec<f64>,
    pub step_in_episode: usize,
    pub episode_index: u64,
    ground_z: f64,
    env_index: u64,
}

impl LocomotionEnv {
    pub fn new(config: &Config, master_seed: u64, env_index: u64) -> Self {
        Self {
            rng: stream(master_seed, &[0x454e56, env_index]),
            model: config.model.clone(),
            sim: SimState::settled_standing(&config.model),
            phase: PhaseState::new(0.0, config.gait.t_ref),
            scenario: FaultScenario::healthy(),
            command: [0.0; 3],
            push: None,
            history: HistoryBuffer::new(),
            est_hidden: Vec::new(),
            motor_scale: [1.0; JOINT_COUNT],
            delay_frac: 0.0,
            prev_cmd_raw: vec![0.0; JOINT_COUNT],
            prev_cmd_clamped: vec![0.0; JOINT_COUNT],
            prev_applied: vec![0.0; JOINT_COUNT],
            prev_qd: vec![0.0; JOINT_COUNT],
            prev_fz: [0.0; 2],
            pending_features: Vec::new(),
            pending_hidden: Vec::new(),
            step_in_episode: 0,
            episode_index: 0,
            ground_z: 0.0,
            env_index,
        }
    }

    pub fn env_index(&self) -> u64 {
        self.env_index
    }

    fn uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
        if range.0 == range.1 {
            range.0
        } else {
            rng.gen_range(range.0..range.1)
        }
    }

    /// Start a new episode. Draw order over the env RNG is fixed:
    /// dynamics scales, command, fault scenario, push schedule, initial pose.
    pub fn reset(
        &mut self,
        config: &Config,
        reference: &Reference,
        estimator: &Estimator,
        stage: CurriculumStage,
        setup: &EpisodeSetup,
    ) {
        let rando = &config.randomization;
        let randomize = rando.enabled && !setup.deterministic_dynamics;
        let rng = &mut self.rng;

        // Dynamics randomization.
        let mut model = config.model.clone();
        if randomize {
            model.torso.mass *= Self::uniform(rng, rando.mass_scale);
            model.thigh.mass *= Self::uniform(rng, rando.mass_scale);
            model.shank.mass *= Self::uniform(rng, rando.mass_scale);
            model.foot.mass *= Self::uniform(rng, rando.mass_scale);
            model.torso.inertia *= Self::uniform(rng, rando.inertia_scale);
            model.thigh.inertia *= Self::uniform(rng, rando.inertia_scale);
            model.shank.inertia *= Self::uniform(rng, rando.inertia_scale);
            model.foot.inertia *= Self::uniform(rng, rando.inertia_scale);
            model.torso.com_height *= Self::uniform(rng, rando.com_scale);
            let thigh_com = Self::uniform(rng, rando.com_scale);
            model.thigh.com_offset = (model.thigh.com_offset * thigh_com).min(model.thigh.length);
            let shank_com = Self::uniform(rng, rando.com_scale);
            model.shank.com_offset = (model.shank.com_offset * shank_com).min(model.shank.length);
            for j in 0..JOINT_COUNT {
                model.joint_friction[j] *= Self::uniform(rng, rando.friction_scale);
                model.joint_damping[j] *= Self::uniform(rng, rando.damping_scale);
                self.motor_scale[j] = Self::uniform(rng, rando.motor_scale);
            }
            let delay_s = Self::uniform(rng, rando.delay_ms) * 1e-3;
            self.delay_frac = (delay_s / config.control_dt()).clamp(0.0, 1.0);
        } else {
            self.motor_scale = [1.0; JOINT_COUNT];
            self.delay_frac = 0.0;
        }

        // Command velocities.
        self.command = setup.command.unwrap_or_else(|| {
            if randomize {
                [
                    Self::uniform(rng, rando.command_vx),
                    Self::uniform(rng, rando.command_vy),
                    Self::uniform(rng, rando.command_wz),
                ]
            } else {
                [0.0; 3]
            }
        });

        // Fault scenario, gated by the curriculum stage.
        self.scenario = match &setup.scenario {
            Some(s) => s.clone(),
            None => {
                if stage >= CurriculumStage::FaultsEnabled {
                    sample_scenario(
                        rng,
                        JOINT_COUNT,
                        config.ppo.horizon_s,
                        &config.fault.fault_config(),
                    )
                } else {
                    FaultScenario::healthy()
                }
            }
        };

        // Push perturbation, one per episode at the final stage (or when the
        // evaluation setup asks for one explicitly).
        let schedule_push = if setup.deterministic_dynamics {
            setup.pushes
        } else {
            stage == CurriculumStage::FaultsAndPush && randomize
        };
        self.push = if schedule_push && rando.push_force.1 > 0.0 {
            let start = Self::uniform(rng, (0.2, 0.7)) * config.ppo.horizon_s;
            let duration = Self::uniform(rng, rando.push_duration);
            let mag = Self::uniform(rng, rando.push_force);
            let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
            Some(PushEvent {
                start,
                duration,
                force_x: mag * sign,
            })
        } else {
            None
        };

        // Initial pose on the reference gait, base placed so the lowest sole
        // point sits at the static settle depth. Double-support phases give a
        // statically sound starting stance.
        let u = rng.gen::<f64>();
        let phi0 = if config.gait.init_phase_dsp {
            config.gait.schedule.sample_dsp_phase(u)
        } else {
            u
        };
        self.phase = PhaseState::new(phi0, config.gait.t_ref);
        let (q_ref, _, _) = reference_at(phi0, reference);
        let mut sim = SimState::standing(0.0);
        for j in 0..JOINT_COUNT {
            let noise = if randomize && rando.init_joint_noise > 0.0 {
                Self::uniform(rng, (-rando.init_joint_noise, rando.init_joint_noise))
            } else {
                0.0
            };
            sim.q[j] = q_ref[j] + noise;
        }
        self.ground_z = config.terrain.height(0.0);
        let lowest = lowest_contact_z(&sim, &model);
        let settle = model.weight() / (4.0 * model.contact.k_normal);
        sim.base_pos = [0.0, self.ground_z - lowest - settle];
        self.sim = sim;
        self.model = model;

        self.history.reset();
        self.est_hidden = estimator.zero_hidden();
        self.prev_cmd_raw.iter_mut().for_each(|v| *v = 0.0);
        self.prev_cmd_clamped.iter_mut().for_each(|v| *v = 0.0);
        self.prev_applied.iter_mut().for_each(|v| *v = 0.0);
        self.prev_qd.iter_mut().for_each(|v| *v = 0.0);
        self.prev_fz = [0.0; 2];
        self.step_in_episode = 0;
        self.episode_index += 1;

        self.push_frame(config, estimator);
    }

    /// Estimator inference plus observation-frame construction for the
    /// current state; called once per control step.
    fn push_frame(&mut self, config: &Config, estimator: &Estimator) -> StatusEstimate {
        let features = proprio_features(
            self.sim.base_pitch,
            &self.sim.q,
            &self.sim.qd,
            self.phase.encode(),
            &self.prev_cmd_clamped,
            &self.model.torque_limit,
        );
        self.pending_hidden = self.est_hidden.clone();
        let estimate = estimator.estimate(&features, &mut self.est_hidden);
        self.pending_features = features;

        let mut v_obs = [
            self.sim.base_vel[0],
            self.sim.base_vel[1],
            self.sim.base_omega,
        ];
        if config.randomization.enabled {
            let r = &config.randomization;
            v_obs[0] += Self::uniform(&mut self.rng, (-r.base_vel_noise_lin, r.base_vel_noise_lin));
            v_obs[1] += Self::uniform(&mut self.rng, (-r.base_vel_noise_lin, r.base_vel_noise_lin));
            v_obs[2] += Self::uniform(&mut self.rng, (-r.base_vel_noise_ang, r.base_vel_noise_ang));
        }

        let mut status = estimate.s.clone();
        if !config.ablation.status_obs {
            status.iter_mut().for_each(|v| *v = 0.0);
        }
        let frame = assemble_frame(
            self.sim.base_pitch,
            &self.sim.q,
            &self.sim.qd,
            self.phase.encode(),
            self.command,
            v_obs,
            &status,
        );
        self.history.push(frame);
        estimate
    }

    /// Strided observation for the policy and critic.
    pub fn policy_input(&self) -> Vec<f64> {
        self.history.policy_input()
    }

    /// Apply one control action: `torques_nm` are the policy's torque
    /// commands in N*m, `a_phase` the phase-modulation action.
    pub fn apply_action(
        &mut self,
        config: &Config,
        reference: &Reference,
        estimator: &Estimator,
        weights: &RewardWeights,
        torques_nm: &[f64],
        a_phase: f64,
    ) -> StepOutcome {
        assert_eq!(torques_nm.len(), JOINT_COUNT);
        let t = self.sim.time;
        let control_dt = config.control_dt();

        // Commanded torques, clamped to limits (what the controller sends).
        let mut cmd_clamped = vec![0.0; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            cmd_clamped[j] =
                torques_nm[j].clamp(-self.model.torque_limit[j], self.model.torque_limit[j]);
        }

        // Actuation delay blends the previous raw command into this one.
        let mut line = vec![0.0; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            line[j] =
                self.delay_frac * self.prev_cmd_raw[j] + (1.0 - self.delay_frac) * torques_nm[j];
            line[j] *= self.motor_scale[j];
        }

        // Fault masking, then the final limit clamp.
        self.scenario.latch(t, &self.sim.q);
        let masked = mask_torque(&line, &self.scenario, &self.sim.q, &self.sim.qd, &self.model, t);
        let mut applied = masked;
        for j in 0..JOINT_COUNT {
            applied[j] = applied[j].clamp(-self.model.torque_limit[j], self.model.torque_limit[j]);
        }
        let label = ground_truth_label(&self.scenario, t, JOINT_COUNT);
        let fault_active = self.scenario.active(t);

        // Push window; gating happened when the push was scheduled at reset.
        let push_force = match self.push {
            Some(p) if t >= p.start && t < p.start + p.duration => [p.force_x, 0.0],
            _ => [0.0, 0.0],
        };

        // Integrate.
        let terrain = &config.terrain;
        let mut terminated = false;
        for _ in 0..config.sim.substeps {
            match step_with_force(&self.sim, &applied, &self.model, terrain, config.sim.dt, push_force) {
                Ok(next) => self.sim = next,
                Err(_) => {
                    terminated = true;
                    break;
                }
            }
        }
        if !terminated {
            terminated = check_termination_above(&self.sim, &self.model, self.ground_z)
                .is_terminated();
        }

        self.step_in_episode += 1;
        let truncated = !terminated && self.step_in_episode >= config.horizon_steps();

        // Reward at the pre-advance phase with post-step dynamics.
        let phi = self.phase.phi;
        let (q_ref, fl_ref, fr_ref) = reference_at(phi, reference);
        let ref_scale = self.model.weight() / reference.weight;
        let w_actual = self.model.weight();
        let thr = config.reward.contact_threshold_frac;
        let inputs = RewardInputs {
            v_cmd: [self.command[0], self.command[1]],
            v_base: [self.sim.base_vel[0], 0.0],
            w_cmd: self.command[2],
            w_base: self.sim.base_omega,
            feet_loaded: [
                foot_loaded(self.sim.foot_fz[0], w_actual, thr),
                foot_loaded(self.sim.foot_fz[1], w_actual, thr),
            ],
            phi,
            roll: 0.0,
            pitch: self.sim.base_pitch,
            tau: &applied,
            tau_prev: &self.prev_applied,
            qd: &self.sim.qd,
            qd_prev: &self.prev_qd,
            dt: control_dt,
            fz: self.sim.foot_fz,
            fz_prev: self.prev_fz,
            q: &self.sim.q,
            q_ref: &q_ref,
            fz_ref: [fl_ref * ref_scale, fr_ref * ref_scale],
            terminated,
            weight: w_actual,
        };
        let reward = total_reward(&inputs, weights, &reference.schedule);

        // Advance the gait phase for the next step.
        let a = if config.ablation.phase_modulation {
            a_phase
        } else {
            0.0
        };
        self.phase = advance_phase(self.phase, control_dt, a, config.gait.phase_clamp);

        // Hand the estimator sample for this step back to the trainer.
        let est_features = std::mem::take(&mut self.pending_features);
        let est_hidden_before = std::mem::take(&mut self.pending_hidden);

        // Book-keeping for the next step.
        self.prev_cmd_raw.copy_from_slice(torques_nm);
        self.prev_cmd_clamped = cmd_clamped;
        self.prev_qd.copy_from_slice(&self.sim.qd);
        self.prev_fz = self.sim.foot_fz;
        self.prev_applied = applied.clone();

        // Frame for the next decision (also the bootstrap observation when
        // the episode truncates).
        let (est_probabilities, est_status) = if terminated {
            (vec![0.0; label.len()], vec![0.0; label.len()])
        } else {
            let e = self.push_frame(config, estimator);
            (e.p, e.s)
        };

        let episode_len_s = if terminated || truncated {
            Some(self.step_in_episode as f64 * control_dt)
        } else {
            None
        };

        StepOutcome {
            reward,
            terminated,
            truncated,
            episode_len_s,
            est_features,
            est_label: label,
            est_hidden_before,
            est_probabilities,
            est_status,
            applied_torques: applied,
            base_velocity: self.sim.base_vel,
            base_omega: self.sim.base_omega,
            command: self.command,
            phase: phi,
            fault_active,
        }
    }
}

