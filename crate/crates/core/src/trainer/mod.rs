//! Training orchestration: parallel rollouts, interleaved estimator updates,
//! curriculum gating, and clipped-surrogate policy optimization.

mod curriculum;
mod gae;
mod ppo;

pub use curriculum::Curriculum;
pub use gae::{gae_and_returns, normalize_advantages};
pub use ppo::{clipped_surrogate, ppo_update, PpoBatch, PpoDiagnostics, PpoHyper};

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::{self, CheckpointHeader};
use crate::config::Config;
use crate::env::{CurriculumStage, EpisodeSetup, LocomotionEnv};
use crate::error::SimError;
use crate::estimator::{Estimator, LabeledWindow};
use crate::gait::Reference;
use crate::nn::{Adam, GaussianHead, LinearDecay, Mlp};
use crate::obs::POLICY_INPUT_DIM;
use crate::reward::{RewardWeights, TERM_COUNT, TERM_NAMES};
use crate::rng::stream;
use crate::sim::JOINT_COUNT;

/// Actor, critic, exploration head, and the output scaling that maps
/// normalized network outputs to physical actions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PolicyNets {
    pub actor: Mlp,
    pub critic: Mlp,
    pub head: GaussianHead,
    /// Per-dimension scale: torque limits for the joints, the phase clamp
    /// for the modulation action.
    pub action_scale: Vec<f64>,
}

impl PolicyNets {
    pub fn new(config: &Config, master_seed: u64) -> Self {
        let mut actor_sizes = vec![POLICY_INPUT_DIM];
        actor_sizes.extend(&config.ppo.hidden);
        actor_sizes.push(JOINT_COUNT + 1);
        let mut critic_sizes = vec![POLICY_INPUT_DIM];
        critic_sizes.extend(&config.ppo.hidden);
        critic_sizes.push(1);

        let mut sigma: Vec<f64> = config
            .model
            .torque_limit
            .iter()
            .map(|l| config.ppo.sigma_torque_frac * l)
            .collect();
        sigma.push(config.ppo.sigma_phase);
        let mut action_scale: Vec<f64> = config.model.torque_limit.to_vec();
        action_scale.push(config.gait.phase_clamp);

        // A quiet initial policy: near-zero torque means at the start.
        let mut actor = Mlp::init(&actor_sizes, master_seed, 1);
        actor.scale_output_layer(0.01);
        Self {
            actor,
            critic: Mlp::init(&critic_sizes, master_seed, 2),
            head: GaussianHead::new(sigma),
            action_scale,
        }
    }

    /// Physical-unit action mean for an observation.
    pub fn mean_action(&self, obs: &[f64]) -> Vec<f64> {
        self.actor
            .forward(obs)
            .iter()
            .zip(self.action_scale.iter())
            .map(|(o, s)| o * s)
            .collect()
    }

    pub fn value(&self, obs: &[f64]) -> f64 {
        self.critic.forward(obs)[0]
    }
}

/// Full training state persisted in checkpoints for bit-identical resume.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainerState {
    pub nets: PolicyNets,
    pub actor_opt: Adam,
    pub critic_opt: Adam,
    pub estimator: Estimator,
    pub envs: Vec<LocomotionEnv>,
    pub curriculum: Curriculum,
    pub iteration: u64,
    pub master_seed: u64,
}

#[derive(Debug, Clone)]
pub struct IterationStats {
    pub iteration: u64,
    pub stage: CurriculumStage,
    pub l_k: f64,
    pub episodes_completed: usize,
    pub mean_episode_len_s: f64,
    pub mean_step_reward: f64,
    pub estimator_bce: f64,
    pub lr: f64,
    pub diagnostics: PpoDiagnostics,
    pub term_means: [f64; TERM_COUNT],
}

impl IterationStats {
    pub fn csv_header() -> String {
        let mut cols = vec![
            "iteration".to_string(),
            "stage".to_string(),
            "l_k".to_string(),
            "episodes".to_string(),
            "mean_episode_len_s".to_string(),
            "mean_step_reward".to_string(),
            "estimator_bce".to_string(),
            "lr".to_string(),
            "policy_loss".to_string(),
            "value_loss".to_string(),
            "mean_ratio".to_string(),
            "clip_fraction".to_string(),
        ];
        cols.extend(TERM_NAMES.iter().map(|n| format!("mean_{n}")));
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let stage = match self.stage {
            CurriculumStage::Nominal => 0,
            CurriculumStage::FaultsEnabled => 1,
            CurriculumStage::FaultsAndPush => 2,
        };
        let mut cols = vec![
            self.iteration.to_string(),
            stage.to_string(),
            self.l_k.to_string(),
            self.episodes_completed.to_string(),
            self.mean_episode_len_s.to_string(),
            self.mean_step_reward.to_string(),
            self.estimator_bce.to_string(),
            self.lr.to_string(),
            self.diagnostics.policy_loss.to_string(),
            self.diagnostics.value_loss.to_string(),
            self.diagnostics.mean_ratio.to_string(),
            self.diagnostics.clip_fraction.to_string(),
        ];
        cols.extend(self.term_means.iter().map(|v| v.to_string()));
        cols.join(",")
    }
}

struct EnvTraj {
    obs: Vec<Vec<f64>>,
    actions: Vec<Vec<f64>>,
    logp: Vec<f64>,
    rewards: Vec<f64>,
    values: Vec<f64>,
    next_values: Vec<f64>,
    terminated: Vec<bool>,
    truncated: Vec<bool>,
    term_sums: [f64; TERM_COUNT],
    windows: Vec<LabeledWindow>,
    completed: Vec<f64>,
}

struct WindowAccumulator {
    h0: Vec<f64>,
    features: Vec<Vec<f64>>,
    labels: Vec<Vec<f64>>,
    tbptt: usize,
}

impl WindowAccumulator {
    fn new(tbptt: usize) -> Self {
        Self {
            h0: Vec::new(),
            features: Vec::new(),
            labels: Vec::new(),
            tbptt,
        }
    }

    fn push(
        &mut self,
        features: Vec<f64>,
        label: Vec<f64>,
        hidden_before: Vec<f64>,
        out: &mut Vec<LabeledWindow>,
    ) {
        if self.features.is_empty() {
            self.h0 = hidden_before;
        }
        self.features.push(features);
        self.labels.push(label);
        if self.features.len() >= self.tbptt {
            self.flush(out);
        }
    }

    fn flush(&mut self, out: &mut Vec<LabeledWindow>) {
        if self.features.is_empty() {
            return;
        }
        out.push(LabeledWindow {
            h0: std::mem::take(&mut self.h0),
            features: std::mem::take(&mut self.features),
            labels: std::mem::take(&mut self.labels),
        });
    }
}

pub struct Trainer {
    pub config: Config,
    pub reference: Reference,
    pub state: TrainerState,
    /// Effective presets after ablation toggles.
    weights_nominal: RewardWeights,
    weights_fault: RewardWeights,
}

impl Trainer {
    pub fn new(config: Config) -> Self {
        let master_seed = config.run.seed;
        let reference = build_reference(&config);
        let nets = PolicyNets::new(&config, master_seed);
        let actor_opt = Adam::new(nets.actor.params().len());
        let critic_opt = Adam::new(nets.critic.params().len());
        let estimator = Estimator::new(
            config.estimator.hidden,
            config.estimator.threshold,
            config.estimator.lr,
            master_seed,
        );
        let envs = (0..config.ppo.envs)
            .map(|i| LocomotionEnv::new(&config, master_seed, i as u64))
            .collect();
        let curriculum = Curriculum::new(&config.curriculum, config.ablation.curriculum);
        let (weights_nominal, weights_fault) = effective_presets(&config);
        Self {
            config,
            reference,
            state: TrainerState {
                nets,
                actor_opt,
                critic_opt,
                estimator,
                envs,
                curriculum,
                iteration: 0,
                master_seed,
            },
            weights_nominal,
            weights_fault,
        }
    }

    pub fn from_state(config: Config, state: TrainerState) -> Self {
        let reference = build_reference(&config);
        let (weights_nominal, weights_fault) = effective_presets(&config);
        Self {
            config,
            reference,
            state,
            weights_nominal,
            weights_fault,
        }
    }

    pub fn active_weights(&self) -> &RewardWeights {
        if self.state.curriculum.fault_phase_rewards() {
            &self.weights_fault
        } else {
            &self.weights_nominal
        }
    }

    pub fn train_iteration(&mut self) -> Result<IterationStats, SimError> {
        let stage = self.state.curriculum.stage();
        let weights = *self.active_weights();
        let config = &self.config;
        let reference = &self.reference;
        let nets = &self.state.nets;
        let estimator = &self.state.estimator;
        let steps = config.ppo.steps_per_iter;
        let tbptt = config.estimator.tbptt;

        let mut trajs: Vec<EnvTraj> = self
            .state
            .envs
            .par_iter_mut()
            .map(|env| rollout_env(env, config, reference, estimator, nets, &weights, stage, steps, tbptt))
            .collect();

        // Estimator: one truncated-BPTT pass over a deterministic, capped
        // selection of this iteration's windows.
        let mut windows: Vec<LabeledWindow> = Vec::new();
        for traj in &mut trajs {
            windows.append(&mut traj.windows);
        }
        let cap = config.estimator.max_windows_per_iter.max(1);
        let selected: Vec<LabeledWindow> = if windows.len() > cap {
            let stride = windows.len() as f64 / cap as f64;
            (0..cap)
                .map(|i| windows[(i as f64 * stride) as usize].clone())
                .collect()
        } else {
            windows
        };
        let estimator_bce = self.state.estimator.online_update(&selected);

        // Curriculum tick on this iteration's completed episodes.
        let completed: Vec<f64> = trajs.iter().flat_map(|t| t.completed.iter().copied()).collect();
        let mean_completed = if completed.is_empty() {
            None
        } else {
            Some(completed.iter().sum::<f64>() / completed.len() as f64)
        };
        self.state.curriculum.tick(mean_completed);

        // Assemble the flat batch in environment order.
        let mut batch = PpoBatch {
            obs: Vec::new(),
            actions: Vec::new(),
            logp: Vec::new(),
            advantages: Vec::new(),
            returns: Vec::new(),
        };
        let mut term_sums = [0.0; TERM_COUNT];
        let mut reward_sum = 0.0;
        let mut sample_count = 0usize;
        for traj in &mut trajs {
            let (adv, ret) = gae_and_returns(
                &traj.rewards,
                &traj.values,
                &traj.next_values,
                &traj.terminated,
                &traj.truncated,
                config.ppo.gamma,
                config.ppo.lam,
            );
            reward_sum += traj.rewards.iter().sum::<f64>();
            sample_count += traj.rewards.len();
            for (a, b) in term_sums.iter_mut().zip(traj.term_sums.iter()) {
                *a += b;
            }
            batch.obs.append(&mut traj.obs);
            batch.actions.append(&mut traj.actions);
            batch.logp.append(&mut traj.logp);
            batch.advantages.extend(adv);
            batch.returns.extend(ret);
        }
        if config.ppo.adv_norm {
            normalize_advantages(&mut batch.advantages);
        }

        let schedule = LinearDecay {
            lr_start: config.ppo.lr_start,
            lr_end: config.ppo.lr_end,
            total_steps: config.ppo.iterations.max(1),
        };
        let lr = schedule.lr(self.state.iteration);
        let hyper = PpoHyper {
            clip: config.ppo.clip,
            epochs: config.ppo.epochs,
            minibatch: config.ppo.minibatch,
            value_coef: config.ppo.value_coef,
            entropy_coef: config.ppo.entropy_coef,
        };
        let mut shuffle_rng = stream(self.state.master_seed, &[0x53484600, self.state.iteration]);
        let diagnostics = ppo_update(
            &mut self.state.nets.actor,
            &mut self.state.nets.critic,
            &self.state.nets.head,
            &self.state.nets.action_scale,
            &batch,
            &hyper,
            lr,
            &mut self.state.actor_opt,
            &mut self.state.critic_opt,
            &mut shuffle_rng,
        )?;

        let stats = IterationStats {
            iteration: self.state.iteration,
            stage,
            l_k: self.state.curriculum.average_episode_length(),
            episodes_completed: completed.len(),
            mean_episode_len_s: mean_completed.unwrap_or(0.0),
            mean_step_reward: reward_sum / sample_count.max(1) as f64,
            estimator_bce,
            lr,
            diagnostics,
            term_means: {
                let mut t = term_sums;
                for v in &mut t {
                    *v /= sample_count.max(1) as f64;
                }
                t
            },
        };
        self.state.iteration += 1;
        Ok(stats)
    }

    pub fn checkpoint_header(&self) -> CheckpointHeader {
        CheckpointHeader {
            actor_sizes: self.state.nets.actor.sizes().to_vec(),
            critic_sizes: self.state.nets.critic.sizes().to_vec(),
            estimator_input: self.state.nets.actor.input_size(),
            estimator_hidden: self.config.estimator.hidden,
            estimator_output: crate::estimator::STATUS_DIM,
            sigma: self.state.nets.head.sigma().to_vec(),
            iteration: self.state.iteration,
            stage: self.state.curriculum.stage(),
        }
    }

    pub fn save_checkpoint(&self, path: &Path) -> Result<(), crate::error::CheckpointError> {
        checkpoint::save(path, &self.checkpoint_header(), &self.state)
    }

    pub fn load_checkpoint(
        config: Config,
        path: &Path,
    ) -> Result<Self, crate::error::CheckpointError> {
        let (_, state): (CheckpointHeader, TrainerState) = checkpoint::load(path)?;
        Ok(Self::from_state(config, state))
    }

    /// Run the full loop: per-iteration CSV metrics, periodic checkpoints,
    /// and a final checkpoint under `run_dir`.
    pub fn run(&mut self, run_dir: &Path, quiet: bool) -> Result<(), TrainError> {
        std::fs::create_dir_all(run_dir.join("checkpoints")).map_err(TrainError::Io)?;
        let metrics_path = run_dir.join("metrics.csv");
        let fresh = !metrics_path.exists();
        let mut metrics = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&metrics_path)
            .map_err(TrainError::Io)?;
        if fresh {
            writeln!(metrics, "{}", IterationStats::csv_header()).map_err(TrainError::Io)?;
        }

        let total = self.config.ppo.iterations;
        while self.state.iteration < total {
            let stats = self.train_iteration().map_err(TrainError::Sim)?;
            writeln!(metrics, "{}", stats.csv_row()).map_err(TrainError::Io)?;
            if !quiet && (stats.iteration % 10 == 0 || stats.iteration + 1 == total) {
                eprintln!(
                    "iter {:>5} stage {:?} L_k {:6.2}s reward/step {:7.4} ep_len {:6.2}s bce {:.4}",
                    stats.iteration,
                    stats.stage,
                    stats.l_k,
                    stats.mean_step_reward,
                    stats.mean_episode_len_s,
                    stats.estimator_bce
                );
            }
            let every = self.config.ppo.checkpoint_every.max(1);
            if self.state.iteration % every == 0 || self.state.iteration == total {
                let path = run_dir
                    .join("checkpoints")
                    .join(format!("ckpt_{:06}.bin", self.state.iteration));
                self.save_checkpoint(&path).map_err(TrainError::Checkpoint)?;
                self.save_checkpoint(&run_dir.join("checkpoints").join("ckpt_latest.bin"))
                    .map_err(TrainError::Checkpoint)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("i/o error: {0}")]
    Io(std::io::Error),
    #[error(transparent)]
    Sim(SimError),
    #[error(transparent)]
    Checkpoint(crate::error::CheckpointError),
}

pub fn build_reference(config: &Config) -> Reference {
    let mut r = Reference::new(config.gait.schedule.clone(), config.model.weight());
    r.step_angle = config.gait.step_angle;
    r.lift_angle = config.gait.lift_angle;
    r.ankle_angle = config.gait.ankle_angle;
    r
}

/// Apply the fallibility ablation to both presets.
pub fn effective_presets(config: &Config) -> (RewardWeights, RewardWeights) {
    let mut nominal = config.reward.nominal;
    let mut fault = config.reward.fault;
    if !config.ablation.fallibility {
        for w in [&mut nominal, &mut fault] {
            w.mimic = 0.0;
            w.force_tracking = 0.0;
            w.termination = 0.0;
        }
    }
    (nominal, fault)
}

#[allow(clippy::too_many_arguments)]
fn rollout_env(
    env: &mut LocomotionEnv,
    config: &Config,
    reference: &Reference,
    estimator: &Estimator,
    nets: &PolicyNets,
    weights: &RewardWeights,
    stage: CurriculumStage,
    steps: usize,
    tbptt: usize,
) -> EnvTraj {
    let mut traj = EnvTraj {
        obs: Vec::with_capacity(steps),
        actions: Vec::with_capacity(steps),
        logp: Vec::with_capacity(steps),
        rewards: Vec::with_capacity(steps),
        values: Vec::with_capacity(steps),
        next_values: Vec::with_capacity(steps),
        terminated: Vec::with_capacity(steps),
        truncated: Vec::with_capacity(steps),
        term_sums: [0.0; TERM_COUNT],
        windows: Vec::new(),
        completed: Vec::new(),
    };
    let mut acc = WindowAccumulator::new(tbptt);
    if env.history.frames_pushed() == 0 {
        env.reset(config, reference, estimator, stage, &EpisodeSetup::training());
    }
    let mut obs = env.policy_input();
    let mut value = nets.value(&obs);
    for _ in 0..steps {
        let mean = nets.mean_action(&obs);
        let (action, logp) = nets.head.sample(&mean, &mut env.rng);
        let out = env.apply_action(
            config,
            reference,
            estimator,
            weights,
            &action[..JOINT_COUNT],
            action[JOINT_COUNT],
        );
        acc.push(
            out.est_features,
            out.est_label,
            out.est_hidden_before,
            &mut traj.windows,
        );
        let done = out.terminated || out.truncated;
        let next_value = if out.terminated {
            0.0
        } else {
            nets.value(&env.policy_input())
        };
        traj.obs.push(obs);
        traj.actions.push(action);
        traj.logp.push(logp);
        traj.rewards.push(out.reward.total);
        traj.values.push(value);
        traj.next_values.push(next_value);
        traj.terminated.push(out.terminated);
        traj.truncated.push(out.truncated);
        for (s, w) in traj.term_sums.iter_mut().zip(out.reward.weighted.iter()) {
            *s += w;
        }
        if done {
            if let Some(len) = out.episode_len_s {
                traj.completed.push(len);
            }
            acc.flush(&mut traj.windows);
            env.reset(config, reference, estimator, stage, &EpisodeSetup::training());
            obs = env.policy_input();
            value = nets.value(&obs);
        } else {
            obs = env.policy_input();
            value = next_value;
        }
    }
    acc.flush(&mut traj.windows);
    traj
}
