//! Run configuration: TOML file plus dotted-key overrides, with a snapshot
//! written into every run directory so results are reproducible from config
//! alone.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::fault::FaultConfig;
use crate::gait::GaitSchedule;
use crate::reward::RewardWeights;
use crate::sim::{RobotModel, Terrain};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSection {
    pub name: String,
    pub seed: u64,
    /// Output root; overridden by --out or the FTBIPED_OUT variable.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            name: "run".into(),
            seed: 0,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct SimSection {
    /// Physics substep (s).
    pub dt: f64,
    /// Substeps per control step; control rate = 1 / (dt * substeps).
    pub substeps: u32,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: 0.002,
            substeps: 2,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct GaitSection {
    pub t_ref: f64,
    pub step_angle: f64,
    pub lift_angle: f64,
    pub ankle_angle: f64,
    /// Per-step clamp on the phase-modulation action.
    pub phase_clamp: f64,
    /// Start episodes inside a double-support window of the cycle.
    pub init_phase_dsp: bool,
    pub schedule: GaitSchedule,
}

impl Default for GaitSection {
    fn default() -> Self {
        Self {
            t_ref: 1.0,
            step_angle: 0.3,
            lift_angle: 0.5,
            ankle_angle: 0.0,
            phase_clamp: 0.05,
            init_phase_dsp: true,
            schedule: GaitSchedule::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardSection {
    /// A foot counts as loaded when F_z exceeds this fraction of W.
    pub contact_threshold_frac: f64,
    pub nominal: RewardWeights,
    pub fault: RewardWeights,
}

impl Default for RewardSection {
    fn default() -> Self {
        Self {
            contact_threshold_frac: 0.05,
            nominal: RewardWeights::nominal(),
            fault: RewardWeights::fault(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct FaultSection {
    /// Master switch; disabled gives the no-fault-training baseline.
    pub enabled: bool,
    pub p_fault: f64,
    pub onset_window: (f64, f64),
}

impl Default for FaultSection {
    fn default() -> Self {
        let c = FaultConfig::default();
        Self {
            enabled: true,
            p_fault: c.p_fault,
            onset_window: c.onset_window,
        }
    }
}

impl FaultSection {
    pub fn fault_config(&self) -> FaultConfig {
        FaultConfig {
            p_fault: if self.enabled { self.p_fault } else { 0.0 },
            onset_window: self.onset_window,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorSection {
    pub hidden: usize,
    pub lr: f64,
    /// Truncated-BPTT window length (control steps).
    pub tbptt: usize,
    pub threshold: f64,
    /// Cap on windows consumed per training iteration.
    pub max_windows_per_iter: usize,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        Self {
            hidden: 128,
            lr: 1e-4,
            tbptt: 16,
            threshold: 0.7,
            max_windows_per_iter: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PpoSection {
    pub envs: usize,
    /// Control steps collected per environment per iteration.
    pub steps_per_iter: usize,
    pub iterations: u64,
    /// Episode horizon (s).
    pub horizon_s: f64,
    pub gamma: f64,
    pub lam: f64,
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
    /// Hidden layer sizes of actor and critic.
    pub hidden: Vec<usize>,
    /// Gaussian sigma per joint as a fraction of its torque limit.
    pub sigma_torque_frac: f64,
    /// Gaussian sigma of the phase-modulation action.
    pub sigma_phase: f64,
    pub adv_norm: bool,
    pub checkpoint_every: u64,
}

impl Default for PpoSection {
    fn default() -> Self {
        Self {
            envs: 64,
            steps_per_iter: 256,
            iterations: 300,
            horizon_s: 16.0,
            gamma: 0.99,
            lam: 0.95,
            clip: 0.2,
            epochs: 4,
            minibatch: 128,
            lr_start: 1e-5,
            lr_end: 3e-6,
            value_coef: 0.5,
            entropy_coef: 0.0,
            hidden: vec![256, 256],
            sigma_torque_frac: 0.1,
            sigma_phase: 0.01,
            adv_norm: true,
            checkpoint_every: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct CurriculumSection {
    pub enabled: bool,
    /// Mean episode length (s) that enables motor-failure simulation.
    pub threshold_fault_s: f64,
    /// Mean episode length (s) that enables push perturbations.
    pub threshold_push_s: f64,
    /// Exponential smoothing factor for the episode-length average.
    pub ema: f64,
}

impl Default for CurriculumSection {
    fn default() -> Self {
        Self {
            enabled: true,
            threshold_fault_s: 20.0,
            threshold_push_s: 24.0,
            ema: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomizationSection {
    pub enabled: bool,
    pub command_vx: (f64, f64),
    pub command_vy: (f64, f64),
    pub command_wz: (f64, f64),
    pub push_force: (f64, f64),
    pub push_duration: (f64, f64),
    pub base_vel_noise_lin: f64,
    pub base_vel_noise_ang: f64,
    pub mass_scale: (f64, f64),
    pub inertia_scale: (f64, f64),
    pub com_scale: (f64, f64),
    pub motor_scale: (f64, f64),
    pub friction_scale: (f64, f64),
    pub damping_scale: (f64, f64),
    pub delay_ms: (f64, f64),
    /// Initial joint-angle noise at episode start (rad).
    pub init_joint_noise: f64,
}

impl Default for RandomizationSection {
    fn default() -> Self {
        Self {
            enabled: true,
            command_vx: (-0.3, 0.6),
            command_vy: (-0.3, 0.3),
            command_wz: (-0.5, 0.5),
            push_force: (50.0, 250.0),
            push_duration: (0.1, 1.0),
            base_vel_noise_lin: 0.025,
            base_vel_noise_ang: 0.02,
            mass_scale: (0.6, 1.4),
            inertia_scale: (0.6, 1.4),
            com_scale: (0.6, 1.4),
            motor_scale: (0.9, 1.1),
            friction_scale: (0.6, 1.4),
            damping_scale: (0.6, 1.4),
            delay_ms: (0.5, 1.5),
            init_joint_noise: 0.03,
        }
    }
}

/// Paper-style ablation toggles, each a plain config field.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct AblationSection {
    /// Feed the thresholded status estimate into the observation.
    pub status_obs: bool,
    /// Keep the fallibility reward terms active.
    pub fallibility: bool,
    /// Let the policy modulate the gait phase.
    pub phase_modulation: bool,
    /// Start from the nominal stage instead of everything-on.
    pub curriculum: bool,
}

impl Default for AblationSection {
    fn default() -> Self {
        Self {
            status_obs: true,
            fallibility: true,
            phase_modulation: true,
            curriculum: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSection {
    pub episodes: usize,
    pub horizon_s: f64,
    /// Survival time defining a successful episode (s).
    pub success_time_s: f64,
    pub command: [f64; 3],
    /// Fault onset window for evaluation scenarios (fractions of horizon).
    pub onset_window: (f64, f64),
    /// Restrict tracking metrics to post-onset steps.
    pub post_onset_only: bool,
    /// Apply seeded push perturbations during evaluation episodes, matching
    /// the final training stage's environment.
    pub pushes: bool,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            episodes: 16,
            horizon_s: 22.0,
            success_time_s: 20.0,
            command: [0.3, 0.0, 0.0],
            onset_window: (0.2, 0.4),
            post_onset_only: false,
            pushes: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Config {
    pub run: RunSection,
    pub model: RobotModel,
    pub terrain: Terrain,
    pub sim: SimSection,
    pub gait: GaitSection,
    pub reward: RewardSection,
    pub fault: FaultSection,
    pub estimator: EstimatorSection,
    pub ppo: PpoSection,
    pub curriculum: CurriculumSection,
    pub randomization: RandomizationSection,
    pub ablation: AblationSection,
    pub eval: EvalSection,
}

impl Config {
    pub fn control_dt(&self) -> f64 {
        self.sim.dt * self.sim.substeps as f64
    }

    pub fn horizon_steps(&self) -> usize {
        (self.ppo.horizon_s / self.control_dt()).round() as usize
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.validate()?;
        self.terrain.validate()?;
        let check = |ok: bool, field: &str, message: &str| {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::Invalid {
                    field: field.into(),
                    message: message.into(),
                })
            }
        };
        check(self.sim.dt > 0.0, "sim.dt", "must be positive")?;
        check(self.sim.substeps >= 1, "sim.substeps", "must be at least 1")?;
        check(self.gait.t_ref > 0.0, "gait.t_ref", "must be positive")?;
        check(
            (0.0..=1.0).contains(&self.fault.p_fault),
            "fault.p_fault",
            "must be a probability",
        )?;
        check(
            self.fault.onset_window.0 <= self.fault.onset_window.1
                && self.fault.onset_window.0 >= 0.0
                && self.fault.onset_window.1 <= 1.0,
            "fault.onset_window",
            "must be an ordered sub-interval of [0, 1]",
        )?;
        check(self.ppo.envs >= 1, "ppo.envs", "need at least one environment")?;
        check(
            self.ppo.steps_per_iter >= 1,
            "ppo.steps_per_iter",
            "must be at least 1",
        )?;
        check(self.ppo.minibatch >= 1, "ppo.minibatch", "must be at least 1")?;
        check(
            (0.0..=1.0).contains(&self.ppo.gamma),
            "ppo.gamma",
            "must lie in [0, 1]",
        )?;
        check(
            (0.0..=1.0).contains(&self.ppo.lam),
            "ppo.lam",
            "must lie in [0, 1]",
        )?;
        check(self.ppo.clip > 0.0, "ppo.clip", "must be positive")?;
        check(!self.ppo.hidden.is_empty(), "ppo.hidden", "need hidden sizes")?;
        check(
            self.curriculum.threshold_fault_s < self.curriculum.threshold_push_s,
            "curriculum",
            "fault threshold must precede push threshold",
        )?;
        check(
            self.estimator.hidden >= 1,
            "estimator.hidden",
            "must be at least 1",
        )?;
        check(
            self.eval.horizon_s >= self.eval.success_time_s,
            "eval.horizon_s",
            "horizon must cover the success time",
        )?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::load_with_overrides(path, &[])
    }

    pub fn load_with_overrides(path: &Path, overrides: &[String]) -> Result<Self, ConfigError> {
        if !path.exists() {
            return Err(ConfigError::NotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut value: toml::Value =
            toml::from_str(&text).map_err(|e| ConfigError::Parse {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        for entry in overrides {
            apply_override(&mut value, entry)?;
        }
        let config: Config = value.try_into().map_err(|e| ConfigError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Effective config as TOML, written as the run-directory snapshot.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Apply one `dotted.key=value` override onto the parsed TOML tree.
pub fn apply_override(root: &mut toml::Value, entry: &str) -> Result<(), ConfigError> {
    let (key, raw) = entry.split_once('=').ok_or_else(|| ConfigError::Override {
        key: entry.to_string(),
        message: "expected key=value".into(),
    })?;
    let key = key.trim();
    let raw = raw.trim();
    if key.is_empty() {
        return Err(ConfigError::Override {
            key: entry.to_string(),
            message: "empty key".into(),
        });
    }
    // Parse the value as a TOML literal; fall back to a plain string.
    let parsed: toml::Value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for part in &parts[..parts.len() - 1] {
        let table = node.as_table_mut().ok_or_else(|| ConfigError::Override {
            key: key.to_string(),
            message: format!("`{part}` is not a table"),
        })?;
        node = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    let table = node.as_table_mut().ok_or_else(|| ConfigError::Override {
        key: key.to_string(),
        message: "parent is not a table".into(),
    })?;
    table.insert(parts[parts.len() - 1].to_string(), parsed);
    Ok(())
}
