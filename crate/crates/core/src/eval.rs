//! Evaluation harness: per-scenario success rates, velocity-tracking RMSE
//! and MBE, and trace extraction for plotting.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::env::{CurriculumStage, EpisodeSetup, LocomotionEnv};
use crate::episode::{write_jsonl, EpisodeRecord};
use crate::error::EvalError;
use crate::estimator::Estimator;
use crate::fault::{FaultScenario, FaultType};
use crate::gait::Reference;
use crate::rng::stream;
use crate::sim::{joint, JOINT_COUNT};
use crate::trainer::PolicyNets;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalScenario {
    pub name: String,
    /// None means healthy.
    pub fault: Option<(FaultType, usize)>,
    pub command: [f64; 3],
    pub episodes: usize,
    pub seed: u64,
}

/// The default grid: healthy plus each fault type on each joint.
pub fn scenario_grid(config: &Config, seed: u64) -> Vec<EvalScenario> {
    let mut out = vec![EvalScenario {
        name: "healthy".into(),
        fault: None,
        command: config.eval.command,
        episodes: config.eval.episodes,
        seed,
    }];
    for (kind, prefix) in [(FaultType::JointLocking, "lock"), (FaultType::PowerLoss, "power")] {
        for j in 0..JOINT_COUNT {
            out.push(EvalScenario {
                name: format!("{prefix}_{}", joint::NAMES[j]),
                fault: Some((kind, j)),
                command: config.eval.command,
                episodes: config.eval.episodes,
                seed,
            });
        }
    }
    out
}

pub fn valid_scenario_names(config: &Config) -> Vec<String> {
    scenario_grid(config, 0).into_iter().map(|s| s.name).collect()
}

pub fn select_scenarios(
    config: &Config,
    seed: u64,
    names: &[String],
) -> Result<Vec<EvalScenario>, EvalError> {
    let grid = scenario_grid(config, seed);
    if names.is_empty() {
        return Ok(grid);
    }
    let mut out = Vec::new();
    for name in names {
        match grid.iter().find(|s| &s.name == name) {
            Some(s) => out.push(s.clone()),
            None => {
                let valid: Vec<String> = grid.iter().map(|s| s.name.clone()).collect();
                return Err(EvalError::UnknownScenario(name.clone(), valid.join(", ")));
            }
        }
    }
    Ok(out)
}

/// Root-mean-square and mean bias error of one velocity axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisMetrics {
    pub rmse: f64,
    pub mbe: f64,
}

/// Per-axis tracking metrics over (commanded, actual) sample pairs. The bias
/// uses actual minus commanded, so persistent undershoot is negative.
pub fn velocity_tracking_metrics(trace: &[(f64, f64)]) -> Result<AxisMetrics, EvalError> {
    if trace.is_empty() {
        return Err(EvalError::EmptyTrace);
    }
    let n = trace.len() as f64;
    let mut sq = 0.0;
    let mut bias = 0.0;
    for &(cmd, actual) in trace {
        let e = actual - cmd;
        sq += e * e;
        bias += e;
    }
    Ok(AxisMetrics {
        rmse: (sq / n).sqrt(),
        mbe: bias / n,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub name: String,
    pub fault_type: String,
    pub joint: Option<usize>,
    pub joint_name: String,
    pub episodes: usize,
    pub success_rate: f64,
    pub mean_survival_s: f64,
    pub lin_x: AxisMetrics,
    pub lin_y: AxisMetrics,
    pub ang: AxisMetrics,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub results: Vec<ScenarioResult>,
    pub success_time_s: f64,
    pub horizon_s: f64,
    /// Planar joint set backing the per-joint rows.
    pub joint_names: Vec<String>,
}

struct EpisodeTrace {
    records: Vec<EpisodeRecord>,
    survived_s: f64,
    onset: f64,
}

fn run_episode(
    config: &Config,
    reference: &Reference,
    nets: &PolicyNets,
    estimator: &Estimator,
    scenario: &EvalScenario,
    episode: usize,
) -> EpisodeTrace {
    let seed = crate::rng::derive_seed(scenario.seed, &[0x4556414c, episode as u64]);
    let mut env = LocomotionEnv::new(config, seed, episode as u64);
    // Pin the fault: onset drawn per episode from the eval window.
    let mut onset_rng = stream(seed, &[0x4f4e53]);
    let onset = {
        use rand::Rng;
        let (w0, w1) = config.eval.onset_window;
        config.eval.horizon_s * onset_rng.gen_range(w0..=w1)
    };
    let fault = match scenario.fault {
        Some((kind, j)) => FaultScenario::pinned(kind, j, onset),
        None => FaultScenario::healthy(),
    };
    let setup = EpisodeSetup::pinned(fault, scenario.command, config.eval.pushes);
    // Evaluation runs at the final stage so gating never masks the pin.
    let stage = CurriculumStage::FaultsAndPush;
    let weights = crate::reward::RewardWeights::fault();

    let mut eval_config = config.clone();
    eval_config.ppo.horizon_s = config.eval.horizon_s;
    // Observation noise off for deterministic replay.
    eval_config.randomization.enabled = false;

    env.reset(&eval_config, reference, estimator, stage, &setup);
    let control_dt = eval_config.control_dt();
    let horizon_steps = eval_config.horizon_steps();
    let mut records = Vec::with_capacity(horizon_steps);
    let mut survived = 0.0;
    for step in 0..horizon_steps {
        let obs = env.policy_input();
        let action = nets.mean_action(&obs);
        let out = env.apply_action(
            &eval_config,
            reference,
            estimator,
            &weights,
            &action[..JOINT_COUNT],
            action[JOINT_COUNT],
        );
        records.push(EpisodeRecord {
            episode,
            t: (step + 1) as f64 * control_dt,
            phi: out.phase,
            v_cmd: out.command,
            v_base: [out.base_velocity[0], out.base_velocity[1], out.base_omega],
            fz: env.sim.foot_fz,
            reward_total: out.reward.total,
            fault_active: out.fault_active,
            label: out.est_label,
            est_p: out.est_probabilities,
            est_s: out.est_status,
        });
        survived = (step + 1) as f64 * control_dt;
        if out.terminated {
            break;
        }
        if out.truncated {
            break;
        }
    }
    EpisodeTrace {
        records,
        survived_s: survived,
        onset,
    }
}

/// Evaluate scenarios with the deterministic (mean-action) policy.
pub fn run_scenarios(
    config: &Config,
    reference: &Reference,
    nets: &PolicyNets,
    estimator: &Estimator,
    scenarios: &[EvalScenario],
    traces_dir: Option<&Path>,
) -> Result<EvalReport, EvalError> {
    let mut results = Vec::with_capacity(scenarios.len());
    for scenario in scenarios {
        let episodes: Vec<EpisodeTrace> = (0..scenario.episodes)
            .into_par_iter()
            .map(|ep| run_episode(config, reference, nets, estimator, scenario, ep))
            .collect();

        let successes = episodes
            .iter()
            .filter(|e| e.survived_s >= config.eval.success_time_s)
            .count();
        let mean_survival =
            episodes.iter().map(|e| e.survived_s).sum::<f64>() / episodes.len().max(1) as f64;

        let mut tx = Vec::new();
        let mut ty = Vec::new();
        let mut ta = Vec::new();
        for e in &episodes {
            for r in &e.records {
                if config.eval.post_onset_only && scenario.fault.is_some() && r.t < e.onset {
                    continue;
                }
                tx.push((r.v_cmd[0], r.v_base[0]));
                ty.push((r.v_cmd[1], 0.0)); // planar model has no lateral motion
                ta.push((r.v_cmd[2], r.v_base[2]));
            }
        }
        let lin_x = velocity_tracking_metrics(&tx)?;
        let lin_y = velocity_tracking_metrics(&ty)?;
        let ang = velocity_tracking_metrics(&ta)?;

        if let Some(dir) = traces_dir {
            std::fs::create_dir_all(dir).map_err(|e| EvalError::Io {
                path: dir.to_path_buf(),
                source: e,
            })?;
            let all: Vec<EpisodeRecord> = episodes
                .iter()
                .flat_map(|e| e.records.iter().cloned())
                .collect();
            let path = dir.join(format!("{}.jsonl", scenario.name));
            write_jsonl(&path, &all).map_err(|e| EvalError::Io {
                path: path.clone(),
                source: e,
            })?;
            if let Some(first) = episodes.first() {
                write_velocity_svg(
                    &dir.join(format!("{}_velocity.svg", scenario.name)),
                    &first.records,
                )?;
                write_force_svg(&dir.join(format!("{}_forces.svg", scenario.name)), &first.records)?;
            }
        }

        let (fault_type, joint_idx) = match scenario.fault {
            None => ("healthy".to_string(), None),
            Some((FaultType::JointLocking, j)) => ("joint_locking".to_string(), Some(j)),
            Some((FaultType::PowerLoss, j)) => ("power_loss".to_string(), Some(j)),
            Some((FaultType::Healthy, _)) => ("healthy".to_string(), None),
        };
        results.push(ScenarioResult {
            name: scenario.name.clone(),
            fault_type,
            joint: joint_idx,
            joint_name: joint_idx.map(|j| joint::NAMES[j].to_string()).unwrap_or_default(),
            episodes: episodes.len(),
            success_rate: successes as f64 / episodes.len().max(1) as f64,
            mean_survival_s: mean_survival,
            lin_x,
            lin_y,
            ang,
        });
    }
    Ok(EvalReport {
        results,
        success_time_s: config.eval.success_time_s,
        horizon_s: config.eval.horizon_s,
        joint_names: joint::NAMES.iter().map(|s| s.to_string()).collect(),
    })
}

impl EvalReport {
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "name,fault_type,joint,joint_name,episodes,success_rate,mean_survival_s,\
             rmse_lin_x,mbe_lin_x,rmse_lin_y,mbe_lin_y,rmse_ang,mbe_ang\n",
        );
        for r in &self.results {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.name,
                r.fault_type,
                r.joint.map(|j| j.to_string()).unwrap_or_default(),
                r.joint_name,
                r.episodes,
                r.success_rate,
                r.mean_survival_s,
                r.lin_x.rmse,
                r.lin_x.mbe,
                r.lin_y.rmse,
                r.lin_y.mbe,
                r.ang.rmse,
                r.ang.mbe
            ));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), EvalError> {
        std::fs::create_dir_all(dir).map_err(|e| EvalError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let csv_path = dir.join("summary.csv");
        std::fs::write(&csv_path, self.summary_csv()).map_err(|e| EvalError::Io {
            path: csv_path,
            source: e,
        })?;
        let json_path = dir.join("report.json");
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(&json_path, json).map_err(|e| EvalError::Io {
            path: json_path,
            source: e,
        })?;
        Ok(())
    }

    /// Mean success rate over scenarios of one fault type.
    pub fn average_success(&self, fault_type: &str) -> f64 {
        let rows: Vec<&ScenarioResult> = self
            .results
            .iter()
            .filter(|r| r.fault_type == fault_type)
            .collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().map(|r| r.success_rate).sum::<f64>() / rows.len() as f64
    }
}

fn svg_polyline(points: &[(f64, f64)], color: &str) -> String {
    let pts: Vec<String> = points.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        pts.join(" ")
    )
}

fn svg_plot(
    path: &Path,
    title: &str,
    series: &[(&str, &str, Vec<(f64, f64)>)],
) -> Result<(), EvalError> {
    let (w, h, pad) = (640.0, 320.0, 40.0);
    let mut xmin = f64::INFINITY;
    let mut xmax = f64::NEG_INFINITY;
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for (_, _, pts) in series {
        for &(x, y) in pts {
            xmin = xmin.min(x);
            xmax = xmax.max(x);
            ymin = ymin.min(y);
            ymax = ymax.max(y);
        }
    }
    if !xmin.is_finite() {
        xmin = 0.0;
        xmax = 1.0;
        ymin = 0.0;
        ymax = 1.0;
    }
    if (ymax - ymin).abs() < 1e-9 {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| pad + (x - xmin) / (xmax - xmin).max(1e-12) * (w - 2.0 * pad);
    let sy = |y: f64| h - pad - (y - ymin) / (ymax - ymin) * (h - 2.0 * pad);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    );
    svg.push_str(&format!(
        "<line x1=\"{pad}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - pad,
        w - pad,
        h - pad
    ));
    svg.push_str(&format!(
        "<line x1=\"{pad}\" y1=\"{pad}\" x2=\"{pad}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - pad
    ));
    let mut legend_y = 36.0;
    for (name, color, pts) in series {
        let mapped: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (sx(x), sy(y))).collect();
        svg.push_str(&svg_polyline(&mapped, color));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{legend_y}\" font-size=\"11\" fill=\"{color}\">{name}</text>\n",
            w - pad - 120.0
        ));
        legend_y += 14.0;
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| EvalError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_velocity_svg(path: &Path, records: &[EpisodeRecord]) -> Result<(), EvalError> {
    let cmd: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.v_cmd[0])).collect();
    let act: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.v_base[0])).collect();
    svg_plot(
        path,
        "forward velocity (m/s)",
        &[("commanded", "#555555", cmd), ("actual", "#d62728", act)],
    )
}

fn write_force_svg(path: &Path, records: &[EpisodeRecord]) -> Result<(), EvalError> {
    let left: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.fz[0])).collect();
    let right: Vec<(f64, f64)> = records.iter().map(|r| (r.t, r.fz[1])).collect();
    svg_plot(
        path,
        "vertical contact force (N)",
        &[("left", "#1f77b4", left), ("right", "#ff7f0e", right)],
    )
}
