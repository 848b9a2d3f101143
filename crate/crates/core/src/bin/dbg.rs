use ftbiped::config::Config;
use ftbiped::env::{CurriculumStage, EpisodeSetup, LocomotionEnv};
use ftbiped::estimator::{Estimator, LabeledWindow};
use ftbiped::fault::FaultType;
use ftbiped::gait::reference_at;
use ftbiped::reward::RewardWeights;
use ftbiped::sim::JOINT_COUNT;
use ftbiped::trainer::build_reference;

fn episode(config: &Config, reference: &ftbiped::gait::Reference, est: &Estimator, seed: u64)
    -> (Vec<LabeledWindow>, Vec<(Vec<f64>, Vec<f64>)>, FaultType, usize, f64, f64) {
    let mut env = LocomotionEnv::new(config, seed, 0);
    env.reset(config, reference, est, CurriculumStage::FaultsEnabled, &EpisodeSetup::training());
    if std::env::var("STAND").is_ok() {
        env.sim.base_pos[1] += 0.3;
    }
    let kind = env.scenario.kind;
    let joint = env.scenario.joint;
    let onset = env.scenario.onset;
    let weights = RewardWeights::fault();
    let mut windows = Vec::new();
    let (mut fs, mut ls, mut h0) = (Vec::new(), Vec::new(), Vec::new());
    let mut steps = Vec::new();
    let mut survived = 0.0;
    for _ in 0..config.horizon_steps() {
        let (q_ref, _, _) = reference_at(env.phase.phi, reference);
        let mut tau = vec![0.0; JOINT_COUNT];
        for j in 0..JOINT_COUNT {
            tau[j] = env.model.kp[j] * (q_ref[j] - env.sim.q[j]) - env.model.kd[j] * env.sim.qd[j];
        }
        // balance augmentation: pitch PD on hips, ankle strategy on pitch+speed
        let kh: f64 = std::env::var("KH").map(|v| v.parse().unwrap()).unwrap_or(0.0);
        let ka: f64 = std::env::var("KA").map(|v| v.parse().unwrap()).unwrap_or(0.0);
        let kv: f64 = std::env::var("KV").map(|v| v.parse().unwrap()).unwrap_or(0.0);
        let bal = kh * env.sim.base_pitch - 0.13 * kh * env.sim.base_omega;
        let vx_err = env.sim.base_vel[0] - env.command[0];
        for side in 0..2 {
            tau[3 * side] += bal;
            tau[3 * side + 2] += ka * env.sim.base_pitch - 0.15 * ka.abs() * env.sim.base_omega - kv * vx_err;
        }
        let out = env.apply_action(config, reference, est, &weights, &tau, 0.0);
        if fs.is_empty() { h0 = out.est_hidden_before.clone(); }
        fs.push(out.est_features); ls.push(out.est_label.clone());
        steps.push((out.est_probabilities.clone(), out.est_label));
        survived = env.sim.time;
        if out.terminated && std::env::var("DBG_TERM").is_ok() {
            println!("  term at t={:.2} pitch={:+.2} z={:.2} vx={:+.2} split={:.2} kind={:?} onset={:.2}",
                env.sim.time, env.sim.base_pitch, env.sim.base_pos[1], env.sim.base_vel[0],
                {
                    let a = ftbiped::sim::ankle_positions(&env.sim, &env.model);
                    (a[0][0] - a[1][0]).abs()
                }, kind, onset);
        }
        if fs.len() >= config.estimator.tbptt {
            windows.push(LabeledWindow { h0: std::mem::take(&mut h0), features: std::mem::take(&mut fs), labels: std::mem::take(&mut ls) });
        }
        if out.terminated || out.truncated { break; }
    }
    if !fs.is_empty() { windows.push(LabeledWindow { h0, features: fs, labels: ls }); }
    (windows, steps, kind, joint, onset, survived)
}

fn main() {
    let mut config = Config::default();
    config.ppo.horizon_s = 8.0;
    config.estimator.tbptt = 32;
    config.randomization.enabled = false;
    config.fault.p_fault = std::env::var("PF").map(|v| v.parse().unwrap()).unwrap_or(0.9);
    if std::env::var("STAND").is_ok() {
        config.model.gravity = 1e-12;
        config.model.termination.height_frac = 0.0;
        config.model.termination.pitch_limit = 1e9;
        config.model.termination.max_foot_split = 1e9;
    }
    let reference = build_reference(&config);
    let lr: f64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(1e-4);
    let iters: u64 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(500);
    let mut est = Estimator::new(config.estimator.hidden, 0.7, lr, 0xC8);
    let mut survs = Vec::new();
    for i in 0..iters {
        let (w, _, _, _, _, s) = episode(&config, &reference, &est, 0xC800 + i);
        if i % 100 == 0 { survs.push(s); }
        est.online_update(&w);
    }
    println!("sample survivals during training: {survs:?}");
    // Held-out diagnostics
    for ep in 0..6u64 {
        let (_, steps, kind, joint, onset, surv) = episode(&config, &reference, &est, 0xDEAD00 + ep);
        let post: Vec<&(Vec<f64>, Vec<f64>)> = steps.iter().filter(|(_, l)| l[0] == 0.0).collect();
        let pre: Vec<&(Vec<f64>, Vec<f64>)> = steps.iter().filter(|(_, l)| l[0] == 1.0).collect();
        let mean_p_fault_joint: f64 = if post.is_empty() { f64::NAN } else {
            post.iter().map(|(p, _)| p[1 + joint]).sum::<f64>() / post.len() as f64
        };
        let mean_p0_pre: f64 = if pre.is_empty() { f64::NAN } else {
            pre.iter().map(|(p, _)| p[0]).sum::<f64>() / pre.len() as f64
        };
        let mean_p0_post: f64 = if post.is_empty() { f64::NAN } else {
            post.iter().map(|(p, _)| p[0]).sum::<f64>() / post.len() as f64
        };
        let max_p_joint: f64 = post.iter().map(|(p, _)| p[1 + joint]).fold(0.0, f64::max);
        println!("{kind:?} j{joint} onset {onset:.2} surv {surv:.2}: pre p0 {mean_p0_pre:.3} post p0 {mean_p0_post:.3}, p[fault joint] mean {mean_p_fault_joint:.3} max {max_p_joint:.3}, steps pre/post {}/{}", pre.len(), post.len());
    }
}
