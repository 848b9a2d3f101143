//! Clipped-surrogate policy optimization shared by the locomotion trainer
//! and the toy pendulum task.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::SimError;
use crate::nn::{Adam, GaussianHead, Mlp};

#[derive(Debug, Clone, Copy)]
pub struct PpoHyper {
    pub clip: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct PpoDiagnostics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
}

/// Flat on-policy batch; advantages are expected to be normalized already
/// when advantage normalization is enabled.
pub struct PpoBatch {
    pub obs: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub logp: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl PpoBatch {
    pub fn len(&self) -> usize {
        self.obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.obs.is_empty()
    }
}

/// The clipped surrogate objective for one sample (to be maximized).
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> f64 {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip) * advantage;
    unclipped.min(clipped)
}

struct ChunkGrads {
    actor: Vec<f64>,
    critic: Vec<f64>,
    policy_loss: f64,
    value_loss: f64,
    ratio_sum: f64,
    clipped: usize,
}

/// One PPO update over the batch: `epochs` passes of shuffled minibatches.
/// The actor outputs normalized means; physical mean = output * action_scale.
#[allow(clippy::too_many_arguments)]
pub fn ppo_update(
    actor: &mut Mlp,
    critic: &mut Mlp,
    head: &GaussianHead,
    action_scale: &[f64],
    batch: &PpoBatch,
    hyper: &PpoHyper,
    lr: f64,
    actor_opt: &mut Adam,
    critic_opt: &mut Adam,
    shuffle_rng: &mut ChaCha8Rng,
) -> Result<PpoDiagnostics, SimError> {
    assert!(!batch.is_empty());
    let n = batch.len();
    let mut diag_policy = 0.0;
    let mut diag_value = 0.0;
    let mut diag_ratio = 0.0;
    let mut diag_clipped = 0usize;
    let mut diag_samples = 0usize;

    let mut indices: Vec<usize> = (0..n).collect();
    for _ in 0..hyper.epochs {
        indices.shuffle(shuffle_rng);
        for mb in indices.chunks(hyper.minibatch) {
            let scale = 1.0 / mb.len() as f64;
            // Deterministic parallel accumulation: fixed-size chunks reduced
            // in index order.
            let chunk_size = 16.max(mb.len() / 8);
            let partials: Vec<ChunkGrads> = mb
                .par_chunks(chunk_size)
                .map(|chunk| {
                    let mut grads = ChunkGrads {
                        actor: vec![0.0; actor.params().len()],
                        critic: vec![0.0; critic.params().len()],
                        policy_loss: 0.0,
                        value_loss: 0.0,
                        ratio_sum: 0.0,
                        clipped: 0,
                    };
                    for &i in chunk {
                        let obs = &batch.obs[i];
                        let adv = batch.advantages[i];

                        // Policy pass.
                        let cache = actor.forward_cached(obs);
                        let mean: Vec<f64> = cache
                            .output()
                            .iter()
                            .zip(action_scale.iter())
                            .map(|(o, s)| o * s)
                            .collect();
                        let new_logp = head.log_prob(&mean, &batch.actions[i]);
                        let ratio = (new_logp - batch.logp[i]).exp();
                        let unclipped = ratio * adv;
                        let clipped = ratio.clamp(1.0 - hyper.clip, 1.0 + hyper.clip) * adv;
                        grads.policy_loss -= unclipped.min(clipped) * scale;
                        grads.ratio_sum += ratio;
                        if clipped < unclipped {
                            grads.clipped += 1;
                        }
                        // Gradient flows only through the unclipped branch.
                        if unclipped <= clipped {
                            let dmean = head.d_log_prob_d_mean(&mean, &batch.actions[i]);
                            // d(-surrogate)/d output = -adv * ratio * dlogp/dmean * scale_j
                            let d_out: Vec<f64> = dmean
                                .iter()
                                .zip(action_scale.iter())
                                .map(|(d, s)| -adv * ratio * d * s * scale)
                                .collect();
                            actor.backward(&cache, &d_out, &mut grads.actor);
                        }

                        // Value pass: 0.5 * (V - R)^2.
                        let vcache = critic.forward_cached(obs);
                        let v = vcache.output()[0];
                        let err = v - batch.returns[i];
                        grads.value_loss += 0.5 * err * err * scale;
                        let d_v = [hyper.value_coef * err * scale];
                        critic.backward(&vcache, &d_v, &mut grads.critic);
                    }
                    grads
                })
                .collect();

            let mut actor_grads = vec![0.0; actor.params().len()];
            let mut critic_grads = vec![0.0; critic.params().len()];
            let mut mb_policy = 0.0;
            let mut mb_value = 0.0;
            for p in partials {
                for (a, b) in actor_grads.iter_mut().zip(p.actor.iter()) {
                    *a += b;
                }
                for (a, b) in critic_grads.iter_mut().zip(p.critic.iter()) {
                    *a += b;
                }
                mb_policy += p.policy_loss;
                mb_value += p.value_loss;
                diag_ratio += p.ratio_sum;
                diag_clipped += p.clipped;
            }
            if !mb_policy.is_finite() || !mb_value.is_finite() {
                return Err(SimError::NumericalDivergence {
                    time: 0.0,
                    detail: "ppo loss is not finite".into(),
                });
            }
            diag_policy += mb_policy;
            diag_value += mb_value;
            diag_samples += mb.len();

            actor_opt.step(actor.params_mut(), &actor_grads, lr);
            critic_opt.step(critic.params_mut(), &critic_grads, lr);
        }
    }

    let minibatches = hyper.epochs as f64 * (n as f64 / hyper.minibatch as f64).ceil();
    Ok(PpoDiagnostics {
        policy_loss: diag_policy / minibatches.max(1.0),
        value_loss: diag_value / minibatches.max(1.0),
        mean_ratio: diag_ratio / diag_samples.max(1) as f64,
        clip_fraction: diag_clipped as f64 / diag_samples.max(1) as f64,
    })
}
