//! Generalized advantage estimation over one environment's step sequence.

/// `next_values[t]` is the critic value of the successor state; termination
/// zeroes the bootstrap, truncation keeps it but stops the recursion.
pub fn gae_and_returns(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    terminated: &[bool],
    truncated: &[bool],
    gamma: f64,
    lam: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && next_values.len() == n);
    assert!(terminated.len() == n && truncated.len() == n);
    let mut advantages = vec![0.0; n];
    let mut returns = vec![0.0; n];
    let mut gae = 0.0;
    for t in (0..n).rev() {
        let bootstrap = if terminated[t] { 0.0 } else { next_values[t] };
        let delta = rewards[t] + gamma * bootstrap - values[t];
        let episode_continues = !(terminated[t] || truncated[t]);
        gae = delta
            + if episode_continues {
                gamma * lam * gae
            } else {
                0.0
            };
        advantages[t] = gae;
        returns[t] = gae + values[t];
    }
    (advantages, returns)
}

/// In-place batch normalization to zero mean, unit variance.
pub fn normalize_advantages(adv: &mut [f64]) {
    if adv.is_empty() {
        return;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let std = var.sqrt().max(1e-8);
    for a in adv {
        *a = (*a - mean) / std;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero_is_one_step_td_error() {
        let rewards = [1.0, 2.0, 3.0];
        let values = [0.5, 0.6, 0.7];
        let next_values = [0.6, 0.7, 0.9];
        let term = [false, false, false];
        let trunc = [false, false, true];
        let gamma = 0.9;
        let (adv, _) = gae_and_returns(&rewards, &values, &next_values, &term, &trunc, gamma, 0.0);
        for t in 0..3 {
            let delta = rewards[t] + gamma * next_values[t] - values[t];
            assert!((adv[t] - delta).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn lambda_one_single_episode_is_discounted_return_minus_value() {
        // Brute-force discounted-sum oracle over one terminated episode.
        let rewards = [1.0, -0.5, 2.0, 0.3];
        let values = [0.2, 0.1, -0.3, 0.4];
        let mut next_values = [0.1, -0.3, 0.4, 0.0];
        next_values[3] = 123.0; // ignored: final step terminates
        let term = [false, false, false, true];
        let trunc = [false; 4];
        let gamma = 0.95;
        let (adv, ret) =
            gae_and_returns(&rewards, &values, &next_values, &term, &trunc, gamma, 1.0);
        for t in 0..4 {
            let mut g = 0.0;
            for (k, &r) in rewards.iter().enumerate().skip(t) {
                g += gamma.powi((k - t) as i32) * r;
            }
            assert!((adv[t] - (g - values[t])).abs() < 1e-12, "t={t}");
            assert!((ret[t] - g).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_rewards_zero_values_zero_advantages() {
        let n = 5;
        let z = vec![0.0; n];
        let term = vec![false; n];
        let mut trunc = vec![false; n];
        trunc[n - 1] = true;
        let (adv, ret) = gae_and_returns(&z, &z, &z, &term, &trunc, 0.99, 0.95);
        assert!(adv.iter().all(|&a| a == 0.0));
        assert!(ret.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn truncation_bootstraps_but_stops_recursion() {
        let rewards = [1.0, 1.0];
        let values = [0.0, 0.0];
        let next_values = [5.0, 7.0];
        let term = [false, false];
        let trunc = [true, false];
        let gamma = 0.9;
        let (adv, _) =
            gae_and_returns(&rewards, &values, &next_values, &term, &trunc, gamma, 0.95);
        // Step 0 truncates: bootstraps its own next value, independent of step 1.
        assert!((adv[0] - (1.0 + 0.9 * 5.0)).abs() < 1e-12);
    }

    #[test]
    fn normalization_preserves_argmax() {
        let mut adv = vec![0.3, -1.0, 2.5, 0.9, -0.2];
        let argmax_before = adv
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        normalize_advantages(&mut adv);
        let argmax_after = adv
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(argmax_before, argmax_after);
        let mean: f64 = adv.iter().sum::<f64>() / adv.len() as f64;
        assert!(mean.abs() < 1e-12);
    }
}
