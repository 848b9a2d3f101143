//! Diagonal-Gaussian action head with a fixed per-dimension standard deviation.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianHead {
    sigma: Vec<f64>,
}

impl GaussianHead {
    pub fn new(sigma: Vec<f64>) -> Self {
        assert!(sigma.iter().all(|&s| s > 0.0), "sigma must be positive");
        Self { sigma }
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Sample an action around `mean` and return its exact log-density.
    pub fn sample(&self, mean: &[f64], rng: &mut ChaCha8Rng) -> (Vec<f64>, f64) {
        assert_eq!(mean.len(), self.sigma.len());
        let action: Vec<f64> = mean
            .iter()
            .zip(self.sigma.iter())
            .map(|(&m, &s)| {
                let eps: f64 = StandardNormal.sample(rng);
                m + s * eps
            })
            .collect();
        let logp = self.log_prob(mean, &action);
        (action, logp)
    }

    pub fn log_prob(&self, mean: &[f64], action: &[f64]) -> f64 {
        mean.iter()
            .zip(action.iter())
            .zip(self.sigma.iter())
            .map(|((&m, &a), &s)| {
                let u = (a - m) / s;
                -0.5 * u * u - s.ln() - LN_SQRT_2PI
            })
            .sum()
    }

    /// d log p / d mean = (action - mean) / sigma^2.
    pub fn d_log_prob_d_mean(&self, mean: &[f64], action: &[f64]) -> Vec<f64> {
        mean.iter()
            .zip(action.iter())
            .zip(self.sigma.iter())
            .map(|((&m, &a), &s)| (a - m) / (s * s))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn log_prob_at_mean_is_normalizer() {
        let head = GaussianHead::new(vec![0.5, 2.0, 1.0]);
        let mean = [0.1, -0.3, 4.0];
        let want: f64 = head
            .sigma()
            .iter()
            .map(|s| -(s * (2.0 * std::f64::consts::PI).sqrt()).ln())
            .sum();
        let got = head.log_prob(&mean, &mean);
        assert!((got - want).abs() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn sample_covariance_is_diagonal_sigma_squared() {
        let sigma = vec![0.5, 1.5];
        let head = GaussianHead::new(sigma.clone());
        let mean = [1.0, -2.0];
        let mut rng = stream(123, &[]);
        let n = 100_000;
        let mut sums = [0.0f64; 2];
        let mut sq = [0.0f64; 2];
        let mut cross = 0.0f64;
        for _ in 0..n {
            let (a, _) = head.sample(&mean, &mut rng);
            for d in 0..2 {
                sums[d] += a[d] - mean[d];
                sq[d] += (a[d] - mean[d]).powi(2);
            }
            cross += (a[0] - mean[0]) * (a[1] - mean[1]);
        }
        let nf = n as f64;
        for d in 0..2 {
            let var = sq[d] / nf - (sums[d] / nf).powi(2);
            let want = sigma[d] * sigma[d];
            assert!(
                (var - want).abs() / want < 0.03,
                "dim {d}: var {var} vs {want}"
            );
        }
        let cov = cross / nf - (sums[0] / nf) * (sums[1] / nf);
        assert!(cov.abs() < 0.03 * sigma[0] * sigma[1]);
    }

    #[test]
    fn fixed_seed_identical_sample() {
        let head = GaussianHead::new(vec![1.0, 1.0]);
        let (a, la) = head.sample(&[0.0, 0.0], &mut stream(7, &[1]));
        let (b, lb) = head.sample(&[0.0, 0.0], &mut stream(7, &[1]));
        assert_eq!(a, b);
        assert_eq!(la, lb);
    }
}
