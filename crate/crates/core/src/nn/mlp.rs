//! Fully-connected network with ReLU hidden layers and a linear output,
//! stored as one flat parameter array with hand-written reverse mode.

use serde::{Deserialize, Serialize};

use crate::rng::stream;

/// Parameter layout per layer: weights row-major `[out][in]`, then biases `[out]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Cached activations from `forward_cached`, consumed by `backward`.
pub struct MlpCache {
    input: Vec<f64>,
    /// Pre-activation z per layer.
    pre: Vec<Vec<f64>>,
    /// Post-activation a per layer (ReLU on hidden, identity on output).
    post: Vec<Vec<f64>>,
}

impl MlpCache {
    pub fn output(&self) -> &[f64] {
        self.post.last().expect("cache has at least one layer")
    }
}

pub fn mlp_param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        Self {
            sizes: sizes.to_vec(),
            params: vec![0.0; mlp_param_count(sizes)],
        }
    }

    /// Scaled-uniform fan-in init: weights U[-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
    pub fn init(sizes: &[usize], master_seed: u64, tag: u64) -> Self {
        use rand::Rng;
        let mut net = Self::zeros(sizes);
        let mut rng = stream(master_seed, &[0x4d4c50, tag]);
        let mut off = 0;
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[off..off + fan_in * fan_out] {
                *p = rng.gen_range(-bound..bound);
            }
            off += fan_in * fan_out + fan_out;
        }
        net
    }

    /// Scale the output layer's weights and biases, e.g. to make a freshly
    /// initialized policy act near-zero.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.sizes.len() - 2;
        let mut off = 0;
        for w in self.sizes.windows(2).take(last) {
            off += w[0] * w[1] + w[1];
        }
        for p in &mut self.params[off..] {
            *p *= factor;
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_size(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn from_parts(sizes: Vec<usize>, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), mlp_param_count(&sizes));
        Self { sizes, params }
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_cached(input).post.pop().unwrap()
    }

    pub fn forward_cached(&self, input: &[f64]) -> MlpCache {
        assert_eq!(
            input.len(),
            self.sizes[0],
            "input length {} does not match network input size {}",
            input.len(),
            self.sizes[0]
        );
        let n_layers = self.sizes.len() - 1;
        let mut pre = Vec::with_capacity(n_layers);
        let mut post = Vec::with_capacity(n_layers);
        let mut x: &[f64] = input;
        let mut off = 0;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights = &self.params[off..off + fan_in * fan_out];
            let biases = &self.params[off + fan_in * fan_out..off + fan_in * fan_out + fan_out];
            let mut z = vec![0.0; fan_out];
            for (j, zj) in z.iter_mut().enumerate() {
                let row = &weights[j * fan_in..(j + 1) * fan_in];
                let mut s = biases[j];
                for (wi, xi) in row.iter().zip(x.iter()) {
                    s += wi * xi;
                }
                *zj = s;
            }
            let a = if l + 1 < n_layers {
                z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
            } else {
                z.clone()
            };
            pre.push(z);
            post.push(a);
            x = post.last().unwrap();
            off += fan_in * fan_out + fan_out;
        }
        MlpCache {
            input: input.to_vec(),
            pre,
            post,
        }
    }

    /// Accumulate parameter gradients into `grads` (same layout as `params`)
    /// and return the gradient with respect to the input.
    ///
    /// ReLU derivative at exactly zero pre-activation is taken as 0.
    pub fn backward(&self, cache: &MlpCache, d_output: &[f64], grads: &mut [f64]) -> Vec<f64> {
        assert_eq!(grads.len(), self.params.len());
        assert_eq!(d_output.len(), self.output_size());
        let n_layers = self.sizes.len() - 1;

        let mut layer_offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for w in self.sizes.windows(2) {
            layer_offsets.push(off);
            off += w[0] * w[1] + w[1];
        }

        let mut delta = d_output.to_vec();
        for l in (0..n_layers).rev() {
            let fan_in = self.sizes[l];
            let fan_out = self.sizes[l + 1];
            if l + 1 < n_layers {
                // Fold the ReLU derivative of this layer's own activation.
                for (d, &z) in delta.iter_mut().zip(cache.pre[l].iter()) {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let a_prev: &[f64] = if l == 0 { &cache.input } else { &cache.post[l - 1] };
            let off = layer_offsets[l];
            let (w_grad, b_grad) = grads[off..off + fan_in * fan_out + fan_out]
                .split_at_mut(fan_in * fan_out);
            for j in 0..fan_out {
                let dj = delta[j];
                b_grad[j] += dj;
                let row = &mut w_grad[j * fan_in..(j + 1) * fan_in];
                for (g, &ai) in row.iter_mut().zip(a_prev.iter()) {
                    *g += dj * ai;
                }
            }
            // delta_prev = W^T delta
            let weights = &self.params[off..off + fan_in * fan_out];
            let mut delta_prev = vec![0.0; fan_in];
            for j in 0..fan_out {
                let dj = delta[j];
                let row = &weights[j * fan_in..(j + 1) * fan_in];
                for (dp, &wji) in delta_prev.iter_mut().zip(row.iter()) {
                    *dp += wji * dj;
                }
            }
            delta = delta_prev;
        }
        delta
    }
}
