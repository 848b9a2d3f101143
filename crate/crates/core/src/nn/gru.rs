//! Single-layer gated recurrent unit with a sigmoid output head, hand-written
//! backpropagation through time over a bounded window.

use serde::{Deserialize, Serialize};

use crate::rng::stream;

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Gate update, single-bias form:
///
///   r  = sigmoid(W_r x + U_r h + b_r)
///   z  = sigmoid(W_z x + U_z h + b_z)
///   n  = tanh(W_n x + r .* (U_n h) + b_n)
///   h' = (1 - z) .* n + z .* h
///   y  = sigmoid(W_o h' + b_o)
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GruNet {
    input_size: usize,
    hidden_size: usize,
    output_size: usize,
    params: Vec<f64>,
}

/// Offsets of each block in the flat parameter array.
struct Layout {
    w_r: usize,
    u_r: usize,
    b_r: usize,
    w_z: usize,
    u_z: usize,
    b_z: usize,
    w_n: usize,
    u_n: usize,
    b_n: usize,
    w_o: usize,
    b_o: usize,
    total: usize,
}

fn layout(i: usize, h: usize, o: usize) -> Layout {
    let mut off = 0;
    let mut take = |n: usize| {
        let at = off;
        off += n;
        at
    };
    Layout {
        w_r: take(h * i),
        u_r: take(h * h),
        b_r: take(h),
        w_z: take(h * i),
        u_z: take(h * h),
        b_z: take(h),
        w_n: take(h * i),
        u_n: take(h * h),
        b_n: take(h),
        w_o: take(o * h),
        b_o: take(o),
        total: off,
    }
}

pub fn gru_param_count(input: usize, hidden: usize, output: usize) -> usize {
    layout(input, hidden, output).total
}

/// Per-step intermediates cached for the backward pass.
struct StepCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    /// U_n h_prev, reused by the reset-gate path.
    u_nh: Vec<f64>,
    h_new: Vec<f64>,
}

pub struct GruCache {
    steps: Vec<StepCache>,
}

impl GruCache {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

fn mat_vec(w: &[f64], rows: usize, cols: usize, x: &[f64], out: &mut [f64]) {
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for (j, o) in out.iter_mut().enumerate() {
        let row = &w[j * cols..(j + 1) * cols];
        let mut s = 0.0;
        for (wi, xi) in row.iter().zip(x.iter()) {
            s += wi * xi;
        }
        *o += s;
    }
}

/// out += W^T d  (accumulate into `out`, length cols)
fn mat_t_vec(w: &[f64], rows: usize, cols: usize, d: &[f64], out: &mut [f64]) {
    for j in 0..rows {
        let dj = d[j];
        if dj == 0.0 {
            continue;
        }
        let row = &w[j * cols..(j + 1) * cols];
        for (o, &wji) in out.iter_mut().zip(row.iter()) {
            *o += wji * dj;
        }
    }
}

/// grad += d (outer) x, where grad is rows x cols row-major.
fn outer_acc(grad: &mut [f64], rows: usize, cols: usize, d: &[f64], x: &[f64]) {
    debug_assert_eq!(d.len(), rows);
    debug_assert_eq!(x.len(), cols);
    for j in 0..rows {
        let dj = d[j];
        if dj == 0.0 {
            continue;
        }
        let row = &mut grad[j * cols..(j + 1) * cols];
        for (g, &xi) in row.iter_mut().zip(x.iter()) {
            *g += dj * xi;
        }
    }
}

impl GruNet {
    pub fn zeros(input_size: usize, hidden_size: usize, output_size: usize) -> Self {
        Self {
            input_size,
            hidden_size,
            output_size,
            params: vec![0.0; gru_param_count(input_size, hidden_size, output_size)],
        }
    }

    pub fn init(input_size: usize, hidden_size: usize, output_size: usize, master_seed: u64, tag: u64) -> Self {
        use rand::Rng;
        let mut net = Self::zeros(input_size, hidden_size, output_size);
        let lay = layout(input_size, hidden_size, output_size);
        let mut rng = stream(master_seed, &[0x475255, tag]);
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, params: &mut [f64]| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-bound..bound);
            }
        };
        fill(lay.w_r..lay.u_r, input_size, &mut net.params);
        fill(lay.u_r..lay.b_r, hidden_size, &mut net.params);
        fill(lay.w_z..lay.u_z, input_size, &mut net.params);
        fill(lay.u_z..lay.b_z, hidden_size, &mut net.params);
        fill(lay.w_n..lay.u_n, input_size, &mut net.params);
        fill(lay.u_n..lay.b_n, hidden_size, &mut net.params);
        fill(lay.w_o..lay.b_o, hidden_size, &mut net.params);
        net
    }

    pub fn input_size(&self) -> usize {
        self.input_size
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden_size
    }

    pub fn output_size(&self) -> usize {
        self.output_size
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn from_parts(input: usize, hidden: usize, output: usize, params: Vec<f64>) -> Self {
        assert_eq!(params.len(), gru_param_count(input, hidden, output));
        Self {
            input_size: input,
            hidden_size: hidden,
            output_size: output,
            params,
        }
    }

    pub fn zero_hidden(&self) -> Vec<f64> {
        vec![0.0; self.hidden_size]
    }

    /// One recurrent step. Returns sigmoid outputs and the new hidden state.
    pub fn step(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (out, h_new, _) = self.step_inner(x, h);
        (out, h_new)
    }

    fn step_inner(&self, x: &[f64], h: &[f64]) -> (Vec<f64>, Vec<f64>, StepCache) {
        assert_eq!(x.len(), self.input_size, "gru input size mismatch");
        assert_eq!(h.len(), self.hidden_size, "gru hidden size mismatch");
        let (i, hs, o) = (self.input_size, self.hidden_size, self.output_size);
        let lay = layout(i, hs, o);
        let p = &self.params;

        let mut ar = p[lay.b_r..lay.b_r + hs].to_vec();
        mat_vec(&p[lay.w_r..lay.u_r], hs, i, x, &mut ar);
        mat_vec(&p[lay.u_r..lay.b_r], hs, hs, h, &mut ar);
        let r: Vec<f64> = ar.iter().map(|&v| sigmoid(v)).collect();

        let mut az = p[lay.b_z..lay.b_z + hs].to_vec();
        mat_vec(&p[lay.w_z..lay.u_z], hs, i, x, &mut az);
        mat_vec(&p[lay.u_z..lay.b_z], hs, hs, h, &mut az);
        let z: Vec<f64> = az.iter().map(|&v| sigmoid(v)).collect();

        let mut u_nh = vec![0.0; hs];
        mat_vec(&p[lay.u_n..lay.b_n], hs, hs, h, &mut u_nh);
        let mut an = p[lay.b_n..lay.b_n + hs].to_vec();
        mat_vec(&p[lay.w_n..lay.u_n], hs, i, x, &mut an);
        for k in 0..hs {
            an[k] += r[k] * u_nh[k];
        }
        let n: Vec<f64> = an.iter().map(|&v| v.tanh()).collect();

        let mut h_new = vec![0.0; hs];
        for k in 0..hs {
            h_new[k] = (1.0 - z[k]) * n[k] + z[k] * h[k];
        }

        let mut logits = p[lay.b_o..lay.b_o + o].to_vec();
        mat_vec(&p[lay.w_o..lay.b_o], o, hs, &h_new, &mut logits);
        let out: Vec<f64> = logits.iter().map(|&v| sigmoid(v)).collect();

        let cache = StepCache {
            x: x.to_vec(),
            h_prev: h.to_vec(),
            r,
            z,
            n,
            u_nh,
            h_new: h_new.clone(),
        };
        (out, h_new, cache)
    }

    /// Run a window, caching intermediates. Returns per-step sigmoid outputs.
    pub fn forward_seq(&self, xs: &[Vec<f64>], h0: &[f64]) -> (Vec<Vec<f64>>, GruCache) {
        let mut h = h0.to_vec();
        let mut outs = Vec::with_capacity(xs.len());
        let mut steps = Vec::with_capacity(xs.len());
        for x in xs {
            let (out, h_new, cache) = self.step_inner(x, &h);
            outs.push(out);
            steps.push(cache);
            h = h_new;
        }
        (outs, GruCache { steps })
    }

    /// Backpropagate through the cached window.
    ///
    /// `d_logits[t]` is the loss gradient with respect to the pre-sigmoid
    /// output logits at step t. Parameter gradients accumulate into `grads`.
    pub fn backward_seq(&self, cache: &GruCache, d_logits: &[Vec<f64>], grads: &mut [f64]) {
        assert_eq!(cache.steps.len(), d_logits.len());
        assert_eq!(grads.len(), self.params.len());
        let (i, hs, o) = (self.input_size, self.hidden_size, self.output_size);
        let lay = layout(i, hs, o);
        let p = &self.params;

        let mut d_h = vec![0.0; hs];
        for (t, step) in cache.steps.iter().enumerate().rev() {
            let dl = &d_logits[t];
            // Output head.
            outer_acc(&mut grads[lay.w_o..lay.b_o], o, hs, dl, &step.h_new);
            for (g, d) in grads[lay.b_o..lay.b_o + o].iter_mut().zip(dl.iter()) {
                *g += d;
            }
            mat_t_vec(&p[lay.w_o..lay.b_o], o, hs, dl, &mut d_h);

            let mut d_n = vec![0.0; hs];
            let mut d_z = vec![0.0; hs];
            let mut d_h_prev = vec![0.0; hs];
            for k in 0..hs {
                d_n[k] = d_h[k] * (1.0 - step.z[k]);
                d_z[k] = d_h[k] * (step.h_prev[k] - step.n[k]);
                d_h_prev[k] = d_h[k] * step.z[k];
            }

            // Candidate path.
            let mut d_an = vec![0.0; hs];
            let mut d_r = vec![0.0; hs];
            let mut d_unh = vec![0.0; hs];
            for k in 0..hs {
                d_an[k] = d_n[k] * (1.0 - step.n[k] * step.n[k]);
                d_r[k] = d_an[k] * step.u_nh[k];
                d_unh[k] = d_an[k] * step.r[k];
            }
            outer_acc(&mut grads[lay.w_n..lay.u_n], hs, i, &d_an, &step.x);
            for (g, d) in grads[lay.b_n..lay.b_n + hs].iter_mut().zip(d_an.iter()) {
                *g += d;
            }
            outer_acc(&mut grads[lay.u_n..lay.b_n], hs, hs, &d_unh, &step.h_prev);
            mat_t_vec(&p[lay.u_n..lay.b_n], hs, hs, &d_unh, &mut d_h_prev);

            // Update gate.
            let mut d_az = vec![0.0; hs];
            for k in 0..hs {
                d_az[k] = d_z[k] * step.z[k] * (1.0 - step.z[k]);
            }
            outer_acc(&mut grads[lay.w_z..lay.u_z], hs, i, &d_az, &step.x);
            for (g, d) in grads[lay.b_z..lay.b_z + hs].iter_mut().zip(d_az.iter()) {
                *g += d;
            }
            outer_acc(&mut grads[lay.u_z..lay.b_z], hs, hs, &d_az, &step.h_prev);
            mat_t_vec(&p[lay.u_z..lay.b_z], hs, hs, &d_az, &mut d_h_prev);

            // Reset gate.
            let mut d_ar = vec![0.0; hs];
            for k in 0..hs {
                d_ar[k] = d_r[k] * step.r[k] * (1.0 - step.r[k]);
            }
            outer_acc(&mut grads[lay.w_r..lay.u_r], hs, i, &d_ar, &step.x);
            for (g, d) in grads[lay.b_r..lay.b_r + hs].iter_mut().zip(d_ar.iter()) {
                *g += d;
            }
            outer_acc(&mut grads[lay.u_r..lay.b_r], hs, hs, &d_ar, &step.h_prev);
            mat_t_vec(&p[lay.u_r..lay.b_r], hs, hs, &d_ar, &mut d_h_prev);

            d_h = d_h_prev;
        }
    }
}
