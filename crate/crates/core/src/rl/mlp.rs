//! Fully-connected network with tanh hidden activations and a hand-written
//! backward pass. Parameters live in one flat array so optimizers and
//! finite-difference checks can address them uniformly.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Layer layout: for each layer, weights (out x in, row-major) then biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpNetwork {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Post-activation values per layer for one batched forward pass.
pub struct ForwardCache {
    /// activations[0] is the input batch; activations[L] the (linear) output.
    activations: Vec<Vec<f64>>,
    batch: usize,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().unwrap()
    }
}

impl MlpNetwork {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
    pub fn new<R: Rng>(sizes: &[usize], rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output sizes");
        let mut params = Vec::with_capacity(Self::param_count(sizes));
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for _ in 0..fan_in * fan_out {
                params.push(rng.random_range(-bound..bound));
            }
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        MlpNetwork {
            sizes: sizes.to_vec(),
            params,
        }
    }

    fn param_count(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// (weight_offset, bias_offset) for layer l.
    fn layer_offsets(&self, layer: usize) -> (usize, usize) {
        let mut off = 0;
        for l in 0..layer {
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        (off, off + self.sizes[layer] * self.sizes[layer + 1])
    }

    fn num_layers(&self) -> usize {
        self.sizes.len() - 1
    }

    /// Batched forward pass; `input` is row-major `[batch][input_dim]`.
    pub fn forward_cached(&self, input: &[f64], batch: usize) -> ForwardCache {
        assert_eq!(input.len(), batch * self.input_dim());
        let mut activations = Vec::with_capacity(self.num_layers() + 1);
        activations.push(input.to_vec());
        for l in 0..self.num_layers() {
            let (d_in, d_out) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let w = &self.params[w_off..w_off + d_in * d_out];
            let b = &self.params[b_off..b_off + d_out];
            let x = &activations[l];
            let mut y = vec![0.0; batch * d_out];
            let last = l == self.num_layers() - 1;
            for i in 0..batch {
                let xi = &x[i * d_in..(i + 1) * d_in];
                let yi = &mut y[i * d_out..(i + 1) * d_out];
                for o in 0..d_out {
                    let row = &w[o * d_in..(o + 1) * d_in];
                    let mut acc = b[o];
                    for (rw, xv) in row.iter().zip(xi) {
                        acc += rw * xv;
                    }
                    yi[o] = if last { acc } else { acc.tanh() };
                }
            }
            activations.push(y);
        }
        ForwardCache { activations, batch }
    }

    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Vec<f64> {
        self.forward_cached(input, batch)
            .activations
            .pop()
            .unwrap()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.forward_batch(input, 1)
    }

    /// Backward pass from output gradients `d_out` (row-major
    /// `[batch][output_dim]`). Accumulates parameter gradients into `grad`
    /// (length `num_params`) when provided, and returns input gradients when
    /// `want_input_grad` is set.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        d_out: &[f64],
        mut grad: Option<&mut [f64]>,
        want_input_grad: bool,
    ) -> Option<Vec<f64>> {
        let batch = cache.batch;
        assert_eq!(d_out.len(), batch * self.output_dim());
        if let Some(g) = grad.as_ref() {
            assert_eq!(g.len(), self.num_params());
        }
        let mut delta = d_out.to_vec();
        for l in (0..self.num_layers()).rev() {
            let (d_in, d_out_l) = (self.sizes[l], self.sizes[l + 1]);
            let (w_off, b_off) = self.layer_offsets(l);
            let x = &cache.activations[l];

            // Hidden layers applied tanh; fold its derivative into delta.
            if l != self.num_layers() - 1 {
                let a = &cache.activations[l + 1];
                for (d, &av) in delta.iter_mut().zip(a) {
                    *d *= 1.0 - av * av;
                }
            }

            if let Some(g) = grad.as_deref_mut() {
                let (gw, rest) = g[w_off..].split_at_mut(d_in * d_out_l);
                let gb = &mut rest[..d_out_l];
                for i in 0..batch {
                    let xi = &x[i * d_in..(i + 1) * d_in];
                    let di = &delta[i * d_out_l..(i + 1) * d_out_l];
                    for o in 0..d_out_l {
                        let dv = di[o];
                        if dv != 0.0 {
                            let grow = &mut gw[o * d_in..(o + 1) * d_in];
                            for (gr, xv) in grow.iter_mut().zip(xi) {
                                *gr += dv * xv;
                            }
                            gb[o] += dv;
                        }
                    }
                }
            }

            let need_dx = l > 0 || want_input_grad;
            if !need_dx {
                return None;
            }
            let w = &self.params[w_off..b_off];
            let mut dx = vec![0.0; batch * d_in];
            for i in 0..batch {
                let di = &delta[i * d_out_l..(i + 1) * d_out_l];
                let dxi = &mut dx[i * d_in..(i + 1) * d_in];
                for o in 0..d_out_l {
                    let dv = di[o];
                    if dv != 0.0 {
                        let row = &w[o * d_in..(o + 1) * d_in];
                        for (dxv, rw) in dxi.iter_mut().zip(row) {
                            *dxv += dv * rw;
                        }
                    }
                }
            }
            delta = dx;
        }
        Some(delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{derive_stream, StreamKind};

    /// Central finite differences on the flat parameter vector.
    fn fd_gradient(net: &MlpNetwork, loss: impl Fn(&MlpNetwork) -> f64, h: f64) -> Vec<f64> {
        let mut g = vec![0.0; net.num_params()];
        let mut work = net.clone();
        for i in 0..net.num_params() {
            let orig = work.params()[i];
            work.params_mut()[i] = orig + h;
            let hi = loss(&work);
            work.params_mut()[i] = orig - h;
            let lo = loss(&work);
            work.params_mut()[i] = orig;
            g[i] = (hi - lo) / (2.0 * h);
        }
        g
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
        num / den
    }

    #[test]
    fn forward_matches_manual_tiny_net() {
        let mut rng = derive_stream(0, StreamKind::Init);
        let mut net = MlpNetwork::new(&[2, 2, 1], &mut rng);
        // W0 = [[1, 0], [0, 1]], b0 = [0.1, -0.1], W1 = [[0.5, -0.5]], b1 = [0.2]
        net.params_mut().copy_from_slice(&[
            1.0, 0.0, 0.0, 1.0, 0.1, -0.1, 0.5, -0.5, 0.2,
        ]);
        let y = net.forward(&[0.3, 0.7]);
        let h0 = (0.3f64 + 0.1).tanh();
        let h1 = (0.7f64 - 0.1).tanh();
        assert!((y[0] - (0.5 * h0 - 0.5 * h1 + 0.2)).abs() < 1e-15);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = derive_stream(1, StreamKind::Init);
        let net = MlpNetwork::new(&[3, 8, 8, 2], &mut rng);
        let batch = 4;
        let x: Vec<f64> = (0..batch * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let target: Vec<f64> = (0..batch * 2).map(|_| rng.random_range(-1.0..1.0)).collect();

        let loss = |n: &MlpNetwork| -> f64 {
            let y = n.forward_batch(&x, batch);
            y.iter()
                .zip(&target)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / batch as f64
        };

        let cache = net.forward_cached(&x, batch);
        let d_out: Vec<f64> = cache
            .output()
            .iter()
            .zip(&target)
            .map(|(a, b)| 2.0 * (a - b) / batch as f64)
            .collect();
        let mut grad = vec![0.0; net.num_params()];
        net.backward(&cache, &d_out, Some(&mut grad), false);

        let fd = fd_gradient(&net, loss, 1e-5);
        assert!(rel_err(&grad, &fd) < 1e-7, "rel err {}", rel_err(&grad, &fd));
    }

    #[test]
    fn input_gradients_match_finite_differences() {
        let mut rng = derive_stream(2, StreamKind::Init);
        let net = MlpNetwork::new(&[4, 6, 1], &mut rng);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let cache = net.forward_cached(&x, 1);
        let dx = net.backward(&cache, &[1.0], None, true).unwrap();

        let h = 1e-6;
        for i in 0..4 {
            let mut xp = x.clone();
            xp[i] += h;
            let mut xm = x.clone();
            xm[i] -= h;
            let fd = (net.forward(&xp)[0] - net.forward(&xm)[0]) / (2.0 * h);
            assert!((dx[i] - fd).abs() < 1e-8);
        }
    }
}
