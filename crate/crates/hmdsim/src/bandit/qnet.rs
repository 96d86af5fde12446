//! Minimal fully-connected Q-network: rectified-linear hidden layers, a
//! linear output head, and plain SGD on the squared error of the chosen
//! output. Everything is f64 and seeded, so training is reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QNet {
    /// Layer widths, input first: e.g. [4, 64, 64, 42].
    pub sizes: Vec<usize>,
    /// Row-major [out × in] weights per layer.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub learning_rate: f64,
}

impl QNet {
    /// Uniform init in [−1/√fan_in, +1/√fan_in], seeded.
    pub fn new(sizes: &[usize], learning_rate: f64, seed: u64) -> Self {
        assert!(sizes.len() >= 2, "need at least input and output layers");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 1..sizes.len() {
            let fan_in = sizes[l - 1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            weights.push(
                (0..sizes[l] * fan_in)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            );
            biases.push(
                (0..sizes[l])
                    .map(|_| rng.random_range(-bound..bound))
                    .collect(),
            );
        }
        Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            learning_rate,
        }
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.activations(input).pop().unwrap()
    }

    /// Per-layer post-activation values, input included.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(input.len(), self.sizes[0]);
        let layers = self.weights.len();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(input.to_vec());
        for l in 0..layers {
            let (n_out, n_in) = (self.sizes[l + 1], self.sizes[l]);
            let prev = &acts[l];
            let mut out = Vec::with_capacity(n_out);
            for o in 0..n_out {
                let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                let mut z = self.biases[l][o];
                for (w, a) in row.iter().zip(prev) {
                    z += w * a;
                }
                // Hidden layers rectify; the output head stays linear.
                out.push(if l + 1 < layers { z.max(0.0) } else { z });
            }
            acts.push(out);
        }
        acts
    }

    /// One SGD step fitting the chosen output of each sample to its target;
    /// all other outputs receive zero gradient. Returns the pre-step mean
    /// squared error over the batch.
    pub fn sgd_step(&mut self, batch: &[(&[f64], usize, f64)]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let layers = self.weights.len();
        let mut grad_w: Vec<Vec<f64>> = self.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        let mut grad_b: Vec<Vec<f64>> = self.biases.iter().map(|b| vec![0.0; b.len()]).collect();
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;

        for &(input, output_idx, target) in batch {
            if !target.is_finite() {
                return Err(Error::NonFinite("target"));
            }
            let acts = self.activations(input);
            let predicted = acts[layers][output_idx];
            let err = predicted - target;
            loss += err * err * scale;

            // Backprop: delta at the output is nonzero only for the chosen
            // index; hidden deltas gate on the rectifier.
            let mut delta = vec![0.0; self.sizes[layers]];
            delta[output_idx] = 2.0 * err * scale;
            for l in (0..layers).rev() {
                let (n_out, n_in) = (self.sizes[l + 1], self.sizes[l]);
                let prev = &acts[l];
                for o in 0..n_out {
                    let d = delta[o];
                    if d == 0.0 {
                        continue;
                    }
                    grad_b[l][o] += d;
                    let row = &mut grad_w[l][o * n_in..(o + 1) * n_in];
                    for (g, a) in row.iter_mut().zip(prev) {
                        *g += d * a;
                    }
                }
                if l == 0 {
                    break;
                }
                let mut next_delta = vec![0.0; n_in];
                for (o, &d) in delta.iter().enumerate() {
                    if d == 0.0 {
                        continue;
                    }
                    let row = &self.weights[l][o * n_in..(o + 1) * n_in];
                    for (nd, w) in next_delta.iter_mut().zip(row) {
                        *nd += d * w;
                    }
                }
                for (nd, a) in next_delta.iter_mut().zip(&acts[l]) {
                    if *a <= 0.0 {
                        *nd = 0.0;
                    }
                }
                delta = next_delta;
            }
        }

        for l in 0..layers {
            for (w, g) in self.weights[l].iter_mut().zip(&grad_w[l]) {
                *w -= self.learning_rate * g;
            }
            for (b, g) in self.biases[l].iter_mut().zip(&grad_b[l]) {
                *b -= self.learning_rate * g;
            }
        }
        Ok(loss)
    }
}
