//! Small fully connected network used for critics and value baselines.

use ndarray::{Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};

/// ReLU multilayer perceptron with a linear output layer.
///
/// Parameters are stored flat: for each layer, the `out × in` weight matrix
/// (row-major) followed by its bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

/// Activations recorded by [`Mlp::forward_cache`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    /// Layer inputs; `acts[0]` is the batch itself, `acts[l]` the post-ReLU output of layer `l-1`.
    acts: Vec<Array2<f64>>,
}

impl Mlp {
    /// Uniform `±1/√fan_in` initialisation.
    pub fn new(sizes: &[usize], seed: u64) -> Self {
        assert!(sizes.len() >= 2, "network needs input and output sizes");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            params.extend((0..fan_in * fan_out + fan_out).map(|_| rng.random_range(-bound..bound)));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
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

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    fn layer(&self, l: usize, offset: usize) -> (ArrayView2<'_, f64>, &[f64]) {
        let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
        let w = ArrayView2::from_shape((fan_out, fan_in), &self.params[offset..offset + fan_in * fan_out])
            .expect("layer shape");
        let b = &self.params[offset + fan_in * fan_out..offset + fan_in * fan_out + fan_out];
        (w, b)
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cache(x)?.0)
    }

    pub fn forward_cache(&self, x: ArrayView2<'_, f64>) -> Result<(Array2<f64>, MlpCache)> {
        check_dim("network input", self.input_dim(), x.ncols())?;
        let n_layers = self.sizes.len() - 1;
        let mut acts = Vec::with_capacity(n_layers);
        let mut h = x.to_owned();
        let mut offset = 0;
        for l in 0..n_layers {
            let (w, b) = self.layer(l, offset);
            let mut z = standard(h.dot(&w.t()));
            for mut row in z.rows_mut() {
                for (v, bi) in row.iter_mut().zip(b) {
                    *v += bi;
                }
            }
            if l + 1 < n_layers {
                z.mapv_inplace(|v| v.max(0.0));
            }
            acts.push(h);
            h = z;
            offset += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        Ok((h, MlpCache { acts }))
    }

    /// Gradient of `Σ d_out ⊙ f(x)` with respect to the flat parameters.
    pub fn backward(&self, cache: &MlpCache, d_out: ArrayView2<'_, f64>) -> Vec<f64> {
        let n_layers = self.sizes.len() - 1;
        let mut grad = vec![0.0; self.params.len()];
        let mut offsets = Vec::with_capacity(n_layers);
        let mut off = 0;
        for l in 0..n_layers {
            offsets.push(off);
            off += self.sizes[l] * self.sizes[l + 1] + self.sizes[l + 1];
        }
        let mut delta = d_out.to_owned();
        for l in (0..n_layers).rev() {
            let (fan_in, fan_out) = (self.sizes[l], self.sizes[l + 1]);
            let input = &cache.acts[l];
            let gw = delta.t().dot(input);
            let gb = delta.sum_axis(Axis(0));
            let o = offsets[l];
            for (g, v) in grad[o..o + fan_in * fan_out].iter_mut().zip(gw.iter()) {
                *g = *v;
            }
            for (g, v) in grad[o + fan_in * fan_out..o + fan_in * fan_out + fan_out].iter_mut().zip(gb.iter()) {
                *g = *v;
            }
            if l > 0 {
                let (w, _) = self.layer(l, o);
                let mut prev = delta.dot(&w);
                // input to layer l is post-ReLU, so its mask is (act > 0)
                prev.zip_mut_with(input, |d, &a| {
                    if a <= 0.0 {
                        *d = 0.0
                    }
                });
                delta = prev;
            }
        }
        grad
    }

    /// `θ_target ← τ·θ + (1 − τ)·θ_target`.
    pub fn soft_update_from(&mut self, online: &Mlp, tau: f64) {
        for (t, &o) in self.params.iter_mut().zip(&online.params) {
            *t = tau * o + (1.0 - tau) * *t;
        }
    }
}

/// Row-major copy when `dot` picked another layout (it may for single-column operands).
fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn finite_difference_gradient() {
        let net = Mlp::new(&[3, 5, 4, 2], 11);
        let x = array![[0.3, -0.7, 1.1], [-0.2, 0.5, 0.05]];
        let d_out = array![[1.0, -0.5], [0.25, 2.0]];
        let (_, cache) = net.forward_cache(x.view()).unwrap();
        let grad = net.backward(&cache, d_out.view());
        let loss = |n: &Mlp| (n.forward(x.view()).unwrap() * &d_out).sum();
        let h = 1e-5;
        for i in 0..net.num_params() {
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let up = loss(&p);
            p.params_mut()[i] -= 2.0 * h;
            let down = loss(&p);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grad[i]).abs() / grad[i].abs().max(1.0) < 1e-6, "param {i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn soft_update_with_unit_tau_copies() {
        let a = Mlp::new(&[2, 3, 1], 1);
        let mut b = Mlp::new(&[2, 3, 1], 2);
        b.soft_update_from(&a, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn single_feature_outputs_are_row_major() {
        let net = Mlp::new(&[1, 4, 2], 3);
        let x = array![[0.0], [1.0], [0.5]];
        let (q, cache) = net.forward_cache(x.view()).unwrap();
        assert!(q.as_slice().is_some());
        let g = net.backward(&cache, q.view());
        assert_eq!(g.len(), net.num_params());
    }

    #[test]
    fn rejects_wrong_input_width() {
        let net = Mlp::new(&[3, 2], 0);
        assert!(net.forward(array![[1.0, 2.0]].view()).is_err());
    }
}
