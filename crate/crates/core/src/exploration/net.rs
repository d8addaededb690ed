//! Actor-critic network with a shared first layer and hand-written backprop.
//!
//! ```text
//!            x (knobs)
//!               |
//!      shared: tanh(x W_s + b_s)
//!          /             \
//!   tanh(h W_ph + b_ph)   tanh(h W_vh + b_vh)
//!          |                     |
//!   logits (3 per knob)     value (scalar)
//! ```

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::space::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetShape {
    pub num_knobs: usize,
    pub hidden_dim: usize,
    pub head_hidden_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorCritic {
    shape: NetShape,
    pub(crate) w_shared: Array2<f64>,
    pub(crate) b_shared: Array1<f64>,
    pub(crate) w_policy_hidden: Array2<f64>,
    pub(crate) b_policy_hidden: Array1<f64>,
    pub(crate) w_policy_out: Array2<f64>,
    pub(crate) b_policy_out: Array1<f64>,
    pub(crate) w_value_hidden: Array2<f64>,
    pub(crate) b_value_hidden: Array1<f64>,
    pub(crate) w_value_out: Array2<f64>,
    pub(crate) b_value_out: Array1<f64>,
}

/// Activations of one batched forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct Forward {
    pub(crate) input: Array2<f64>,
    pub(crate) shared: Array2<f64>,
    pub(crate) policy_hidden: Array2<f64>,
    pub(crate) value_hidden: Array2<f64>,
    /// Per-knob log-probabilities, `batch x (3 * num_knobs)`.
    pub log_probs: Array2<f64>,
    pub values: Array1<f64>,
}

impl Forward {
    pub fn batch_len(&self) -> usize {
        self.values.len()
    }

    /// Probability triple for knob `k` of sample `b`.
    pub fn probs(&self, b: usize, k: usize) -> [f64; 3] {
        let row = self.log_probs.row(b);
        [row[3 * k].exp(), row[3 * k + 1].exp(), row[3 * k + 2].exp()]
    }

    pub fn distributions(&self, b: usize) -> Vec<[f64; 3]> {
        (0..self.log_probs.ncols() / 3).map(|k| self.probs(b, k)).collect()
    }
}

fn xavier(rows: usize, cols: usize, scale: f64, rng: &mut impl Rng) -> Array2<f64> {
    let bound = scale * (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-bound..bound))
}

fn add_bias_tanh(mut z: Array2<f64>, b: &Array1<f64>) -> Array2<f64> {
    z += b;
    z.mapv_inplace(f64::tanh);
    z
}

impl ActorCritic {
    pub fn new(shape: NetShape, seed: u64) -> Result<Self> {
        if shape.num_knobs == 0 || shape.hidden_dim == 0 || shape.head_hidden_dim == 0 {
            return Err(Error::InvalidParams("network dimensions must be positive".into()));
        }
        let mut r = rng::rng_from(seed);
        let NetShape {
            num_knobs: n,
            hidden_dim: h,
            head_hidden_dim: p,
        } = shape;
        Ok(Self {
            shape,
            w_shared: xavier(n, h, 1.0, &mut r),
            b_shared: Array1::zeros(h),
            w_policy_hidden: xavier(h, p, 1.0, &mut r),
            b_policy_hidden: Array1::zeros(p),
            // Small policy outputs start the agent near uniform.
            w_policy_out: xavier(p, 3 * n, 0.01, &mut r),
            b_policy_out: Array1::zeros(3 * n),
            w_value_hidden: xavier(h, p, 1.0, &mut r),
            b_value_hidden: Array1::zeros(p),
            w_value_out: xavier(p, 1, 1.0, &mut r),
            b_value_out: Array1::zeros(1),
        })
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    /// Same shape, all parameters zero. Used for gradients and optimizer moments.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_tensor_mut(|t| t.fill(0.0));
        z
    }

    /// Zeroes both output layers, making the policy uniform and the value 0.
    pub fn zero_output_layers(&mut self) {
        self.w_policy_out.fill(0.0);
        self.b_policy_out.fill(0.0);
        self.w_value_out.fill(0.0);
        self.b_value_out.fill(0.0);
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 10] {
        [
            self.w_shared.as_slice_mut().expect("standard layout"),
            self.b_shared.as_slice_mut().expect("standard layout"),
            self.w_policy_hidden.as_slice_mut().expect("standard layout"),
            self.b_policy_hidden.as_slice_mut().expect("standard layout"),
            self.w_policy_out.as_slice_mut().expect("standard layout"),
            self.b_policy_out.as_slice_mut().expect("standard layout"),
            self.w_value_hidden.as_slice_mut().expect("standard layout"),
            self.b_value_hidden.as_slice_mut().expect("standard layout"),
            self.w_value_out.as_slice_mut().expect("standard layout"),
            self.b_value_out.as_slice_mut().expect("standard layout"),
        ]
    }

    pub(crate) fn for_each_tensor_mut(&mut self, mut f: impl FnMut(&mut [f64])) {
        for t in self.tensors_mut() {
            f(t);
        }
    }

    pub(crate) fn tensors(&self) -> [&[f64]; 10] {
        [
            self.w_shared.as_slice().expect("standard layout"),
            self.b_shared.as_slice().expect("standard layout"),
            self.w_policy_hidden.as_slice().expect("standard layout"),
            self.b_policy_hidden.as_slice().expect("standard layout"),
            self.w_policy_out.as_slice().expect("standard layout"),
            self.b_policy_out.as_slice().expect("standard layout"),
            self.w_value_hidden.as_slice().expect("standard layout"),
            self.b_value_hidden.as_slice().expect("standard layout"),
            self.w_value_out.as_slice().expect("standard layout"),
            self.b_value_out.as_slice().expect("standard layout"),
        ]
    }

    /// All parameters flattened in a fixed order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.tensors().iter().flat_map(|t| t.iter().copied()).collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut offset = 0;
        self.for_each_tensor_mut(|t| {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        });
        assert_eq!(offset, flat.len(), "flat parameter length");
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn shared_layer_mut(&mut self) -> (&mut Array2<f64>, &mut Array1<f64>) {
        (&mut self.w_shared, &mut self.b_shared)
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Forward> {
        if input.ncols() != self.shape.num_knobs {
            return Err(Error::DimensionMismatch {
                expected: self.shape.num_knobs,
                got: input.ncols(),
            });
        }
        let input = input.to_owned();
        let shared = add_bias_tanh(input.dot(&self.w_shared), &self.b_shared);
        let policy_hidden = add_bias_tanh(shared.dot(&self.w_policy_hidden), &self.b_policy_hidden);
        let mut log_probs = policy_hidden.dot(&self.w_policy_out);
        log_probs += &self.b_policy_out;
        for mut row in log_probs.rows_mut() {
            for k in 0..self.shape.num_knobs {
                let mut z = row.slice_mut(s![3 * k..3 * k + 3]);
                let m = z.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
                z.mapv_inplace(|v| v - lse);
            }
        }
        let value_hidden = add_bias_tanh(shared.dot(&self.w_value_hidden), &self.b_value_hidden);
        let mut values = value_hidden.dot(&self.w_value_out).index_axis_move(Axis(1), 0);
        values += self.b_value_out[0];
        Ok(Forward {
            input,
            shared,
            policy_hidden,
            value_hidden,
            log_probs,
            values,
        })
    }

    /// Per-knob action distributions and the value estimate for one state.
    pub fn policy_value(&self, state: &FeatureVector) -> Result<(Vec<[f64; 3]>, f64)> {
        let x = ArrayView2::from_shape((1, state.len()), state.as_slice())
            .expect("row vector shape");
        let f = self.forward(x)?;
        Ok((f.distributions(0), f.values[0]))
    }

    pub fn policy_value_batch(&self, states: &[FeatureVector]) -> Result<Vec<(Vec<[f64; 3]>, f64)>> {
        if states.is_empty() {
            return Ok(Vec::new());
        }
        let x = states_matrix(states, self.shape.num_knobs)?;
        let f = self.forward(x.view())?;
        Ok((0..states.len()).map(|b| (f.distributions(b), f.values[b])).collect())
    }

    /// Gradients from upstream derivatives of the loss with respect to the
    /// per-knob log-probabilities' logits and the values.
    pub(crate) fn backward(
        &self,
        fwd: &Forward,
        d_logits: &Array2<f64>,
        d_values: &Array1<f64>,
    ) -> ActorCritic {
        let mut g = self.zeros_like();

        g.w_policy_out = standard(fwd.policy_hidden.t().dot(d_logits));
        g.b_policy_out = d_logits.sum_axis(Axis(0));
        let mut d_ph = d_logits.dot(&self.w_policy_out.t());
        d_ph.zip_mut_with(&fwd.policy_hidden, |d, &a| *d *= 1.0 - a * a);
        g.w_policy_hidden = standard(fwd.shared.t().dot(&d_ph));
        g.b_policy_hidden = d_ph.sum_axis(Axis(0));
        let mut d_shared = d_ph.dot(&self.w_policy_hidden.t());

        let dv = d_values.view().insert_axis(Axis(1));
        g.w_value_out = standard(fwd.value_hidden.t().dot(&dv));
        g.b_value_out = Array1::from_elem(1, d_values.sum());
        let mut d_vh = dv.dot(&self.w_value_out.t());
        d_vh.zip_mut_with(&fwd.value_hidden, |d, &a| *d *= 1.0 - a * a);
        g.w_value_hidden = standard(fwd.shared.t().dot(&d_vh));
        g.b_value_hidden = d_vh.sum_axis(Axis(0));
        d_shared += &d_vh.dot(&self.w_value_hidden.t());

        d_shared.zip_mut_with(&fwd.shared, |d, &a| *d *= 1.0 - a * a);
        g.w_shared = standard(fwd.input.t().dot(&d_shared));
        g.b_shared = d_shared.sum_axis(Axis(0));
        g
    }
}

/// Products with transposed views can come back column-major.
fn standard(a: Array2<f64>) -> Array2<f64> {
    if a.is_standard_layout() {
        a
    } else {
        a.as_standard_layout().into_owned()
    }
}

pub(crate) fn states_matrix(states: &[FeatureVector], dim: usize) -> Result<Array2<f64>> {
    let mut x = Array2::zeros((states.len(), dim));
    for (mut row, s) in x.rows_mut().into_iter().zip(states) {
        if s.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: s.len(),
            });
        }
        row.assign(&ndarray::ArrayView1::from(s.as_slice()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: usize) -> NetShape {
        NetShape { num_knobs: n, hidden_dim: 16, head_hidden_dim: 8 }
    }

    #[test]
    fn zero_outputs_give_uniform_policy_and_zero_value() {
        let mut net = ActorCritic::new(shape(3), 1).unwrap();
        net.zero_output_layers();
        let (dists, v) = net.policy_value(&FeatureVector(vec![0.2, 0.9, 0.4])).unwrap();
        assert_eq!(v, 0.0);
        for d in dists {
            for p in d {
                assert!((p - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn triples_normalized_and_batch_order_preserved() {
        let net = ActorCritic::new(shape(4), 2).unwrap();
        let states: Vec<FeatureVector> = (0..10)
            .map(|i| FeatureVector(vec![i as f64 / 10.0, 0.5, 1.0 - i as f64 / 10.0, 0.0]))
            .collect();
        let batch = net.policy_value_batch(&states).unwrap();
        assert_eq!(batch.len(), states.len());
        for (s, (dists, v)) in states.iter().zip(&batch) {
            let (single, sv) = net.policy_value(s).unwrap();
            assert!((sv - v).abs() < 1e-12);
            for (a, b) in single.iter().zip(dists) {
                assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                assert!(a.iter().all(|p| *p > 0.0));
                for j in 0..3 {
                    assert!((a[j] - b[j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let net = ActorCritic::new(shape(2), 0).unwrap();
        assert!(net.policy_value(&FeatureVector(vec![0.0])).is_err());
    }

    #[test]
    fn shared_layer_feeds_both_heads() {
        let net = ActorCritic::new(shape(2), 5).unwrap();
        let s = FeatureVector(vec![0.3, 0.6]);
        let (d0, v0) = net.policy_value(&s).unwrap();
        let mut perturbed = net.clone();
        {
            let (w, _) = perturbed.shared_layer_mut();
            w.mapv_inplace(|x| x + 0.05);
        }
        let (d1, v1) = perturbed.policy_value(&s).unwrap();
        assert!((v1 - v0).abs() > 1e-9);
        let moved: f64 = d0
            .iter()
            .zip(&d1)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .sum();
        assert!(moved > 1e-9);
    }

    #[test]
    fn flat_params_round_trip() {
        let net = ActorCritic::new(shape(2), 3).unwrap();
        let flat = net.flat_params();
        assert_eq!(flat.len(), net.num_params());
        let mut other = net.zeros_like();
        other.set_flat_params(&flat);
        assert_eq!(other, net);
    }
}
