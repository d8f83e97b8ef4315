//! Element-wise (and softmax) activation functions with their backward rules.

use serde::{Deserialize, Serialize};

/// Activation applied after a layer's affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
    /// Computed with max-subtraction for stability.
    Softmax,
}

impl Activation {
    /// Applies the activation in place to pre-activations `z`.
    pub fn apply(&self, z: &mut [f64]) {
        match self {
            Activation::Identity => {}
            Activation::Relu => {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            Activation::Sigmoid => {
                for v in z.iter_mut() {
                    *v = sigmoid(*v);
                }
            }
            Activation::Softmax => {
                let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for v in z.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for v in z.iter_mut() {
                    *v /= sum;
                }
            }
        }
    }

    /// Maps the upstream gradient `d_out` (dL/d output) to the
    /// pre-activation gradient dL/dz, given the cached `output`.
    pub fn backprop(&self, output: &[f64], d_out: &[f64]) -> Vec<f64> {
        debug_assert_eq!(output.len(), d_out.len());
        match self {
            Activation::Identity => d_out.to_vec(),
            Activation::Relu => output
                .iter()
                .zip(d_out)
                .map(|(&o, &d)| if o > 0.0 { d } else { 0.0 })
                .collect(),
            Activation::Sigmoid => output
                .iter()
                .zip(d_out)
                .map(|(&o, &d)| d * o * (1.0 - o))
                .collect(),
            Activation::Softmax => {
                // dz_i = y_i * (d_i - sum_j d_j y_j)
                let dot: f64 = output.iter().zip(d_out).map(|(&o, &d)| o * d).sum();
                output
                    .iter()
                    .zip(d_out)
                    .map(|(&o, &d)| o * (d - dot))
                    .collect()
            }
        }
    }
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}
