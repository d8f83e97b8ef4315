//! Dense layers and the fixed-diagonal gate layer.
//!
//! `DenseLayer` is a plain affine transform plus activation. `MaskedDiagonalLayer`
//! is the gate used for per-label thresholding: its weight matrix is the identity
//! by construction (never stored, never updated) and only the per-label bias is
//! trainable. Component `j` of the gate output is `relu(x_j + b_j)`, so label `j`
//! passes the gate exactly when `x_j + b_j > 0`.

use rand::Rng;

use super::activation::Activation;
use crate::error::{Error, Result};

/// Fully connected layer `y = f(W x + b)` with row-major `W` of shape
/// `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    /// Builds a layer with all-zero parameters.
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::InvalidConfig(
                "layer dimensions must be positive".into(),
            ));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        })
    }

    /// Xavier-uniform init: weights ~ U(-sqrt(6/(in+out)), +sqrt(6/(in+out))),
    /// bias zero.
    pub fn xavier<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let mut layer = Self::zeros(in_dim, out_dim, activation)?;
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        for w in &mut layer.weights {
            *w = rng.gen_range(-limit..limit);
        }
        Ok(layer)
    }

    pub fn from_parts(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if weights.len() != in_dim * out_dim || bias.len() != out_dim {
            return Err(Error::DimensionMismatch(format!(
                "layer {in_dim}x{out_dim}: got {} weights, {} biases",
                weights.len(),
                bias.len()
            )));
        }
        Ok(DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    /// Forward pass `f(W x + b)`.
    ///
    /// Fails on an `x` of the wrong length and on non-finite output.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "dense forward: input len {} != in_dim {}",
                x.len(),
                self.in_dim
            )));
        }
        let mut out = vec![0.0; self.out_dim];
        for (o, out_v) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.in_dim..(o + 1) * self.in_dim];
            let mut sum = self.bias[o];
            for (w, xv) in row.iter().zip(x) {
                sum += w * xv;
            }
            *out_v = sum;
        }
        self.activation.apply(&mut out);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("dense forward produced non-finite output".into()));
        }
        Ok(out)
    }

    /// Backward pass from the pre-activation gradient `dz`.
    ///
    /// Writes `d_weights`/`d_bias` (accumulating) and returns dL/dx.
    pub fn backward_from_preact(
        &self,
        input: &[f64],
        dz: &[f64],
        d_weights: &mut [f64],
        d_bias: &mut [f64],
    ) -> Vec<f64> {
        debug_assert_eq!(input.len(), self.in_dim);
        debug_assert_eq!(dz.len(), self.out_dim);
        debug_assert_eq!(d_weights.len(), self.weights.len());
        debug_assert_eq!(d_bias.len(), self.bias.len());
        let mut d_input = vec![0.0; self.in_dim];
        for (o, &g) in dz.iter().enumerate() {
            d_bias[o] += g;
            let row = o * self.in_dim;
            for (i, &xv) in input.iter().enumerate() {
                d_weights[row + i] += g * xv;
                d_input[i] += self.weights[row + i] * g;
            }
        }
        d_input
    }

    /// Backward pass from the post-activation gradient `d_out`.
    pub fn backward(
        &self,
        input: &[f64],
        output: &[f64],
        d_out: &[f64],
        d_weights: &mut [f64],
        d_bias: &mut [f64],
    ) -> Vec<f64> {
        let dz = self.activation.backprop(output, d_out);
        self.backward_from_preact(input, &dz, d_weights, d_bias)
    }
}

/// Gate layer with fixed identity weights and a trainable per-label bias.
///
/// The identity mask is structural: off-diagonal weights are not stored
/// anywhere, so no training step can touch them. Inputs are per-label
/// probabilities and must lie in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedDiagonalLayer {
    pub bias: Vec<f64>,
}

impl MaskedDiagonalLayer {
    /// Gate over `dim` labels with every bias set to `bias_init`.
    pub fn new(dim: usize, bias_init: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("gate dimension must be positive".into()));
        }
        Ok(MaskedDiagonalLayer {
            bias: vec![bias_init; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.bias.len()
    }

    /// The effective (fixed) weight `w_ij`: 1 on the diagonal, 0 elsewhere.
    pub fn effective_weight(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            0.0
        }
    }

    /// Gate forward: component `j` is `relu(x_j + b_j)`.
    ///
    /// Component `j` is strictly positive iff `x_j + b_j > 0`; blocked
    /// components are exactly zero.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.bias.len() {
            return Err(Error::DimensionMismatch(format!(
                "gate forward: input len {} != dim {}",
                x.len(),
                self.bias.len()
            )));
        }
        if let Some(bad) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Precondition(format!(
                "gate input must be a probability in [0,1], got {bad}"
            )));
        }
        Ok(x.iter()
            .zip(&self.bias)
            .map(|(&xv, &b)| (xv + b).max(0.0))
            .collect())
    }

    /// Backward pass: `d_bias_j` and `d_input_j` equal the upstream gradient
    /// where the gate is open (`output_j > 0`) and are zero where blocked.
    pub fn backward(&self, output: &[f64], d_out: &[f64], d_bias: &mut [f64]) -> Vec<f64> {
        debug_assert_eq!(output.len(), self.bias.len());
        let mut d_input = vec![0.0; self.bias.len()];
        for (j, (&o, &d)) in output.iter().zip(d_out).enumerate() {
            if o > 0.0 {
                d_bias[j] += d;
                d_input[j] = d;
            }
        }
        d_input
    }

    /// Per-label pass thresholds implied by the gate: label `j` passes when
    /// its probability exceeds `-b_j`.
    pub fn thresholds(&self) -> Vec<f64> {
        self.bias.iter().map(|&b| -b).collect()
    }
}
