//! Fixed-topology layer stacks with hand-rolled backpropagation.

use super::layer::{DenseLayer, MaskedDiagonalLayer};
use super::loss::Loss;
use super::optim::Sgd;
use crate::error::{Error, Result};

/// One layer of a [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(DenseLayer),
    MaskedDiagonal(MaskedDiagonalLayer),
}

impl Layer {
    pub fn out_dim(&self) -> usize {
        match self {
            Layer::Dense(l) => l.out_dim(),
            Layer::MaskedDiagonal(l) => l.dim(),
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Layer::Dense(l) => l.in_dim(),
            Layer::MaskedDiagonal(l) => l.dim(),
        }
    }
}

/// Per-layer gradients. The gate contributes a bias gradient only: its mask
/// is not a parameter, so no gradient entry exists for it.
#[derive(Debug, Clone)]
pub enum LayerGrads {
    Dense { weights: Vec<f64>, bias: Vec<f64> },
    MaskedDiagonal { bias: Vec<f64> },
}

/// Gradients for every trainable parameter of a network, parallel to its
/// layer list.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub layers: Vec<LayerGrads>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => LayerGrads::Dense {
                    weights: vec![0.0; d.weights.len()],
                    bias: vec![0.0; d.bias.len()],
                },
                Layer::MaskedDiagonal(m) => LayerGrads::MaskedDiagonal {
                    bias: vec![0.0; m.bias.len()],
                },
            })
            .collect();
        Gradients { layers }
    }

    pub fn scale(&mut self, factor: f64) {
        for lg in &mut self.layers {
            match lg {
                LayerGrads::Dense { weights, bias } => {
                    for v in weights.iter_mut().chain(bias.iter_mut()) {
                        *v *= factor;
                    }
                }
                LayerGrads::MaskedDiagonal { bias } => {
                    for v in bias.iter_mut() {
                        *v *= factor;
                    }
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            match (a, b) {
                (
                    LayerGrads::Dense { weights, bias },
                    LayerGrads::Dense {
                        weights: ow,
                        bias: ob,
                    },
                ) => {
                    for (x, y) in weights.iter_mut().zip(ow) {
                        *x += y;
                    }
                    for (x, y) in bias.iter_mut().zip(ob) {
                        *x += y;
                    }
                }
                (
                    LayerGrads::MaskedDiagonal { bias },
                    LayerGrads::MaskedDiagonal { bias: ob },
                ) => {
                    for (x, y) in bias.iter_mut().zip(ob) {
                        *x += y;
                    }
                }
                _ => unreachable!("gradient/layer kind mismatch"),
            }
        }
    }

    /// Flattens in the same order as [`Network`] parameter indexing.
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for lg in &self.layers {
            match lg {
                LayerGrads::Dense { weights, bias } => {
                    out.extend_from_slice(weights);
                    out.extend_from_slice(bias);
                }
                LayerGrads::MaskedDiagonal { bias } => out.extend_from_slice(bias),
            }
        }
        out
    }
}

/// Activations cached during a forward pass; feeds [`Network::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `values[0]` is the network input; `values[i+1]` is layer `i`'s output.
    pub values: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.values.last().expect("cache holds at least the input")
    }
}

/// A stack of layers trained with a single loss at the top.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "layer boundary: {} -> {}",
                    pair[0].out_dim(),
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Network { layers })
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut cache = self.forward_cached(x)?;
        Ok(cache.values.pop().expect("cache holds at least the input"))
    }

    pub fn forward_cached(&self, x: &[f64]) -> Result<ForwardCache> {
        let mut values = Vec::with_capacity(self.layers.len() + 1);
        values.push(x.to_vec());
        for layer in &self.layers {
            let out = match layer {
                Layer::Dense(l) => l.forward(values.last().unwrap())?,
                Layer::MaskedDiagonal(l) => l.forward(values.last().unwrap())?,
            };
            values.push(out);
        }
        Ok(ForwardCache { values })
    }

    /// Loss of the network on `(x, target)` under `loss`.
    pub fn loss(&self, x: &[f64], target: &[f64], loss: Loss) -> Result<f64> {
        let cache = self.forward_cached(x)?;
        loss.value(cache.output(), target)
    }

    /// Backpropagates the loss gradient through every layer.
    pub fn backward(&self, cache: &ForwardCache, target: &[f64], loss: Loss) -> Result<Gradients> {
        let output = cache.output();
        if target.len() != output.len() {
            return Err(Error::DimensionMismatch(format!(
                "backward: target len {} != output len {}",
                target.len(),
                output.len()
            )));
        }
        let mut grads = Gradients::zeros_like(self);
        let mut d_out = loss.grad(output, target);
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.values[i];
            let out = &cache.values[i + 1];
            d_out = match (layer, &mut grads.layers[i]) {
                (Layer::Dense(l), LayerGrads::Dense { weights, bias }) => {
                    l.backward(input, out, &d_out, weights, bias)
                }
                (Layer::MaskedDiagonal(l), LayerGrads::MaskedDiagonal { bias }) => {
                    l.backward(out, &d_out, bias)
                }
                _ => unreachable!("gradient/layer kind mismatch"),
            };
        }
        Ok(grads)
    }

    /// Applies one optimizer step from accumulated gradients.
    pub fn apply_step(&mut self, opt: &mut Sgd, grads: &Gradients) -> Result<()> {
        for (i, (layer, lg)) in self.layers.iter_mut().zip(&grads.layers).enumerate() {
            match (layer, lg) {
                (Layer::Dense(l), LayerGrads::Dense { weights, bias }) => {
                    opt.step_group(2 * i, &mut l.weights, weights)?;
                    opt.step_group(2 * i + 1, &mut l.bias, bias)?;
                }
                (Layer::MaskedDiagonal(l), LayerGrads::MaskedDiagonal { bias }) => {
                    opt.step_group(2 * i, &mut l.bias, bias)?;
                }
                _ => unreachable!("gradient/layer kind mismatch"),
            }
        }
        Ok(())
    }

    /// Number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => d.weights.len() + d.bias.len(),
                Layer::MaskedDiagonal(m) => m.bias.len(),
            })
            .sum()
    }

    pub fn param(&self, idx: usize) -> f64 {
        *self.locate(idx).0
    }

    pub fn set_param(&mut self, idx: usize, value: f64) {
        *self.locate_mut(idx) = value;
    }

    pub fn param_name(&self, idx: usize) -> String {
        self.locate(idx).1
    }

    fn locate(&self, mut idx: usize) -> (&f64, String) {
        for (li, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Dense(d) => {
                    if idx < d.weights.len() {
                        let (r, c) = (idx / d.in_dim(), idx % d.in_dim());
                        return (&d.weights[idx], format!("layer{li}.weight[{r},{c}]"));
                    }
                    idx -= d.weights.len();
                    if idx < d.bias.len() {
                        return (&d.bias[idx], format!("layer{li}.bias[{idx}]"));
                    }
                    idx -= d.bias.len();
                }
                Layer::MaskedDiagonal(m) => {
                    if idx < m.bias.len() {
                        return (&m.bias[idx], format!("layer{li}.gate_bias[{idx}]"));
                    }
                    idx -= m.bias.len();
                }
            }
        }
        panic!("parameter index out of range");
    }

    fn locate_mut(&mut self, mut idx: usize) -> &mut f64 {
        for layer in self.layers.iter_mut() {
            match layer {
                Layer::Dense(d) => {
                    if idx < d.weights.len() {
                        return &mut d.weights[idx];
                    }
                    idx -= d.weights.len();
                    if idx < d.bias.len() {
                        return &mut d.bias[idx];
                    }
                    idx -= d.bias.len();
                }
                Layer::MaskedDiagonal(m) => {
                    if idx < m.bias.len() {
                        return &mut m.bias[idx];
                    }
                    idx -= m.bias.len();
                }
            }
        }
        panic!("parameter index out of range");
    }

    /// Bit-exact parameter comparison, for determinism checks.
    pub fn params_bit_equal(&self, other: &Network) -> bool {
        if self.param_count() != other.param_count() {
            return false;
        }
        (0..self.param_count()).all(|i| self.param(i).to_bits() == other.param(i).to_bits())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::activation::Activation;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_net(rng: &mut ChaCha8Rng) -> Network {
        Network::new(vec![
            Layer::MaskedDiagonal(MaskedDiagonalLayer::new(4, -0.5).unwrap()),
            Layer::Dense(DenseLayer::xavier(4, 5, Activation::Relu, rng).unwrap()),
            Layer::Dense(DenseLayer::xavier(5, 3, Activation::Softmax, rng).unwrap()),
        ])
        .unwrap()
    }

    #[test]
    fn softmax_ce_gradient_zero_when_target_equals_prediction() {
        // With target == predicted distribution, dL/dz = p - y = 0.
        let layer = DenseLayer::from_parts(
            3,
            3,
            vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            vec![0.0; 3],
            Activation::Softmax,
        )
        .unwrap();
        let net = Network::new(vec![Layer::Dense(layer)]).unwrap();
        let cache = net.forward_cached(&[0.4, -0.3, 1.1]).unwrap();
        let target = cache.output().to_vec();
        let grads = net.backward(&cache, &target, Loss::CrossEntropy).unwrap();
        for g in grads.flat() {
            assert!(g.abs() < 1e-12, "logit gradient {g} not ~0");
        }
    }

    #[test]
    fn gate_bias_gradient_matches_gate_state() {
        // d loss / d b_j is the downstream gradient at unit j when the gate
        // is open, and exactly zero when blocked.
        let gate = MaskedDiagonalLayer {
            bias: vec![-0.5, -0.5],
        };
        let net = Network::new(vec![Layer::MaskedDiagonal(gate)]).unwrap();
        let x = [0.9, 0.1]; // unit 0 open, unit 1 blocked
        let cache = net.forward_cached(&x).unwrap();
        // Use BCE to get a nontrivial downstream gradient.
        let target = [1.0, 1.0];
        let grads = net
            .backward(&cache, &target, Loss::BinaryCrossEntropy)
            .unwrap();
        let flat = grads.flat();
        let downstream = Loss::BinaryCrossEntropy.grad(cache.output(), &target);
        assert!((flat[0] - downstream[0]).abs() < 1e-15);
        assert_eq!(flat[1], 0.0);
    }

    #[test]
    fn backward_rejects_target_length_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = small_net(&mut rng);
        let cache = net.forward_cached(&[0.5; 4]).unwrap();
        assert!(net
            .backward(&cache, &[1.0, 0.0], Loss::CrossEntropy)
            .is_err());
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let mut net = small_net(&mut rng);
            let mut opt = Sgd::new(0.05, 0.9).unwrap();
            for step in 0..20 {
                let x: Vec<f64> = (0..4).map(|_| rng.gen_range(0.0..1.0)).collect();
                let mut target = vec![0.0; 3];
                target[step % 3] = 1.0;
                let cache = net.forward_cached(&x).unwrap();
                let grads = net.backward(&cache, &target, Loss::CrossEntropy).unwrap();
                net.apply_step(&mut opt, &grads).unwrap();
            }
            net
        };
        let a = run();
        let b = run();
        assert!(a.params_bit_equal(&b));
    }

    #[test]
    fn param_indexing_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = small_net(&mut rng);
        let n = net.param_count();
        assert_eq!(n, 4 + (4 * 5 + 5) + (5 * 3 + 3));
        for i in 0..n {
            let v = net.param(i);
            net.set_param(i, v + 1.0);
            assert_eq!(net.param(i), v + 1.0);
            net.set_param(i, v);
        }
        assert!(net.param_name(0).contains("gate_bias"));
        assert!(net.param_name(4).contains("weight"));
    }
}
