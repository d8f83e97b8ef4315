//! Number Learning Network: per-label threshold gate plus a count head.
//!
//! The first layer is the fixed-diagonal gate: identity weights that are
//! never stored or updated, and one trainable bias per label. A label's
//! probability passes the gate when `x_j + b_j > 0`, so `-b_j` is the
//! label's learned decision threshold. The gated vector feeds a two-layer
//! FC head ending in a softmax over count classes {1, 2, 3, 4+}; kept
//! deliberately shallow so gradients stay well-behaved.

pub mod train;

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::ProbVector;
use crate::data::CountTarget;
use crate::error::{Error, Result};
use crate::numerics::activation::Activation;
use crate::numerics::gradcheck::{grad_check, GradCheckReport, NetworkSample, DEFAULT_STEP};
use crate::numerics::layer::{DenseLayer, MaskedDiagonalLayer};
use crate::numerics::loss::Loss;
use crate::numerics::network::{Layer, Network};
use crate::numerics::params::{self, check_format_version, LayerSpec, FORMAT_VERSION};

pub use train::{train_nln, NlnDataset, NlnTrainConfig, NlnTrainLog, NlnTrainer};

/// Default gate bias: thresholds start at the conventional 0.5.
pub const DEFAULT_GATE_BIAS: f64 = -0.5;
/// Default hidden width of the count head.
pub const DEFAULT_HIDDEN_DIM: usize = 64;

/// Gate + two dense layers mapping a probability vector to a distribution
/// over label counts.
#[derive(Debug, Clone)]
pub struct NlnModel {
    network: Network,
}

impl NlnModel {
    pub fn new<R: Rng + ?Sized>(
        num_labels: usize,
        hidden_dim: usize,
        count_classes: usize,
        gate_bias_init: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if count_classes == 0 {
            return Err(Error::InvalidConfig("need at least one count class".into()));
        }
        let network = Network::new(vec![
            Layer::MaskedDiagonal(MaskedDiagonalLayer::new(num_labels, gate_bias_init)?),
            Layer::Dense(DenseLayer::xavier(
                num_labels,
                hidden_dim,
                Activation::Relu,
                rng,
            )?),
            Layer::Dense(DenseLayer::xavier(
                hidden_dim,
                count_classes,
                Activation::Softmax,
                rng,
            )?),
        ])?;
        Ok(NlnModel { network })
    }

    pub fn num_labels(&self) -> usize {
        self.network.in_dim()
    }

    pub fn count_classes(&self) -> usize {
        self.network.out_dim()
    }

    pub fn gate(&self) -> &MaskedDiagonalLayer {
        match &self.network.layers[0] {
            Layer::MaskedDiagonal(m) => m,
            _ => unreachable!("gate is always the first layer"),
        }
    }

    /// Mutable access to the underlying stack, for experiments that edit
    /// parameters directly.
    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.network
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    /// Softmax distribution over count classes.
    pub fn forward(&self, x: &ProbVector) -> Result<Vec<f64>> {
        self.network.forward(x.as_slice())
    }

    /// Predicted label count `n` in `1..=count_classes`: argmax of the count
    /// distribution, ties broken toward the smaller count.
    pub fn predicted_count(&self, x: &ProbVector) -> Result<usize> {
        let dist = self.forward(x)?;
        Ok(argmax_first(&dist) + 1)
    }

    /// Learned per-label thresholds, `-b_j`.
    pub fn thresholds(&self) -> Vec<f64> {
        self.gate().thresholds()
    }

    /// Finite-difference check of every trainable parameter on one sample.
    pub fn grad_check(&mut self, x: &ProbVector, target: &CountTarget) -> Result<GradCheckReport> {
        if target.num_classes() != self.count_classes() {
            return Err(Error::DimensionMismatch(format!(
                "target has {} classes, model {}",
                target.num_classes(),
                self.count_classes()
            )));
        }
        let input = x.as_slice().to_vec();
        let target = target.one_hot();
        let mut subject = NetworkSample {
            network: &mut self.network,
            input,
            target,
            loss: Loss::CrossEntropy,
        };
        grad_check(&mut subject, DEFAULT_STEP)
    }
}

/// First index holding the maximum value.
fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// On-disk form: the gate bias is its own section, the FC head uses the
/// shared layer-spec format.
#[derive(Debug, Serialize, Deserialize)]
pub struct NlnDoc {
    pub format_version: u32,
    pub model_kind: String,
    pub rng_seed: u64,
    pub config_digest: String,
    pub gate_bias: Vec<f64>,
    pub layers: Vec<LayerSpec>,
}

impl NlnDoc {
    pub fn from_model(model: &NlnModel, rng_seed: u64, config_digest: String) -> Self {
        NlnDoc {
            format_version: FORMAT_VERSION,
            model_kind: "nln".into(),
            rng_seed,
            config_digest,
            gate_bias: model.gate().bias.clone(),
            layers: model.network.layers[1..]
                .iter()
                .map(LayerSpec::from_layer)
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<NlnModel> {
        check_format_version(self.format_version, "count model")?;
        if self.model_kind != "nln" {
            return Err(Error::SchemaMismatch(format!(
                "expected an nln model, found {:?}",
                self.model_kind
            )));
        }
        if self.layers.len() != 2 {
            return Err(Error::SchemaMismatch(format!(
                "count head expects 2 layers, found {}",
                self.layers.len()
            )));
        }
        let mut layers = vec![Layer::MaskedDiagonal(MaskedDiagonalLayer {
            bias: self.gate_bias,
        })];
        for spec in self.layers {
            layers.push(spec.into_layer()?);
        }
        Ok(NlnModel {
            network: Network::new(layers)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        params::write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        params::read_json(path)
    }
}

/// Threshold report: `label_index,label_name,threshold` rows with leading
/// `#` comment lines carrying the seed and config digest.
pub fn write_thresholds_csv(
    path: &Path,
    model: &NlnModel,
    label_names: Option<&[String]>,
    rng_seed: u64,
    config_digest: &str,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# seed: {rng_seed}\n"));
    out.push_str(&format!("# config_digest: {config_digest}\n"));
    out.push_str("label_index,label_name,threshold\n");
    for (i, t) in model.thresholds().iter().enumerate() {
        let name = label_names
            .and_then(|n| n.get(i).cloned())
            .unwrap_or_else(|| format!("label_{i}"));
        out.push_str(&format!("{i},{},{t}\n", csv_field(&name)));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Minimal CSV quoting: wrap when the field contains a delimiter or quote.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn model(seed: u64) -> NlnModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        NlnModel::new(5, 8, 4, DEFAULT_GATE_BIAS, &mut rng).unwrap()
    }

    #[test]
    fn zero_head_gives_uniform_distribution() {
        let mut m = model(1);
        m.network_mut().layers[1] =
            Layer::Dense(DenseLayer::zeros(5, 8, Activation::Relu).unwrap());
        m.network_mut().layers[2] =
            Layer::Dense(DenseLayer::zeros(8, 4, Activation::Softmax).unwrap());
        let x = ProbVector::new(vec![0.9, 0.1, 0.5, 0.7, 0.3]).unwrap();
        let dist = m.forward(&x).unwrap();
        for p in dist {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert_eq!(m.predicted_count(&x).unwrap(), 1); // tie-break to count 1
    }

    #[test]
    fn forward_distribution_sums_to_one() {
        use rand::Rng;
        let m = model(2);
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        for _ in 0..500 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..=1.0)).collect();
            let dist = m.forward(&ProbVector::new(x).unwrap()).unwrap();
            let sum: f64 = dist.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(dist.iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn forward_matches_independent_recomputation() {
        let m = model(3);
        let x = ProbVector::new(vec![0.8, 0.2, 0.6, 0.05, 0.95]).unwrap();
        let got = m.forward(&x).unwrap();

        // replicate the three-layer arithmetic by hand
        let gate = m.gate();
        let gated: Vec<f64> = x
            .as_slice()
            .iter()
            .zip(&gate.bias)
            .map(|(&v, &b)| (v + b).max(0.0))
            .collect();
        let (l1, l2) = match (&m.network().layers[1], &m.network().layers[2]) {
            (Layer::Dense(a), Layer::Dense(b)) => (a, b),
            _ => unreachable!(),
        };
        let mut hidden = vec![0.0; l1.out_dim()];
        for (i, h) in hidden.iter_mut().enumerate() {
            let mut z = l1.bias[i];
            for (j, &g) in gated.iter().enumerate() {
                z += l1.weights[i * l1.in_dim() + j] * g;
            }
            *h = z.max(0.0);
        }
        let mut logits = vec![0.0; l2.out_dim()];
        for (i, o) in logits.iter_mut().enumerate() {
            let mut z = l2.bias[i];
            for (j, &h) in hidden.iter().enumerate() {
                z += l2.weights[i * l2.in_dim() + j] * h;
            }
            *o = z;
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
        let total: f64 = exps.iter().sum();
        for (a, e) in got.iter().zip(&exps) {
            assert!((a - e / total).abs() < 1e-12);
        }
    }

    #[test]
    fn predicted_count_takes_argmax_with_low_tie() {
        let m = model(4);
        assert_eq!(argmax_first(&[0.7, 0.2, 0.05, 0.05]) + 1, 1);
        assert_eq!(argmax_first(&[0.4, 0.4, 0.1, 0.1]) + 1, 1);
        assert_eq!(argmax_first(&[0.1, 0.2, 0.4, 0.3]) + 1, 3);
        drop(m);
    }

    #[test]
    fn fresh_model_thresholds_are_half() {
        let m = model(5);
        for t in m.thresholds() {
            assert_eq!(t, 0.5);
        }
    }

    #[test]
    fn thresholds_flip_bias_sign() {
        let mut m = model(6);
        match &mut m.network_mut().layers[0] {
            Layer::MaskedDiagonal(g) => g.bias = vec![-0.5, -0.3, 0.1, -0.9, 0.0],
            _ => unreachable!(),
        }
        assert_eq!(m.thresholds(), vec![0.5, 0.3, -0.1, 0.9, 0.0]);
    }

    #[test]
    fn grad_check_passes_at_init() {
        let mut m = model(7);
        let x = ProbVector::new(vec![0.9, 0.3, 0.6, 0.1, 0.8]).unwrap();
        let target = CountTarget::from_label_count(2, 4).unwrap();
        let report = m.grad_check(&x, &target).unwrap();
        assert!(report.passes(), "max_rel_error = {}", report.max_rel_error);
    }

    #[test]
    fn gate_monotone_in_each_coordinate() {
        use rand::Rng;
        let m = model(8);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..5).map(|_| rng.gen_range(0.0..0.95)).collect();
            let j = rng.gen_range(0..5);
            let mut x_up = x.clone();
            x_up[j] = (x_up[j] + rng.gen_range(0.0..0.05)).min(1.0);
            let g = m.gate();
            let a = g.forward(&x).unwrap();
            let b = g.forward(&x_up).unwrap();
            assert!(b[j] >= a[j]);
        }
    }

    #[test]
    fn doc_round_trip_is_value_exact() {
        let m = model(9);
        let doc = NlnDoc::from_model(&m, 42, "digest".into());
        let json = serde_json::to_string(&doc).unwrap();
        let back: NlnDoc = serde_json::from_str(&json).unwrap();
        let m2 = back.into_model().unwrap();
        assert!(m.network().params_bit_equal(m2.network()));
    }

    #[test]
    fn thresholds_csv_has_expected_shape() {
        let dir = tempfile::tempdir().unwrap();
        let m = model(10);
        let path = dir.path().join("thresholds.csv");
        write_thresholds_csv(&path, &m, None, 42, "abc").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# seed: 42"));
        assert_eq!(lines[2], "label_index,label_name,threshold");
        assert_eq!(lines.len(), 3 + 5);
        assert!(lines[3].starts_with("0,label_0,0.5"));
    }
}
