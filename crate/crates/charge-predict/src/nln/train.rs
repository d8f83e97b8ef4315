//! Training loop for the count network.
//!
//! Trains strictly on exported (probability vector, count target) pairs;
//! the upstream classifier is frozen by the time this runs. Cross-entropy
//! loss, SGD with momentum, optional held-out fraction for accuracy
//! reporting. Only the gate bias and head parameters receive updates; the
//! gate's identity mask is structural and cannot change.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{NlnModel, DEFAULT_GATE_BIAS, DEFAULT_HIDDEN_DIM};
use crate::classifier::ProbVector;
use crate::data::{CountTarget, DEFAULT_COUNT_CLASSES};
use crate::error::{Error, Result};
use crate::numerics::loss::Loss;
use crate::numerics::network::Gradients;
use crate::numerics::optim::Sgd;

/// Pairs of phase-1 probability vectors and gold count targets.
#[derive(Debug, Clone)]
pub struct NlnDataset {
    pub pairs: Vec<(ProbVector, CountTarget)>,
}

impl NlnDataset {
    pub fn new(pairs: Vec<(ProbVector, CountTarget)>) -> Result<Self> {
        let Some((first_x, first_y)) = pairs.first() else {
            return Err(Error::Data("empty count-training dataset".into()));
        };
        let l = first_x.len();
        let k = first_y.num_classes();
        for (x, y) in &pairs {
            if x.len() != l || y.num_classes() != k {
                return Err(Error::DimensionMismatch(
                    "inconsistent dimensions across count-training pairs".into(),
                ));
            }
        }
        Ok(NlnDataset { pairs })
    }

    /// Builds pairs from exported probabilities and gold label sets, capping
    /// counts into `count_classes`.
    pub fn from_probs_and_golds(
        probs: Vec<ProbVector>,
        golds: &[std::collections::BTreeSet<usize>],
        count_classes: usize,
    ) -> Result<Self> {
        if probs.len() != golds.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} probability rows vs {} gold sets",
                probs.len(),
                golds.len()
            )));
        }
        let pairs = probs
            .into_iter()
            .zip(golds)
            .map(|(x, g)| {
                let y = CountTarget::from_label_count(g.len(), count_classes)?;
                Ok((x, y))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(pairs)
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn num_labels(&self) -> usize {
        self.pairs[0].0.len()
    }

    pub fn count_classes(&self) -> usize {
        self.pairs[0].1.num_classes()
    }
}

#[derive(Debug, Clone)]
pub struct NlnTrainConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub gate_bias_init: f64,
    /// Fraction of pairs held out for accuracy reporting; 0 disables.
    pub holdout_frac: f64,
}

impl Default for NlnTrainConfig {
    fn default() -> Self {
        NlnTrainConfig {
            hidden_dim: DEFAULT_HIDDEN_DIM,
            epochs: 30,
            lr: 0.1,
            momentum: 0.9,
            batch_size: 32,
            seed: 42,
            gate_bias_init: DEFAULT_GATE_BIAS,
            holdout_frac: 0.1,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct NlnTrainLog {
    pub epoch_losses: Vec<f64>,
    pub train_accuracy: f64,
    pub holdout_accuracy: Option<f64>,
}

/// Epoch-at-a-time trainer over a fixed train/holdout split.
pub struct NlnTrainer<'a> {
    model: NlnModel,
    data: &'a NlnDataset,
    train_idx: Vec<usize>,
    holdout_idx: Vec<usize>,
    targets: Vec<Vec<f64>>,
    opt: Sgd,
    rng: ChaCha8Rng,
    batch_size: usize,
}

impl<'a> NlnTrainer<'a> {
    pub fn new(data: &'a NlnDataset, cfg: &NlnTrainConfig) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::Data("empty count-training dataset".into()));
        }
        if cfg.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        if !(0.0..1.0).contains(&cfg.holdout_frac) {
            return Err(Error::InvalidConfig(format!(
                "holdout fraction must be in [0, 1), got {}",
                cfg.holdout_frac
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let model = NlnModel::new(
            data.num_labels(),
            cfg.hidden_dim,
            data.count_classes(),
            cfg.gate_bias_init,
            &mut rng,
        )?;
        let mut indices: Vec<usize> = (0..data.len()).collect();
        indices.shuffle(&mut rng);
        let holdout_len = (data.len() as f64 * cfg.holdout_frac).floor() as usize;
        let holdout_idx = indices.split_off(data.len() - holdout_len);
        let targets = data.pairs.iter().map(|(_, y)| y.one_hot()).collect();
        Ok(NlnTrainer {
            model,
            data,
            train_idx: indices,
            holdout_idx,
            targets,
            opt: Sgd::new(cfg.lr, cfg.momentum)?,
            rng,
            batch_size: cfg.batch_size,
        })
    }

    pub fn model(&self) -> &NlnModel {
        &self.model
    }

    pub fn into_model(self) -> NlnModel {
        self.model
    }

    pub fn holdout_len(&self) -> usize {
        self.holdout_idx.len()
    }

    /// One pass over the shuffled training indices; mean cross-entropy.
    pub fn run_epoch(&mut self) -> Result<f64> {
        self.train_idx.shuffle(&mut self.rng);
        let net = self.model.network_mut();
        let mut loss_sum = 0.0;
        for batch in self.train_idx.chunks(self.batch_size) {
            let mut grads = Gradients::zeros_like(net);
            for &i in batch {
                let x = self.data.pairs[i].0.as_slice();
                let cache = net.forward_cached(x)?;
                let loss = Loss::CrossEntropy.value(cache.output(), &self.targets[i])?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("non-finite loss at sample {i}")));
                }
                loss_sum += loss;
                let g = net.backward(&cache, &self.targets[i], Loss::CrossEntropy)?;
                grads.add_assign(&g);
            }
            grads.scale(1.0 / batch.len() as f64);
            net.apply_step(&mut self.opt, &grads)?;
        }
        Ok(loss_sum / self.train_idx.len().max(1) as f64)
    }

    /// Count-class accuracy over a set of pair indices.
    fn accuracy_over(&self, indices: &[usize]) -> Result<f64> {
        if indices.is_empty() {
            return Ok(0.0);
        }
        let mut hits = 0usize;
        for &i in indices {
            let (x, y) = &self.data.pairs[i];
            let predicted = self.model.predicted_count(x)?;
            if predicted == y.class() + 1 {
                hits += 1;
            }
        }
        Ok(hits as f64 / indices.len() as f64)
    }

    pub fn train_accuracy(&self) -> Result<f64> {
        self.accuracy_over(&self.train_idx)
    }

    pub fn holdout_accuracy(&self) -> Result<Option<f64>> {
        if self.holdout_idx.is_empty() {
            return Ok(None);
        }
        Ok(Some(self.accuracy_over(&self.holdout_idx)?))
    }
}

/// Trains a fresh count network for `cfg.epochs` epochs.
pub fn train_nln(data: &NlnDataset, cfg: &NlnTrainConfig) -> Result<(NlnModel, NlnTrainLog)> {
    let mut trainer = NlnTrainer::new(data, cfg)?;
    let mut log = NlnTrainLog::default();
    for _ in 0..cfg.epochs {
        log.epoch_losses.push(trainer.run_epoch()?);
    }
    log.train_accuracy = trainer.train_accuracy()?;
    log.holdout_accuracy = trainer.holdout_accuracy()?;
    Ok((trainer.into_model(), log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize_threshold_task, ThresholdTaskConfig};

    fn tiny_task(samples: usize, seed: u64) -> NlnDataset {
        let task = synthesize_threshold_task(
            &ThresholdTaskConfig {
                num_labels: 6,
                num_samples: samples,
                ..ThresholdTaskConfig::default()
            },
            seed,
        )
        .unwrap();
        let targets = task.count_targets().unwrap();
        NlnDataset::new(task.probs.into_iter().zip(targets).collect()).unwrap()
    }

    #[test]
    fn zero_lr_keeps_parameters() {
        let data = tiny_task(80, 1);
        let cfg = NlnTrainConfig {
            lr: 0.0,
            epochs: 2,
            ..NlnTrainConfig::default()
        };
        let mut trainer = NlnTrainer::new(&data, &cfg).unwrap();
        let before = trainer.model().network().clone();
        trainer.run_epoch().unwrap();
        trainer.run_epoch().unwrap();
        assert!(trainer.model().network().params_bit_equal(&before));
    }

    #[test]
    fn deterministic_under_seed() {
        let data = tiny_task(120, 2);
        let cfg = NlnTrainConfig {
            epochs: 4,
            ..NlnTrainConfig::default()
        };
        let (m1, log1) = train_nln(&data, &cfg).unwrap();
        let (m2, log2) = train_nln(&data, &cfg).unwrap();
        assert_eq!(log1.epoch_losses, log2.epoch_losses);
        assert!(m1.network().params_bit_equal(m2.network()));
    }

    #[test]
    fn degenerate_single_class_converges() {
        // All targets are count 1; the head should become near-certain.
        let task = synthesize_threshold_task(
            &ThresholdTaskConfig {
                num_labels: 6,
                num_samples: 300,
                mixture: vec![1.0, 0.0, 0.0, 0.0],
                ..ThresholdTaskConfig::default()
            },
            3,
        )
        .unwrap();
        let targets = task.count_targets().unwrap();
        let data = NlnDataset::new(task.probs.into_iter().zip(targets).collect()).unwrap();
        let cfg = NlnTrainConfig {
            epochs: 40,
            holdout_frac: 0.0,
            ..NlnTrainConfig::default()
        };
        let (model, log) = train_nln(&data, &cfg).unwrap();
        assert!(
            *log.epoch_losses.last().unwrap() < 0.05,
            "final loss {:?}",
            log.epoch_losses.last()
        );
        let dist = model.forward(&data.pairs[0].0).unwrap();
        assert!(dist[0] > 0.99, "p(count=1) = {}", dist[0]);
        assert_eq!(log.train_accuracy, 1.0);
    }

    #[test]
    fn mask_stays_identity_through_training() {
        let data = tiny_task(200, 4);
        let cfg = NlnTrainConfig {
            epochs: 5,
            ..NlnTrainConfig::default()
        };
        let mut trainer = NlnTrainer::new(&data, &cfg).unwrap();
        for _ in 0..cfg.epochs {
            trainer.run_epoch().unwrap();
            let gate = trainer.model().gate();
            let l = gate.dim();
            for i in 0..l {
                for j in 0..l {
                    let expect: f64 = if i == j { 1.0 } else { 0.0 };
                    assert_eq!(gate.effective_weight(i, j).to_bits(), expect.to_bits());
                }
            }
        }
    }

    #[test]
    fn grad_check_after_ten_steps() {
        let data = tiny_task(40, 5);
        // 40 train pairs, batch 4, no holdout: one epoch = 10 SGD steps
        let cfg = NlnTrainConfig {
            batch_size: 4,
            holdout_frac: 0.0,
            epochs: 1,
            ..NlnTrainConfig::default()
        };
        let mut trainer = NlnTrainer::new(&data, &cfg).unwrap();
        trainer.run_epoch().unwrap();
        let mut model = trainer.into_model();
        let (x, y) = &data.pairs[0];
        let report = model.grad_check(x, y).unwrap();
        assert!(report.passes(), "max_rel_error = {}", report.max_rel_error);
    }
}
