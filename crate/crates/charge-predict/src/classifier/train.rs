//! Joint training loop for the two-branch classifier.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{multi_hot, ClassifierGrads, ClassifierModel};
use crate::data::{Dataset, KnowledgeBase};
use crate::error::{Error, Result};
use crate::numerics::optim::Sgd;

#[derive(Debug, Clone)]
pub struct ClassifierTrainConfig {
    pub embed_dim: usize,
    pub epochs: usize,
    pub lr: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub w1: f64,
    pub w2: f64,
}

impl Default for ClassifierTrainConfig {
    fn default() -> Self {
        ClassifierTrainConfig {
            embed_dim: 64,
            epochs: 30,
            lr: 0.5,
            momentum: 0.9,
            batch_size: 16,
            seed: 42,
            w1: 0.5,
            w2: 0.5,
        }
    }
}

/// Per-epoch mean joint loss over the training set.
#[derive(Debug, Clone, Default)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

/// Epoch-at-a-time trainer; tests can drive it and inspect the model
/// between epochs.
pub struct ClassifierTrainer<'a> {
    model: ClassifierModel,
    dataset: &'a Dataset,
    targets: Vec<Vec<f64>>,
    opt: Sgd,
    rng: ChaCha8Rng,
    batch_size: usize,
    epochs_run: usize,
}

impl<'a> ClassifierTrainer<'a> {
    pub fn new(
        dataset: &'a Dataset,
        kb: &KnowledgeBase,
        vocab_size: usize,
        cfg: &ClassifierTrainConfig,
    ) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::Data("empty training dataset".into()));
        }
        if kb.num_labels() != dataset.num_labels() {
            return Err(Error::DimensionMismatch(format!(
                "knowledge base covers {} labels, dataset has {}",
                kb.num_labels(),
                dataset.num_labels()
            )));
        }
        if cfg.batch_size == 0 {
            return Err(Error::InvalidConfig("batch size must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let model =
            ClassifierModel::new(vocab_size, cfg.embed_dim, kb, cfg.w1, cfg.w2, &mut rng)?;
        let l = dataset.num_labels();
        let targets = dataset
            .samples
            .iter()
            .map(|s| multi_hot(&s.labels, l))
            .collect();
        Ok(ClassifierTrainer {
            model,
            dataset,
            targets,
            opt: Sgd::new(cfg.lr, cfg.momentum)?,
            rng,
            batch_size: cfg.batch_size,
            epochs_run: 0,
        })
    }

    pub fn model(&self) -> &ClassifierModel {
        &self.model
    }

    pub fn into_model(self) -> ClassifierModel {
        self.model
    }

    /// One pass over the shuffled dataset; returns the mean joint loss.
    pub fn run_epoch(&mut self) -> Result<f64> {
        let mut order: Vec<usize> = (0..self.dataset.len()).collect();
        order.shuffle(&mut self.rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(self.batch_size) {
            // provision vectors depend on the embedding, so refresh per step
            let kb_vecs = self.model.encode_kb()?;
            let mut grads = ClassifierGrads::zeros_like(&self.model);
            for &i in batch {
                let sample = &self.dataset.samples[i];
                let cache = self.model.forward_with_kb(&sample.tokens, &kb_vecs)?;
                let loss = self.model.sample_loss(&cache, &self.targets[i])?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss at epoch {} sample {i}",
                        self.epochs_run + 1
                    )));
                }
                loss_sum += loss;
                self.model.backward(
                    &cache,
                    &kb_vecs,
                    &sample.tokens,
                    &self.targets[i],
                    &mut grads,
                )?;
            }
            grads.scale(1.0 / batch.len() as f64);
            let m = &mut self.model;
            self.opt.step_group(0, &mut m.embedding.weights, &grads.embedding)?;
            self.opt.step_group(1, &mut m.text_head.weights, &grads.text_w)?;
            self.opt.step_group(2, &mut m.text_head.bias, &grads.text_b)?;
            self.opt.step_group(3, &mut m.knowledge_head.weights, &grads.know_w)?;
            self.opt.step_group(4, &mut m.knowledge_head.bias, &grads.know_b)?;
        }
        self.epochs_run += 1;
        Ok(loss_sum / self.dataset.len() as f64)
    }
}

/// Trains a fresh classifier for `cfg.epochs` epochs.
pub fn train_classifier(
    dataset: &Dataset,
    kb: &KnowledgeBase,
    vocab_size: usize,
    cfg: &ClassifierTrainConfig,
) -> Result<(ClassifierModel, TrainLog)> {
    let mut trainer = ClassifierTrainer::new(dataset, kb, vocab_size, cfg)?;
    let mut log = TrainLog::default();
    for _ in 0..cfg.epochs {
        log.epoch_losses.push(trainer.run_epoch()?);
    }
    Ok((trainer.into_model(), log))
}
