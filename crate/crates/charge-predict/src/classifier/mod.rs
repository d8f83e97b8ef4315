//! Phase-1 classifier: two-branch per-label probability prediction.
//!
//! A text branch reads the mean-pooled fact embedding directly. A knowledge
//! branch attends over per-label provision embeddings (scaled dot-product,
//! query = fact vector) and reads the concatenation of fact and attended
//! vectors. Both branches end in `L` sigmoid units and are trained jointly
//! under `w1 * loss1 + w2 * loss2`; inference averages the two heads.

pub mod train;

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{KnowledgeBase, Vocabulary, PAD_ID};
use crate::error::{Error, Result};
use crate::numerics::activation::Activation;
use crate::numerics::layer::DenseLayer;
use crate::numerics::loss::Loss;
use crate::numerics::params::{self, check_format_version, LayerSpec, FORMAT_VERSION};

pub use train::{train_classifier, ClassifierTrainConfig, ClassifierTrainer, TrainLog};

/// Per-label probability vector: every component in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Precondition("empty probability vector".into()));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || !(0.0..=1.0).contains(*p)) {
            return Err(Error::Precondition(format!(
                "probability out of [0,1]: {bad}"
            )));
        }
        Ok(ProbVector(probs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for ProbVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        ProbVector::new(v)
    }
}

impl From<ProbVector> for Vec<f64> {
    fn from(p: ProbVector) -> Self {
        p.0
    }
}

/// Trainable token embedding table, `vocab_size x dim`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    vocab_size: usize,
    dim: usize,
    pub weights: Vec<f64>,
}

impl Embedding {
    pub fn new<R: Rng + ?Sized>(vocab_size: usize, dim: usize, rng: &mut R) -> Result<Self> {
        if vocab_size == 0 || dim == 0 {
            return Err(Error::InvalidConfig(
                "embedding needs positive vocab size and dim".into(),
            ));
        }
        let weights = (0..vocab_size * dim)
            .map(|_| rng.gen_range(-0.1..0.1))
            .collect();
        Ok(Embedding {
            vocab_size,
            dim,
            weights,
        })
    }

    pub fn from_parts(vocab_size: usize, dim: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != vocab_size * dim {
            return Err(Error::SchemaMismatch(format!(
                "embedding: {} weights for {vocab_size}x{dim}",
                weights.len()
            )));
        }
        Ok(Embedding {
            vocab_size,
            dim,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn row(&self, id: u32) -> &[f64] {
        let i = id as usize;
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }
}

/// Mean of the embeddings of all non-PAD tokens.
pub fn encode_text(embedding: &Embedding, tokens: &[u32]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; embedding.dim()];
    let mut count = 0usize;
    for &t in tokens {
        if t == PAD_ID {
            continue;
        }
        if t as usize >= embedding.vocab_size() {
            return Err(Error::Precondition(format!(
                "token id {t} outside vocabulary of {}",
                embedding.vocab_size()
            )));
        }
        for (a, v) in acc.iter_mut().zip(embedding.row(t)) {
            *a += v;
        }
        count += 1;
    }
    if count == 0 {
        return Err(Error::Precondition(
            "cannot encode an all-PAD token sequence".into(),
        ));
    }
    let inv = 1.0 / count as f64;
    for a in &mut acc {
        *a *= inv;
    }
    Ok(acc)
}

/// Attention of a fact vector over the provision vectors.
#[derive(Debug, Clone)]
pub struct Attention {
    /// Convex combination of provision vectors.
    pub attended: Vec<f64>,
    /// Softmax weights, one per label.
    pub alphas: Vec<f64>,
    /// Raw scaled dot-product scores.
    pub scores: Vec<f64>,
}

/// Scaled dot-product attention: `s_l = <fact, kb_l> / sqrt(d)`,
/// `alpha = softmax(s)`, output `sum_l alpha_l * kb_l`.
pub fn attend_knowledge(fact_vec: &[f64], kb_vecs: &[Vec<f64>]) -> Result<Attention> {
    if kb_vecs.is_empty() {
        return Err(Error::Precondition("empty knowledge base".into()));
    }
    let d = fact_vec.len();
    let scale = 1.0 / (d as f64).sqrt();
    let mut scores = Vec::with_capacity(kb_vecs.len());
    for kb in kb_vecs {
        if kb.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "provision vector dim {} != fact dim {d}",
                kb.len()
            )));
        }
        let dot: f64 = fact_vec.iter().zip(kb).map(|(a, b)| a * b).sum();
        scores.push(dot * scale);
    }
    let mut alphas = scores.clone();
    Activation::Softmax.apply(&mut alphas);
    let mut attended = vec![0.0; d];
    for (alpha, kb) in alphas.iter().zip(kb_vecs) {
        for (o, v) in attended.iter_mut().zip(kb) {
            *o += alpha * v;
        }
    }
    Ok(Attention {
        attended,
        alphas,
        scores,
    })
}

/// The two-branch classifier.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub embedding: Embedding,
    /// `d -> L`, sigmoid.
    pub text_head: DenseLayer,
    /// `2d -> L`, sigmoid; reads concat(fact, attended).
    pub knowledge_head: DenseLayer,
    pub w1: f64,
    pub w2: f64,
    /// Provision token ids per label, fixed at construction.
    pub kb_tokens: Vec<Vec<u32>>,
}

/// Cached intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ClassifierCache {
    pub fact_vec: Vec<f64>,
    pub alphas: Vec<f64>,
    pub attended: Vec<f64>,
    pub concat: Vec<f64>,
    pub text_probs: Vec<f64>,
    pub know_probs: Vec<f64>,
}

/// Gradients for every trainable classifier parameter.
#[derive(Debug, Clone)]
pub struct ClassifierGrads {
    pub embedding: Vec<f64>,
    pub text_w: Vec<f64>,
    pub text_b: Vec<f64>,
    pub know_w: Vec<f64>,
    pub know_b: Vec<f64>,
}

impl ClassifierGrads {
    pub fn zeros_like(model: &ClassifierModel) -> Self {
        ClassifierGrads {
            embedding: vec![0.0; model.embedding.weights.len()],
            text_w: vec![0.0; model.text_head.weights.len()],
            text_b: vec![0.0; model.text_head.bias.len()],
            know_w: vec![0.0; model.knowledge_head.weights.len()],
            know_b: vec![0.0; model.knowledge_head.bias.len()],
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self
            .embedding
            .iter_mut()
            .chain(&mut self.text_w)
            .chain(&mut self.text_b)
            .chain(&mut self.know_w)
            .chain(&mut self.know_b)
        {
            *v *= factor;
        }
    }

    /// Flat view in the model's parameter-index order.
    pub fn flat(&self) -> Vec<f64> {
        let mut out =
            Vec::with_capacity(self.embedding.len() + self.text_w.len() + self.text_b.len()
                + self.know_w.len() + self.know_b.len());
        out.extend_from_slice(&self.embedding);
        out.extend_from_slice(&self.text_w);
        out.extend_from_slice(&self.text_b);
        out.extend_from_slice(&self.know_w);
        out.extend_from_slice(&self.know_b);
        out
    }
}

impl ClassifierModel {
    pub fn new<R: Rng + ?Sized>(
        vocab_size: usize,
        embed_dim: usize,
        kb: &KnowledgeBase,
        w1: f64,
        w2: f64,
        rng: &mut R,
    ) -> Result<Self> {
        check_loss_weights(w1, w2)?;
        let num_labels = kb.num_labels();
        if num_labels == 0 {
            return Err(Error::InvalidConfig("need at least one label".into()));
        }
        if kb.provisions.iter().any(|p| p.is_empty()) {
            return Err(Error::Precondition("empty provision token list".into()));
        }
        Ok(ClassifierModel {
            embedding: Embedding::new(vocab_size, embed_dim, rng)?,
            text_head: DenseLayer::xavier(embed_dim, num_labels, Activation::Sigmoid, rng)?,
            knowledge_head: DenseLayer::xavier(
                2 * embed_dim,
                num_labels,
                Activation::Sigmoid,
                rng,
            )?,
            w1,
            w2,
            kb_tokens: kb.provisions.clone(),
        })
    }

    pub fn num_labels(&self) -> usize {
        self.text_head.out_dim()
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.dim()
    }

    /// Provision vectors under the current embedding, one row per label.
    pub fn encode_kb(&self) -> Result<Vec<Vec<f64>>> {
        self.kb_tokens
            .iter()
            .map(|tokens| encode_text(&self.embedding, tokens))
            .collect()
    }

    /// Forward pass against precomputed provision vectors.
    pub fn forward_with_kb(&self, tokens: &[u32], kb_vecs: &[Vec<f64>]) -> Result<ClassifierCache> {
        let fact_vec = encode_text(&self.embedding, tokens)?;
        let attention = attend_knowledge(&fact_vec, kb_vecs)?;
        let mut concat = Vec::with_capacity(2 * fact_vec.len());
        concat.extend_from_slice(&fact_vec);
        concat.extend_from_slice(&attention.attended);
        let text_probs = self.text_head.forward(&fact_vec)?;
        let know_probs = self.knowledge_head.forward(&concat)?;
        Ok(ClassifierCache {
            fact_vec,
            alphas: attention.alphas,
            attended: attention.attended,
            concat,
            text_probs,
            know_probs,
        })
    }

    /// Forward pass: (text-head probabilities, knowledge-head probabilities).
    pub fn forward(&self, tokens: &[u32]) -> Result<(ProbVector, ProbVector)> {
        let kb_vecs = self.encode_kb()?;
        let cache = self.forward_with_kb(tokens, &kb_vecs)?;
        Ok((
            ProbVector::new(cache.text_probs)?,
            ProbVector::new(cache.know_probs)?,
        ))
    }

    /// Inference-time probabilities: element-wise mean of the two heads.
    pub fn predict_probs(&self, tokens: &[u32]) -> Result<ProbVector> {
        let (text, know) = self.forward(tokens)?;
        let mean: Vec<f64> = text
            .as_slice()
            .iter()
            .zip(know.as_slice())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        ProbVector::new(mean)
    }

    /// Exported probability matrix for a whole dataset; the provision
    /// vectors are encoded once since the model is frozen here.
    pub fn predict_dataset(&self, dataset: &crate::data::Dataset) -> Result<Vec<ProbVector>> {
        let kb_vecs = self.encode_kb()?;
        dataset
            .samples
            .iter()
            .map(|s| {
                let cache = self.forward_with_kb(&s.tokens, &kb_vecs)?;
                let mean: Vec<f64> = cache
                    .text_probs
                    .iter()
                    .zip(&cache.know_probs)
                    .map(|(a, b)| 0.5 * (a + b))
                    .collect();
                ProbVector::new(mean)
            })
            .collect()
    }

    /// Joint loss of one cached forward pass against a multi-hot target.
    pub fn sample_loss(&self, cache: &ClassifierCache, target: &[f64]) -> Result<f64> {
        joint_loss(&cache.text_probs, &cache.know_probs, target, self.w1, self.w2)
    }

    /// Backpropagates the joint loss into `grads` (accumulating).
    pub fn backward(
        &self,
        cache: &ClassifierCache,
        kb_vecs: &[Vec<f64>],
        tokens: &[u32],
        target: &[f64],
        grads: &mut ClassifierGrads,
    ) -> Result<()> {
        let l = self.num_labels();
        if target.len() != l {
            return Err(Error::DimensionMismatch(format!(
                "target len {} != {l} labels",
                target.len()
            )));
        }
        let d = self.embed_dim();

        // Head gradients; each branch's BCE is weighted by its loss weight.
        let mut d_text = Loss::BinaryCrossEntropy.grad(&cache.text_probs, target);
        for g in &mut d_text {
            *g *= self.w1;
        }
        let dz_text = Activation::Sigmoid.backprop(&cache.text_probs, &d_text);
        let mut d_fact =
            self.text_head
                .backward_from_preact(&cache.fact_vec, &dz_text, &mut grads.text_w, &mut grads.text_b);

        let mut d_know = Loss::BinaryCrossEntropy.grad(&cache.know_probs, target);
        for g in &mut d_know {
            *g *= self.w2;
        }
        let dz_know = Activation::Sigmoid.backprop(&cache.know_probs, &d_know);
        let d_concat = self.knowledge_head.backward_from_preact(
            &cache.concat,
            &dz_know,
            &mut grads.know_w,
            &mut grads.know_b,
        );
        for (a, b) in d_fact.iter_mut().zip(&d_concat[..d]) {
            *a += b;
        }
        let d_attended = &d_concat[d..];

        // Attention backward: attended = sum_l alpha_l * kb_l.
        let num_kb = kb_vecs.len();
        let mut d_alpha = vec![0.0; num_kb];
        let mut d_kb: Vec<Vec<f64>> = vec![vec![0.0; d]; num_kb];
        for (i, kb) in kb_vecs.iter().enumerate() {
            let alpha = cache.alphas[i];
            let mut dot = 0.0;
            for (j, (&kv, &da)) in kb.iter().zip(d_attended).enumerate() {
                dot += kv * da;
                d_kb[i][j] += alpha * da;
            }
            d_alpha[i] = dot;
        }
        // Softmax backward into the scores, then into query and keys.
        let d_score = Activation::Softmax.backprop(&cache.alphas, &d_alpha);
        let scale = 1.0 / (d as f64).sqrt();
        for (i, kb) in kb_vecs.iter().enumerate() {
            let g = d_score[i] * scale;
            for j in 0..d {
                d_fact[j] += g * kb[j];
                d_kb[i][j] += g * cache.fact_vec[j];
            }
        }

        // Mean-pool backward into the embedding table.
        accumulate_pool_grad(&self.embedding, tokens, &d_fact, &mut grads.embedding);
        for (kb_tokens, dk) in self.kb_tokens.iter().zip(&d_kb) {
            accumulate_pool_grad(&self.embedding, kb_tokens, dk, &mut grads.embedding);
        }
        Ok(())
    }
}

fn accumulate_pool_grad(
    embedding: &Embedding,
    tokens: &[u32],
    d_vec: &[f64],
    d_embedding: &mut [f64],
) {
    let d = embedding.dim();
    let count = tokens.iter().filter(|&&t| t != PAD_ID).count();
    if count == 0 {
        return;
    }
    let inv = 1.0 / count as f64;
    for &t in tokens {
        if t == PAD_ID {
            continue;
        }
        let base = t as usize * d;
        for (j, &g) in d_vec.iter().enumerate() {
            d_embedding[base + j] += g * inv;
        }
    }
}

fn check_loss_weights(w1: f64, w2: f64) -> Result<()> {
    if !(w1.is_finite() && w2.is_finite()) || w1 < 0.0 || w2 < 0.0 || w1 + w2 == 0.0 {
        return Err(Error::InvalidConfig(format!(
            "loss weights must be non-negative with a positive sum, got ({w1}, {w2})"
        )));
    }
    Ok(())
}

/// `w1 * BCE(text, gold) + w2 * BCE(knowledge, gold)`, BCE averaged over labels.
pub fn joint_loss(
    text_probs: &[f64],
    knowledge_probs: &[f64],
    target: &[f64],
    w1: f64,
    w2: f64,
) -> Result<f64> {
    check_loss_weights(w1, w2)?;
    let loss1 = Loss::BinaryCrossEntropy.value(text_probs, target)?;
    let loss2 = Loss::BinaryCrossEntropy.value(knowledge_probs, target)?;
    Ok(w1 * loss1 + w2 * loss2)
}

/// Multi-hot target vector from a gold label set.
pub fn multi_hot(gold: &BTreeSet<usize>, num_labels: usize) -> Vec<f64> {
    let mut y = vec![0.0; num_labels];
    for &l in gold {
        if l < num_labels {
            y[l] = 1.0;
        }
    }
    y
}

/// Gradient-check binding of a classifier to a single sample.
///
/// Parameter order: embedding, text head weights/bias, knowledge head
/// weights/bias.
pub struct ClassifierSample<'a> {
    pub model: &'a mut ClassifierModel,
    pub tokens: Vec<u32>,
    pub target: Vec<f64>,
}

impl crate::numerics::gradcheck::GradCheckable for ClassifierSample<'_> {
    fn param_count(&self) -> usize {
        self.model.embedding.weights.len()
            + self.model.text_head.weights.len()
            + self.model.text_head.bias.len()
            + self.model.knowledge_head.weights.len()
            + self.model.knowledge_head.bias.len()
    }

    fn param(&self, idx: usize) -> f64 {
        *locate(self.model, idx).0
    }

    fn set_param(&mut self, idx: usize, value: f64) {
        let m = &mut *self.model;
        let e = m.embedding.weights.len();
        let tw = m.text_head.weights.len();
        let tb = m.text_head.bias.len();
        let kw = m.knowledge_head.weights.len();
        let mut i = idx;
        if i < e {
            m.embedding.weights[i] = value;
            return;
        }
        i -= e;
        if i < tw {
            m.text_head.weights[i] = value;
            return;
        }
        i -= tw;
        if i < tb {
            m.text_head.bias[i] = value;
            return;
        }
        i -= tb;
        if i < kw {
            m.knowledge_head.weights[i] = value;
            return;
        }
        i -= kw;
        m.knowledge_head.bias[i] = value;
    }

    fn param_name(&self, idx: usize) -> String {
        locate(self.model, idx).1
    }

    fn loss(&self) -> Result<f64> {
        let kb_vecs = self.model.encode_kb()?;
        let cache = self.model.forward_with_kb(&self.tokens, &kb_vecs)?;
        self.model.sample_loss(&cache, &self.target)
    }

    fn analytic_gradient(&self) -> Result<Vec<f64>> {
        let kb_vecs = self.model.encode_kb()?;
        let cache = self.model.forward_with_kb(&self.tokens, &kb_vecs)?;
        let mut grads = ClassifierGrads::zeros_like(self.model);
        self.model
            .backward(&cache, &kb_vecs, &self.tokens, &self.target, &mut grads)?;
        Ok(grads.flat())
    }
}

fn locate(model: &ClassifierModel, idx: usize) -> (&f64, String) {
    let e = model.embedding.weights.len();
    let tw = model.text_head.weights.len();
    let tb = model.text_head.bias.len();
    let kw = model.knowledge_head.weights.len();
    let d = model.embed_dim();
    let mut i = idx;
    if i < e {
        return (
            &model.embedding.weights[i],
            format!("embedding[{},{}]", i / d, i % d),
        );
    }
    i -= e;
    if i < tw {
        return (&model.text_head.weights[i], format!("text_head.weight[{i}]"));
    }
    i -= tw;
    if i < tb {
        return (&model.text_head.bias[i], format!("text_head.bias[{i}]"));
    }
    i -= tb;
    if i < kw {
        return (
            &model.knowledge_head.weights[i],
            format!("knowledge_head.weight[{i}]"),
        );
    }
    i -= kw;
    (
        &model.knowledge_head.bias[i],
        format!("knowledge_head.bias[{i}]"),
    )
}

/// On-disk form of a trained classifier, including everything needed to
/// encode unseen text: vocabulary, label names, and provision tokens.
#[derive(Debug, Serialize, Deserialize)]
pub struct ClassifierDoc {
    pub format_version: u32,
    pub model_kind: String,
    pub rng_seed: u64,
    pub config_digest: String,
    pub embed_dim: usize,
    pub vocab: Vocabulary,
    pub label_names: Vec<String>,
    /// Row-major `vocab_size x embed_dim` embedding weights.
    pub embedding: Vec<f64>,
    /// Text head then knowledge head.
    pub layers: Vec<LayerSpec>,
    pub w1: f64,
    pub w2: f64,
    pub kb_tokens: Vec<Vec<u32>>,
}

impl ClassifierDoc {
    pub fn from_model(
        model: &ClassifierModel,
        vocab: &Vocabulary,
        label_names: &[String],
        rng_seed: u64,
        config_digest: String,
    ) -> Self {
        ClassifierDoc {
            format_version: FORMAT_VERSION,
            model_kind: "classifier".into(),
            rng_seed,
            config_digest,
            embed_dim: model.embed_dim(),
            vocab: vocab.clone(),
            label_names: label_names.to_vec(),
            embedding: model.embedding.weights.clone(),
            layers: vec![
                params::dense_spec(&model.text_head),
                params::dense_spec(&model.knowledge_head),
            ],
            w1: model.w1,
            w2: model.w2,
            kb_tokens: model.kb_tokens.clone(),
        }
    }

    pub fn into_model(self) -> Result<(ClassifierModel, Vocabulary, Vec<String>)> {
        check_format_version(self.format_version, "classifier model")?;
        if self.model_kind != "classifier" {
            return Err(Error::SchemaMismatch(format!(
                "expected a classifier model, found {:?}",
                self.model_kind
            )));
        }
        if self.layers.len() != 2 {
            return Err(Error::SchemaMismatch(format!(
                "classifier expects 2 head layers, found {}",
                self.layers.len()
            )));
        }
        let mut layers = self.layers.into_iter();
        let text_head = params::dense_from_spec(layers.next().unwrap())?;
        let knowledge_head = params::dense_from_spec(layers.next().unwrap())?;
        let embedding = Embedding::from_parts(self.vocab.len(), self.embed_dim, self.embedding)?;
        if text_head.in_dim() != self.embed_dim
            || knowledge_head.in_dim() != 2 * self.embed_dim
            || text_head.out_dim() != self.label_names.len()
            || knowledge_head.out_dim() != self.label_names.len()
        {
            return Err(Error::SchemaMismatch("head dimensions disagree".into()));
        }
        check_loss_weights(self.w1, self.w2)?;
        if self.kb_tokens.len() != self.label_names.len() {
            return Err(Error::SchemaMismatch(
                "provision table does not cover the label space".into(),
            ));
        }
        let model = ClassifierModel {
            embedding,
            text_head,
            knowledge_head,
            w1: self.w1,
            w2: self.w2,
            kb_tokens: self.kb_tokens,
        };
        Ok((model, self.vocab, self.label_names))
    }
}
