//! Synthetic corpora with a controlled label-count distribution.
//!
//! Two generators live here:
//!
//! * [`synthesize_corpus`] builds a token-level corpus where every label owns
//!   a disjoint set of signature tokens. A sample's fact concatenates noisy
//!   draws from each of its labels' signatures plus background tokens, and
//!   each label's provision text is a clean copy of its signature. Separable
//!   by construction, so classifier sanity checks have a known answer.
//! * [`synthesize_threshold_task`] builds (probability vector, count) pairs
//!   where label `j` is on iff `x_j` exceeds a hidden per-label threshold
//!   `tau_j`. The generator knows the ground truth, which makes learned
//!   thresholds directly checkable.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::jsonl::{encode_dataset, encode_knowledge, LabelIndex, RawCase, RawProvision};
use super::tokenize::Tokenizer;
use super::types::{CountTarget, Dataset, KnowledgeBase, Split};
use super::vocab::Vocabulary;
use crate::classifier::ProbVector;
use crate::error::{Error, Result};

/// Label-count mixture of the CAIL2018 small training split: samples with
/// 1 / 2 / 3 / 4-or-more labels, normalized from 120475 : 30831 : 2914 : 384.
pub fn default_count_mixture() -> Vec<f64> {
    let counts = [120475.0, 30831.0, 2914.0, 384.0];
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| c / total).collect()
}

/// Configuration for the token-level corpus generator.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    /// Number of labels L.
    pub num_labels: usize,
    /// Number of samples m.
    pub num_samples: usize,
    /// Count-class mixture; the last class means "this many labels or more".
    pub mixture: Vec<f64>,
    /// Total vocabulary size; `None` derives signatures + 80 background tokens.
    pub vocab_size: Option<usize>,
    /// Signature tokens owned by each label.
    pub tokens_per_label: usize,
    /// Signature draws emitted per on-label.
    pub draws_per_label: usize,
    /// Background tokens appended to every sample.
    pub background_draws: usize,
    /// Probability that a signature draw is replaced by a random vocab token.
    pub noise: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            num_labels: 20,
            num_samples: 4000,
            mixture: default_count_mixture(),
            vocab_size: None,
            tokens_per_label: 6,
            draws_per_label: 8,
            background_draws: 10,
            noise: 0.05,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.num_labels == 0 || self.num_samples == 0 {
            return Err(Error::InvalidConfig(
                "need at least one label and one sample".into(),
            ));
        }
        if self.tokens_per_label == 0 || self.draws_per_label == 0 {
            return Err(Error::InvalidConfig(
                "signature size and draws must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return Err(Error::InvalidConfig(format!(
                "noise must be in [0,1], got {}",
                self.noise
            )));
        }
        validate_mixture(&self.mixture, self.num_labels)?;
        if let Some(v) = self.vocab_size {
            if v <= self.num_labels * self.tokens_per_label {
                return Err(Error::InvalidConfig(format!(
                    "vocab_size {v} leaves no background tokens (signatures need {})",
                    self.num_labels * self.tokens_per_label
                )));
            }
        }
        Ok(())
    }

    fn total_vocab(&self) -> usize {
        self.vocab_size
            .unwrap_or(self.num_labels * self.tokens_per_label + 80)
    }
}

fn validate_mixture(mixture: &[f64], num_labels: usize) -> Result<()> {
    if mixture.is_empty() {
        return Err(Error::InvalidConfig("empty count mixture".into()));
    }
    let sum: f64 = mixture.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!(
            "count mixture sums to {sum}, expected 1"
        )));
    }
    if mixture.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidConfig("negative mixture weight".into()));
    }
    for (class, &p) in mixture.iter().enumerate() {
        if p > 0.0 && class + 1 > num_labels {
            return Err(Error::InvalidConfig(format!(
                "mixture gives weight to count {} but only {num_labels} labels exist",
                class + 1
            )));
        }
    }
    Ok(())
}

/// Everything the corpus generator produced, raw and encoded.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub cases: Vec<RawCase>,
    pub provisions: Vec<RawProvision>,
    pub labels: LabelIndex,
    pub vocab: Vocabulary,
    pub dataset: Dataset,
    pub knowledge: KnowledgeBase,
    pub mixture: Vec<f64>,
}

/// Draws a count class from the mixture, then an actual label count.
///
/// Within the capped last class, the count is `k` with probability 3/4 and
/// otherwise grows by halving steps up to `min(9, num_labels)`.
fn draw_label_count<R: Rng>(rng: &mut R, mixture: &[f64], num_labels: usize) -> usize {
    let class = draw_class(rng, mixture);
    let k = mixture.len();
    if class + 1 < k {
        return class + 1;
    }
    let lo = k.min(num_labels);
    let hi = 9.min(num_labels).max(lo);
    if lo == hi {
        return lo;
    }
    if rng.gen::<f64>() < 0.75 {
        return lo;
    }
    let mut weights = Vec::new();
    let mut w = 1.0;
    for _ in (lo + 1)..=hi {
        weights.push(w);
        w /= 2.0;
    }
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (i, &wt) in weights.iter().enumerate() {
        if u < wt {
            return lo + 1 + i;
        }
        u -= wt;
    }
    hi
}

fn draw_class<R: Rng>(rng: &mut R, mixture: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in mixture.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    mixture.len() - 1
}

fn sample_distinct<R: Rng>(rng: &mut R, n: usize, count: usize) -> Vec<usize> {
    debug_assert!(count <= n);
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(count);
    pool.sort_unstable();
    pool
}

/// Generates a corpus whose raw records round-trip through the standard
/// JSONL loader; the returned dataset and knowledge base are already encoded.
pub fn synthesize_corpus(config: &SynthConfig, seed: u64) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = config.num_labels;
    let sig = config.tokens_per_label;
    let vocab_total = config.total_vocab();
    let background = vocab_total - l * sig;

    let sig_token = |label: usize, k: usize| format!("sig{label}_{k}");
    let bg_token = |k: usize| format!("bg{k}");
    let any_token = |idx: usize| {
        if idx < l * sig {
            sig_token(idx / sig, idx % sig)
        } else {
            bg_token(idx - l * sig)
        }
    };

    let label_names: Vec<String> = (0..l).map(|i| format!("charge_{i:03}")).collect();

    let mut cases = Vec::with_capacity(config.num_samples);
    for _ in 0..config.num_samples {
        let count = draw_label_count(&mut rng, &config.mixture, l);
        let labels = sample_distinct(&mut rng, l, count);
        let mut tokens = Vec::with_capacity(labels.len() * config.draws_per_label + config.background_draws);
        for &label in &labels {
            for _ in 0..config.draws_per_label {
                let corrupted = config.noise > 0.0 && rng.gen::<f64>() < config.noise;
                if corrupted {
                    tokens.push(any_token(rng.gen_range(0..vocab_total)));
                } else {
                    tokens.push(sig_token(label, rng.gen_range(0..sig)));
                }
            }
        }
        for _ in 0..config.background_draws {
            tokens.push(bg_token(rng.gen_range(0..background)));
        }
        // mix signature and background positions
        for i in (1..tokens.len()).rev() {
            let j = rng.gen_range(0..=i);
            tokens.swap(i, j);
        }
        cases.push(RawCase {
            fact: tokens.join(" "),
            accusation: labels.iter().map(|&i| label_names[i].clone()).collect(),
        });
    }

    let provisions: Vec<RawProvision> = (0..l)
        .map(|label| RawProvision {
            accusation: label_names[label].clone(),
            provision: (0..sig).map(|k| sig_token(label, k)).collect::<Vec<_>>().join(" "),
        })
        .collect();

    let labels = LabelIndex::from_names(label_names)?;
    let tokenizer = Tokenizer::default();
    let streams: Vec<Vec<String>> = cases.iter().map(|c| tokenizer.tokenize(&c.fact)).collect();
    let vocab = Vocabulary::build(streams.iter().map(|s| s.as_slice()));
    let dataset = encode_dataset(&cases, &labels, &vocab, &tokenizer, Split::Train)?;
    let knowledge = encode_knowledge(&provisions, &labels, &vocab, &Tokenizer::new(85))?;

    Ok(SyntheticCorpus {
        cases,
        provisions,
        labels,
        vocab,
        dataset,
        knowledge,
        mixture: config.mixture.clone(),
    })
}

/// Configuration for the hidden-threshold probability task.
#[derive(Debug, Clone)]
pub struct ThresholdTaskConfig {
    pub num_labels: usize,
    pub num_samples: usize,
    pub mixture: Vec<f64>,
    /// Per-label thresholds are drawn uniformly from this range.
    pub threshold_range: (f64, f64),
}

impl Default for ThresholdTaskConfig {
    fn default() -> Self {
        ThresholdTaskConfig {
            num_labels: 20,
            num_samples: 20000,
            mixture: default_count_mixture(),
            threshold_range: (0.3, 0.7),
        }
    }
}

/// A probability-vector corpus with known per-label decision thresholds.
#[derive(Debug, Clone)]
pub struct ThresholdTask {
    pub true_thresholds: Vec<f64>,
    pub probs: Vec<ProbVector>,
    pub gold: Vec<BTreeSet<usize>>,
    pub num_count_classes: usize,
}

impl ThresholdTask {
    /// Count targets derived from the gold sets, capped per the count rule.
    pub fn count_targets(&self) -> Result<Vec<CountTarget>> {
        self.gold
            .iter()
            .map(|s| CountTarget::from_label_count(s.len(), self.num_count_classes))
            .collect()
    }
}

/// Generates the task: label `j` of a sample is on iff `x_j > tau_j`, with
/// the label count driven by the mixture. On-labels draw `x_j` above their
/// threshold, off-labels below, so the gold set is exact by construction.
pub fn synthesize_threshold_task(config: &ThresholdTaskConfig, seed: u64) -> Result<ThresholdTask> {
    let (lo, hi) = config.threshold_range;
    if !(0.0 < lo && lo < hi && hi < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "threshold range must satisfy 0 < lo < hi < 1, got ({lo}, {hi})"
        )));
    }
    validate_mixture(&config.mixture, config.num_labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = config.num_labels;
    let true_thresholds: Vec<f64> = (0..l).map(|_| rng.gen_range(lo..hi)).collect();

    let mut probs = Vec::with_capacity(config.num_samples);
    let mut gold = Vec::with_capacity(config.num_samples);
    for _ in 0..config.num_samples {
        let count = draw_label_count(&mut rng, &config.mixture, l);
        let on: BTreeSet<usize> = sample_distinct(&mut rng, l, count).into_iter().collect();
        let mut x = vec![0.0; l];
        for (j, xv) in x.iter_mut().enumerate() {
            let tau = true_thresholds[j];
            if on.contains(&j) {
                *xv = loop {
                    let v = rng.gen_range(tau..1.0);
                    if v > tau {
                        break v;
                    }
                };
            } else {
                *xv = rng.gen_range(0.0..tau);
            }
        }
        probs.push(ProbVector::new(x)?);
        gold.push(on);
    }

    Ok(ThresholdTask {
        true_thresholds,
        probs,
        gold,
        num_count_classes: config.mixture.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_mixture_gives_single_label_samples() {
        let config = SynthConfig {
            num_labels: 2,
            num_samples: 10,
            mixture: vec![1.0, 0.0, 0.0, 0.0],
            ..SynthConfig::default()
        };
        let corpus = synthesize_corpus(&config, 1).unwrap();
        assert_eq!(corpus.dataset.len(), 10);
        assert!(corpus.dataset.samples.iter().all(|s| s.labels.len() == 1));
    }

    #[test]
    fn count_histogram_tracks_mixture() {
        let config = SynthConfig {
            num_samples: 10000,
            ..SynthConfig::default()
        };
        let corpus = synthesize_corpus(&config, 7).unwrap();
        let mut hist = [0usize; 4];
        for s in &corpus.dataset.samples {
            hist[s.labels.len().min(4) - 1] += 1;
        }
        let expect = default_count_mixture();
        for (class, &n) in hist.iter().enumerate() {
            let frac = n as f64 / 10000.0;
            assert!(
                (frac - expect[class]).abs() < 0.02,
                "class {class}: {frac} vs {}",
                expect[class]
            );
        }
    }

    #[test]
    fn same_seed_is_identical() {
        let config = SynthConfig {
            num_samples: 50,
            ..SynthConfig::default()
        };
        let a = synthesize_corpus(&config, 9).unwrap();
        let b = synthesize_corpus(&config, 9).unwrap();
        assert_eq!(a.cases, b.cases);
        assert_eq!(a.provisions, b.provisions);
    }

    #[test]
    fn noiseless_signatures_appear_iff_label_present() {
        let config = SynthConfig {
            num_labels: 6,
            num_samples: 200,
            noise: 0.0,
            ..SynthConfig::default()
        };
        let corpus = synthesize_corpus(&config, 3).unwrap();
        for (case, sample) in corpus.cases.iter().zip(&corpus.dataset.samples) {
            for label in 0..6 {
                let marker = format!("sig{label}_");
                let present = case.fact.split_whitespace().any(|t| t.starts_with(&marker));
                assert_eq!(
                    present,
                    sample.labels.contains(&label),
                    "label {label} in {:?}",
                    case.fact
                );
            }
        }
    }

    #[test]
    fn bad_mixture_is_rejected() {
        let config = SynthConfig {
            mixture: vec![0.5, 0.2, 0.1, 0.1], // sums to 0.9
            ..SynthConfig::default()
        };
        assert!(synthesize_corpus(&config, 0).is_err());
        let config = SynthConfig {
            num_labels: 2,
            mixture: vec![0.5, 0.2, 0.3, 0.0], // count 3 impossible with 2 labels
            ..SynthConfig::default()
        };
        assert!(synthesize_corpus(&config, 0).is_err());
    }

    #[test]
    fn threshold_task_gold_matches_rule() {
        let task = synthesize_threshold_task(
            &ThresholdTaskConfig {
                num_samples: 500,
                ..ThresholdTaskConfig::default()
            },
            11,
        )
        .unwrap();
        for (x, on) in task.probs.iter().zip(&task.gold) {
            for j in 0..task.true_thresholds.len() {
                let rule = x.as_slice()[j] > task.true_thresholds[j];
                assert_eq!(rule, on.contains(&j));
            }
            assert!(!on.is_empty());
        }
    }

    #[test]
    fn threshold_task_has_capped_targets() {
        let task = synthesize_threshold_task(&ThresholdTaskConfig::default(), 2).unwrap();
        let targets = task.count_targets().unwrap();
        for (t, g) in targets.iter().zip(&task.gold) {
            assert_eq!(t.class(), g.len().min(4) - 1);
        }
    }
}
