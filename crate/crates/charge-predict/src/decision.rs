//! Label decision strategies: count-driven top-n, global threshold, top-k.
//!
//! All strategies are pure functions of the probability vector (plus the
//! count model for top-n) and deterministic: ties always break toward the
//! lower label index.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::classifier::ProbVector;
use crate::error::{Error, Result};
use crate::nln::NlnModel;

/// How a probability vector is mapped to a label set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    /// Predict the count with the NLN, then take the top-n probabilities.
    NlnTopN,
    /// All labels whose probability strictly exceeds `t`; falls back to the
    /// argmax singleton when nothing passes.
    Threshold { t: f64 },
    /// Always the k highest-probability labels.
    TopK { k: usize },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::NlnTopN => "nln_topn",
            Strategy::Threshold { .. } => "threshold",
            Strategy::TopK { .. } => "topk",
        }
    }
}

/// A resolved decision for one sample.
#[derive(Debug, Clone)]
pub struct LabelDecision {
    pub strategy: Strategy,
    pub predicted: BTreeSet<usize>,
    /// Count used by the top-n strategy.
    pub n_used: Option<usize>,
}

/// Indices ordered by probability descending, index ascending on ties.
fn ranked_indices(probs: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..probs.len()).collect();
    idx.sort_by(|&a, &b| probs[b].partial_cmp(&probs[a]).unwrap().then(a.cmp(&b)));
    idx
}

/// The `n` labels with the highest probability; `|result| == n` exactly.
pub fn decide_nln(probs: &ProbVector, n: usize) -> Result<BTreeSet<usize>> {
    let l = probs.len();
    if n == 0 || n > l {
        return Err(Error::Precondition(format!(
            "top-n count {n} out of range 1..={l}"
        )));
    }
    Ok(ranked_indices(probs.as_slice()).into_iter().take(n).collect())
}

/// `{j : probs_j > t}`, or the argmax singleton when the set is empty
/// (an empty prediction is always wrong in this corpus).
pub fn decide_threshold(probs: &ProbVector, t: f64) -> Result<BTreeSet<usize>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Precondition(format!(
            "threshold {t} outside [0, 1]"
        )));
    }
    let set: BTreeSet<usize> = probs
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > t)
        .map(|(j, _)| j)
        .collect();
    if set.is_empty() {
        return decide_nln(probs, 1);
    }
    Ok(set)
}

/// Top-k selection; identical to [`decide_nln`] with `n = k`.
pub fn decide_topk(probs: &ProbVector, k: usize) -> Result<BTreeSet<usize>> {
    decide_nln(probs, k)
}

/// Applies a strategy, consulting the count model for [`Strategy::NlnTopN`].
/// The predicted count is clamped to the number of labels.
pub fn decide(
    strategy: Strategy,
    probs: &ProbVector,
    count_model: Option<&NlnModel>,
) -> Result<LabelDecision> {
    match strategy {
        Strategy::NlnTopN => {
            let model = count_model.ok_or_else(|| {
                Error::Precondition("nln_topn strategy needs a count model".into())
            })?;
            let n = model.predicted_count(probs)?.min(probs.len());
            Ok(LabelDecision {
                strategy,
                predicted: decide_nln(probs, n)?,
                n_used: Some(n),
            })
        }
        Strategy::Threshold { t } => Ok(LabelDecision {
            strategy,
            predicted: decide_threshold(probs, t)?,
            n_used: None,
        }),
        Strategy::TopK { k } => Ok(LabelDecision {
            strategy,
            predicted: decide_topk(probs, k)?,
            n_used: None,
        }),
    }
}
