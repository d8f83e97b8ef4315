//! Core corpus types: samples, datasets, knowledge base, count targets.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of count classes: {1, 2, 3, 4-or-more}.
pub const DEFAULT_COUNT_CLASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// One case: encoded fact text plus its gold accusation set.
#[derive(Debug, Clone)]
pub struct Sample {
    pub tokens: Vec<u32>,
    pub labels: BTreeSet<usize>,
    /// Original fact text, retained for reports.
    pub raw_text: String,
}

/// An encoded split of the corpus.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub label_names: Vec<String>,
    pub split: Split,
}

impl Dataset {
    pub fn num_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Gold label sets in sample order.
    pub fn gold_sets(&self) -> Vec<BTreeSet<usize>> {
        self.samples.iter().map(|s| s.labels.clone()).collect()
    }
}

/// Law-provision text per label, encoded with the same vocabulary as facts.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    /// Indexed by label; labels without provision text hold a single UNK.
    pub provisions: Vec<Vec<u32>>,
    /// Labels whose provision was missing from the input and got UNK-filled.
    pub missing: Vec<usize>,
}

impl KnowledgeBase {
    pub fn num_labels(&self) -> usize {
        self.provisions.len()
    }
}

/// Maps a gold label count to its count class: counts of `k` classes,
/// with everything above `k` capped into the last class.
pub fn count_class_with(label_count: usize, k: usize) -> Result<usize> {
    if label_count == 0 {
        return Err(Error::Precondition(
            "label count must be at least 1".into(),
        ));
    }
    if k == 0 {
        return Err(Error::InvalidConfig("need at least one count class".into()));
    }
    Ok(label_count.min(k) - 1)
}

/// The default 4-class rule: counts 1..3 map to their own class, 4+ shares
/// the last class.
pub fn count_class(label_count: usize) -> Result<usize> {
    count_class_with(label_count, DEFAULT_COUNT_CLASSES)
}

/// One-hot target over count classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountTarget {
    class: usize,
    num_classes: usize,
}

impl CountTarget {
    pub fn from_label_count(label_count: usize, num_classes: usize) -> Result<Self> {
        let class = count_class_with(label_count, num_classes)?;
        Ok(CountTarget { class, num_classes })
    }

    pub fn class(&self) -> usize {
        self.class
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Exactly one component is 1.
    pub fn one_hot(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.num_classes];
        v[self.class] = 1.0;
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_region() {
        assert_eq!(count_class(1).unwrap(), 0);
        assert_eq!(count_class(2).unwrap(), 1);
        assert_eq!(count_class(3).unwrap(), 2);
        assert_eq!(count_class(4).unwrap(), 3);
    }

    #[test]
    fn caps_above_four() {
        assert_eq!(count_class(5).unwrap(), 3);
        assert_eq!(count_class(7).unwrap(), 3);
        // a 9-label sample exists in the reference corpus
        assert_eq!(count_class(9).unwrap(), 3);
    }

    #[test]
    fn zero_count_is_an_error() {
        assert!(count_class(0).is_err());
    }

    #[test]
    fn monotone_and_saturating() {
        let mut prev = 0;
        for c in 1..100 {
            let cls = count_class(c).unwrap();
            assert!(cls >= prev);
            assert!(cls <= 3);
            prev = cls;
        }
        assert_eq!(prev, 3);
    }

    #[test]
    fn one_hot_has_single_one() {
        let t = CountTarget::from_label_count(6, 4).unwrap();
        assert_eq!(t.one_hot(), vec![0.0, 0.0, 0.0, 1.0]);
        let sum: f64 = t.one_hot().iter().sum();
        assert_eq!(sum, 1.0);
    }

    #[test]
    fn configurable_class_count() {
        assert_eq!(count_class_with(5, 6).unwrap(), 4);
        assert_eq!(count_class_with(9, 6).unwrap(), 5);
    }
}
