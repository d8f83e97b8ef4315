//! Micro/macro F1 evaluation and strategy comparison.
//!
//! Micro-F1 pools true/false positives and negatives over all labels;
//! macro-F1 averages per-label F1. Zero-support labels score an F1 of 0 in
//! the plain macro average; a support-filtered variant (labels with at least
//! one gold occurrence) is reported alongside, since conventions differ.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::classifier::ProbVector;
use crate::decision::{decide_nln, decide_threshold, decide_topk};
use crate::error::{Error, Result};
use crate::nln::NlnModel;

/// Which subset of samples a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Slice {
    All,
    /// Samples whose gold set has two or more labels.
    MultiLabelOnly,
    /// Samples whose gold count (capped) equals the given class index.
    ByCount(usize),
}

/// Per-label precision/recall/F1 with gold support.
#[derive(Debug, Clone, Serialize)]
pub struct LabelScore {
    pub label: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

/// Full evaluation result for one prediction set.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub slice: Slice,
    pub num_samples: usize,
    pub micro_f1: f64,
    /// Macro over all L labels, zero-support labels scored 0.
    pub macro_f1: f64,
    /// Macro over labels with gold support only.
    pub macro_f1_support_filtered: f64,
    pub per_label: Vec<LabelScore>,
    pub micro_tp: usize,
    pub micro_fp: usize,
    pub micro_fn: usize,
}

fn f1_from_counts(tp: usize, fp: usize, fng: usize) -> (f64, f64, f64) {
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fng == 0 {
        0.0
    } else {
        tp as f64 / (tp + fng) as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Micro and macro F1 over aligned prediction/gold label sets.
pub fn f1_scores(
    predictions: &[BTreeSet<usize>],
    golds: &[BTreeSet<usize>],
    num_labels: usize,
) -> Result<EvalReport> {
    f1_scores_slice(predictions, golds, num_labels, Slice::All)
}

fn f1_scores_slice(
    predictions: &[BTreeSet<usize>],
    golds: &[BTreeSet<usize>],
    num_labels: usize,
    slice: Slice,
) -> Result<EvalReport> {
    if predictions.len() != golds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} predictions vs {} gold sets",
            predictions.len(),
            golds.len()
        )));
    }
    let mut tp = vec![0usize; num_labels];
    let mut fp = vec![0usize; num_labels];
    let mut fng = vec![0usize; num_labels];
    for (pred, gold) in predictions.iter().zip(golds) {
        for &l in pred {
            if l >= num_labels {
                return Err(Error::Precondition(format!(
                    "label index {l} outside 0..{num_labels}"
                )));
            }
            if gold.contains(&l) {
                tp[l] += 1;
            } else {
                fp[l] += 1;
            }
        }
        for &l in gold {
            if l >= num_labels {
                return Err(Error::Precondition(format!(
                    "label index {l} outside 0..{num_labels}"
                )));
            }
            if !pred.contains(&l) {
                fng[l] += 1;
            }
        }
    }

    let mut per_label = Vec::with_capacity(num_labels);
    let mut macro_sum = 0.0;
    let mut supported_sum = 0.0;
    let mut supported = 0usize;
    for l in 0..num_labels {
        let (precision, recall, f1) = f1_from_counts(tp[l], fp[l], fng[l]);
        let support = tp[l] + fng[l];
        macro_sum += f1;
        if support > 0 {
            supported_sum += f1;
            supported += 1;
        }
        per_label.push(LabelScore {
            label: l,
            precision,
            recall,
            f1,
            support,
        });
    }
    let micro_tp: usize = tp.iter().sum();
    let micro_fp: usize = fp.iter().sum();
    let micro_fn: usize = fng.iter().sum();
    let (_, _, micro_f1) = f1_from_counts(micro_tp, micro_fp, micro_fn);

    Ok(EvalReport {
        slice,
        num_samples: predictions.len(),
        micro_f1,
        macro_f1: macro_sum / num_labels as f64,
        macro_f1_support_filtered: if supported == 0 {
            0.0
        } else {
            supported_sum / supported as f64
        },
        per_label,
        micro_tp,
        micro_fp,
        micro_fn,
    })
}

/// Indices of samples with two or more gold labels.
pub fn multi_label_slice(golds: &[BTreeSet<usize>]) -> Vec<usize> {
    golds
        .iter()
        .enumerate()
        .filter(|(_, g)| g.len() >= 2)
        .map(|(i, _)| i)
        .collect()
}

fn subset<T: Clone>(items: &[T], indices: &[usize]) -> Vec<T> {
    indices.iter().map(|&i| items[i].clone()).collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return Err(Error::Precondition(
            "rank correlation needs two equal-length series of length >= 2".into(),
        ));
    }
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = a.len() as f64;
    let mean = (n + 1.0) / 2.0;
    let mut cov = 0.0;
    let mut var_a = 0.0;
    let mut var_b = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - mean) * (y - mean);
        var_a += (x - mean) * (x - mean);
        var_b += (y - mean) * (y - mean);
    }
    if var_a == 0.0 || var_b == 0.0 {
        return Err(Error::Precondition(
            "rank correlation undefined for a constant series".into(),
        ));
    }
    Ok(cov / (var_a.sqrt() * var_b.sqrt()))
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Thresholds and k values swept by [`compare_strategies`].
#[derive(Debug, Clone)]
pub struct StrategyGrid {
    pub thresholds: Vec<f64>,
    pub ks: Vec<usize>,
}

impl Default for StrategyGrid {
    fn default() -> Self {
        StrategyGrid {
            thresholds: (1..=9).map(|i| i as f64 / 10.0).collect(),
            ks: vec![1, 2, 3],
        }
    }
}

/// One strategy's scores on the full set and the multi-label slice.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub strategy: String,
    /// Threshold value or k, when the strategy has a parameter.
    pub param: Option<f64>,
    pub micro_full: f64,
    pub macro_full: f64,
    pub micro_multi: f64,
    pub macro_multi: f64,
    /// Marks the sweep's best threshold (by micro-F1 on the full set).
    pub best_threshold: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub multi_label_samples: usize,
}

impl ComparisonTable {
    /// Aligned-column plain text.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<12} {:>8} {:>12} {:>12} {:>12} {:>12} {:>6}\n",
            "strategy", "param", "micro(full)", "macro(full)", "micro(multi)", "macro(multi)", "best"
        ));
        for r in &self.rows {
            let param = r.param.map_or(String::new(), |p| {
                if r.strategy == "topk" {
                    format!("{}", p as usize)
                } else {
                    format!("{p:.2}")
                }
            });
            out.push_str(&format!(
                "{:<12} {:>8} {:>12.4} {:>12.4} {:>12.4} {:>12.4} {:>6}\n",
                r.strategy,
                param,
                r.micro_full,
                r.macro_full,
                r.micro_multi,
                r.macro_multi,
                if r.best_threshold { "*" } else { "" }
            ));
        }
        out.push_str(&format!(
            "({} samples in the multi-label slice)\n",
            self.multi_label_samples
        ));
        out
    }

    /// CSV rows matching the text table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "strategy,param,micro_full,macro_full,micro_multi,macro_multi,best_threshold\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.strategy,
                r.param.map_or(String::new(), |p| p.to_string()),
                r.micro_full,
                r.macro_full,
                r.micro_multi,
                r.macro_multi,
                r.best_threshold
            ));
        }
        out
    }

    pub fn row(&self, strategy: &str, param: Option<f64>) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.param == param)
    }
}

/// Evaluates the count-driven strategy against threshold and top-k sweeps,
/// on the full sample set and on the multi-label slice.
pub fn compare_strategies(
    probs: &[ProbVector],
    golds: &[BTreeSet<usize>],
    count_model: &NlnModel,
    grid: &StrategyGrid,
) -> Result<ComparisonTable> {
    if probs.len() != golds.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} probability rows vs {} gold sets",
            probs.len(),
            golds.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::Data("nothing to compare".into()));
    }
    let num_labels = probs[0].len();
    let multi_idx = multi_label_slice(golds);
    let golds_multi = subset(golds, &multi_idx);

    let mut rows = Vec::new();
    let mut eval_both = |strategy: String,
                         param: Option<f64>,
                         predictions: Vec<BTreeSet<usize>>|
     -> Result<()> {
        let full = f1_scores(&predictions, golds, num_labels)?;
        let preds_multi = subset(&predictions, &multi_idx);
        let multi = f1_scores_slice(&preds_multi, &golds_multi, num_labels, Slice::MultiLabelOnly)?;
        rows.push(ComparisonRow {
            strategy,
            param,
            micro_full: full.micro_f1,
            macro_full: full.macro_f1,
            micro_multi: multi.micro_f1,
            macro_multi: multi.macro_f1,
            best_threshold: false,
        });
        Ok(())
    };

    let nln_preds: Vec<BTreeSet<usize>> = probs
        .iter()
        .map(|x| {
            let n = count_model.predicted_count(x)?.min(num_labels);
            decide_nln(x, n)
        })
        .collect::<Result<_>>()?;
    eval_both("nln_topn".into(), None, nln_preds)?;

    for &t in &grid.thresholds {
        let preds: Vec<BTreeSet<usize>> = probs
            .iter()
            .map(|x| decide_threshold(x, t))
            .collect::<Result<_>>()?;
        eval_both("threshold".into(), Some(t), preds)?;
    }
    for &k in &grid.ks {
        let k = k.min(num_labels);
        let preds: Vec<BTreeSet<usize>> = probs
            .iter()
            .map(|x| decide_topk(x, k))
            .collect::<Result<_>>()?;
        eval_both("topk".into(), Some(k as f64), preds)?;
    }

    // mark the sweep's best threshold by full-set micro-F1
    let best = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.strategy == "threshold")
        .max_by(|(_, a), (_, b)| a.micro_full.total_cmp(&b.micro_full))
        .map(|(i, _)| i);
    if let Some(i) = best {
        rows[i].best_threshold = true;
    }

    Ok(ComparisonTable {
        rows,
        multi_label_samples: multi_idx.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sets(v: &[&[usize]]) -> Vec<BTreeSet<usize>> {
        v.iter().map(|s| s.iter().copied().collect()).collect()
    }

    #[test]
    fn perfect_predictions_score_one() {
        let golds = sets(&[&[0], &[1, 2], &[2]]);
        let report = f1_scores(&golds, &golds, 3).unwrap();
        assert_eq!(report.micro_f1, 1.0);
        assert_eq!(report.macro_f1, 1.0);
    }

    #[test]
    fn hand_computed_two_sample_case() {
        // golds {0},{1}; predictions {0},{0}: micro 0.5, macro 1/3
        let golds = sets(&[&[0], &[1]]);
        let preds = sets(&[&[0], &[0]]);
        let report = f1_scores(&preds, &golds, 2).unwrap();
        assert!((report.micro_f1 - 0.5).abs() < 1e-15);
        assert!((report.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((report.per_label[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(report.per_label[1].f1, 0.0);
    }

    /// Naive oracle: per-label confusion matrices built by scanning every
    /// (sample, label) pair independently.
    fn oracle_f1(
        preds: &[BTreeSet<usize>],
        golds: &[BTreeSet<usize>],
        l: usize,
    ) -> (f64, f64) {
        let mut per_label_f1 = Vec::new();
        let (mut tp_all, mut fp_all, mut fn_all) = (0.0, 0.0, 0.0);
        for label in 0..l {
            let (mut tp, mut fp, mut fng) = (0.0, 0.0, 0.0);
            for (p, g) in preds.iter().zip(golds) {
                let in_p = p.contains(&label);
                let in_g = g.contains(&label);
                if in_p && in_g {
                    tp += 1.0;
                } else if in_p {
                    fp += 1.0;
                } else if in_g {
                    fng += 1.0;
                }
            }
            tp_all += tp;
            fp_all += fp;
            fn_all += fng;
            let f1 = if 2.0 * tp + fp + fng == 0.0 {
                0.0
            } else {
                2.0 * tp / (2.0 * tp + fp + fng)
            };
            per_label_f1.push(f1);
        }
        let micro = if 2.0 * tp_all + fp_all + fn_all == 0.0 {
            0.0
        } else {
            2.0 * tp_all / (2.0 * tp_all + fp_all + fn_all)
        };
        let macro_f1 = per_label_f1.iter().sum::<f64>() / l as f64;
        (micro, macro_f1)
    }

    #[test]
    fn agrees_with_confusion_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let l = rng.gen_range(1..=10);
            let m = rng.gen_range(1..=50);
            let rand_set = |rng: &mut ChaCha8Rng| -> BTreeSet<usize> {
                (0..l).filter(|_| rng.gen_bool(0.3)).collect()
            };
            let golds: Vec<BTreeSet<usize>> = (0..m).map(|_| rand_set(&mut rng)).collect();
            let preds: Vec<BTreeSet<usize>> = (0..m).map(|_| rand_set(&mut rng)).collect();
            let report = f1_scores(&preds, &golds, l).unwrap();
            let (micro, macro_f1) = oracle_f1(&preds, &golds, l);
            assert!((report.micro_f1 - micro).abs() < 1e-12);
            assert!((report.macro_f1 - macro_f1).abs() < 1e-12);
        }
    }

    #[test]
    fn micro_consistent_with_pooled_counts() {
        let golds = sets(&[&[0, 1], &[1], &[2]]);
        let preds = sets(&[&[0], &[1, 2], &[0]]);
        let r = f1_scores(&preds, &golds, 3).unwrap();
        let expect =
            2.0 * r.micro_tp as f64 / (2.0 * r.micro_tp as f64 + r.micro_fp as f64 + r.micro_fn as f64);
        assert!((r.micro_f1 - expect).abs() < 1e-12);
    }

    #[test]
    fn micro_equals_macro_for_single_label_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let m = rng.gen_range(1..30);
            let golds: Vec<BTreeSet<usize>> =
                (0..m).map(|_| BTreeSet::from([0usize])).collect();
            let preds: Vec<BTreeSet<usize>> = (0..m)
                .map(|_| {
                    if rng.gen_bool(0.7) {
                        BTreeSet::from([0usize])
                    } else {
                        BTreeSet::new()
                    }
                })
                .collect();
            let r = f1_scores(&preds, &golds, 1).unwrap();
            assert!((r.micro_f1 - r.macro_f1).abs() < 1e-15);
        }
    }

    #[test]
    fn adding_correct_label_never_hurts_micro() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..500 {
            let l = rng.gen_range(2..8);
            let m = rng.gen_range(1..20);
            let rand_set = |rng: &mut ChaCha8Rng| -> BTreeSet<usize> {
                (0..l - 1).filter(|_| rng.gen_bool(0.4)).collect()
            };
            let mut golds: Vec<BTreeSet<usize>> = (0..m).map(|_| rand_set(&mut rng)).collect();
            let mut preds: Vec<BTreeSet<usize>> = (0..m).map(|_| rand_set(&mut rng)).collect();
            let before = f1_scores(&preds, &golds, l).unwrap().micro_f1;
            // add label l-1 (absent so far) correctly to one sample
            let i = rng.gen_range(0..m);
            golds[i].insert(l - 1);
            preds[i].insert(l - 1);
            let after = f1_scores(&preds, &golds, l).unwrap().micro_f1;
            assert!(after >= before - 1e-15, "{before} -> {after}");
        }
    }

    #[test]
    fn permutation_invariant_over_samples() {
        let golds = sets(&[&[0], &[1, 2], &[2], &[0, 1]]);
        let preds = sets(&[&[0, 1], &[1], &[2], &[1]]);
        let r1 = f1_scores(&preds, &golds, 3).unwrap();
        let perm = [2usize, 0, 3, 1];
        let golds_p: Vec<_> = perm.iter().map(|&i| golds[i].clone()).collect();
        let preds_p: Vec<_> = perm.iter().map(|&i| preds[i].clone()).collect();
        let r2 = f1_scores(&preds_p, &golds_p, 3).unwrap();
        assert_eq!(r1.micro_f1, r2.micro_f1);
        assert_eq!(r1.macro_f1, r2.macro_f1);
    }

    #[test]
    fn slice_selects_multi_label_samples() {
        let golds = sets(&[&[0], &[1, 2], &[2], &[0, 1, 2]]);
        assert_eq!(multi_label_slice(&golds), vec![1, 3]);
        let single = sets(&[&[0], &[1]]);
        assert!(multi_label_slice(&single).is_empty());
    }

    #[test]
    fn slice_and_complement_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let golds: Vec<BTreeSet<usize>> = (0..100)
            .map(|_| (0..5).filter(|_| rng.gen_bool(0.3)).chain([0]).collect())
            .collect();
        let slice = multi_label_slice(&golds);
        let in_slice: BTreeSet<usize> = slice.iter().copied().collect();
        for (i, g) in golds.iter().enumerate() {
            assert_eq!(in_slice.contains(&i), g.len() >= 2);
        }
    }

    #[test]
    fn spearman_detects_perfect_and_reversed_order() {
        let a = vec![0.1, 0.2, 0.3, 0.4];
        let b = vec![1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let c = vec![4.0, 3.0, 2.0, 1.0];
        assert!((spearman(&a, &c).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn spearman_handles_ties() {
        let a = vec![1.0, 1.0, 2.0, 3.0];
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let rho = spearman(&a, &b).unwrap();
        assert!(rho > 0.9 && rho <= 1.0);
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    }
}
