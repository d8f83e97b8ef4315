//! Loss functions paired with the output activations they expect.

use crate::error::{Error, Result};

/// Probabilities are clamped to `[CLIP, 1 - CLIP]` before any `ln`.
pub const CLIP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `-sum_k y_k ln p_k`; pair with a softmax output.
    CrossEntropy,
    /// `-(1/n) sum_j [y_j ln p_j + (1-y_j) ln(1-p_j)]`; pair with sigmoid outputs.
    BinaryCrossEntropy,
}

impl Loss {
    pub fn value(&self, output: &[f64], target: &[f64]) -> Result<f64> {
        if output.len() != target.len() {
            return Err(Error::DimensionMismatch(format!(
                "loss: output len {} != target len {}",
                output.len(),
                target.len()
            )));
        }
        let v = match self {
            Loss::CrossEntropy => output
                .iter()
                .zip(target)
                .map(|(&p, &y)| -y * p.clamp(CLIP, 1.0 - CLIP).ln())
                .sum(),
            Loss::BinaryCrossEntropy => {
                let n = output.len() as f64;
                let sum: f64 = output
                    .iter()
                    .zip(target)
                    .map(|(&p, &y)| {
                        let p = p.clamp(CLIP, 1.0 - CLIP);
                        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                    })
                    .sum();
                sum / n
            }
        };
        if !v.is_finite() {
            return Err(Error::Numeric("non-finite loss".into()));
        }
        Ok(v)
    }

    /// dL/d output. Zero where the clamp is active (flat region).
    pub fn grad(&self, output: &[f64], target: &[f64]) -> Vec<f64> {
        debug_assert_eq!(output.len(), target.len());
        match self {
            Loss::CrossEntropy => output
                .iter()
                .zip(target)
                .map(|(&p, &y)| {
                    if (CLIP..=1.0 - CLIP).contains(&p) {
                        -y / p
                    } else {
                        0.0
                    }
                })
                .collect(),
            Loss::BinaryCrossEntropy => {
                let n = output.len() as f64;
                output
                    .iter()
                    .zip(target)
                    .map(|(&p, &y)| {
                        if (CLIP..=1.0 - CLIP).contains(&p) {
                            (-y / p + (1.0 - y) / (1.0 - p)) / n
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
        }
    }
}
