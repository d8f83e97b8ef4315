//! Finite-difference verification of analytic gradients.

use super::loss::Loss;
use super::network::Network;
use crate::error::Result;

/// Central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;
/// A check passes when the worst relative error stays below this.
pub const PASS_THRESHOLD: f64 = 1e-4;
/// Floor for the relative-error denominator.
const REL_EPS: f64 = 1e-8;

/// Anything whose scalar loss can be differentiated and re-evaluated under
/// parameter perturbation.
pub trait GradCheckable {
    fn param_count(&self) -> usize;
    fn param(&self, idx: usize) -> f64;
    fn set_param(&mut self, idx: usize, value: f64);
    fn param_name(&self, idx: usize) -> String;
    /// Loss at the current parameters on the bound sample.
    fn loss(&self) -> Result<f64>;
    /// Analytic gradient, flattened in parameter-index order.
    fn analytic_gradient(&self) -> Result<Vec<f64>>;
}

/// Outcome of a finite-difference sweep over every trainable parameter.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub per_param_errors: Vec<(String, f64)>,
}

impl GradCheckReport {
    pub fn passes(&self) -> bool {
        self.max_rel_error < PASS_THRESHOLD
    }

    /// The parameter with the worst agreement, if any.
    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_param_errors
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Compares the analytic gradient against central finite differences.
///
/// Relative error per parameter is
/// `|analytic - numeric| / max(|analytic| + |numeric|, 1e-8)`.
pub fn grad_check<M: GradCheckable>(subject: &mut M, step: f64) -> Result<GradCheckReport> {
    let analytic = subject.analytic_gradient()?;
    let mut per_param_errors = Vec::with_capacity(analytic.len());
    let mut max_rel_error: f64 = 0.0;
    for idx in 0..subject.param_count() {
        let orig = subject.param(idx);
        subject.set_param(idx, orig + step);
        let plus = subject.loss()?;
        subject.set_param(idx, orig - step);
        let minus = subject.loss()?;
        subject.set_param(idx, orig);
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(REL_EPS);
        max_rel_error = max_rel_error.max(rel);
        per_param_errors.push((subject.param_name(idx), rel));
    }
    Ok(GradCheckReport {
        max_rel_error,
        per_param_errors,
    })
}

/// A [`Network`] bound to one `(input, target, loss)` sample.
pub struct NetworkSample<'a> {
    pub network: &'a mut Network,
    pub input: Vec<f64>,
    pub target: Vec<f64>,
    pub loss: Loss,
}

impl GradCheckable for NetworkSample<'_> {
    fn param_count(&self) -> usize {
        self.network.param_count()
    }

    fn param(&self, idx: usize) -> f64 {
        self.network.param(idx)
    }

    fn set_param(&mut self, idx: usize, value: f64) {
        self.network.set_param(idx, value);
    }

    fn param_name(&self, idx: usize) -> String {
        self.network.param_name(idx)
    }

    fn loss(&self) -> Result<f64> {
        self.network.loss(&self.input, &self.target, self.loss)
    }

    fn analytic_gradient(&self) -> Result<Vec<f64>> {
        let cache = self.network.forward_cached(&self.input)?;
        Ok(self.network.backward(&cache, &self.target, self.loss)?.flat())
    }
}
