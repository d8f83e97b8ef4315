//! Plain SGD with classical momentum.

use crate::error::{Error, Result};

/// SGD update: `v <- g + momentum * v`, then `p <- p - lr * v`.
///
/// One velocity buffer is kept per parameter group, allocated on first use.
/// The gate's fixed mask holds no parameters, so it can never be updated here.
#[derive(Debug, Clone)]
pub struct Sgd {
    lr: f64,
    momentum: f64,
    velocities: Vec<Vec<f64>>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Result<Self> {
        if !lr.is_finite() || lr < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be finite and >= 0, got {lr}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::InvalidConfig(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(Sgd {
            lr,
            momentum,
            velocities: Vec::new(),
        })
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    /// Updates one parameter group in place.
    ///
    /// Aborts without touching params or velocity if any gradient entry is
    /// non-finite.
    pub fn step_group(&mut self, group: usize, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::DimensionMismatch(format!(
                "sgd: {} params vs {} grads in group {group}",
                params.len(),
                grads.len()
            )));
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient in group {group}; step aborted"
            )));
        }
        while self.velocities.len() <= group {
            self.velocities.push(Vec::new());
        }
        let vel = &mut self.velocities[group];
        if vel.is_empty() {
            vel.resize(params.len(), 0.0);
        } else if vel.len() != params.len() {
            return Err(Error::DimensionMismatch(format!(
                "sgd: group {group} changed size from {} to {}",
                vel.len(),
                params.len()
            )));
        }
        for ((p, &g), v) in params.iter_mut().zip(grads).zip(vel.iter_mut()) {
            *v = g + self.momentum * *v;
            *p -= self.lr * *v;
        }
        Ok(())
    }
}
