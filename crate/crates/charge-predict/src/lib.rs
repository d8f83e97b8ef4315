//! Two-phase multi-label charge prediction with label-count learning.
//!
//! Phase 1 trains a two-branch classifier over case text: one head reads the
//! case directly, the other attends over per-charge law-provision text, and
//! both are trained jointly under a weighted sum of losses. Phase 2 feeds the
//! exported per-label probabilities into a count network whose first layer
//! has fixed identity weights and a trainable per-label bias; each bias acts
//! as an adaptive decision threshold, and the head predicts how many labels a
//! sample carries. The final label set is the top-n probabilities for the
//! predicted n, which this crate compares against global-threshold and top-k
//! selection.
//!
//! All numerics are hand-rolled f64 with finite-difference gradient checks.
//! See the crate `examples/` directory for one runnable walkthrough per
//! capability, or the `charge-predict` binary for the stage-per-command
//! pipeline.

pub mod classifier;
pub mod data;
pub mod decision;
pub mod error;
pub mod eval;
pub mod nln;
pub mod numerics;

pub use classifier::ProbVector;
pub use error::{Error, Result};
