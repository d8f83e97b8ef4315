//! From-scratch dense-network numerics.
//!
//! Layers with explicit forward/backward passes, losses, SGD with momentum,
//! finite-difference gradient verification, and versioned JSON persistence.
//! Everything runs in f64 so gradient checks stay tight. Training is
//! single-threaded and deterministic under a seed; frozen models are safe to
//! read from multiple threads.

pub mod activation;
pub mod gradcheck;
pub mod layer;
pub mod loss;
pub mod network;
pub mod optim;
pub mod params;

pub use activation::Activation;
pub use gradcheck::{grad_check, GradCheckReport, GradCheckable, NetworkSample, DEFAULT_STEP};
pub use layer::{DenseLayer, MaskedDiagonalLayer};
pub use loss::Loss;
pub use network::{ForwardCache, Gradients, Layer, LayerGrads, Network};
pub use optim::Sgd;
pub use params::{LayerSpec, FORMAT_VERSION};
