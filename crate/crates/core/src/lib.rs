//! # qtnn
//!
//! A laboratory for quantum-tunnelling neural networks (QT-NN): a dense
//! 784–800–10 classifier whose hidden nodes use the transmission probability
//! of a particle through a rectangular potential barrier as activation,
//! trained side by side with an identical ReLU network.
//!
//! ## Modules
//!
//! - [`activations`]: tunnelling activation, analytic derivative, ReLU, softmax
//! - [`network`]: the two-layer network, backpropagation, training, evaluation,
//!   checkpoints
//! - [`data`]: IDX (MNIST / Fashion MNIST) readers and writers, datasets and
//!   seeded training plans
//! - [`stats`]: Shannon entropy, Jensen–Shannon and Kullback–Leibler
//!   divergences, weight histograms, 2D spectra
//! - [`schrodinger`]: 2D time-dependent Schrödinger solver for wave packets
//!   hitting rectangular or double-slit barriers
//! - [`experiments`]: end-to-end runs (train, compare, speed, simulate,
//!   analyze) with manifests; backs the `qtnn` binary
//! - [`export`]: CSV matrices and 16-bit PGM images
//!
//! Runnable walkthroughs of each capability live in the crate's `examples/`.

pub mod activations;
pub mod data;
pub mod error;
pub mod experiments;
pub mod export;
pub mod network;
pub mod rng;
pub mod schrodinger;
pub mod stats;

pub use activations::{ActivationKind, ActivationMode, ActivationSpec};
pub use data::{Dataset, TrainingPlan, TrainingSchedule};
pub use error::{Error, Result};
pub use network::{CategoryReport, Network, NetworkConfig, TrainingOutcome, TrainingSignal};
pub use schrodinger::{BarrierGeometry, GridSpec, PacketSpec, WaveField};
pub use stats::{Distribution, HistogramGrid, WeightHistory};
