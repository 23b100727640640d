//! Weighted co-training laboratory.
//!
//! Two linear softmax classifiers train over an externally pseudo-labeled
//! pool, each scaling every sample's loss by an importance weight derived
//! from the *other* model's recorded training dynamics. The crate covers
//! the full loop: dataset handling and synthetic benchmarks ([`data`]),
//! the weighted classifier ([`classifier`]), dynamics bookkeeping and the
//! weighting math ([`dynamics`]), pseudo-label acquisition
//! ([`pseudolabel`]), the end-to-end pipeline with its ablation variants
//! ([`pipeline`]), and evaluation/reporting ([`eval`]).
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the default precision used by the shipped tools.

pub mod classifier;
pub mod data;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod pipeline;
pub mod pseudolabel;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Default scalar type for the shipped binaries and tests.
pub type Real = f64;

/// Convenience aliases at the default precision.
pub type Dataset = data::Dataset<Real>;
pub type Example = data::Example<Real>;
pub type SoftmaxLinearModel = classifier::SoftmaxLinearModel<Real>;
pub type ProbabilityHistory = dynamics::ProbabilityHistory<Real>;
pub type WeightPair = dynamics::WeightPair<Real>;
pub type PseudoLabeledSet = pseudolabel::PseudoLabeledSet<Real>;
pub type EnsembleModel = pipeline::EnsembleModel<Real>;
pub type CoTrainState = pipeline::CoTrainState<Real>;

/// Single-precision variants of the main model types.
pub type Dataset32 = data::Dataset<f32>;
pub type SoftmaxLinearModel32 = classifier::SoftmaxLinearModel<f32>;
pub type ProbabilityHistory32 = dynamics::ProbabilityHistory<f32>;
