//! Auto-tuning for discrete code-optimization design spaces.
//!
//! The tuner alternates exploration over a learned surrogate (simulated
//! annealing or an actor-critic agent trained with PPO), selection of a
//! small measurement batch (greedy top-b or clustering-based adaptive
//! sampling with sample synthesis), measurement through a pluggable
//! backend, and a refit of the gradient-boosted-trees surrogate.

pub mod candidates;
pub mod cost_model;
pub mod error;
pub mod exploration;
pub mod measurement;
pub mod rng;
pub mod sampling;
pub mod space;
pub mod tuner;

pub use candidates::{Candidate, CandidateSet};
pub use cost_model::{CostModelSlot, GbtModel, GbtParams, Surrogate, TrainingExample};
pub use error::{Error, Result};
pub use exploration::{PpoParams, SaParams};
pub use measurement::{Backend, BackendSpec, MeasurementResult, SyntheticLandscapeParams};
pub use sampling::SamplingParams;
pub use space::{Configuration, DesignSpace, Direction, FeatureVector, Knob};
pub use tuner::{Mode, RunOutcome, TraceRecord, TunerParams};
