//! Gradient-boosted regression trees used as the surrogate fitness model.

mod gbt;

pub use gbt::{GbtModel, GbtParams, Node, RegressionTree};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::FeatureVector;

/// One measured point: encoded configuration and its fitness (0 when invalid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub features: FeatureVector,
    pub fitness: f64,
}

impl TrainingExample {
    pub fn new(features: FeatureVector, fitness: f64) -> Result<Self> {
        if !fitness.is_finite() || fitness < 0.0 {
            return Err(Error::InvalidParams(format!(
                "training fitness must be finite and non-negative, got {fitness}"
            )));
        }
        Ok(Self { features, fitness })
    }
}

/// Anything that scores encoded configurations during exploration.
pub trait Surrogate: Sync {
    fn predict_features(&self, x: &[f64]) -> f64;

    fn predict_many(&self, xs: &[FeatureVector]) -> Vec<f64> {
        xs.iter().map(|x| self.predict_features(x.as_slice())).collect()
    }
}

impl Surrogate for GbtModel {
    fn predict_features(&self, x: &[f64]) -> f64 {
        self.predict_one(x)
    }
}

/// Adapts a closure into a [`Surrogate`].
pub struct FnSurrogate<F>(pub F);

impl<F: Fn(&[f64]) -> f64 + Sync> Surrogate for FnSurrogate<F> {
    fn predict_features(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

pub const DEFAULT_MIN_TRAINING_SIZE: usize = 16;

/// Holds the current surrogate and whether it has seen enough data to be trusted.
#[derive(Debug, Clone)]
pub struct CostModelSlot {
    params: GbtParams,
    min_training_size: usize,
    model: Option<GbtModel>,
    trained: bool,
}

impl CostModelSlot {
    pub fn new(params: GbtParams) -> Self {
        Self::with_min_training_size(params, DEFAULT_MIN_TRAINING_SIZE)
    }

    pub fn with_min_training_size(params: GbtParams, min_training_size: usize) -> Self {
        Self {
            params,
            min_training_size,
            model: None,
            trained: false,
        }
    }

    /// Refits from scratch on `examples`.
    pub fn fit(&mut self, examples: &[TrainingExample], seed: u64) -> Result<()> {
        let model = GbtModel::fit(examples, &self.params, seed)?;
        self.model = Some(model);
        if examples.len() >= self.min_training_size {
            self.trained = true;
        }
        Ok(())
    }

    pub fn is_trained(&self) -> bool {
        self.trained
    }

    pub fn model(&self) -> Option<&GbtModel> {
        self.model.as_ref()
    }

    /// The model, only once it is trusted.
    pub fn trusted(&self) -> Option<&GbtModel> {
        if self.trained {
            self.model.as_ref()
        } else {
            None
        }
    }
}
