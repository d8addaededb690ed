//! Seeded multi-peak landscapes with locally similar fitness and optional invalid regions.

use serde::{Deserialize, Serialize};

use super::{Backend, CostPolicy, Measured};
use crate::error::{Error, Result};
use crate::rng::{hash01, mix64};
use crate::space::{Configuration, DesignSpace, FeatureVector, ValidityRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticLandscapeParams {
    pub num_peaks: usize,
    pub peak_sharpness: f64,
    pub noise_amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invalid_rule: Option<String>,
    pub seed: u64,
}

impl Default for SyntheticLandscapeParams {
    fn default() -> Self {
        Self {
            num_peaks: 4,
            peak_sharpness: 4.0,
            noise_amplitude: 0.02,
            invalid_rule: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Peak {
    pub center: Configuration,
    pub center_features: FeatureVector,
    pub amplitude: f64,
}

const CENTER_SALT: u64 = 0x5EED_CE17_0000_0001;
const AMPLITUDE_SALT: u64 = 0x5EED_A3B1_0000_0002;
const NOISE_SALT: u64 = 0x5EED_0015_0000_0003;

/// `fitness = sum_p a_p * exp(-s * |x - c_p|^2) + noise * hash01(seed, id)`.
///
/// Peak centers sit on grid points. The first peak has amplitude 1, the
/// others draw from `[0.4, 0.85)`.
#[derive(Debug, Clone)]
pub struct SyntheticLandscape {
    params: SyntheticLandscapeParams,
    peaks: Vec<Peak>,
    invalid_rule: Option<ValidityRule>,
}

impl SyntheticLandscape {
    pub fn new(params: SyntheticLandscapeParams, space: &DesignSpace) -> Result<Self> {
        if params.num_peaks == 0 {
            return Err(Error::InvalidParams("landscape needs at least one peak".into()));
        }
        if !(params.peak_sharpness >= 0.0 && params.noise_amplitude >= 0.0) {
            return Err(Error::InvalidParams(
                "landscape sharpness and noise amplitude must be non-negative".into(),
            ));
        }
        let names: Vec<&str> = space.knobs().iter().map(|k| k.name.as_str()).collect();
        let invalid_rule = params
            .invalid_rule
            .as_deref()
            .map(|r| ValidityRule::parse(r, &names))
            .transpose()?;
        let n = space.num_knobs() as u64;
        let center_seed = mix64(params.seed ^ CENTER_SALT);
        let amp_seed = mix64(params.seed ^ AMPLITUDE_SALT);
        let peaks = (0..params.num_peaks as u64)
            .map(|p| {
                let center = Configuration::new(
                    space
                        .knobs()
                        .iter()
                        .enumerate()
                        .map(|(k, knob)| {
                            let u = hash01(center_seed, p * n + k as u64);
                            ((u * knob.cardinality() as f64) as usize).min(knob.cardinality() - 1)
                        })
                        .collect(),
                );
                let amplitude = if p == 0 {
                    1.0
                } else {
                    0.4 + 0.45 * hash01(amp_seed, p)
                };
                Peak {
                    center_features: space.encode_features(&center),
                    center,
                    amplitude,
                }
            })
            .collect();
        Ok(Self {
            params,
            peaks,
            invalid_rule,
        })
    }

    pub fn params(&self) -> &SyntheticLandscapeParams {
        &self.params
    }

    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    pub fn is_invalid(&self, space: &DesignSpace, config: &Configuration) -> bool {
        self.invalid_rule
            .as_ref()
            .is_some_and(|r| !r.holds(&space.values_of(config)))
    }

    /// Smooth part of the fitness, without noise or invalidity.
    pub fn peak_sum(&self, features: &[f64]) -> f64 {
        self.peaks
            .iter()
            .map(|p| {
                p.amplitude
                    * (-self.params.peak_sharpness * p.center_features.squared_distance(features))
                        .exp()
            })
            .sum()
    }

    pub fn fitness(&self, space: &DesignSpace, config: &Configuration) -> f64 {
        if self.is_invalid(space, config) {
            return 0.0;
        }
        let x = space.encode_features(config);
        let noise = self.params.noise_amplitude
            * hash01(mix64(self.params.seed ^ NOISE_SALT), space.ordinal(config));
        self.peak_sum(x.as_slice()) + noise
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBackend {
    landscape: SyntheticLandscape,
    cost: CostPolicy,
}

impl SyntheticBackend {
    pub fn new(landscape: SyntheticLandscape, cost: CostPolicy) -> Self {
        Self { landscape, cost }
    }

    pub fn landscape(&self) -> &SyntheticLandscape {
        &self.landscape
    }
}

impl Backend for SyntheticBackend {
    fn measure(&self, space: &DesignSpace, config: &Configuration) -> Result<Measured> {
        space.check(config)?;
        if self.landscape.is_invalid(space, config) {
            return Ok(Measured::invalid(self.cost.invalid_cost()));
        }
        Ok(Measured::valid(
            self.landscape.fitness(space, config),
            self.cost.nominal_cost,
        ))
    }

    fn cost_policy(&self) -> CostPolicy {
        self.cost
    }
}
