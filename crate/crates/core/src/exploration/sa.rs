//! Parallel simulated annealing over the surrogate, the baseline explorer.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::cost_model::Surrogate;
use crate::error::{Error, Result};
use crate::rng;
use crate::space::{Configuration, DesignSpace, Direction};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaParams {
    pub num_chains: usize,
    pub max_steps: usize,
    pub initial_temperature: f64,
    pub cooling_rate: f64,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            num_chains: 128,
            max_steps: 500,
            initial_temperature: 1.0,
            cooling_rate: 0.99,
        }
    }
}

impl SaParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_chains == 0 || self.max_steps == 0 {
            return Err(Error::InvalidParams("sa: chains and steps must be positive".into()));
        }
        if !(self.initial_temperature > 0.0) || !(self.cooling_rate > 0.0 && self.cooling_rate < 1.0) {
            return Err(Error::InvalidParams(
                "sa: temperature must be positive and cooling_rate in (0, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Proposal count of one search.
    pub fn steps(&self) -> u64 {
        (self.num_chains * self.max_steps) as u64
    }
}

/// Metropolis acceptance for maximization.
pub fn accept_probability(delta: f64, temperature: f64) -> f64 {
    if delta >= 0.0 {
        1.0
    } else {
        (delta / temperature).exp()
    }
}

/// Runs `num_chains` independent chains for `max_steps` each and returns every
/// visited configuration scored by the surrogate.
///
/// Chains start from `seeds` (first `num_chains` of them), padded with random
/// valid configurations.
pub fn sa_search(
    space: &DesignSpace,
    model: &dyn Surrogate,
    seeds: &[Configuration],
    params: &SaParams,
    rng_seed: u64,
) -> CandidateSet {
    let mut pad_rng = rng::rng_from(rng::derive_seed(rng_seed, "sa/pad"));
    let mut chains: Vec<Configuration> = seeds.iter().take(params.num_chains).cloned().collect();
    while chains.len() < params.num_chains {
        chains.push(
            space
                .random_valid_config(&mut pad_rng, 1000)
                .unwrap_or_else(|| space.random_config(&mut pad_rng)),
        );
    }
    let mut rngs: Vec<rng::StreamRng> = (0..params.num_chains as u64)
        .map(|i| rng::rng_from(rng::derive_indexed(rng::derive_seed(rng_seed, "sa/chain"), i)))
        .collect();

    let mut scores: Vec<f64> = chains
        .iter()
        .map(|c| model.predict_features(space.encode_features(c).as_slice()))
        .collect();
    let mut visited: HashMap<Configuration, f64> = HashMap::new();
    let mut order: Vec<Configuration> = Vec::new();
    let mut record = |c: &Configuration, s: f64, visited: &mut HashMap<Configuration, f64>| {
        if !visited.contains_key(c) {
            visited.insert(c.clone(), s);
            order.push(c.clone());
        }
    };
    for (c, &s) in chains.iter().zip(&scores) {
        record(c, s, &mut visited);
    }

    let n = space.num_knobs();
    let mut temperature = params.initial_temperature;
    for _ in 0..params.max_steps {
        for ((chain, score), r) in chains.iter_mut().zip(scores.iter_mut()).zip(rngs.iter_mut()) {
            let knob = r.random_range(0..n);
            let dir = if r.random::<bool>() {
                Direction::Increment
            } else {
                Direction::Decrement
            };
            let proposal = space.neighbor(chain, knob, dir);
            let proposed = match visited.get(&proposal) {
                Some(&s) => s,
                None => model.predict_features(space.encode_features(&proposal).as_slice()),
            };
            let u: f64 = r.random();
            if u < accept_probability(proposed - *score, temperature) {
                *chain = proposal;
                *score = proposed;
                record(chain, proposed, &mut visited);
            }
        }
        temperature *= params.cooling_rate;
    }
    CandidateSet::from_scored(space, order.into_iter().map(|c| {
        let s = visited[&c];
        (c, s)
    }))
}
