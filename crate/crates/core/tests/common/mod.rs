//! Oracles shared by the integration test targets.
#![allow(dead_code)]

use std::cell::RefCell;
use std::collections::HashSet;

use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use knobtune::exploration::{ppo_loss, ActorCritic, LossCoefficients, Minibatch, NetShape};
use knobtune::rng;
use knobtune::sampling::{snap_centroid, synthesize_sample, ClusterResult, Clusterer};
use knobtune::{CandidateSet, Configuration, DesignSpace, FeatureVector, Knob};

pub fn space(cards: &[usize], rule: Option<&str>) -> DesignSpace {
    let knobs = cards
        .iter()
        .enumerate()
        .map(|(i, &c)| Knob {
            name: format!("k{i}"),
            values: (1..=c as i64).collect(),
        })
        .collect();
    DesignSpace::new("oracle", knobs, rule).unwrap()
}

pub fn random_candidates(space: &DesignSpace, n: usize, rng: &mut ChaCha8Rng) -> CandidateSet {
    let scored: Vec<(Configuration, f64)> = (0..n)
        .map(|_| (space.random_config(rng), rng.random::<f64>()))
        .collect();
    CandidateSet::from_scored(space, scored)
}

/// Deterministic stand-in for k-means: centroids are the features of
/// candidates at scripted positions, losses come from a fixed table.
pub struct StubClusterer {
    pub losses: Vec<f64>,
    pub picks: Vec<usize>,
    pub calls: RefCell<Vec<usize>>,
}

impl StubClusterer {
    pub fn new(rng: &mut ChaCha8Rng, n: usize) -> Self {
        // Losses mostly shrink slowly (ratio > 1/2.5) with occasional sharp drops,
        // so the break point varies from set to set.
        let mut losses = vec![0.0; 64];
        let mut l = rng.random_range(50.0..200.0);
        for slot in losses.iter_mut().skip(8) {
            *slot = l;
            l *= if rng.random::<f64>() < 0.7 { rng.random_range(0.05..0.39) } else { rng.random_range(0.41..1.0) };
        }
        let picks = (0..64).map(|_| rng.random_range(0..n)).collect();
        Self {
            losses,
            picks,
            calls: RefCell::new(Vec::new()),
        }
    }

    pub fn centroids(&self, points: &[FeatureVector], k: usize) -> Vec<FeatureVector> {
        (0..k).map(|j| points[self.picks[(j * 7 + k) % 64]].clone()).collect()
    }
}

impl Clusterer for StubClusterer {
    fn cluster(&self, points: &[FeatureVector], k: usize, _seed: u64) -> knobtune::Result<ClusterResult> {
        self.calls.borrow_mut().push(k);
        Ok(ClusterResult {
            centroids: self.centroids(points, k),
            assignments: vec![0; points.len()],
            l2_loss: self.losses[k],
        })
    }
}

/// Line-by-line transcription of the adaptive sampling pseudocode.
pub fn reference_adaptive_sample(
    candidates: &CandidateSet,
    visited: &HashSet<Configuration>,
    space: &DesignSpace,
    stub: &StubClusterer,
    rng_seed: u64,
) -> Vec<Configuration> {
    let points = candidates.features(space);
    let threshold = 2.5;
    let mut previous_loss = f64::INFINITY;
    let mut new_candidates = Vec::new();
    for k in 8..64 {
        let centroids = stub.centroids(&points, k);
        let l2_loss = stub.losses[k];
        new_candidates = centroids;
        if threshold * l2_loss >= previous_loss {
            break;
        }
        previous_loss = l2_loss;
    }
    let mut out: Vec<Configuration> = new_candidates
        .iter()
        .map(|c| snap_centroid(c, space, candidates))
        .collect();
    let mut synth_rng = rng::stream(rng_seed, "sampling/synth");
    for i in 0..out.len() {
        if visited.contains(&out[i]) || out[..i].contains(&out[i]) {
            let earlier: Vec<Configuration> = out[..i].to_vec();
            let taken = |c: &Configuration| visited.contains(c) || earlier.contains(c);
            out[i] = synthesize_sample(candidates, space, &taken, &mut synth_rng).unwrap();
        }
    }
    out
}

/// Every valid configuration built from observed values, scored by total
/// count; highest score wins, ties to the lexicographically smallest.
pub fn brute_force_assembly(candidates: &CandidateSet, space: &DesignSpace) -> Option<Configuration> {
    let cards = space.cardinalities();
    let mut counts: Vec<Vec<usize>> = cards.iter().map(|&c| vec![0; c]).collect();
    for c in candidates.configs() {
        for (k, &i) in c.indices().iter().enumerate() {
            counts[k][i] += 1;
        }
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    for id in 0..space.size() {
        let c = space.config_at(id).unwrap();
        let idx = c.indices();
        if idx.iter().enumerate().any(|(k, &i)| counts[k][i] == 0) || !space.validate(&c).unwrap() {
            continue;
        }
        let score: usize = idx.iter().enumerate().map(|(k, &i)| counts[k][i]).sum();
        let better = match &best {
            None => true,
            Some((s, v)) => score > *s || (score == *s && idx < v.as_slice()),
        };
        if better {
            best = Some((score, idx.to_vec()));
        }
    }
    best.map(|(_, v)| Configuration::new(v))
}

pub fn small_net(seed: u64) -> ActorCritic {
    ActorCritic::new(
        NetShape {
            num_knobs: 2,
            hidden_dim: 4,
            head_hidden_dim: 4,
        },
        seed,
    )
    .unwrap()
}

/// Random batch whose ratios sit well away from the clip kinks at `1 +- eps`.
pub fn random_batch(net: &ActorCritic, rng: &mut ChaCha8Rng, b: usize, eps: f64) -> Minibatch {
    let n = net.shape().num_knobs;
    let states = Array2::from_shape_fn((b, n), |_| rng.random::<f64>());
    let actions: Vec<Vec<usize>> = (0..b).map(|_| (0..n).map(|_| rng.random_range(0..3)).collect()).collect();
    let fwd = net.forward(states.view()).unwrap();
    let mut old = Array1::zeros(b);
    for i in 0..b {
        let logp: f64 = (0..n).map(|k| fwd.log_probs[[i, 3 * k + actions[i][k]]]).sum();
        // Half the samples inside the trust region, half far outside on either side.
        let shift = match i % 4 {
            0 => rng.random_range(-0.3 * eps..0.3 * eps),
            1 => rng.random_range(-0.1..0.1) * eps,
            2 => -(2.0 * eps + rng.random::<f64>()),
            _ => 2.0 * eps + rng.random::<f64>(),
        };
        // ratio = exp(logp - old), so old = logp - ln(1 + shift) keeps ratio = 1 + shift.
        old[i] = logp - (1.0 + shift).max(0.05).ln();
    }
    let advantages = Array1::from_shape_fn(b, |_| rng.random_range(-2.0..2.0));
    let returns = Array1::from_shape_fn(b, |_| rng.random_range(-1.0..1.0));
    Minibatch {
        states,
        actions,
        old_log_probs: old,
        advantages,
        returns,
    }
}

/// Central differences over every parameter.
pub fn numeric_gradient(net: &ActorCritic, batch: &Minibatch, coef: &LossCoefficients, h: f64) -> Vec<f64> {
    let base = net.flat_params();
    let mut probe = net.clone();
    let mut g = vec![0.0; base.len()];
    let mut theta = base.clone();
    for i in 0..base.len() {
        theta[i] = base[i] + h;
        probe.set_flat_params(&theta);
        let up = ppo_loss(&probe, batch, coef).unwrap().total;
        theta[i] = base[i] - h;
        probe.set_flat_params(&theta);
        let down = ppo_loss(&probe, batch, coef).unwrap().total;
        theta[i] = base[i];
        g[i] = (up - down) / (2.0 * h);
    }
    g
}

/// `A_t = sum_k (gamma lambda)^k delta_{t+k}`, straight from the definition.
pub fn gae_direct(rewards: &[f64], values: &[f64], terminal: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let v = |t: usize| if t < n { values[t] } else { terminal };
    let delta: Vec<f64> = (0..n).map(|t| rewards[t] + gamma * v(t + 1) - v(t)).collect();
    (0..n)
        .map(|t| (t..n).map(|j| (gamma * lambda).powi((j - t) as i32) * delta[j]).sum())
        .collect()
}

