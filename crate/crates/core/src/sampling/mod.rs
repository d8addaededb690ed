//! Choosing which explored candidates to measure.

mod kmeans;
mod synth;

pub use kmeans::{kmeans_pp_init, kmeans_run, lloyd, ClusterResult, Clusterer, KMeans};
pub use synth::{
    knob_counts, most_frequent_valid_assembly, random_unvisited, snap_centroid, synthesize_sample,
};

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::rng;
use crate::space::{Configuration, DesignSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingParams {
    pub threshold: f64,
    pub k_min: usize,
    pub k_max_exclusive: usize,
    pub greedy_batch: usize,
    pub kmeans_max_iters: usize,
    pub kmeans_restarts: usize,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            threshold: 2.5,
            k_min: 8,
            k_max_exclusive: 64,
            greedy_batch: 64,
            kmeans_max_iters: 100,
            kmeans_restarts: 3,
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if self.k_min == 0 || self.k_min >= self.k_max_exclusive {
            return Err(Error::InvalidParams(
                "sampling: need 0 < k_min < k_max_exclusive".into(),
            ));
        }
        if !(self.threshold > 1.0) {
            return Err(Error::InvalidParams("sampling: threshold must exceed 1".into()));
        }
        if self.greedy_batch == 0 || self.kmeans_restarts == 0 {
            return Err(Error::InvalidParams(
                "sampling: greedy_batch and kmeans_restarts must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn kmeans(&self) -> KMeans {
        KMeans {
            max_iters: self.kmeans_max_iters,
            restarts: self.kmeans_restarts,
        }
    }
}

/// Top `batch` candidates by predicted fitness (the set is already ranked).
pub fn greedy_select(candidates: &CandidateSet, batch: usize) -> Vec<Configuration> {
    candidates.configs().take(batch).cloned().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveSample {
    pub configs: Vec<Configuration>,
    /// Cluster count the meta-search settled on.
    pub k: usize,
    /// `(k, l2_loss)` for every k evaluated.
    pub losses: Vec<(usize, f64)>,
    /// How many outputs came from sample synthesis.
    pub synthesized: usize,
}

/// Cluster counts tried, clamped to the number of points.
pub fn k_range(params: &SamplingParams, num_points: usize) -> std::ops::RangeInclusive<usize> {
    let hi = (params.k_max_exclusive - 1).min(num_points);
    params.k_min.min(hi)..=hi
}

/// Clustering-based sampling with a threshold knee search over k and
/// replacement of already-visited picks by synthesized samples.
///
/// For k in `k_min..k_max_exclusive`, clusters the candidates' features and
/// stops at the first k with `threshold * loss(k) >= loss(previous k)`; the
/// centroids of that k (snapped to configurations) are the picks. Picks that
/// were visited, or that repeat an earlier pick, are replaced by
/// [`synthesize_sample`].
pub fn adaptive_sample(
    candidates: &CandidateSet,
    visited: &dyn Fn(&Configuration) -> bool,
    params: &SamplingParams,
    space: &DesignSpace,
    clusterer: &dyn Clusterer,
    rng_seed: u64,
) -> Result<AdaptiveSample> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidates"));
    }
    let points = candidates.features(space);
    let cluster_seed = rng::derive_seed(rng_seed, "sampling/kmeans");
    let mut previous_loss = f64::INFINITY;
    let mut losses = Vec::new();
    let mut picked: Option<(usize, ClusterResult)> = None;
    for k in k_range(params, points.len()) {
        let result = clusterer.cluster(&points, k, rng::derive_indexed(cluster_seed, k as u64))?;
        losses.push((k, result.l2_loss));
        let stop = params.threshold * result.l2_loss >= previous_loss;
        previous_loss = result.l2_loss;
        picked = Some((k, result));
        if stop {
            break;
        }
    }
    let (k, clusters) = picked.expect("k range is non-empty");
    let mut configs: Vec<Configuration> = clusters
        .centroids
        .iter()
        .map(|c| snap_centroid(c, space, candidates))
        .collect();

    let mut synth_rng = rng::stream(rng_seed, "sampling/synth");
    let mut synthesized = 0;
    for i in 0..configs.len() {
        let (earlier, rest) = configs.split_at_mut(i);
        let current = &mut rest[0];
        if visited(current) || earlier.contains(current) {
            let taken = |c: &Configuration| visited(c) || earlier.contains(c);
            *current = synthesize_sample(candidates, space, &taken, &mut synth_rng)?;
            synthesized += 1;
        }
    }
    Ok(AdaptiveSample {
        configs,
        k,
        losses,
        synthesized,
    })
}
