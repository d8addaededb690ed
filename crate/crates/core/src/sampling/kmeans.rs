//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::space::FeatureVector;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub centroids: Vec<FeatureVector>,
    pub assignments: Vec<usize>,
    /// Sum over points of squared distance to the assigned centroid.
    pub l2_loss: f64,
}

/// Clustering strategy used by adaptive sampling; stubbed in tests.
pub trait Clusterer {
    fn cluster(&self, points: &[FeatureVector], k: usize, seed: u64) -> Result<ClusterResult>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeans {
    pub max_iters: usize,
    pub restarts: usize,
}

impl Default for KMeans {
    fn default() -> Self {
        Self {
            max_iters: 100,
            restarts: 3,
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid (ties to the lower index) and its squared distance.
fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// k-means++ seeding.
pub fn kmeans_pp_init<R: Rng + ?Sized>(points: &[FeatureVector], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].0.clone()];
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| sq_dist(p.as_slice(), &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            chosen.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive mass"))
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[pick].0.clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p.as_slice(), &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Lloyd iterations from `centroids` until the assignment stops changing or
/// `max_iters` is reached. Returns the result and the loss after every
/// assignment step.
pub fn lloyd(points: &[FeatureVector], mut centroids: Vec<Vec<f64>>, max_iters: usize) -> (ClusterResult, Vec<f64>) {
    let dim = points[0].len();
    let k = centroids.len();
    let mut assignments = vec![usize::MAX; points.len()];
    let mut trace: Vec<f64> = Vec::new();
    let mut loss;
    let mut iter = 0;
    loop {
        let mut changed = false;
        loss = 0.0;
        for (a, p) in assignments.iter_mut().zip(points) {
            let (j, d) = nearest(p.as_slice(), &centroids);
            if *a != j {
                *a = j;
                changed = true;
            }
            loss += d;
        }
        if let Some(&prev) = trace.last() {
            debug_assert!(loss <= prev + 1e-9 * prev.max(1.0), "lloyd loss increased: {prev} -> {loss}");
        }
        trace.push(loss);
        if !changed || iter >= max_iters {
            break;
        }
        iter += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (&a, p) in assignments.iter().zip(points) {
            counts[a] += 1;
            for (s, x) in sums[a].iter_mut().zip(p.as_slice()) {
                *s += x;
            }
        }
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            // Empty clusters keep their previous centroid.
            if n > 0 {
                for (ci, si) in c.iter_mut().zip(s) {
                    *ci = si / n as f64;
                }
            }
        }
    }
    (
        ClusterResult {
            centroids: centroids.into_iter().map(FeatureVector).collect(),
            assignments,
            l2_loss: loss,
        },
        trace,
    )
}

pub fn kmeans_run(points: &[FeatureVector], k: usize, params: &KMeans, rng_seed: u64) -> Result<ClusterResult> {
    if points.is_empty() {
        return Err(Error::Clustering("no points".into()));
    }
    if k == 0 || k > points.len() {
        return Err(Error::Clustering(format!(
            "k = {k} with {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(Error::Clustering("points differ in dimension".into()));
    }
    let mut best: Option<ClusterResult> = None;
    for restart in 0..params.restarts.max(1) {
        let mut r = rng::rng_from(rng::derive_indexed(rng_seed, restart as u64));
        let init = kmeans_pp_init(points, k, &mut r);
        let (result, _) = lloyd(points, init, params.max_iters);
        if best.as_ref().is_none_or(|b| result.l2_loss < b.l2_loss) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

impl Clusterer for KMeans {
    fn cluster(&self, points: &[FeatureVector], k: usize, seed: u64) -> Result<ClusterResult> {
        kmeans_run(points, k, self, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[&[f64]]) -> Vec<FeatureVector> {
        v.iter().map(|p| FeatureVector(p.to_vec())).collect()
    }

    #[test]
    fn separable_pairs() {
        let p = pts(&[&[0.0], &[0.0], &[10.0], &[10.0]]);
        let r = kmeans_run(&p, 2, &KMeans::default(), 1).unwrap();
        let mut c: Vec<f64> = r.centroids.iter().map(|c| c.0[0]).collect();
        c.sort_by(f64::total_cmp);
        assert_eq!(c, vec![0.0, 10.0]);
        assert_eq!(r.l2_loss, 0.0);
        assert_eq!(r.assignments[0], r.assignments[1]);
        assert_ne!(r.assignments[0], r.assignments[2]);
    }

    #[test]
    fn errors() {
        assert!(kmeans_run(&[], 1, &KMeans::default(), 0).is_err());
        let p = pts(&[&[0.0], &[1.0]]);
        assert!(kmeans_run(&p, 3, &KMeans::default(), 0).is_err());
        assert!(kmeans_run(&p, 0, &KMeans::default(), 0).is_err());
    }

    #[test]
    fn deterministic_for_seed() {
        let mut r = rng::rng_from(3);
        let p: Vec<FeatureVector> = (0..200)
            .map(|_| FeatureVector(vec![r.random(), r.random(), r.random()]))
            .collect();
        let a = kmeans_run(&p, 7, &KMeans::default(), 5).unwrap();
        let b = kmeans_run(&p, 7, &KMeans::default(), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn loss_consistent_with_assignment() {
        let mut r = rng::rng_from(4);
        let p: Vec<FeatureVector> = (0..100)
            .map(|_| FeatureVector(vec![r.random(), r.random()]))
            .collect();
        let res = kmeans_run(&p, 5, &KMeans::default(), 2).unwrap();
        let direct: f64 = p
            .iter()
            .zip(&res.assignments)
            .map(|(x, &a)| x.squared_distance(res.centroids[a].as_slice()))
            .sum();
        assert!((direct - res.l2_loss).abs() < 1e-12);
        assert!(res.assignments.iter().all(|&a| a < 5));
    }
}
