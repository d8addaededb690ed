//! Centroid snapping and sample synthesis.

use rand::Rng;

use crate::candidates::CandidateSet;
use crate::error::{Error, Result};
use crate::space::{Configuration, DesignSpace, Direction, FeatureVector};

/// Above this many rule-knob combinations the repair search gives up and
/// falls back to a random valid configuration.
const MAX_REPAIR_COMBINATIONS: usize = 1 << 20;

/// Rounds a centroid to the nearest grid point (half up). If that point is
/// invalid, returns the nearest valid candidate in feature space instead
/// (ties by lower id), or the rounded point when no candidate is valid.
pub fn snap_centroid(centroid: &FeatureVector, space: &DesignSpace, candidates: &CandidateSet) -> Configuration {
    let rounded = Configuration::new(
        space
            .knobs()
            .iter()
            .zip(centroid.as_slice())
            .map(|(k, &x)| {
                let top = (k.cardinality() - 1) as f64;
                ((x * top + 0.5).floor().clamp(0.0, top)) as usize
            })
            .collect(),
    );
    if space.is_valid(&rounded) {
        return rounded;
    }
    candidates
        .items()
        .iter()
        .filter(|c| space.is_valid(&c.config))
        .map(|c| {
            let d = space.encode_features(&c.config).squared_distance(centroid.as_slice());
            (d, c.id, &c.config)
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
        .map(|(_, _, c)| c.clone())
        .unwrap_or(rounded)
}

/// Per-knob value counts over the candidates.
pub fn knob_counts(candidates: &CandidateSet, space: &DesignSpace) -> Vec<Vec<usize>> {
    let mut counts: Vec<Vec<usize>> = space.knobs().iter().map(|k| vec![0; k.cardinality()]).collect();
    for c in candidates.configs() {
        for (k, &i) in c.indices().iter().enumerate() {
            counts[k][i] += 1;
        }
    }
    counts
}

/// Most frequent index per knob, ties to the lowest index.
fn per_knob_mode(counts: &[Vec<usize>]) -> Vec<usize> {
    counts
        .iter()
        .map(|c| {
            let mut best = 0;
            for (i, &n) in c.iter().enumerate() {
                if n > c[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// The valid assembly of observed knob values with the highest total
/// frequency; ties go to the lexicographically smallest index vector.
///
/// Only knobs the validity rule mentions can differ from their mode, so the
/// search runs over combinations of those knobs' observed values.
pub fn most_frequent_valid_assembly(candidates: &CandidateSet, space: &DesignSpace) -> Option<Configuration> {
    let counts = knob_counts(candidates, space);
    let mode = Configuration::new(per_knob_mode(&counts));
    if space.is_valid(&mode) {
        return Some(mode);
    }
    let rule_knobs = space.rule().map(|r| r.referenced_knobs()).unwrap_or_default();
    let options: Vec<Vec<usize>> = rule_knobs
        .iter()
        .map(|&k| (0..counts[k].len()).filter(|&i| counts[k][i] > 0).collect())
        .collect();
    let combos = options
        .iter()
        .try_fold(1usize, |acc, o| acc.checked_mul(o.len()))
        .filter(|&n| n <= MAX_REPAIR_COMBINATIONS)?;
    if combos == 0 {
        return None;
    }
    let mut best: Option<(usize, Vec<usize>)> = None;
    let mut cursor = vec![0usize; options.len()];
    let mut trial = mode.clone();
    for _ in 0..combos {
        let mut score = 0;
        let mut choice = Vec::with_capacity(options.len());
        for (slot, (&k, opts)) in rule_knobs.iter().zip(&options).enumerate() {
            let v = opts[cursor[slot]];
            trial.indices_mut()[k] = v;
            score += counts[k][v];
            choice.push(v);
        }
        // Options are enumerated in increasing index order (last rule knob
        // fastest), so the first valid combination at a score is the
        // lexicographically smallest.
        if space.is_valid(&trial) && best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, choice));
        }
        for slot in (0..cursor.len()).rev() {
            cursor[slot] += 1;
            if cursor[slot] < options[slot].len() {
                break;
            }
            cursor[slot] = 0;
        }
    }
    best.map(|(_, choice)| {
        let mut out = mode;
        for (&k, v) in rule_knobs.iter().zip(choice) {
            out.indices_mut()[k] = v;
        }
        out
    })
}

/// Uniformly random valid configuration not in `visited`: rejection first,
/// then a wrap-around scan from a random ordinal.
pub fn random_unvisited<R: Rng + ?Sized>(
    space: &DesignSpace,
    visited: &dyn Fn(&Configuration) -> bool,
    rng: &mut R,
) -> Result<Configuration> {
    for _ in 0..1000 {
        let c = space.random_config(rng);
        if space.is_valid(&c) && !visited(&c) {
            return Ok(c);
        }
    }
    let size = space.size();
    let start = rng.random_range(0..size);
    for offset in 0..size {
        let c = space.config_at((start + offset) % size)?;
        if space.is_valid(&c) && !visited(&c) {
            return Ok(c);
        }
    }
    Err(Error::SpaceExhausted)
}

/// Builds a fresh configuration from the candidates' most frequent valid
/// knob values. If it was already visited, takes up to `2 * num_knobs`
/// random saturating single-knob steps looking for an unvisited valid
/// neighbor, then falls back to a random unvisited valid configuration.
pub fn synthesize_sample<R: Rng + ?Sized>(
    candidates: &CandidateSet,
    space: &DesignSpace,
    visited: &dyn Fn(&Configuration) -> bool,
    rng: &mut R,
) -> Result<Configuration> {
    if candidates.is_empty() {
        return Err(Error::Empty("candidates"));
    }
    let Some(assembled) = most_frequent_valid_assembly(candidates, space) else {
        return random_unvisited(space, visited, rng);
    };
    if !visited(&assembled) {
        return Ok(assembled);
    }
    let n = space.num_knobs();
    let mut walk = assembled;
    for _ in 0..2 * n {
        let knob = rng.random_range(0..n);
        let dir = if rng.random::<bool>() {
            Direction::Increment
        } else {
            Direction::Decrement
        };
        space.step_in_place(&mut walk, knob, dir);
        if space.is_valid(&walk) && !visited(&walk) {
            return Ok(walk);
        }
    }
    random_unvisited(space, visited, rng)
}
