//! Rollouts of the actor-critic explorer over the surrogate.

use rand::Rng;

use super::net::{states_matrix, ActorCritic};
use super::ppo::{PpoParams, Trajectory};
use crate::candidates::CandidateSet;
use crate::cost_model::Surrogate;
use crate::error::Result;
use crate::rng;
use crate::space::{Configuration, DesignSpace, Direction, FeatureVector};

/// Samples one direction per knob independently. Returns the joint log-probability.
pub fn sample_actions<R: Rng + ?Sized>(distributions: &[[f64; 3]], rng: &mut R) -> (Vec<Direction>, f64) {
    let mut logp = 0.0;
    let actions = distributions
        .iter()
        .map(|d| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut slot = 2;
            for (j, &p) in d.iter().enumerate() {
                acc += p;
                if u < acc {
                    slot = j;
                    break;
                }
            }
            // Guard against rounding pushing u past a zero-probability tail.
            while d[slot] == 0.0 && slot > 0 {
                slot -= 1;
            }
            logp += d[slot].ln();
            Direction::from_slot(slot)
        })
        .collect();
    (actions, logp)
}

/// Saturating per-knob move.
pub fn apply_actions(space: &DesignSpace, config: &Configuration, actions: &[Direction]) -> Configuration {
    let mut next = config.clone();
    for (k, &a) in actions.iter().enumerate() {
        space.step_in_place(&mut next, k, a);
    }
    next
}

#[derive(Debug, Clone)]
pub struct EpisodeBatch {
    pub candidates: CandidateSet,
    pub trajectories: Vec<Trajectory>,
    /// Transitions taken across all episodes.
    pub steps: u64,
}

struct Rollout {
    config: Configuration,
    visited: Vec<Configuration>,
    trajectory: Trajectory,
    rng: rng::StreamRng,
    done: bool,
}

/// Runs `episodes_per_iteration` episodes in lockstep with the current policy.
///
/// Episodes start from `initial_configs`, padded with random valid
/// configurations. An episode stops after `max_episode_steps` or as soon as
/// an action leaves the configuration unchanged. Rewards are the
/// surrogate's fitness deltas between consecutive configurations, computed in
/// one batched call per finished episode; advantages are filled in.
pub fn run_episodes(
    space: &DesignSpace,
    model: &dyn Surrogate,
    net: &ActorCritic,
    params: &PpoParams,
    initial_configs: &[Configuration],
    rng_seed: u64,
) -> Result<EpisodeBatch> {
    let mut pad_rng = rng::rng_from(rng::derive_seed(rng_seed, "episodes/pad"));
    let episode_seed = rng::derive_seed(rng_seed, "episodes/policy");
    let mut rollouts: Vec<Rollout> = (0..params.episodes_per_iteration)
        .map(|e| {
            let config = initial_configs.get(e).cloned().unwrap_or_else(|| {
                space
                    .random_valid_config(&mut pad_rng, 1000)
                    .unwrap_or_else(|| space.random_config(&mut pad_rng))
            });
            Rollout {
                visited: vec![config.clone()],
                config,
                trajectory: Trajectory::default(),
                rng: rng::rng_from(rng::derive_indexed(episode_seed, e as u64)),
                done: false,
            }
        })
        .collect();

    let n = space.num_knobs();
    let mut steps = 0u64;
    for _ in 0..params.max_episode_steps {
        let active: Vec<usize> = (0..rollouts.len()).filter(|&i| !rollouts[i].done).collect();
        if active.is_empty() {
            break;
        }
        let states: Vec<FeatureVector> = active
            .iter()
            .map(|&i| space.encode_features(&rollouts[i].config))
            .collect();
        let fwd = net.forward(states_matrix(&states, n)?.view())?;
        for (row, (&i, state)) in active.iter().zip(states).enumerate() {
            let ro = &mut rollouts[i];
            let (actions, logp) = sample_actions(&fwd.distributions(row), &mut ro.rng);
            let next = apply_actions(space, &ro.config, &actions);
            ro.trajectory.states.push(state);
            ro.trajectory.actions.push(actions);
            ro.trajectory.log_probs.push(logp);
            ro.trajectory.values.push(fwd.values[row]);
            if next == ro.config {
                ro.done = true;
                ro.trajectory.terminated = true;
            }
            ro.visited.push(next.clone());
            ro.config = next;
            steps += 1;
        }
    }

    // Bootstrap values for episodes cut off by the step cap.
    let truncated: Vec<usize> = (0..rollouts.len()).filter(|&i| !rollouts[i].done).collect();
    if !truncated.is_empty() {
        let states: Vec<FeatureVector> = truncated
            .iter()
            .map(|&i| space.encode_features(&rollouts[i].config))
            .collect();
        let fwd = net.forward(states_matrix(&states, n)?.view())?;
        for (row, &i) in truncated.iter().enumerate() {
            rollouts[i].trajectory.bootstrap_value = fwd.values[row];
        }
    }

    let mut scored: Vec<(Configuration, f64)> = Vec::new();
    let mut trajectories = Vec::with_capacity(rollouts.len());
    for ro in rollouts {
        let Rollout {
            visited,
            mut trajectory,
            ..
        } = ro;
        let feats: Vec<FeatureVector> = visited.iter().map(|c| space.encode_features(c)).collect();
        let predicted = model.predict_many(&feats);
        trajectory.rewards = predicted.windows(2).map(|w| w[1] - w[0]).collect();
        trajectory.compute_advantages(params.discount_gamma, params.gae_lambda)?;
        scored.extend(visited.into_iter().zip(predicted));
        trajectories.push(trajectory);
    }
    Ok(EpisodeBatch {
        candidates: CandidateSet::from_scored(space, scored),
        trajectories,
        steps,
    })
}
