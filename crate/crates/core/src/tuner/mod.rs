//! The explore / sample / measure / refit loop.

mod compare;
mod trace;

pub use compare::{compare, write_compare_csv, CompareRow};
pub use trace::{trace_csv, write_summary, write_trace_csv, RunSummary, TRACE_HEADER};

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::candidates::CandidateSet;
use crate::cost_model::{CostModelSlot, GbtParams, Surrogate, TrainingExample};
use crate::error::{Error, Result};
use crate::exploration::{ppo_update, run_episodes, sa_search, Agent, PpoParams, PpoStats, SaParams};
use crate::measurement::{measure_batch, Backend, MeasurementResult};
use crate::rng;
use crate::sampling::{
    adaptive_sample, greedy_select, random_unvisited, SamplingParams,
};
use crate::space::{Configuration, DesignSpace};

use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "SA")]
    Sa,
    #[serde(rename = "AE")]
    Ae,
    #[serde(rename = "SA_AS")]
    SaAs,
    #[serde(rename = "AE_AS")]
    AeAs,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Sa, Mode::Ae, Mode::SaAs, Mode::AeAs];

    pub fn uses_agent(self) -> bool {
        matches!(self, Mode::Ae | Mode::AeAs)
    }

    pub fn adaptive_sampling(self) -> bool {
        matches!(self, Mode::SaAs | Mode::AeAs)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Sa => "SA",
            Mode::Ae => "AE",
            Mode::SaAs => "SA_AS",
            Mode::AeAs => "AE_AS",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().to_ascii_uppercase().replace(['+', '-'], "_");
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| Error::InvalidParams(format!("unknown mode `{s}` (expected SA, AE, SA_AS or AE_AS)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TunerParams {
    pub mode: Mode,
    pub iterations: usize,
    /// Maximum number of measurements in one run.
    pub total_budget: usize,
    pub rng_seed: u64,
    /// Random valid configurations scored while the cost model is untrusted.
    pub cold_start_pool: usize,
    /// Best-predicted candidates handed to clustering in adaptive modes.
    pub sample_pool: usize,
    /// Measurements needed before the cost model guides exploration.
    pub min_training_size: usize,
    pub sa: SaParams,
    pub ppo: PpoParams,
    pub sampling: SamplingParams,
    pub gbt: GbtParams,
}

impl Default for TunerParams {
    fn default() -> Self {
        Self {
            mode: Mode::AeAs,
            iterations: 16,
            total_budget: 1000,
            rng_seed: 0,
            cold_start_pool: 512,
            sample_pool: 128,
            min_training_size: crate::cost_model::DEFAULT_MIN_TRAINING_SIZE,
            sa: SaParams::default(),
            ppo: PpoParams::default(),
            sampling: SamplingParams::default(),
            gbt: GbtParams::default(),
        }
    }
}

impl TunerParams {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParams("iterations must be at least 1".into()));
        }
        if self.total_budget < self.sampling.greedy_batch {
            return Err(Error::InvalidParams(format!(
                "total_budget {} is below greedy_batch {}",
                self.total_budget, self.sampling.greedy_batch
            )));
        }
        if self.cold_start_pool == 0 || self.sample_pool == 0 {
            return Err(Error::InvalidParams("cold_start_pool and sample_pool must be positive".into()));
        }
        self.sa.validate()?;
        self.ppo.validate()?;
        self.sampling.validate()?;
        self.gbt.validate()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }
}

/// One row of the convergence trace, appended after every iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub cumulative_measurements: usize,
    pub cumulative_cost_units: f64,
    pub best_fitness_so_far: f64,
    pub best_config_id: Option<u64>,
    /// Exploration transitions taken in this iteration.
    pub exploration_steps_taken: u64,
}

/// Per-iteration detail beyond the trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationLog {
    pub iteration: usize,
    pub cold_start: bool,
    pub num_candidates: usize,
    /// Order-sensitive hash of the ranked candidate ids.
    pub candidate_digest: u64,
    pub sampled: Vec<Configuration>,
    /// Number of clusters chosen in adaptive modes.
    pub k: Option<usize>,
    pub measured: usize,
    pub invalid: usize,
    pub ppo: Option<PpoStats>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub best_config: Configuration,
    pub best_fitness: f64,
    pub best_id: u64,
    pub trace: Vec<TraceRecord>,
    pub iterations: Vec<IterationLog>,
    /// Every measurement in order.
    pub measurements: Vec<MeasurementResult>,
    pub exhausted: bool,
}

impl RunOutcome {
    pub fn total_measurements(&self) -> usize {
        self.measurements.len()
    }

    pub fn total_cost(&self) -> f64 {
        self.trace.last().map_or(0.0, |t| t.cumulative_cost_units)
    }

    pub fn invalid_measurements(&self) -> usize {
        self.measurements.iter().filter(|m| !m.valid).count()
    }

    pub fn total_exploration_steps(&self) -> u64 {
        self.trace.iter().map(|t| t.exploration_steps_taken).sum()
    }
}

fn digest(set: &CandidateSet) -> u64 {
    set.items().iter().fold(0x5151_u64, |h, c| rng::mix64(h ^ c.id))
}

struct Explored {
    candidates: CandidateSet,
    steps: u64,
    trajectories: Vec<crate::exploration::Trajectory>,
}

/// Tunes `space` against `backend` and returns the best valid measured configuration.
pub fn run(space: &DesignSpace, backend: &dyn Backend, params: &TunerParams) -> Result<RunOutcome> {
    params.validate()?;
    let root = params.rng_seed;
    let explore_seed = rng::derive_seed(root, "explore");
    let sample_seed = rng::derive_seed(root, "sample");
    let model_seed = rng::derive_seed(root, "model");
    let ppo_seed = rng::derive_seed(root, "ppo");

    let mut slot = CostModelSlot::with_min_training_size(params.gbt.clone(), params.min_training_size);
    let mut agent = if params.mode.uses_agent() {
        Some(Agent::new(space.num_knobs(), &params.ppo, rng::derive_seed(root, "init"))?)
    } else {
        None
    };

    let mut visited: HashSet<Configuration> = HashSet::new();
    let mut training: Vec<TrainingExample> = Vec::new();
    let mut measurements: Vec<MeasurementResult> = Vec::new();
    let mut trace = Vec::new();
    let mut logs = Vec::new();
    let mut seeds: Vec<Configuration> = Vec::new();
    let mut best: Option<(Configuration, f64, u64)> = None;
    let mut cum_cost = 0.0;
    let mut exhausted = false;

    for iteration in 1..=params.iterations {
        let remaining = params.total_budget - measurements.len();
        if remaining == 0 {
            break;
        }
        let it_index = iteration as u64;

        // Explore.
        let e_seed = rng::derive_indexed(explore_seed, it_index);
        let cold_start = slot.trusted().is_none();
        let explored = match slot.trusted() {
            None => cold_start_candidates(space, params.cold_start_pool, e_seed),
            Some(model) => explore(space, model, agent.as_ref(), params, &seeds, e_seed)?,
        };

        // Sample.
        let s_seed = rng::derive_indexed(sample_seed, it_index);
        let mut k = None;
        let sampled = if params.mode.adaptive_sampling() {
            let mut pool = explored.candidates.clone();
            pool.truncate(params.sample_pool);
            let is_visited = |c: &Configuration| visited.contains(c);
            match adaptive_sample(&pool, &is_visited, &params.sampling, space, &params.sampling.kmeans(), s_seed) {
                Ok(out) => {
                    k = Some(out.k);
                    out.configs
                }
                Err(Error::SpaceExhausted) => {
                    exhausted = true;
                    Vec::new()
                }
                Err(e) => return Err(e),
            }
        } else {
            let mut pool = explored.candidates.clone();
            pool.retain(|c| !visited.contains(&c.config));
            let mut picks = greedy_select(&pool, params.sampling.greedy_batch);
            // Top up with random unmeasured configurations when exploration came up short.
            let mut fill_rng = rng::rng_from(rng::derive_seed(s_seed, "fill"));
            while picks.len() < params.sampling.greedy_batch {
                let taken = |c: &Configuration| visited.contains(c) || picks.contains(c);
                match random_unvisited(space, &taken, &mut fill_rng) {
                    Ok(c) => picks.push(c),
                    Err(Error::SpaceExhausted) => {
                        exhausted = true;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
            picks
        };

        // Measure what is new, within budget.
        let mut to_measure: Vec<Configuration> = Vec::new();
        for c in sampled.iter() {
            if !visited.contains(c) && !to_measure.contains(c) {
                to_measure.push(c.clone());
            }
        }
        to_measure.truncate(remaining);
        let results = measure_batch(backend, space, &to_measure)?;
        let mut invalid = 0;
        for r in &results {
            visited.insert(r.config.clone());
            cum_cost += r.cost_units;
            if !r.valid {
                invalid += 1;
            } else if best.as_ref().is_none_or(|b| r.fitness > b.1) {
                best = Some((r.config.clone(), r.fitness, space.ordinal(&r.config)));
            }
            training.push(TrainingExample::new(space.encode_features(&r.config), r.fitness)?);
        }
        measurements.extend(results.iter().cloned());

        // Refit and learn.
        if !training.is_empty() {
            slot.fit(&training, rng::derive_indexed(model_seed, it_index))?;
        }
        let mut ppo_stats = None;
        if let Some(agent) = agent.as_mut() {
            if !explored.trajectories.is_empty() {
                ppo_stats = Some(ppo_update(
                    agent,
                    &explored.trajectories,
                    &params.ppo,
                    rng::derive_indexed(ppo_seed, it_index),
                )?);
            }
        }

        trace.push(TraceRecord {
            iteration,
            cumulative_measurements: measurements.len(),
            cumulative_cost_units: cum_cost,
            best_fitness_so_far: best.as_ref().map_or(0.0, |b| b.1),
            best_config_id: best.as_ref().map(|b| b.2),
            exploration_steps_taken: explored.steps,
        });
        log::info!(
            "{} iteration {iteration}: {} candidates, measured {} ({} invalid), best {:.6}",
            params.mode,
            explored.candidates.len(),
            results.len(),
            invalid,
            best.as_ref().map_or(0.0, |b| b.1)
        );
        logs.push(IterationLog {
            iteration,
            cold_start,
            num_candidates: explored.candidates.len(),
            candidate_digest: digest(&explored.candidates),
            sampled,
            k,
            measured: results.len(),
            invalid,
            ppo: ppo_stats,
        });
        seeds = to_measure;
        if exhausted {
            break;
        }
    }

    let (best_config, best_fitness, best_id) = best.ok_or(Error::NoValidResult)?;
    Ok(RunOutcome {
        best_config,
        best_fitness,
        best_id,
        trace,
        iterations: logs,
        measurements,
        exhausted,
    })
}

fn cold_start_candidates(space: &DesignSpace, pool: usize, seed: u64) -> Explored {
    let mut r = rng::rng_from(seed);
    let mut scored = Vec::with_capacity(pool);
    for _ in 0..pool {
        let c = space
            .random_valid_config(&mut r, 1000)
            .unwrap_or_else(|| space.random_config(&mut r));
        let score: f64 = r.random();
        scored.push((c, score));
    }
    Explored {
        candidates: CandidateSet::from_scored(space, scored),
        steps: 0,
        trajectories: Vec::new(),
    }
}

fn explore(
    space: &DesignSpace,
    model: &dyn Surrogate,
    agent: Option<&Agent>,
    params: &TunerParams,
    seeds: &[Configuration],
    seed: u64,
) -> Result<Explored> {
    match agent {
        Some(agent) => {
            let batch = run_episodes(space, model, &agent.net, &params.ppo, seeds, seed)?;
            Ok(Explored {
                candidates: batch.candidates,
                steps: batch.steps,
                trajectories: batch.trajectories,
            })
        }
        None => Ok(Explored {
            candidates: sa_search(space, model, seeds, &params.sa, seed),
            steps: params.sa.steps(),
            trajectories: Vec::new(),
        }),
    }
}
