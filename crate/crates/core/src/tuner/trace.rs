use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Mode, RunOutcome, TraceRecord};
use crate::error::Result;
use crate::space::DesignSpace;

pub const TRACE_HEADER: &str =
    "iteration,cum_measurements,cum_cost,best_fitness,best_config_id,explore_steps";

/// Renders the trace as CSV text; an id column is empty until a valid result exists.
pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for t in trace {
        let id = t.best_config_id.map(|i| i.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            t.iteration,
            t.cumulative_measurements,
            t.cumulative_cost_units,
            t.best_fitness_so_far,
            id,
            t.exploration_steps_taken
        ));
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &[TraceRecord]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(trace_csv(trace).as_bytes())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub workload: String,
    pub mode: Mode,
    pub rng_seed: u64,
    pub best_fitness: f64,
    pub best_config_id: u64,
    pub best_indices: Vec<usize>,
    pub best_knobs: BTreeMap<String, i64>,
    pub iterations_run: usize,
    pub measurements: usize,
    pub invalid_measurements: usize,
    pub cost_units: f64,
    pub exploration_steps: u64,
    pub space_exhausted: bool,
}

impl RunSummary {
    pub fn new(space: &DesignSpace, mode: Mode, rng_seed: u64, outcome: &RunOutcome) -> Self {
        let values = space.values_of(&outcome.best_config);
        Self {
            workload: space.workload().to_string(),
            mode,
            rng_seed,
            best_fitness: outcome.best_fitness,
            best_config_id: outcome.best_id,
            best_indices: outcome.best_config.indices().to_vec(),
            best_knobs: space
                .knobs()
                .iter()
                .zip(values)
                .map(|(k, v)| (k.name.clone(), v))
                .collect(),
            iterations_run: outcome.trace.len(),
            measurements: outcome.total_measurements(),
            invalid_measurements: outcome.invalid_measurements(),
            cost_units: outcome.total_cost(),
            exploration_steps: outcome.total_exploration_steps(),
            space_exhausted: outcome.exhausted,
        }
    }
}

pub fn write_summary(path: impl AsRef<Path>, summary: &RunSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
