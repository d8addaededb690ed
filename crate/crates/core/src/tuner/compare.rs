use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{run, Mode, TunerParams};
use crate::error::{Error, Result};
use crate::measurement::Backend;
use crate::space::DesignSpace;

/// Aggregate over the seeds of one mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub mode: Mode,
    pub runs: usize,
    pub mean_best_fitness: f64,
    pub min_best_fitness: f64,
    pub mean_measurements: f64,
    pub mean_cost_units: f64,
    pub mean_invalid_fraction: f64,
    pub mean_exploration_steps: f64,
}

/// Runs every `(mode, seed)` pair and summarizes per mode, in the given mode order.
pub fn compare(
    space: &DesignSpace,
    backend: &dyn Backend,
    base: &TunerParams,
    modes: &[Mode],
    seeds: &[u64],
) -> Result<Vec<CompareRow>> {
    if modes.is_empty() {
        return Err(Error::InvalidParams("compare needs at least one mode".into()));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidParams("compare needs at least one seed".into()));
    }
    let mut rows = Vec::with_capacity(modes.len());
    for &mode in modes {
        let mut best = Vec::new();
        let mut meas = 0.0;
        let mut cost = 0.0;
        let mut invalid = 0.0;
        let mut steps = 0.0;
        for &seed in seeds {
            let params = TunerParams {
                mode,
                rng_seed: seed,
                ..base.clone()
            };
            let out = run(space, backend, &params)?;
            best.push(out.best_fitness);
            let n = out.total_measurements();
            meas += n as f64;
            cost += out.total_cost();
            invalid += out.invalid_measurements() as f64 / n.max(1) as f64;
            steps += out.total_exploration_steps() as f64;
        }
        let runs = seeds.len() as f64;
        rows.push(CompareRow {
            mode,
            runs: seeds.len(),
            mean_best_fitness: best.iter().sum::<f64>() / runs,
            min_best_fitness: best.iter().copied().fold(f64::INFINITY, f64::min),
            mean_measurements: meas / runs,
            mean_cost_units: cost / runs,
            mean_invalid_fraction: invalid / runs,
            mean_exploration_steps: steps / runs,
        });
    }
    Ok(rows)
}

pub fn write_compare_csv(path: impl AsRef<Path>, rows: &[CompareRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
