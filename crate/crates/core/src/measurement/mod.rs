//! Fitness measurement backends.
//!
//! A backend stands in for template instantiation plus execution: it receives
//! a configuration and reports a fitness (higher is better), a validity flag
//! and the cost charged to the tuning run.

mod external;
mod spec;
mod synthetic;
mod tabular;

pub use external::ExternalBackend;
pub use spec::BackendSpec;
pub use synthetic::{Peak, SyntheticBackend, SyntheticLandscape, SyntheticLandscapeParams};
pub use tabular::{read_table, write_table, TabularBackend};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{Configuration, DesignSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementResult {
    pub config: Configuration,
    pub fitness: f64,
    pub valid: bool,
    pub cost_units: f64,
}

/// What a backend reports for one configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measured {
    pub fitness: f64,
    pub valid: bool,
    pub cost_units: f64,
}

impl Measured {
    pub fn valid(fitness: f64, cost_units: f64) -> Self {
        Self {
            fitness,
            valid: true,
            cost_units,
        }
    }

    pub fn invalid(cost_units: f64) -> Self {
        Self {
            fitness: 0.0,
            valid: false,
            cost_units,
        }
    }
}

/// Cost charged per measurement. Invalid configurations pay `reset_factor`
/// times the nominal cost, modeling the device reset after a failed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CostPolicy {
    pub nominal_cost: f64,
    pub reset_factor: f64,
}

impl Default for CostPolicy {
    fn default() -> Self {
        Self {
            nominal_cost: 1.0,
            reset_factor: 2.0,
        }
    }
}

impl CostPolicy {
    pub fn invalid_cost(&self) -> f64 {
        self.nominal_cost * self.reset_factor
    }
}

pub trait Backend: Send + Sync {
    /// Measures a configuration that already passed the space's validity rule.
    fn measure(&self, space: &DesignSpace, config: &Configuration) -> Result<Measured>;

    fn cost_policy(&self) -> CostPolicy;

    /// Upper bound on concurrent measurements.
    fn workers(&self) -> usize {
        1
    }
}

/// Measures `configs` in order. Configurations rejected by the space's rule
/// never reach the backend and are charged the reset cost.
pub fn measure_batch(
    backend: &dyn Backend,
    space: &DesignSpace,
    configs: &[Configuration],
) -> Result<Vec<MeasurementResult>> {
    for c in configs {
        space.check(c)?;
    }
    let one = |c: &Configuration| -> Result<MeasurementResult> {
        let m = if space.is_valid(c) {
            backend.measure(space, c)?
        } else {
            Measured::invalid(backend.cost_policy().invalid_cost())
        };
        let fitness = if m.valid { m.fitness } else { 0.0 };
        if !(fitness.is_finite() && fitness >= 0.0 && m.cost_units >= 0.0) {
            return Err(Error::Backend(format!(
                "backend reported fitness {fitness} with cost {} for {c}",
                m.cost_units
            )));
        }
        Ok(MeasurementResult {
            config: c.clone(),
            fitness,
            valid: m.valid,
            cost_units: m.cost_units,
        })
    };

    let workers = backend.workers().max(1).min(configs.len());
    if workers <= 1 {
        return configs.iter().map(one).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<MeasurementResult>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let r = one(&configs[i]);
                slots.lock().expect("measurement slots")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("measurement slots")
        .into_iter()
        .map(|r| r.expect("every slot filled"))
        .collect()
}

/// Exhaustive measurement of a small space.
#[derive(Debug, Clone)]
pub struct BruteForce {
    /// Fitness by ordinal id.
    pub fitness: Vec<f64>,
    pub argmax_id: u64,
    pub max_fitness: f64,
}

pub const DEFAULT_BRUTE_FORCE_CAP: u64 = 1_000_000;

/// Enumerates every configuration, ties for the maximum going to the lowest id.
pub fn brute_force(space: &DesignSpace, backend: &dyn Backend, cap: u64) -> Result<BruteForce> {
    if space.size() > cap {
        return Err(Error::InvalidParams(format!(
            "space has {} configurations, above the brute-force cap of {cap}",
            space.size()
        )));
    }
    let mut fitness = Vec::with_capacity(space.size() as usize);
    const CHUNK: u64 = 4096;
    let mut start = 0;
    while start < space.size() {
        let end = (start + CHUNK).min(space.size());
        let configs: Vec<Configuration> = (start..end)
            .map(|id| space.config_at(id))
            .collect::<Result<_>>()?;
        fitness.extend(measure_batch(backend, space, &configs)?.into_iter().map(|r| r.fitness));
        start = end;
    }
    let (argmax_id, max_fitness) = fitness
        .iter()
        .enumerate()
        .fold((0u64, f64::NEG_INFINITY), |best, (i, &f)| {
            if f > best.1 {
                (i as u64, f)
            } else {
                best
            }
        });
    Ok(BruteForce {
        fitness,
        argmax_id,
        max_fitness,
    })
}
