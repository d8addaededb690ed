use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    Backend, CostPolicy, ExternalBackend, SyntheticBackend, SyntheticLandscape,
    SyntheticLandscapeParams, TabularBackend,
};
use crate::error::Result;
use crate::space::DesignSpace;

fn default_timeout() -> f64 {
    60.0
}

fn default_workers() -> usize {
    1
}

/// Backend description file. Relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    Synthetic {
        landscape: SyntheticLandscapeParams,
        #[serde(default)]
        cost: CostPolicy,
    },
    Tabular {
        path: PathBuf,
        #[serde(default)]
        cost: CostPolicy,
    },
    External {
        command: Vec<String>,
        #[serde(default = "default_timeout")]
        timeout_seconds: f64,
        #[serde(default = "default_workers")]
        workers: usize,
        #[serde(default)]
        cost: CostPolicy,
    },
}

impl BackendSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("backend spec serializes")
    }

    /// Instantiates the backend. `workers` overrides the external worker count.
    pub fn build(
        &self,
        space: &DesignSpace,
        base_dir: &Path,
        workers: Option<usize>,
    ) -> Result<Box<dyn Backend>> {
        Ok(match self {
            BackendSpec::Synthetic { landscape, cost } => Box::new(SyntheticBackend::new(
                SyntheticLandscape::new(landscape.clone(), space)?,
                *cost,
            )),
            BackendSpec::Tabular { path, cost } => {
                Box::new(TabularBackend::load(base_dir.join(path), space, *cost)?)
            }
            BackendSpec::External {
                command,
                timeout_seconds,
                workers: w,
                cost,
            } => Box::new(ExternalBackend::new(
                command.clone(),
                *timeout_seconds,
                workers.unwrap_or(*w),
                *cost,
            )?),
        })
    }
}
