//! Measurement by spawning an external command per configuration.
//!
//! Protocol: the command receives `{"workload": ..., "knobs": {name: value, ...}}`
//! on standard input and prints `{"runtime_seconds": <positive number>}` on
//! standard output. A nonzero exit status or a timeout marks the
//! configuration invalid.

use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::Duration;

use serde::Deserialize;
use wait_timeout::ChildExt;

use super::{Backend, CostPolicy, Measured};
use crate::error::{Error, Result};
use crate::space::{Configuration, DesignSpace};

#[derive(Debug, Clone)]
pub struct ExternalBackend {
    command: Vec<String>,
    timeout: Duration,
    workers: usize,
    cost: CostPolicy,
}

#[derive(Deserialize)]
struct Reply {
    runtime_seconds: f64,
}

impl ExternalBackend {
    /// `command` is the program followed by its arguments.
    pub fn new(command: Vec<String>, timeout_seconds: f64, workers: usize, cost: CostPolicy) -> Result<Self> {
        if command.is_empty() {
            return Err(Error::InvalidParams("external backend needs a command".into()));
        }
        if !(timeout_seconds > 0.0 && timeout_seconds.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "timeout must be positive, got {timeout_seconds}"
            )));
        }
        Ok(Self {
            command,
            timeout: Duration::from_secs_f64(timeout_seconds),
            workers: workers.max(1),
            cost,
        })
    }

    pub fn request(space: &DesignSpace, config: &Configuration) -> serde_json::Value {
        let knobs: serde_json::Map<String, serde_json::Value> = space
            .knobs()
            .iter()
            .zip(space.values_of(config))
            .map(|(k, v)| (k.name.clone(), v.into()))
            .collect();
        serde_json::json!({ "workload": space.workload(), "knobs": knobs })
    }
}

impl Backend for ExternalBackend {
    fn measure(&self, space: &DesignSpace, config: &Configuration) -> Result<Measured> {
        let payload = serde_json::to_vec(&Self::request(space, config))?;
        let mut child = Command::new(&self.command[0])
            .args(&self.command[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::BackendUnavailable(format!("{}: {e}", self.command[0])))?;

        let mut stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = child.stdout.take().expect("piped stdout");
        let reader = std::thread::spawn(move || {
            let mut buf = String::new();
            stdout.read_to_string(&mut buf).map(|_| buf)
        });
        // A command may exit without reading its input; a broken pipe is not an error here.
        let _ = stdin.write_all(&payload);
        drop(stdin);

        let status = match child.wait_timeout(self.timeout)? {
            Some(status) => status,
            None => {
                let _ = child.kill();
                let _ = child.wait();
                let _ = reader.join();
                return Ok(Measured::invalid(self.cost.invalid_cost()));
            }
        };
        let output = reader
            .join()
            .map_err(|_| Error::Backend("stdout reader panicked".into()))??;
        if !status.success() {
            return Ok(Measured::invalid(self.cost.invalid_cost()));
        }
        let reply: Reply = serde_json::from_str(output.trim()).map_err(|e| {
            Error::Protocol(format!("unparsable reply {:?}: {e}", output.trim()))
        })?;
        if !(reply.runtime_seconds > 0.0 && reply.runtime_seconds.is_finite()) {
            return Err(Error::Protocol(format!(
                "runtime_seconds must be positive, got {}",
                reply.runtime_seconds
            )));
        }
        Ok(Measured::valid(1.0 / reply.runtime_seconds, self.cost.nominal_cost))
    }

    fn cost_policy(&self) -> CostPolicy {
        self.cost
    }

    fn workers(&self) -> usize {
        self.workers
    }
}
