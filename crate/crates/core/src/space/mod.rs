//! Discrete design spaces: knobs, configurations and their encodings.

mod rule;

pub use rule::{CmpOp, ValidityRule};

use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One tunable axis with an ordered list of integer settings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Knob {
    pub name: String,
    pub values: Vec<i64>,
}

impl Knob {
    pub fn cardinality(&self) -> usize {
        self.values.len()
    }
}

/// A point in a design space, stored as one value index per knob.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<usize>);

impl Configuration {
    pub fn new(indices: Vec<usize>) -> Self {
        Self(indices)
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn indices_mut(&mut self) -> &mut [usize] {
        &mut self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Per-knob normalized index in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub Vec<f64>);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn squared_distance(&self, other: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Step direction for a single knob.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Decrement,
    Stay,
    Increment,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Decrement, Direction::Stay, Direction::Increment];

    pub fn from_delta(delta: i8) -> Option<Self> {
        match delta {
            -1 => Some(Direction::Decrement),
            0 => Some(Direction::Stay),
            1 => Some(Direction::Increment),
            _ => None,
        }
    }

    pub fn delta(self) -> i8 {
        match self {
            Direction::Decrement => -1,
            Direction::Stay => 0,
            Direction::Increment => 1,
        }
    }

    /// Position in the `{decrement, stay, increment}` triple.
    pub fn slot(self) -> usize {
        (self.delta() + 1) as usize
    }

    pub fn from_slot(slot: usize) -> Self {
        Self::ALL[slot]
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpaceDocument {
    workload: String,
    knobs: Vec<Knob>,
    #[serde(default)]
    validity_rule: Option<String>,
}

#[derive(Serialize)]
struct SpaceDocumentRef<'a> {
    workload: &'a str,
    knobs: &'a [Knob],
    #[serde(skip_serializing_if = "Option::is_none")]
    validity_rule: Option<&'a str>,
}

/// The Cartesian product of a set of knobs, optionally restricted by a rule.
///
/// Immutable once built; all queries are pure.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpace {
    workload: String,
    knobs: Vec<Knob>,
    rule: Option<ValidityRule>,
    size: u64,
}

impl DesignSpace {
    pub fn new(workload: impl Into<String>, knobs: Vec<Knob>, rule: Option<&str>) -> Result<Self> {
        Self::build(workload.into(), knobs, rule, None)
    }

    fn build(
        workload: String,
        knobs: Vec<Knob>,
        rule: Option<&str>,
        source: Option<&str>,
    ) -> Result<Self> {
        let locate = |name: &str| -> String {
            source
                .and_then(|src| {
                    let needle = format!("\"{name}\"");
                    src.find(&needle)
                        .map(|pos| format!(" (line {})", src[..pos].matches('\n').count() + 1))
                })
                .unwrap_or_default()
        };
        if knobs.is_empty() {
            return Err(Error::Space("at least one knob is required".into()));
        }
        let mut size: u64 = 1;
        for (i, knob) in knobs.iter().enumerate() {
            if knob.name.is_empty() {
                return Err(Error::Space(format!("knob #{i} has an empty name")));
            }
            if knobs[..i].iter().any(|k| k.name == knob.name) {
                return Err(Error::Space(format!(
                    "knob `{}`{}: duplicate knob name",
                    knob.name,
                    locate(&knob.name)
                )));
            }
            if knob.values.is_empty() {
                return Err(Error::Space(format!(
                    "knob `{}`{}: values must be non-empty",
                    knob.name,
                    locate(&knob.name)
                )));
            }
            for w in knob.values.windows(2) {
                if w[0] == w[1] {
                    return Err(Error::Space(format!(
                        "knob `{}`{}: duplicate value {}",
                        knob.name,
                        locate(&knob.name),
                        w[0]
                    )));
                }
                if w[0] > w[1] {
                    return Err(Error::Space(format!(
                        "knob `{}`{}: values must be strictly increasing ({} before {})",
                        knob.name,
                        locate(&knob.name),
                        w[0],
                        w[1]
                    )));
                }
            }
            size = size.checked_mul(knob.values.len() as u64).ok_or_else(|| {
                Error::Space(format!(
                    "knob `{}`{}: space size overflows 64 bits",
                    knob.name,
                    locate(&knob.name)
                ))
            })?;
        }
        let names: Vec<&str> = knobs.iter().map(|k| k.name.as_str()).collect();
        let rule = rule.map(|r| ValidityRule::parse(r, &names)).transpose()?;
        Ok(Self {
            workload,
            knobs,
            rule,
            size,
        })
    }

    /// Parses a JSON design-space document.
    pub fn from_json(source: &str) -> Result<Self> {
        let doc: SpaceDocument = serde_json::from_str(source)
            .map_err(|e| Error::Space(format!("schema violation: {e}")))?;
        Self::build(
            doc.workload,
            doc.knobs,
            doc.validity_rule.as_deref(),
            Some(source),
        )
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Space(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&SpaceDocumentRef {
            workload: &self.workload,
            knobs: &self.knobs,
            validity_rule: self.rule.as_ref().map(|r| r.source()),
        })
        .expect("space serializes")
    }

    pub fn workload(&self) -> &str {
        &self.workload
    }

    pub fn knobs(&self) -> &[Knob] {
        &self.knobs
    }

    pub fn num_knobs(&self) -> usize {
        self.knobs.len()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.knobs.iter().map(Knob::cardinality).collect()
    }

    pub fn rule(&self) -> Option<&ValidityRule> {
        self.rule.as_ref()
    }

    /// Number of configurations, ignoring the validity rule.
    pub fn size(&self) -> u64 {
        self.size
    }

    pub fn check(&self, config: &Configuration) -> Result<()> {
        if config.len() != self.knobs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.knobs.len(),
                got: config.len(),
            });
        }
        for (knob, &idx) in self.knobs.iter().zip(config.indices()) {
            if idx >= knob.cardinality() {
                return Err(Error::IndexOutOfRange {
                    knob: knob.name.clone(),
                    index: idx,
                    cardinality: knob.cardinality(),
                });
            }
        }
        Ok(())
    }

    /// Mixed-radix decoding; the last knob varies fastest.
    pub fn config_at(&self, id: u64) -> Result<Configuration> {
        if id >= self.size {
            return Err(Error::OrdinalOutOfRange {
                id,
                size: self.size,
            });
        }
        let mut rest = id;
        let mut indices = vec![0usize; self.knobs.len()];
        for (slot, knob) in indices.iter_mut().zip(&self.knobs).rev() {
            let c = knob.cardinality() as u64;
            *slot = (rest % c) as usize;
            rest /= c;
        }
        Ok(Configuration(indices))
    }

    pub fn id_of(&self, config: &Configuration) -> Result<u64> {
        self.check(config)?;
        Ok(self.ordinal(config))
    }

    /// `id_of` without bounds checks, for configurations known to be in range.
    pub(crate) fn ordinal(&self, config: &Configuration) -> u64 {
        self.knobs
            .iter()
            .zip(config.indices())
            .fold(0u64, |acc, (knob, &i)| acc * knob.cardinality() as u64 + i as u64)
    }

    pub fn values_of(&self, config: &Configuration) -> Vec<i64> {
        self.knobs
            .iter()
            .zip(config.indices())
            .map(|(k, &i)| k.values[i])
            .collect()
    }

    /// True iff `config` satisfies the validity rule (always true without one).
    pub fn validate(&self, config: &Configuration) -> Result<bool> {
        self.check(config)?;
        Ok(self.is_valid(config))
    }

    pub(crate) fn is_valid(&self, config: &Configuration) -> bool {
        match &self.rule {
            None => true,
            Some(rule) => rule.holds(&self.values_of(config)),
        }
    }

    /// Moves one knob by `direction`, saturating at the ends of its range.
    pub fn neighbor(
        &self,
        config: &Configuration,
        knob_index: usize,
        direction: Direction,
    ) -> Configuration {
        let mut out = config.clone();
        self.step_in_place(&mut out, knob_index, direction);
        out
    }

    pub(crate) fn step_in_place(
        &self,
        config: &mut Configuration,
        knob_index: usize,
        direction: Direction,
    ) {
        let top = self.knobs[knob_index].cardinality() - 1;
        let idx = &mut config.0[knob_index];
        *idx = match direction {
            Direction::Decrement => idx.saturating_sub(1),
            Direction::Stay => *idx,
            Direction::Increment => (*idx + 1).min(top),
        };
    }

    pub fn encode_features(&self, config: &Configuration) -> FeatureVector {
        FeatureVector(
            self.knobs
                .iter()
                .zip(config.indices())
                .map(|(k, &i)| {
                    let c = k.cardinality();
                    if c > 1 {
                        i as f64 / (c - 1) as f64
                    } else {
                        0.0
                    }
                })
                .collect(),
        )
    }

    /// Uniformly random configuration, ignoring validity.
    pub fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        Configuration(
            self.knobs
                .iter()
                .map(|k| rng.random_range(0..k.cardinality()))
                .collect(),
        )
    }

    /// Uniformly random valid configuration by rejection; `None` after `max_tries` misses.
    pub fn random_valid_config<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        max_tries: usize,
    ) -> Option<Configuration> {
        (0..max_tries)
            .map(|_| self.random_config(rng))
            .find(|c| self.is_valid(c))
    }
}
