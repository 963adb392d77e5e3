//! Scenario files.
//!
//! A scenario is a TOML document carrying a `format_version`, the pool size,
//! the traffic classes, the trace-generation configuration, optional sweep
//! axes and free-form metadata. Unknown keys are rejected. See
//! `scenarios/default.scenario` for an annotated example.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::sweep::SweepAxis;
use crate::traffic::{TrafficClass, TrafficObservation};

pub const FORMAT_VERSION: u32 = 1;

const DEFAULT_SCENARIO: &str = include_str!("../scenarios/default.scenario");

/// `count` evenly spaced values from `min` to `max` inclusive when used as a
/// sweep grid; sampling bounds `[min, max]` when used by the trace generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeSpec {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl RangeSpec {
    pub fn new(min: f64, max: f64, count: usize) -> Self {
        Self { min, max, count }
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite()) {
            return Err(Error::Validation(format!("{field}: bounds must be finite")));
        }
        if self.min > self.max {
            return Err(Error::Validation(format!(
                "{field}: min {} exceeds max {}",
                self.min, self.max
            )));
        }
        if self.count == 0 {
            return Err(Error::Validation(format!("{field}: count must be >= 1")));
        }
        Ok(())
    }

    pub fn midpoint(&self) -> f64 {
        self.min + 0.5 * (self.max - self.min)
    }

    pub fn width(&self) -> f64 {
        self.max - self.min
    }

    /// Inclusive evenly spaced grid; a single point sits at `min`.
    pub fn grid(&self) -> Vec<f64> {
        if self.count <= 1 {
            return vec![self.min];
        }
        let last = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.max
                } else {
                    self.min + self.width() * (i as f64 / last)
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceModel {
    Constant,
    UniformSample,
    BoundedWalk,
}

fn default_walk_step() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub model: TraceModel,
    #[serde(default = "default_walk_step")]
    pub walk_step_fraction: f64,
    pub bandwidth: RangeSpec,
    pub latency: RangeSpec,
    pub jitter: RangeSpec,
    pub packet_loss: RangeSpec,
    pub demand: RangeSpec,
}

impl TraceConfig {
    /// Ranges in stream order: bandwidth, latency, jitter, packet loss, demand.
    pub fn ranges(&self) -> [RangeSpec; 5] {
        [
            self.bandwidth,
            self.latency,
            self.jitter,
            self.packet_loss,
            self.demand,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Bool(bool),
    Integer(i64),
    Float(f64),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format_version: u32,
    pub pool_total: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Starting load per class; omitted means zero for every class.
    #[serde(default)]
    pub initial_load: Vec<f64>,
    pub trace: TraceConfig,
    /// Values kept for the record but not used by any computation.
    #[serde(default)]
    pub metadata: BTreeMap<String, MetaValue>,
    #[serde(rename = "class")]
    pub classes: Vec<TrafficClass>,
    #[serde(rename = "sweep", default)]
    pub sweeps: Vec<SweepAxis>,
}

impl Scenario {
    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        scenario.validated()
    }

    /// The bundled scenario built from the reference parameter table.
    pub fn default_scenario() -> Self {
        Self::from_toml_str(DEFAULT_SCENARIO, Path::new("default.scenario"))
            .expect("bundled scenario is valid")
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Checks every invariant and returns the scenario in canonical form:
    /// classes sorted by id and `initial_load` filled in.
    pub fn validated(mut self) -> Result<Self> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Validation(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if !(self.pool_total.is_finite() && self.pool_total >= 0.0) {
            return Err(Error::Validation(format!(
                "pool_total must be >= 0 (got {})",
                self.pool_total
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Validation("epochs must be >= 1".into()));
        }
        if self.classes.is_empty() {
            return Err(Error::Validation(
                "at least one [[class]] is required".into(),
            ));
        }

        let n = self.classes.len();
        let mut seen = vec![false; n];
        for c in &self.classes {
            if c.id >= n {
                return Err(Error::Validation(format!(
                    "class ids must be contiguous from 0; found id {} among {n} classes",
                    c.id
                )));
            }
            if std::mem::replace(&mut seen[c.id], true) {
                return Err(Error::Validation(format!("duplicate class id {}", c.id)));
            }
            c.validate()?;
        }
        self.classes.sort_by_key(|c| c.id);

        if self.initial_load.is_empty() {
            self.initial_load = vec![0.0; n];
        } else if self.initial_load.len() != n {
            return Err(Error::Validation(format!(
                "initial_load has {} entries for {n} classes",
                self.initial_load.len()
            )));
        }
        for (i, l) in self.initial_load.iter().enumerate() {
            if !(0.0..1.0).contains(l) {
                return Err(Error::Validation(format!(
                    "initial_load[{i}] must lie in [0, 1) (got {l})"
                )));
            }
        }

        let t = &self.trace;
        if !(t.walk_step_fraction > 0.0 && t.walk_step_fraction <= 1.0) {
            return Err(Error::Validation(format!(
                "trace.walk_step_fraction must lie in (0, 1] (got {})",
                t.walk_step_fraction
            )));
        }
        t.bandwidth.validate("trace.bandwidth")?;
        t.latency.validate("trace.latency")?;
        t.jitter.validate("trace.jitter")?;
        t.packet_loss.validate("trace.packet_loss")?;
        t.demand.validate("trace.demand")?;
        if t.bandwidth.min < 0.0 {
            return Err(Error::Validation("trace.bandwidth.min must be >= 0".into()));
        }
        if t.latency.min <= 0.0 {
            return Err(Error::Validation("trace.latency.min must be > 0".into()));
        }
        if t.jitter.min <= 0.0 {
            return Err(Error::Validation("trace.jitter.min must be > 0".into()));
        }
        if t.packet_loss.min < 0.0 || t.packet_loss.max > 1.0 {
            return Err(Error::Validation(
                "trace.packet_loss must lie within [0, 1]".into(),
            ));
        }
        if t.demand.min <= 0.0 {
            return Err(Error::Validation("trace.demand.min must be > 0".into()));
        }

        for (i, axis) in self.sweeps.iter().enumerate() {
            axis.validate(n).map_err(|e| match e {
                Error::Validation(m) | Error::Usage(m) => {
                    Error::Validation(format!("sweep[{i}]: {m}"))
                }
                other => other,
            })?;
        }
        Ok(self)
    }

    /// Observations at the midpoint of every trace range, with the initial loads.
    pub fn nominal_observations(&self) -> Vec<TrafficObservation> {
        let t = &self.trace;
        (0..self.n_classes())
            .map(|i| TrafficObservation {
                class_id: i,
                offered_bandwidth: t.bandwidth.midpoint(),
                latency: t.latency.midpoint(),
                jitter: t.jitter.midpoint(),
                packet_loss: t.packet_loss.midpoint(),
                demand: t.demand.midpoint(),
                load: self.initial_load[i],
            })
            .collect()
    }

    /// SHA-256 over the canonical JSON form, hex encoded.
    pub fn fingerprint(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("scenario serializes");
        hex::encode(Sha256::digest(&canonical))
    }
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Scenario::from_toml_str(&text, path)
}
