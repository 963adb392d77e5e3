//! Traffic classes, per-epoch observations and the scoring functions built on them:
//! QoS satisfaction, constraint checks, the priority-weighted objective and
//! throughput metrics.

use bitflags::bitflags;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficKind {
    Voip,
    VideoStreaming,
    WebBrowsing,
    FileDownload,
    Custom,
}

/// Static descriptor of one traffic type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficClass {
    pub id: usize,
    pub name: String,
    pub kind: TrafficKind,
    pub priority: f64,
    /// Bandwidth the class requires; the lower bound on its allocation.
    pub demanded_bandwidth: f64,
    /// Dimensionless weight: more sensitive classes get a larger dynamic share.
    pub latency_sensitivity: f64,
    /// ms
    pub max_latency: f64,
    /// ms
    pub max_jitter: f64,
    pub max_packet_loss: f64,
}

impl TrafficClass {
    pub fn validate(&self) -> Result<()> {
        let at = |field: &str| format!("class[{}].{field}", self.id);
        positive(self.priority, &at("priority"))?;
        positive(self.demanded_bandwidth, &at("demanded_bandwidth"))?;
        positive(self.latency_sensitivity, &at("latency_sensitivity"))?;
        positive(self.max_latency, &at("max_latency"))?;
        positive(self.max_jitter, &at("max_jitter"))?;
        if !(0.0..=1.0).contains(&self.max_packet_loss) {
            return Err(Error::Validation(format!(
                "{} must lie in [0, 1] (got {})",
                at("max_packet_loss"),
                self.max_packet_loss
            )));
        }
        Ok(())
    }
}

fn positive(value: f64, field: &str) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Validation(format!(
            "{field} must be > 0 (got {value})"
        )))
    }
}

/// Measured state of one class during one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficObservation {
    pub class_id: usize,
    /// Bandwidth currently offered to / achievable by the class.
    pub offered_bandwidth: f64,
    /// ms
    pub latency: f64,
    /// ms
    pub jitter: f64,
    pub packet_loss: f64,
    pub demand: f64,
    /// In `[0, 1)`.
    pub load: f64,
}

impl TrafficObservation {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| {
            Err(Error::Domain(format!(
                "observation[{}]: {msg}",
                self.class_id
            )))
        };
        if !(self.offered_bandwidth.is_finite() && self.offered_bandwidth >= 0.0) {
            return bad(format!(
                "offered_bandwidth {} must be >= 0",
                self.offered_bandwidth
            ));
        }
        if !(self.latency.is_finite() && self.latency > 0.0) {
            return bad(format!("latency {} must be > 0", self.latency));
        }
        if !(self.jitter.is_finite() && self.jitter > 0.0) {
            return bad(format!("jitter {} must be > 0", self.jitter));
        }
        if !(0.0..=1.0).contains(&self.packet_loss) {
            return bad(format!(
                "packet_loss {} must lie in [0, 1]",
                self.packet_loss
            ));
        }
        if !(self.demand.is_finite() && self.demand > 0.0) {
            return bad(format!("demand {} must be > 0", self.demand));
        }
        if !(0.0..1.0).contains(&self.load) {
            return bad(format!("load {} must lie in [0, 1)", self.load));
        }
        Ok(())
    }
}

/// Total allocatable resource for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourcePool {
    pub total: f64,
    pub n_classes: usize,
    pub epoch: usize,
}

impl ResourcePool {
    pub fn new(total: f64, n_classes: usize, epoch: usize) -> Result<Self> {
        if !(total.is_finite() && total >= 0.0) {
            return Err(Error::Validation(format!(
                "pool total must be >= 0 (got {total})"
            )));
        }
        if n_classes == 0 {
            return Err(Error::Validation("pool needs at least one class".into()));
        }
        Ok(Self {
            total,
            n_classes,
            epoch,
        })
    }
}

bitflags! {
    /// Per-class constraint violations and diagnostics for one epoch.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
    pub struct Violations: u16 {
        const NEGATIVE_ALLOCATION = 1 << 0;
        const EXCEEDS_POOL = 1 << 1;
        const BELOW_DEMANDED_BANDWIDTH = 1 << 2;
        const LATENCY_EXCEEDED = 1 << 3;
        const JITTER_EXCEEDED = 1 << 4;
        const PACKET_LOSS_EXCEEDED = 1 << 5;
        /// Offered bandwidth was zero; the bandwidth factor defaulted to 1.
        const ZERO_OFFERED_BANDWIDTH = 1 << 6;
        /// The reference optimizer had no feasible point and fell back to lower bounds.
        const INFEASIBLE_EPOCH = 1 << 7;
    }
}

/// Everything computed for one epoch under one policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationReport {
    pub epoch: usize,
    /// Policy output before the aggregate pool bound is enforced.
    pub raw_alloc: Vec<f64>,
    pub alloc: Vec<f64>,
    pub qos: Vec<f64>,
    pub throughput_raw: f64,
    pub throughput: f64,
    /// QoS-derated throughput; a simulator metric, not part of the allocation model.
    pub effective_throughput: f64,
    pub objective: f64,
    pub violations: Vec<Violations>,
}

/// Multiplicative satisfaction ratio of bandwidth, latency, jitter and loss.
///
/// Equals 1 when every bound is met exactly with no loss. Not clamped.
pub fn qos_score(obs: &TrafficObservation, cls: &TrafficClass) -> Result<f64> {
    if !(obs.latency > 0.0) {
        return Err(Error::Domain(format!(
            "latency {} must be > 0",
            obs.latency
        )));
    }
    if !(obs.jitter > 0.0) {
        return Err(Error::Domain(format!("jitter {} must be > 0", obs.jitter)));
    }
    if !(cls.demanded_bandwidth > 0.0) {
        return Err(Error::Domain(format!(
            "demanded bandwidth {} must be > 0",
            cls.demanded_bandwidth
        )));
    }
    if !(obs.offered_bandwidth >= 0.0) {
        return Err(Error::Domain(format!(
            "offered bandwidth {} must be >= 0",
            obs.offered_bandwidth
        )));
    }
    if !(0.0..=1.0).contains(&obs.packet_loss) {
        return Err(Error::Domain(format!(
            "packet loss {} must lie in [0, 1]",
            obs.packet_loss
        )));
    }
    Ok((obs.offered_bandwidth / cls.demanded_bandwidth)
        * (cls.max_latency / obs.latency)
        * (cls.max_jitter / obs.jitter)
        * (1.0 - obs.packet_loss))
}

pub fn check_constraints(
    alloc: f64,
    obs: &TrafficObservation,
    cls: &TrafficClass,
    pool: &ResourcePool,
) -> Violations {
    let mut flags = Violations::empty();
    flags.set(Violations::NEGATIVE_ALLOCATION, alloc < 0.0);
    flags.set(Violations::EXCEEDS_POOL, alloc > pool.total);
    flags.set(
        Violations::BELOW_DEMANDED_BANDWIDTH,
        alloc < cls.demanded_bandwidth,
    );
    flags.set(Violations::LATENCY_EXCEEDED, obs.latency > cls.max_latency);
    flags.set(Violations::JITTER_EXCEEDED, obs.jitter > cls.max_jitter);
    flags.set(
        Violations::PACKET_LOSS_EXCEEDED,
        obs.packet_loss > cls.max_packet_loss,
    );
    flags
}

pub(crate) fn same_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            what,
            expected,
            actual,
        })
    }
}

/// Priority-weighted demand satisfaction, `sum_i P_i * A_i / D_i`.
pub fn objective(
    allocs: &[f64],
    observations: &[TrafficObservation],
    classes: &[TrafficClass],
) -> Result<f64> {
    same_len("observations", allocs.len(), observations.len())?;
    same_len("classes", allocs.len(), classes.len())?;
    let mut total = 0.0;
    for ((a, obs), cls) in allocs.iter().zip(observations).zip(classes) {
        if !(obs.demand > 0.0) {
            return Err(Error::Domain(format!(
                "demand {} of class {} must be > 0",
                obs.demand, cls.id
            )));
        }
        total += cls.priority * a / obs.demand;
    }
    Ok(total)
}

/// Sum of allocations.
pub fn throughput(allocs: &[f64]) -> Result<f64> {
    if let Some((i, a)) = allocs.iter().enumerate().find(|(_, a)| !(**a >= 0.0)) {
        return Err(Error::Domain(format!("allocation {i} is negative ({a})")));
    }
    Ok(allocs.iter().sum())
}

/// Fraction of total traffic carried by each class.
pub fn traffic_fractions(allocs: &[f64]) -> Result<Vec<f64>> {
    let total = throughput(allocs)?;
    if !(total > 0.0) {
        return Err(Error::Domain(
            "traffic fractions are undefined when total allocation is zero".into(),
        ));
    }
    Ok(allocs.iter().map(|a| a / total).collect())
}

/// Throughput derated by QoS shortfall: `sum_i A_i * min(1, QoS_i)`.
///
/// Not part of the allocation model itself; it exists so that QoS degradation
/// shows up in a throughput figure.
pub fn effective_throughput(allocs: &[f64], qos: &[f64]) -> Result<f64> {
    same_len("qos", allocs.len(), qos.len())?;
    if let Some(q) = qos.iter().find(|q| !(**q >= 0.0)) {
        return Err(Error::Domain(format!("qos score {q} must be >= 0")));
    }
    Ok(allocs.iter().zip(qos).map(|(a, q)| a * q.min(1.0)).sum())
}
