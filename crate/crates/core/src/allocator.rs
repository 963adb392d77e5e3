//! Allocation policies over a shared resource pool.
//!
//! * [`allocate_static`] splits the pool evenly.
//! * [`allocate_loadbalance`] weights by load headroom and demand.
//! * [`allocate_dynamic`] multiplies six normalized factors (priority,
//!   bandwidth fit, latency sensitivity, demand, QoS, load headroom), scales by
//!   the pool and adds an equal-share baseline, then projects the result back
//!   into the pool.
//! * [`optimal_reference`] solves the priority-weighted objective exactly and
//!   serves as an oracle for the heuristics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::{
    check_constraints, effective_throughput, objective, qos_score, same_len, throughput,
    AllocationReport, ResourcePool, TrafficClass, TrafficObservation, Violations,
};

/// Shares whose denominator falls to this value or below are rejected.
pub const SHARE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolicyKind {
    Static,
    LoadBalanceOnly,
    Dynamic,
    OptimalReference,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        PolicyKind::Static,
        PolicyKind::LoadBalanceOnly,
        PolicyKind::Dynamic,
        PolicyKind::OptimalReference,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Static => "static",
            PolicyKind::LoadBalanceOnly => "loadbalanceonly",
            PolicyKind::Dynamic => "dynamic",
            PolicyKind::OptimalReference => "optimalreference",
        }
    }

    /// Short form used on the command line.
    pub fn short_name(self) -> &'static str {
        match self {
            PolicyKind::Static => "static",
            PolicyKind::LoadBalanceOnly => "lb",
            PolicyKind::Dynamic => "dynamic",
            PolicyKind::OptimalReference => "optimal",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s || p.short_name() == s)
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown policy '{s}' (expected static, lb, dynamic or optimal)"
                ))
            })
    }
}

/// Per-class factors of the dynamic allocation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AllocationBreakdown {
    pub priority_share: f64,
    pub bandwidth_factor: f64,
    pub latency_share: f64,
    pub demand_share: f64,
    pub qos_share: f64,
    pub load_share: f64,
    pub baseline: f64,
    pub raw: f64,
    /// Offered bandwidth was zero and `bandwidth_factor` defaulted to 1.
    pub zero_bandwidth: bool,
}

impl AllocationBreakdown {
    pub fn factor_product(&self) -> f64 {
        self.priority_share
            * self.bandwidth_factor
            * self.latency_share
            * self.demand_share
            * self.qos_share
            * self.load_share
    }
}

fn shares(values: &[f64], factor: &'static str) -> Result<Vec<f64>> {
    let sum: f64 = values.iter().sum();
    if !(sum > SHARE_FLOOR) {
        return Err(Error::Degenerate { factor, sum });
    }
    Ok(values.iter().map(|v| v / sum).collect())
}

fn validate_inputs(classes: &[TrafficClass], observations: &[TrafficObservation]) -> Result<()> {
    same_len("observations", classes.len(), observations.len())?;
    if classes.is_empty() {
        return Err(Error::EmptyInput("no traffic classes"));
    }
    observations
        .iter()
        .try_for_each(TrafficObservation::validate)
}

pub fn allocate_static(pool: &ResourcePool) -> Vec<f64> {
    vec![pool.total / pool.n_classes as f64; pool.n_classes]
}

/// `R * headroom_share_i * demand_share_i`, where headroom is `1 - load`.
pub fn allocate_loadbalance(
    observations: &[TrafficObservation],
    pool: &ResourcePool,
) -> Result<Vec<f64>> {
    if observations.is_empty() {
        return Err(Error::EmptyInput("no observations"));
    }
    observations
        .iter()
        .try_for_each(TrafficObservation::validate)?;
    let headroom: Vec<f64> = observations.iter().map(|o| 1.0 - o.load).collect();
    let demand: Vec<f64> = observations.iter().map(|o| o.demand).collect();
    let headroom = shares(&headroom, "load headroom")?;
    let demand = shares(&demand, "demand")?;
    Ok(headroom
        .iter()
        .zip(&demand)
        .map(|(h, d)| pool.total * h * d)
        .collect())
}

pub fn dynamic_breakdown(
    classes: &[TrafficClass],
    observations: &[TrafficObservation],
    qos: &[f64],
    pool: &ResourcePool,
) -> Result<Vec<AllocationBreakdown>> {
    validate_inputs(classes, observations)?;
    same_len("qos", classes.len(), qos.len())?;
    if let Some(q) = qos.iter().find(|q| !(**q >= 0.0)) {
        return Err(Error::Domain(format!("qos score {q} must be >= 0")));
    }

    let priority = shares(
        &classes.iter().map(|c| c.priority).collect::<Vec<_>>(),
        "priority",
    )?;
    let latency = shares(
        &classes
            .iter()
            .map(|c| c.latency_sensitivity)
            .collect::<Vec<_>>(),
        "latency sensitivity",
    )?;
    let demand = shares(
        &observations.iter().map(|o| o.demand).collect::<Vec<_>>(),
        "demand",
    )?;
    let qos_shares = shares(qos, "qos")?;
    let load = shares(
        &observations
            .iter()
            .map(|o| 1.0 - o.load)
            .collect::<Vec<_>>(),
        "load headroom",
    )?;

    let total = pool.total;
    let baseline = total / pool.n_classes as f64;
    Ok(observations
        .iter()
        .enumerate()
        .map(|(i, obs)| {
            let offered = obs.offered_bandwidth;
            let zero_bandwidth = offered == 0.0;
            let bandwidth_factor = if zero_bandwidth {
                1.0
            } else {
                offered.min(total) / offered
            };
            let mut b = AllocationBreakdown {
                priority_share: priority[i],
                bandwidth_factor,
                latency_share: latency[i],
                demand_share: demand[i],
                qos_share: qos_shares[i],
                load_share: load[i],
                baseline,
                raw: 0.0,
                zero_bandwidth,
            };
            b.raw = total * b.factor_product() + baseline;
            b
        })
        .collect())
}

/// Enforces the aggregate pool bound by uniform rescaling.
///
/// Classes left below their demanded bandwidth are flagged, not topped up.
pub fn project_feasible(
    raw: &[f64],
    classes: &[TrafficClass],
    pool: &ResourcePool,
) -> Result<(Vec<f64>, Vec<Violations>)> {
    same_len("classes", raw.len(), classes.len())?;
    let sum = throughput(raw)?;
    let out: Vec<f64> = if sum <= pool.total {
        raw.to_vec()
    } else {
        let scale = pool.total / sum;
        raw.iter().map(|r| r * scale).collect()
    };
    let flags = out
        .iter()
        .zip(classes)
        .map(|(a, c)| {
            if *a < c.demanded_bandwidth {
                Violations::BELOW_DEMANDED_BANDWIDTH
            } else {
                Violations::empty()
            }
        })
        .collect();
    Ok((out, flags))
}

fn qos_vector(classes: &[TrafficClass], observations: &[TrafficObservation]) -> Result<Vec<f64>> {
    classes
        .iter()
        .zip(observations)
        .map(|(c, o)| qos_score(o, c))
        .collect()
}

fn assemble_report(
    classes: &[TrafficClass],
    observations: &[TrafficObservation],
    pool: &ResourcePool,
    raw_alloc: Vec<f64>,
    alloc: Vec<f64>,
    qos: Vec<f64>,
    extra: &[Violations],
) -> Result<AllocationReport> {
    let violations = alloc
        .iter()
        .zip(observations.iter().zip(classes))
        .zip(extra)
        .map(|((a, (o, c)), x)| check_constraints(*a, o, c, pool) | *x)
        .collect();
    Ok(AllocationReport {
        epoch: pool.epoch,
        throughput_raw: throughput(&raw_alloc)?,
        throughput: throughput(&alloc)?,
        effective_throughput: effective_throughput(&alloc, &qos)?,
        objective: objective(&alloc, observations, classes)?,
        raw_alloc,
        alloc,
        qos,
        violations,
    })
}

pub fn allocate_dynamic(
    classes: &[TrafficClass],
    observations: &[TrafficObservation],
    pool: &ResourcePool,
) -> Result<AllocationReport> {
    validate_inputs(classes, observations)?;
    let qos = qos_vector(classes, observations)?;
    let breakdown = dynamic_breakdown(classes, observations, &qos, pool)?;
    let raw: Vec<f64> = breakdown.iter().map(|b| b.raw).collect();
    let (alloc, _) = project_feasible(&raw, classes, pool)?;
    let extra: Vec<Violations> = breakdown
        .iter()
        .map(|b| {
            if b.zero_bandwidth {
                Violations::ZERO_OFFERED_BANDWIDTH
            } else {
                Violations::empty()
            }
        })
        .collect();
    assemble_report(classes, observations, pool, raw, alloc, qos, &extra)
}

/// Exact maximizer of `sum P_i A_i / D_i` subject to
/// `demanded_bandwidth_i <= A_i <= D_i` and `sum A_i <= R`.
///
/// The problem is a fractional knapsack, so filling classes greedily by
/// `P_i / D_i` (ties by ascending id) is optimal.
pub fn optimal_reference(
    classes: &[TrafficClass],
    observations: &[TrafficObservation],
    pool: &ResourcePool,
) -> Result<Vec<f64>> {
    validate_inputs(classes, observations)?;
    for (c, o) in classes.iter().zip(observations) {
        if c.demanded_bandwidth > o.demand {
            return Err(Error::Infeasible(format!(
                "class {} demands bandwidth {} above its cap {}",
                c.id, c.demanded_bandwidth, o.demand
            )));
        }
    }
    let floor: f64 = classes.iter().map(|c| c.demanded_bandwidth).sum();
    if floor > pool.total {
        return Err(Error::Infeasible(format!(
            "demanded bandwidth {floor} exceeds pool {}",
            pool.total
        )));
    }

    let mut alloc: Vec<f64> = classes.iter().map(|c| c.demanded_bandwidth).collect();
    let mut order: Vec<usize> = (0..classes.len()).collect();
    let gain = |i: usize| classes[i].priority / observations[i].demand;
    // Stable sort keeps ascending index among equal gains.
    order.sort_by(|&a, &b| gain(b).total_cmp(&gain(a)));

    let mut budget = pool.total - floor;
    for i in order {
        if budget <= 0.0 {
            break;
        }
        let room = observations[i].demand - alloc[i];
        let step = room.min(budget);
        alloc[i] += step;
        budget -= step;
    }
    Ok(alloc)
}

/// Runs one policy for one epoch and reports every metric.
///
/// An infeasible reference-optimizer epoch falls back to the demanded lower
/// bounds, rescaled into the pool, with every class flagged.
pub fn allocate(
    policy: PolicyKind,
    classes: &[TrafficClass],
    observations: &[TrafficObservation],
    pool: &ResourcePool,
) -> Result<AllocationReport> {
    let n = classes.len();
    let none = vec![Violations::empty(); n];
    match policy {
        PolicyKind::Dynamic => allocate_dynamic(classes, observations, pool),
        PolicyKind::Static => {
            validate_inputs(classes, observations)?;
            let qos = qos_vector(classes, observations)?;
            let raw = allocate_static(pool);
            same_len("pool classes", n, raw.len())?;
            let (alloc, _) = project_feasible(&raw, classes, pool)?;
            assemble_report(classes, observations, pool, raw, alloc, qos, &none)
        }
        PolicyKind::LoadBalanceOnly => {
            validate_inputs(classes, observations)?;
            let qos = qos_vector(classes, observations)?;
            let raw = allocate_loadbalance(observations, pool)?;
            let (alloc, _) = project_feasible(&raw, classes, pool)?;
            assemble_report(classes, observations, pool, raw, alloc, qos, &none)
        }
        PolicyKind::OptimalReference => {
            let qos = qos_vector(classes, observations)?;
            match optimal_reference(classes, observations, pool) {
                Ok(raw) => {
                    let (alloc, _) = project_feasible(&raw, classes, pool)?;
                    assemble_report(classes, observations, pool, raw, alloc, qos, &none)
                }
                Err(Error::Infeasible(_)) => {
                    let raw: Vec<f64> = classes.iter().map(|c| c.demanded_bandwidth).collect();
                    let (alloc, _) = project_feasible(&raw, classes, pool)?;
                    let flagged = vec![Violations::INFEASIBLE_EPOCH; n];
                    assemble_report(classes, observations, pool, raw, alloc, qos, &flagged)
                }
                Err(e) => Err(e),
            }
        }
    }
}
