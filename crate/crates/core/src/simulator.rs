//! Discrete-time engine.
//!
//! Each epoch takes the generated observations for that epoch, overlays the
//! current per-class load, asks a policy for an allocation and derives the
//! next epoch's load from how well each class was served.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocator::{allocate, PolicyKind};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::scenario::{Scenario, TraceModel};
use crate::traffic::{AllocationReport, ResourcePool, TrafficObservation};

/// Observations per epoch, outer index = epoch.
pub type Trace = Vec<Vec<TrafficObservation>>;

/// Largest load a class can carry.
pub const LOAD_CAP: f64 = 1.0 - 1e-6;

const ATTRIBUTES: u64 = 5;

/// Generates the exogenous part of every observation (all fields except load,
/// which is filled with the scenario's initial loads).
///
/// Attribute `a` of class `c` draws from substream `c * 5 + a`, in the order
/// bandwidth, latency, jitter, packet loss, demand.
pub fn generate_trace(scenario: &Scenario) -> Trace {
    let cfg = &scenario.trace;
    let ranges = cfg.ranges();
    let n = scenario.n_classes();

    let mut series: Vec<Vec<[f64; 5]>> = Vec::with_capacity(n);
    for class in 0..n {
        let mut rngs: Vec<SplitMix64> = (0..ATTRIBUTES)
            .map(|a| SplitMix64::substream(scenario.seed, class as u64 * ATTRIBUTES + a))
            .collect();
        let mut current: [f64; 5] = std::array::from_fn(|a| ranges[a].midpoint());
        let mut per_epoch = Vec::with_capacity(scenario.epochs);
        for epoch in 0..scenario.epochs {
            for (a, range) in ranges.iter().enumerate() {
                current[a] = match cfg.model {
                    TraceModel::Constant => range.midpoint(),
                    TraceModel::UniformSample => {
                        let v = rngs[a].uniform(range.min, range.max);
                        v.clamp(range.min, range.max)
                    }
                    TraceModel::BoundedWalk if epoch == 0 => range.midpoint(),
                    TraceModel::BoundedWalk => {
                        let step =
                            (2.0 * rngs[a].unit() - 1.0) * cfg.walk_step_fraction * range.width();
                        let mut v = current[a] + step;
                        if v > range.max {
                            v = 2.0 * range.max - v;
                        } else if v < range.min {
                            v = 2.0 * range.min - v;
                        }
                        v.clamp(range.min, range.max)
                    }
                };
            }
            per_epoch.push(current);
        }
        series.push(per_epoch);
    }

    (0..scenario.epochs)
        .map(|epoch| {
            (0..n)
                .map(|class| {
                    let [bw, lat, jit, loss, demand] = series[class][epoch];
                    TrafficObservation {
                        class_id: class,
                        offered_bandwidth: bw,
                        latency: lat,
                        jitter: jit,
                        packet_loss: loss,
                        demand,
                        load: scenario.initial_load[class],
                    }
                })
                .collect()
        })
        .collect()
}

/// SHA-256 over the bit patterns of every exogenous field, hex encoded.
pub fn trace_fingerprint(trace: &Trace) -> String {
    let mut hasher = Sha256::new();
    for epoch in trace {
        for o in epoch {
            hasher.update((o.class_id as u64).to_le_bytes());
            for v in [
                o.offered_bandwidth,
                o.latency,
                o.jitter,
                o.packet_loss,
                o.demand,
            ] {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
    }
    hex::encode(hasher.finalize())
}

/// Next-epoch load: `u = D / max(A, 1e-9)`, load `= min(LOAD_CAP, u / (1 + u))`.
///
/// A class served exactly its demand sits at 0.5; a starved class saturates.
pub fn update_load(report: &AllocationReport, observations: &[TrafficObservation]) -> Vec<f64> {
    report
        .alloc
        .iter()
        .zip(observations)
        .map(|(a, o)| {
            let u = o.demand / a.max(1e-9);
            (u / (1.0 + u)).min(LOAD_CAP)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub mean_throughput: f64,
    pub min_throughput: f64,
    pub max_throughput: f64,
    pub mean_objective: f64,
    pub mean_effective_throughput: f64,
    /// Epochs in which each class had at least one flag set.
    pub violation_counts: Vec<usize>,
}

impl RunStats {
    fn from_reports(reports: &[AllocationReport], n_classes: usize) -> Self {
        let len = reports.len().max(1) as f64;
        let mut violation_counts = vec![0; n_classes];
        for r in reports {
            for (count, v) in violation_counts.iter_mut().zip(&r.violations) {
                if !v.is_empty() {
                    *count += 1;
                }
            }
        }
        Self {
            mean_throughput: reports.iter().map(|r| r.throughput).sum::<f64>() / len,
            min_throughput: reports
                .iter()
                .map(|r| r.throughput)
                .fold(f64::INFINITY, f64::min),
            max_throughput: reports
                .iter()
                .map(|r| r.throughput)
                .fold(f64::NEG_INFINITY, f64::max),
            mean_objective: reports.iter().map(|r| r.objective).sum::<f64>() / len,
            mean_effective_throughput: reports.iter().map(|r| r.effective_throughput).sum::<f64>()
                / len,
            violation_counts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub fingerprint: String,
    pub trace_fingerprint: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub stats: RunStats,
    pub reports: Vec<AllocationReport>,
}

pub fn run(scenario: &Scenario, policy: PolicyKind) -> Result<SimulationResult> {
    run_on_trace(scenario, policy, &generate_trace(scenario))
}

/// Runs `policy` over a pre-generated trace.
pub fn run_on_trace(
    scenario: &Scenario,
    policy: PolicyKind,
    trace: &Trace,
) -> Result<SimulationResult> {
    let n = scenario.n_classes();
    let mut load = scenario.initial_load.clone();
    let mut reports = Vec::with_capacity(trace.len());
    for (epoch, exogenous) in trace.iter().enumerate() {
        let at_epoch = |e: Error| Error::AtEpoch {
            epoch,
            source: Box::new(e),
        };
        let observations: Vec<TrafficObservation> = exogenous
            .iter()
            .zip(&load)
            .map(|(o, l)| TrafficObservation { load: *l, ..*o })
            .collect();
        let pool = ResourcePool::new(scenario.pool_total, n, epoch).map_err(at_epoch)?;
        let report = allocate(policy, &scenario.classes, &observations, &pool).map_err(at_epoch)?;
        load = update_load(&report, &observations);
        reports.push(report);
    }
    Ok(SimulationResult {
        fingerprint: scenario.fingerprint(),
        trace_fingerprint: trace_fingerprint(trace),
        policy,
        seed: scenario.seed,
        class_names: scenario.classes.iter().map(|c| c.name.clone()).collect(),
        stats: RunStats::from_reports(&reports, n),
        reports,
    })
}

/// Metric differences of one policy against the first policy compared.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDelta {
    pub policy: PolicyKind,
    pub baseline: PolicyKind,
    pub mean_throughput: f64,
    pub mean_objective: f64,
    pub mean_effective_throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub results: Vec<SimulationResult>,
    pub deltas: Vec<PolicyDelta>,
}

/// Runs every policy over one shared trace.
pub fn compare_policies(scenario: &Scenario, policies: &[PolicyKind]) -> Result<Comparison> {
    if policies.len() < 2 {
        return Err(Error::Usage("compare needs at least two policies".into()));
    }
    let trace = generate_trace(scenario);
    let results = policies
        .iter()
        .map(|p| run_on_trace(scenario, *p, &trace))
        .collect::<Result<Vec<_>>>()?;
    let base = &results[0];
    let deltas = results[1..]
        .iter()
        .map(|r| PolicyDelta {
            policy: r.policy,
            baseline: base.policy,
            mean_throughput: r.stats.mean_throughput - base.stats.mean_throughput,
            mean_objective: r.stats.mean_objective - base.stats.mean_objective,
            mean_effective_throughput: r.stats.mean_effective_throughput
                - base.stats.mean_effective_throughput,
        })
        .collect();
    Ok(Comparison { results, deltas })
}
