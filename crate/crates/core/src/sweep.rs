//! One- and two-dimensional parameter sweeps.
//!
//! Every grid point is evaluated independently from the scenario's nominal
//! observations (range midpoints), so the only thing that varies along an
//! axis is the swept attribute. The `Time` axis instead runs the full
//! simulation and records one row per epoch.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::allocator::{allocate, PolicyKind};
use crate::error::{Error, Result};
use crate::scenario::{RangeSpec, Scenario};
use crate::simulator;
use crate::traffic::{AllocationReport, ResourcePool, TrafficClass, TrafficObservation};

/// Caps the number of threads used for grid evaluation.
pub const THREADS_ENV: &str = "DTA_SIM_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepTarget {
    OfferedBandwidth,
    Latency,
    Jitter,
    PacketLoss,
    DemandedBandwidth,
    LatencySensitivity,
    Priority,
    Time,
}

impl SweepTarget {
    pub const ALL: [SweepTarget; 8] = [
        SweepTarget::OfferedBandwidth,
        SweepTarget::Latency,
        SweepTarget::Jitter,
        SweepTarget::PacketLoss,
        SweepTarget::DemandedBandwidth,
        SweepTarget::LatencySensitivity,
        SweepTarget::Priority,
        SweepTarget::Time,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepTarget::OfferedBandwidth => "offered_bandwidth",
            SweepTarget::Latency => "latency",
            SweepTarget::Jitter => "jitter",
            SweepTarget::PacketLoss => "packet_loss",
            SweepTarget::DemandedBandwidth => "demanded_bandwidth",
            SweepTarget::LatencySensitivity => "latency_sensitivity",
            SweepTarget::Priority => "priority",
            SweepTarget::Time => "time",
        }
    }

    /// Trace range backing this target, if any.
    fn trace_range(self, scenario: &Scenario) -> Option<RangeSpec> {
        let t = &scenario.trace;
        match self {
            SweepTarget::OfferedBandwidth => Some(t.bandwidth),
            SweepTarget::Latency => Some(t.latency),
            SweepTarget::Jitter => Some(t.jitter),
            SweepTarget::PacketLoss => Some(t.packet_loss),
            SweepTarget::Time => Some(RangeSpec::new(
                0.0,
                scenario.epochs.saturating_sub(1) as f64,
                scenario.epochs,
            )),
            _ => None,
        }
    }

    fn check_value(self, v: f64) -> Result<()> {
        let ok = match self {
            SweepTarget::OfferedBandwidth => v >= 0.0,
            SweepTarget::PacketLoss => (0.0..=1.0).contains(&v),
            SweepTarget::Time => true,
            _ => v > 0.0,
        };
        if ok && v.is_finite() {
            Ok(())
        } else {
            Err(Error::Usage(format!(
                "{} axis value {v} is outside the attribute's domain",
                self.name()
            )))
        }
    }
}

impl fmt::Display for SweepTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "bandwidth" {
            return Ok(SweepTarget::OfferedBandwidth);
        }
        SweepTarget::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::Usage(format!("unknown sweep target '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepScope {
    AllClasses,
    SingleClass(usize),
}

/// Scenario-file form of an axis.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisEntry {
    target: SweepTarget,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<usize>,
    min: f64,
    max: f64,
    count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "AxisEntry", into = "AxisEntry")]
pub struct SweepAxis {
    pub target: SweepTarget,
    pub scope: SweepScope,
    pub range: RangeSpec,
}

impl From<AxisEntry> for SweepAxis {
    fn from(e: AxisEntry) -> Self {
        SweepAxis {
            target: e.target,
            scope: e
                .class
                .map_or(SweepScope::AllClasses, SweepScope::SingleClass),
            range: RangeSpec::new(e.min, e.max, e.count),
        }
    }
}

impl From<SweepAxis> for AxisEntry {
    fn from(a: SweepAxis) -> Self {
        AxisEntry {
            target: a.target,
            class: match a.scope {
                SweepScope::AllClasses => None,
                SweepScope::SingleClass(id) => Some(id),
            },
            min: a.range.min,
            max: a.range.max,
            count: a.range.count,
        }
    }
}

impl SweepAxis {
    pub fn new(target: SweepTarget, scope: SweepScope, range: RangeSpec) -> Self {
        Self {
            target,
            scope,
            range,
        }
    }

    pub fn validate(&self, n_classes: usize) -> Result<()> {
        self.range.validate(self.target.name())?;
        if let SweepScope::SingleClass(id) = self.scope {
            if id >= n_classes {
                return Err(Error::Usage(format!(
                    "axis {} targets class {id} but the scenario has {n_classes} classes",
                    self.target
                )));
            }
        }
        if self.target != SweepTarget::Time {
            for v in [self.range.min, self.range.max] {
                self.target.check_value(v)?;
            }
        }
        Ok(())
    }

    /// Resolves an axis spec of the form `target[:class_id]`, taking the
    /// range from `range` when given, else from the scenario's `[[sweep]]`
    /// entries, else from the matching trace range.
    pub fn resolve(scenario: &Scenario, spec: &str, range: Option<RangeSpec>) -> Result<Self> {
        let (name, scope) = match spec.split_once(':') {
            Some((name, id)) => {
                let id = id
                    .parse::<usize>()
                    .map_err(|_| Error::Usage(format!("bad class id in axis '{spec}'")))?;
                (name, SweepScope::SingleClass(id))
            }
            None => (spec, SweepScope::AllClasses),
        };
        let target: SweepTarget = name.parse()?;
        let range = range
            .or_else(|| {
                let declared = |want: SweepScope| {
                    scenario
                        .sweeps
                        .iter()
                        .find(|a| a.target == target && a.scope == want)
                        .map(|a| a.range)
                };
                declared(scope).or_else(|| declared(SweepScope::AllClasses))
            })
            .or_else(|| target.trace_range(scenario))
            .ok_or_else(|| {
                Error::Usage(format!(
                    "no range for axis '{target}': pass one or declare a [[sweep]] entry"
                ))
            })?;
        let axis = SweepAxis::new(target, scope, range);
        axis.validate(scenario.n_classes())?;
        Ok(axis)
    }

    pub fn label(&self) -> String {
        match (self.target, self.scope) {
            (SweepTarget::Time, _) => "epoch".to_string(),
            (t, SweepScope::AllClasses) => t.name().to_string(),
            (t, SweepScope::SingleClass(id)) => format!("{}[{id}]", t.name()),
        }
    }

    fn apply(&self, value: f64, classes: &mut [TrafficClass], obs: &mut [TrafficObservation]) {
        let selected = |i: usize| match self.scope {
            SweepScope::AllClasses => true,
            SweepScope::SingleClass(id) => id == i,
        };
        for (i, (c, o)) in classes.iter_mut().zip(obs.iter_mut()).enumerate() {
            if !selected(i) {
                continue;
            }
            match self.target {
                SweepTarget::OfferedBandwidth => o.offered_bandwidth = value,
                SweepTarget::Latency => o.latency = value,
                SweepTarget::Jitter => o.jitter = value,
                SweepTarget::PacketLoss => o.packet_loss = value,
                SweepTarget::DemandedBandwidth => c.demanded_bandwidth = value,
                SweepTarget::LatencySensitivity => c.latency_sensitivity = value,
                SweepTarget::Priority => c.priority = value,
                SweepTarget::Time => {}
            }
        }
    }
}

/// Rows of axis values followed by metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub policy: PolicyKind,
    pub columns: Vec<String>,
    /// Leading columns that hold axis values.
    pub axis_columns: usize,
    /// Grid points per axis, in column order.
    pub shape: Vec<usize>,
    pub rows: Vec<Vec<f64>>,
}

impl SweepTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn metric_columns(&self) -> &[String] {
        &self.columns[self.axis_columns..]
    }
}

pub(crate) fn metric_columns(n_classes: usize) -> Vec<String> {
    let mut cols: Vec<String> = [
        "throughput_raw",
        "throughput",
        "effective_throughput",
        "objective",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((0..n_classes).map(|i| format!("alloc_{i}")));
    cols.extend((0..n_classes).map(|i| format!("qos_{i}")));
    cols
}

pub(crate) fn metric_row(report: &AllocationReport) -> Vec<f64> {
    let mut row = vec![
        report.throughput_raw,
        report.throughput,
        report.effective_throughput,
        report.objective,
    ];
    row.extend(&report.alloc);
    row.extend(&report.qos);
    row
}

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Usage(format!(
                "{THREADS_ENV} must be a positive integer (got '{v}')"
            ))),
        },
    }
}

/// Evaluates grid points in parallel; output order follows `points`.
fn evaluate_grid<P, F>(points: Vec<P>, eval: F) -> Result<Vec<Vec<f64>>>
where
    P: Send + Sync,
    F: Fn(&P) -> Result<Vec<f64>> + Send + Sync,
{
    let work = || points.par_iter().map(&eval).collect::<Result<Vec<_>>>();
    match thread_cap()? {
        None => work(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Usage(format!("cannot build thread pool: {e}")))?
            .install(work),
    }
}

fn evaluate_point(
    scenario: &Scenario,
    policy: PolicyKind,
    overrides: &[(SweepAxis, f64)],
) -> Result<AllocationReport> {
    let mut classes = scenario.classes.clone();
    let mut obs = scenario.nominal_observations();
    for (axis, v) in overrides {
        axis.apply(*v, &mut classes, &mut obs);
    }
    let pool = ResourcePool::new(scenario.pool_total, classes.len(), 0)?;
    allocate(policy, &classes, &obs, &pool)
}

pub fn sweep1d(scenario: &Scenario, axis: &SweepAxis, policy: PolicyKind) -> Result<SweepTable> {
    axis.validate(scenario.n_classes())?;
    let mut columns = vec![axis.label()];
    columns.extend(metric_columns(scenario.n_classes()));

    let rows = if axis.target == SweepTarget::Time {
        let mut timed = scenario.clone();
        timed.epochs = axis.range.count;
        let result = simulator::run(&timed, policy)?;
        result
            .reports
            .iter()
            .map(|r| {
                let mut row = vec![r.epoch as f64];
                row.extend(metric_row(r));
                row
            })
            .collect()
    } else {
        evaluate_grid(axis.range.grid(), |v| {
            let report = evaluate_point(scenario, policy, &[(*axis, *v)])?;
            let mut row = vec![*v];
            row.extend(metric_row(&report));
            Ok(row)
        })?
    };

    Ok(SweepTable {
        policy,
        columns,
        axis_columns: 1,
        shape: vec![rows.len()],
        rows,
    })
}

/// Cross-product sweep, `axis_a` outer.
pub fn sweep2d(
    scenario: &Scenario,
    axis_a: &SweepAxis,
    axis_b: &SweepAxis,
    policy: PolicyKind,
) -> Result<SweepTable> {
    if axis_a.target == axis_b.target {
        return Err(Error::Usage(format!(
            "2-D sweep needs distinct targets (both are {})",
            axis_a.target
        )));
    }
    if axis_a.target == SweepTarget::Time || axis_b.target == SweepTarget::Time {
        return Err(Error::Usage(
            "the time axis supports 1-D sweeps only".into(),
        ));
    }
    axis_a.validate(scenario.n_classes())?;
    axis_b.validate(scenario.n_classes())?;

    let grid_a = axis_a.range.grid();
    let grid_b = axis_b.range.grid();
    let points: Vec<(f64, f64)> = grid_a
        .iter()
        .flat_map(|a| grid_b.iter().map(move |b| (*a, *b)))
        .collect();
    let rows = evaluate_grid(points, |(a, b)| {
        let report = evaluate_point(scenario, policy, &[(*axis_a, *a), (*axis_b, *b)])?;
        let mut row = vec![*a, *b];
        row.extend(metric_row(&report));
        Ok(row)
    })?;

    let mut columns = vec![axis_a.label(), axis_b.label()];
    columns.extend(metric_columns(scenario.n_classes()));
    Ok(SweepTable {
        policy,
        columns,
        axis_columns: 2,
        shape: vec![grid_a.len(), grid_b.len()],
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::traffic::fixtures::class;

    fn default() -> Scenario {
        Scenario::default_scenario()
    }

    fn axis(target: SweepTarget, min: f64, max: f64, count: usize) -> SweepAxis {
        SweepAxis::new(
            target,
            SweepScope::AllClasses,
            RangeSpec::new(min, max, count),
        )
    }

    fn non_increasing(values: &[f64]) -> bool {
        values
            .windows(2)
            .all(|w| w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0))
    }

    #[test]
    fn packet_loss_sweep_is_non_increasing() {
        let s = default();
        let a = SweepAxis::resolve(&s, "packet_loss", None).unwrap();
        let t = sweep1d(&s, &a, PolicyKind::Dynamic).unwrap();
        assert_eq!(t.rows.len(), 100);
        assert!(non_increasing(&t.column("effective_throughput").unwrap()));
    }

    #[test]
    fn latency_sweep_follows_power_law_at_bounds() {
        // Every other factor exactly at its bound: QoS = 50 / latency.
        let mut s = default();
        s.classes = (0..4).map(class).collect();
        s.trace.bandwidth = RangeSpec::new(10.0, 10.0, 1);
        s.trace.jitter = RangeSpec::new(5.0, 5.0, 1);
        s.trace.packet_loss = RangeSpec::new(0.0, 0.0, 1);
        let s = s.validated().unwrap();
        let t = sweep1d(
            &s,
            &axis(SweepTarget::Latency, 10.0, 100.0, 100),
            PolicyKind::Dynamic,
        )
        .unwrap();
        let lat = t.column("latency").unwrap();
        let eff = t.column("effective_throughput").unwrap();
        let thr = t.column("throughput").unwrap();
        for ((l, e), tp) in lat.iter().zip(&eff).zip(&thr) {
            let expected = tp * (50.0 / l).min(1.0);
            assert!(
                (e - expected).abs() <= 1e-9,
                "latency {l}: {e} vs {expected}"
            );
        }
    }

    #[test]
    fn single_class_bandwidth_sweep_grows_that_class() {
        let mut s = default();
        s.classes = (0..4).map(class).collect();
        let s = s.validated().unwrap();
        let a = SweepAxis::resolve(&s, "offered_bandwidth:2", None).unwrap();
        assert_eq!(a.scope, SweepScope::SingleClass(2));
        let t = sweep1d(&s, &a, PolicyKind::Dynamic).unwrap();
        let alloc = t.column("alloc_2").unwrap();
        assert!(alloc.windows(2).all(|w| w[1] >= w[0]));
        assert!(alloc.last().unwrap() > alloc.first().unwrap());
    }

    #[test]
    fn sweep2d_shape_and_order() {
        let s = default();
        let a = axis(SweepTarget::OfferedBandwidth, 5.0, 15.0, 3);
        let b = axis(SweepTarget::Latency, 10.0, 100.0, 3);
        let t = sweep2d(&s, &a, &b, PolicyKind::Dynamic).unwrap();
        assert_eq!(t.rows.len(), 9);
        assert_eq!(t.shape, vec![3, 3]);
        assert_eq!((t.rows[0][0], t.rows[0][1]), (5.0, 10.0));
        assert_eq!((t.rows[1][0], t.rows[1][1]), (5.0, 55.0));
        assert_eq!((t.rows[3][0], t.rows[3][1]), (10.0, 10.0));
    }

    #[test]
    fn sweep2d_degenerate_axis_reduces_to_1d() {
        let s = default();
        let a = axis(SweepTarget::OfferedBandwidth, 12.0, 12.0, 1);
        let b = axis(SweepTarget::Latency, 10.0, 100.0, 7);
        let two = sweep2d(&s, &a, &b, PolicyKind::Dynamic).unwrap();
        let mut fixed = s.clone();
        fixed.trace.bandwidth = RangeSpec::new(12.0, 12.0, 1);
        let one = sweep1d(&fixed, &b, PolicyKind::Dynamic).unwrap();
        for (r2, r1) in two.rows.iter().zip(&one.rows) {
            assert_eq!(&r2[1..], &r1[..]);
        }
    }

    #[test]
    fn sweep2d_bandwidth_rows_non_decreasing() {
        let s = default();
        let a = axis(SweepTarget::Latency, 10.0, 100.0, 10);
        let b = axis(SweepTarget::OfferedBandwidth, 5.0, 15.0, 10);
        let t = sweep2d(&s, &a, &b, PolicyKind::Dynamic).unwrap();
        let eff = t.column("effective_throughput").unwrap();
        for row in eff.chunks(10) {
            assert!(row
                .windows(2)
                .all(|w| w[1] >= w[0] - 1e-12 * w[0].abs().max(1.0)));
        }
    }

    #[test]
    fn sweep2d_rejects_same_target() {
        let s = default();
        let a = axis(SweepTarget::Latency, 10.0, 100.0, 3);
        assert!(sweep2d(&s, &a, &a, PolicyKind::Dynamic).is_err());
    }

    #[test]
    fn time_axis_runs_simulation() {
        let s = default();
        let a = SweepAxis::resolve(&s, "time", None).unwrap();
        let t = sweep1d(&s, &a, PolicyKind::Dynamic).unwrap();
        assert_eq!(t.rows.len(), 200);
        assert_eq!(t.columns[0], "epoch");
        assert_eq!(t.rows[199][0], 199.0);
    }

    #[test]
    fn resolve_uses_declared_and_trace_ranges() {
        let s = default();
        let p = SweepAxis::resolve(&s, "priority", None).unwrap();
        assert_eq!(p.range, RangeSpec::new(0.1, 1.0, 10));
        let l = SweepAxis::resolve(&s, "latency", None).unwrap();
        assert_eq!(l.range, s.trace.latency);
        let given = SweepAxis::resolve(&s, "latency", Some(RangeSpec::new(1.0, 2.0, 2))).unwrap();
        assert_eq!(given.range.count, 2);
        assert!(SweepAxis::resolve(&s, "latency:9", None).is_err());
        assert!(SweepAxis::resolve(&s, "warp", None).is_err());
    }

    #[test]
    fn resolve_without_range_fails() {
        let mut s = default();
        s.sweeps.clear();
        assert!(SweepAxis::resolve(&s, "priority", None).is_err());
    }

    #[test]
    fn sweeps_do_not_mutate_scenario() {
        let s = default();
        let before = s.clone();
        let a = SweepAxis::resolve(&s, "jitter", None).unwrap();
        let first = sweep1d(&s, &a, PolicyKind::Dynamic).unwrap();
        let second = sweep1d(&s, &a, PolicyKind::Dynamic).unwrap();
        assert_eq!(s, before);
        assert_eq!(first, second);
    }

    #[test]
    fn table_has_no_missing_cells() {
        let s = default();
        let a = SweepAxis::resolve(&s, "latency_sensitivity:0", None).unwrap();
        let t = sweep1d(&s, &a, PolicyKind::LoadBalanceOnly).unwrap();
        assert!(t.rows.iter().all(|r| r.len() == t.columns.len()));
        assert!(t.rows.iter().flatten().all(|v| v.is_finite()));
    }
}
