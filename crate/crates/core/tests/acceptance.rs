//! Acceptance criteria, one line of output per criterion.
//!
//! Runs without the libtest harness so the PASS/FAIL table is always printed.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use dta_core::allocator::{
    allocate_dynamic, allocate_static, dynamic_breakdown, optimal_reference,
};
use dta_core::report::plateau_statistic;
use dta_core::rng::SplitMix64;
use dta_core::scenario::TraceModel;
use dta_core::sweep::{sweep1d, SweepAxis};
use dta_core::traffic::{
    objective, qos_score, ResourcePool, TrafficClass, TrafficKind, TrafficObservation,
};
use dta_core::{compare_policies, simulator, PolicyKind, RangeSpec, Scenario};

/// Mean objective of Dynamic minus Static on the bundled scenario, seed 42, 200 epochs.
const GOLDEN_OBJECTIVE_MARGIN: f64 = 0.000760290647;
const GOLDEN_TOLERANCE: f64 = 1e-9;
const PLATEAU_THRESHOLD: f64 = 0.05;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn table_class(id: usize) -> TrafficClass {
    TrafficClass {
        id,
        name: format!("class{id}"),
        kind: TrafficKind::Custom,
        priority: 0.5,
        demanded_bandwidth: 10.0,
        latency_sensitivity: 1.0,
        max_latency: 50.0,
        max_jitter: 5.0,
        max_packet_loss: 0.05,
    }
}

fn table_observation(class_id: usize) -> TrafficObservation {
    TrafficObservation {
        class_id,
        offered_bandwidth: 10.0,
        latency: 30.0,
        jitter: 2.0,
        packet_loss: 0.0,
        demand: 10.0,
        load: 0.0,
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn qos_exactness() -> Outcome {
    let q = qos_score(&table_observation(0), &table_class(0)).map_err(|e| e.to_string())?;
    let rel = ((q - 25.0 / 6.0) / (25.0 / 6.0)).abs();
    let at_bounds = TrafficObservation {
        latency: 50.0,
        jitter: 5.0,
        ..table_observation(0)
    };
    let one = qos_score(&at_bounds, &table_class(0)).map_err(|e| e.to_string())?;
    check(
        rel <= 1e-12 && one == 1.0,
        format!("qos={q:.15} rel_err={rel:.1e}; at-bounds qos={one}"),
    )
}

fn qos_monotonicity() -> Outcome {
    let cls = table_class(0);
    let mut rng = SplitMix64::new(0xACCE_0002);
    let mut failures = 0;
    for i in 0..10_000 {
        let base = TrafficObservation {
            offered_bandwidth: rng.uniform(0.01, 100.0),
            latency: rng.uniform(0.01, 500.0),
            jitter: rng.uniform(0.01, 50.0),
            packet_loss: rng.uniform(0.0, 0.99),
            ..table_observation(0)
        };
        let bump = rng.uniform(1.001, 3.0);
        let (changed, should_increase) = match i % 4 {
            0 => (
                TrafficObservation {
                    offered_bandwidth: base.offered_bandwidth * bump,
                    ..base
                },
                true,
            ),
            1 => (
                TrafficObservation {
                    latency: base.latency * bump,
                    ..base
                },
                false,
            ),
            2 => (
                TrafficObservation {
                    jitter: base.jitter * bump,
                    ..base
                },
                false,
            ),
            _ => (
                TrafficObservation {
                    packet_loss: base.packet_loss
                        + (1.0 - base.packet_loss) * rng.uniform(0.001, 0.5),
                    ..base
                },
                false,
            ),
        };
        let before = qos_score(&base, &cls).map_err(|e| e.to_string())?;
        let after = qos_score(&changed, &cls).map_err(|e| e.to_string())?;
        let ok = if should_increase {
            after > before
        } else {
            after < before
        };
        if !ok {
            failures += 1;
        }
    }
    check(
        failures == 0,
        format!("10000 pairs, {failures} direction failures"),
    )
}

fn symmetry_collapse() -> Outcome {
    let mut worst: f64 = 0.0;
    for n in 1..=8 {
        let classes: Vec<_> = (0..n).map(table_class).collect();
        let obs: Vec<_> = (0..n).map(table_observation).collect();
        let pool = ResourcePool::new(50.0, n, 0).map_err(|e| e.to_string())?;
        let dynamic = allocate_dynamic(&classes, &obs, &pool).map_err(|e| e.to_string())?;
        for (d, s) in dynamic.alloc.iter().zip(allocate_static(&pool)) {
            worst = worst.max((d - s).abs());
        }
    }
    check(
        worst <= 1e-9,
        format!("N=1..8, max |dynamic - static| = {worst:.1e}"),
    )
}

fn two_class_hand_check() -> Outcome {
    let classes = vec![
        TrafficClass {
            priority: 0.6,
            latency_sensitivity: 3.0,
            ..table_class(0)
        },
        TrafficClass {
            priority: 0.4,
            latency_sensitivity: 1.0,
            ..table_class(1)
        },
    ];
    let obs = vec![
        TrafficObservation {
            load: 0.2,
            ..table_observation(0)
        },
        TrafficObservation {
            load: 0.6,
            ..table_observation(1)
        },
    ];
    let pool = ResourcePool::new(20.0, 2, 0).map_err(|e| e.to_string())?;
    let b = dynamic_breakdown(&classes, &obs, &[1.0, 1.0], &pool).map_err(|e| e.to_string())?;
    let report = allocate_dynamic(&classes, &obs, &pool).map_err(|e| e.to_string())?;
    // Hand evaluation: 20*0.6*1*0.75*0.5*0.5*(2/3) + 10 = 11.5 and
    // 20*0.4*1*0.25*0.5*0.5*(1/3) + 10 = 61/6; projected by 20 / (65/3).
    let raw_ok = (b[0].raw - 11.5).abs() <= 1e-9 && (b[1].raw - 10.1666667).abs() <= 1e-7;
    let raw_exact = (b[1].raw - 61.0 / 6.0).abs() <= 1e-9;
    let proj_ok =
        (report.alloc[0] - 10.6153846).abs() <= 1e-6 && (report.alloc[1] - 9.3846154).abs() <= 1e-6;
    check(
        raw_ok && raw_exact && proj_ok,
        format!(
            "raw=({:.9}, {:.9}) projected=({:.9}, {:.9})",
            b[0].raw, b[1].raw, report.alloc[0], report.alloc[1]
        ),
    )
}

fn random_scenario(rng: &mut SplitMix64, seed: u64) -> Scenario {
    let mut s = Scenario::default_scenario();
    let n = 1 + (rng.next_u64() % 6) as usize;
    s.classes = (0..n)
        .map(|i| TrafficClass {
            priority: rng.uniform(0.01, 2.0),
            demanded_bandwidth: rng.uniform(0.5, 20.0),
            latency_sensitivity: rng.uniform(0.1, 10.0),
            max_latency: rng.uniform(5.0, 150.0),
            max_jitter: rng.uniform(0.5, 20.0),
            max_packet_loss: rng.uniform(0.0, 0.2),
            ..table_class(i)
        })
        .collect();
    s.initial_load = (0..n).map(|_| rng.uniform(0.0, 0.99)).collect();
    s.pool_total = rng.uniform(0.0, 200.0);
    s.epochs = 50;
    s.seed = seed;
    s.trace.model = match rng.next_u64() % 3 {
        0 => TraceModel::Constant,
        1 => TraceModel::UniformSample,
        _ => TraceModel::BoundedWalk,
    };
    s.trace.walk_step_fraction = rng.uniform(0.01, 1.0);
    let mut range = |lo: f64, hi: f64| {
        let a = rng.uniform(lo, hi);
        let b = rng.uniform(lo, hi);
        RangeSpec::new(a.min(b), a.max(b), 10)
    };
    s.trace.bandwidth = range(0.1, 80.0);
    s.trace.latency = range(1.0, 200.0);
    s.trace.jitter = range(0.05, 20.0);
    s.trace.packet_loss = range(0.0, 0.5);
    s.trace.demand = range(0.5, 40.0);
    s.sweeps.clear();
    s.validated().expect("generated scenario is valid")
}

fn feasibility() -> Outcome {
    let mut rng = SplitMix64::new(0xACCE_0005);
    let mut checked = 0usize;
    let mut violations = 0usize;
    for k in 0..1000 {
        let s = random_scenario(&mut rng, k);
        let trace = simulator::generate_trace(&s);
        for policy in PolicyKind::ALL {
            let result = simulator::run_on_trace(&s, policy, &trace)
                .map_err(|e| format!("scenario {k} {policy}: {e}"))?;
            for r in &result.reports {
                checked += 1;
                let sum: f64 = r.alloc.iter().sum();
                if sum > s.pool_total + 1e-9 || r.alloc.iter().any(|a| *a < 0.0) {
                    violations += 1;
                }
            }
        }
    }
    check(
        violations == 0,
        format!("{checked} policy-epochs, {violations} bound violations"),
    )
}

/// Exhaustive search over allocations in steps of 0.1, all quantities held in tenths.
fn brute_force(priority: &[f64], floor: &[i64], cap: &[i64], budget: i64) -> f64 {
    fn go(
        i: usize,
        left: i64,
        priority: &[f64],
        floor: &[i64],
        cap: &[i64],
        acc: f64,
        best: &mut f64,
    ) {
        if i == floor.len() {
            *best = best.max(acc);
            return;
        }
        let mut a = floor[i];
        while a <= cap[i] && a <= left {
            let gain = priority[i] * a as f64 / cap[i] as f64;
            go(i + 1, left - a, priority, floor, cap, acc + gain, best);
            a += 1;
        }
    }
    let mut best = f64::NEG_INFINITY;
    go(0, budget, priority, floor, cap, 0.0, &mut best);
    best
}

fn oracle_equivalence() -> Outcome {
    let mut rng = SplitMix64::new(0xACCE_0006);
    let mut worst_gap: f64 = 0.0;
    for k in 0..100 {
        let n = 1 + (rng.next_u64() % 3) as usize;
        let floor: Vec<i64> = (0..n).map(|_| 1 + (rng.next_u64() % 30) as i64).collect();
        let cap: Vec<i64> = floor
            .iter()
            .map(|f| f + (rng.next_u64() % 30) as i64)
            .collect();
        let budget = floor.iter().sum::<i64>() + (rng.next_u64() % 60) as i64;
        let priority: Vec<f64> = (0..n).map(|_| rng.uniform(0.05, 1.0)).collect();

        let classes: Vec<TrafficClass> = (0..n)
            .map(|i| TrafficClass {
                priority: priority[i],
                demanded_bandwidth: floor[i] as f64 / 10.0,
                ..table_class(i)
            })
            .collect();
        let obs: Vec<TrafficObservation> = (0..n)
            .map(|i| TrafficObservation {
                demand: cap[i] as f64 / 10.0,
                ..table_observation(i)
            })
            .collect();
        let pool = ResourcePool::new(budget as f64 / 10.0, n, 0).map_err(|e| e.to_string())?;
        let alloc =
            optimal_reference(&classes, &obs, &pool).map_err(|e| format!("instance {k}: {e}"))?;
        let opt = objective(&alloc, &obs, &classes).map_err(|e| e.to_string())?;
        let brute = brute_force(&priority, &floor, &cap, budget);
        let step = (0..n)
            .map(|i| priority[i] * 0.1 / obs[i].demand)
            .fold(0.0, f64::max);
        let gap = (opt - brute).abs();
        worst_gap = worst_gap.max(gap);
        if gap > step || brute > opt + 1e-9 {
            return Err(format!(
                "instance {k}: optimal {opt} vs brute force {brute} (step {step})"
            ));
        }
    }
    check(
        true,
        format!("100 instances, max |optimal - brute force| = {worst_gap:.1e}"),
    )
}

fn policy_direction() -> Outcome {
    let mut s = Scenario::default_scenario();
    s.seed = 42;
    s.epochs = 200;
    let cmp = compare_policies(&s, &[PolicyKind::Static, PolicyKind::Dynamic])
        .map_err(|e| e.to_string())?;
    let margin = cmp.deltas[0].mean_objective;
    check(
        margin > 0.0 && (margin - GOLDEN_OBJECTIVE_MARGIN).abs() <= GOLDEN_TOLERANCE,
        format!(
            "dynamic - static mean objective = {margin:.12} (golden {GOLDEN_OBJECTIVE_MARGIN})"
        ),
    )
}

fn figure_directions() -> Outcome {
    let s = Scenario::default_scenario();
    let mut details = Vec::new();
    let mut ok = true;
    for (axis, increasing) in [
        ("packet_loss", false),
        ("jitter", false),
        ("latency", false),
        ("offered_bandwidth", true),
    ] {
        let a = SweepAxis::resolve(&s, axis, None).map_err(|e| e.to_string())?;
        let t = sweep1d(&s, &a, PolicyKind::Dynamic).map_err(|e| e.to_string())?;
        let eff = t.column("effective_throughput").expect("metric column");
        // Relative slack of 1e-12 absorbs last-bit rounding in the projection.
        let bad = eff
            .windows(2)
            .filter(|w| {
                let slack = 1e-12 * w[0].abs().max(1.0);
                if increasing {
                    w[1] < w[0] - slack
                } else {
                    w[1] > w[0] + slack
                }
            })
            .count();
        ok &= bad == 0;
        details.push(format!(
            "{axis} {}->{} ({} pts, {bad} bad)",
            eff[0],
            eff[eff.len() - 1],
            eff.len()
        ));
    }
    check(ok, details.join("; "))
}

fn plateau_shape() -> Outcome {
    let s = Scenario::default_scenario();
    let r = simulator::run(&s, PolicyKind::Dynamic).map_err(|e| e.to_string())?;
    let throughput: Vec<f64> = r.reports.iter().map(|x| x.throughput).collect();
    let cv = plateau_statistic(&throughput);
    check(
        r.reports.len() == 200 && cv < PLATEAU_THRESHOLD,
        format!(
            "CV over last 50 of {} epochs = {cv:.3e} (< {PLATEAU_THRESHOLD})",
            r.reports.len()
        ),
    )
}

fn dir_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let p = e.expect("entry").path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).expect("artifact"),
            )
        })
        .collect();
    files.sort();
    files
}

fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let scenario = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/default.scenario");
    let mut outs = Vec::new();
    for name in ["first", "second"] {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_dta-sim"))
            .arg("compare")
            .arg(&scenario)
            .args(["--policies", "static,dynamic", "--seed", "42", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!(
                "compare exited with {:?}: {}",
                status.status.code(),
                String::from_utf8_lossy(&status.stderr)
            ));
        }
        outs.push(dir_files(&out));
    }
    let kinds = ["csv", "svg", "manifest.json"];
    let covered = kinds
        .iter()
        .all(|k| outs[0].iter().any(|(n, _)| n.ends_with(k)));
    check(
        covered && outs[0] == outs[1],
        format!("{} artifacts byte-identical across two runs", outs[0].len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("1 QoS exactness", qos_exactness, Duration::from_secs(1)),
        (
            "2 QoS monotonicity",
            qos_monotonicity,
            Duration::from_secs(1),
        ),
        (
            "3 symmetry collapse",
            symmetry_collapse,
            Duration::from_secs(1),
        ),
        (
            "4 dynamic allocation hand-check",
            two_class_hand_check,
            Duration::from_secs(1),
        ),
        ("5 feasibility", feasibility, Duration::from_secs(10)),
        (
            "6 oracle equivalence",
            oracle_equivalence,
            Duration::from_secs(30),
        ),
        (
            "7 policy comparison direction",
            policy_direction,
            Duration::from_secs(5),
        ),
        (
            "8 figure directions",
            figure_directions,
            Duration::from_secs(5),
        ),
        ("9 plateau shape", plateau_shape, Duration::from_secs(5)),
        ("10 determinism", cli_determinism, Duration::from_secs(10)),
    ];

    let mut failed = 0;
    for (name, criterion, budget) in criteria {
        let start = Instant::now();
        let outcome = criterion();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > budget => Err(format!("{d}; exceeded {budget:?} budget")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS  criterion {name}: {detail} [{elapsed:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  criterion {name}: {detail} [{elapsed:.2?}]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
