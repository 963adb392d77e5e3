//! `dta-sim` command line.
//!
//! Every command that produces artifacts writes them under `--out` together
//! with `manifest.json`, which records the scenario fingerprint, the effective
//! seed, the policies involved and a SHA-256 checksum of every artifact.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::allocator::PolicyKind;
use crate::error::{Error, Result};
use crate::report::{self, ChartKind, ChartSpec};
use crate::scenario::{parse_scenario, RangeSpec, Scenario};
use crate::simulator::{self, Comparison, SimulationResult};
use crate::sweep::{self, SweepAxis, SweepTable};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "dta-sim",
    version,
    about = "Dynamic traffic allocation simulator"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenario epoch count.
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a scenario file.
    Validate {
        scenario: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Simulate one policy over the scenario's trace.
    Run {
        scenario: PathBuf,
        /// static, lb, dynamic or optimal.
        #[arg(long, default_value = "dynamic")]
        policy: String,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Simulate several policies over one shared trace.
    Compare {
        scenario: PathBuf,
        /// Comma-separated policies; the first is the baseline for deltas.
        #[arg(long, default_value = "static,dynamic")]
        policies: String,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep one or two attributes and tabulate every metric.
    Sweep {
        scenario: PathBuf,
        /// Axis as target[:class_id], e.g. latency or priority:0.
        #[arg(long)]
        axis: String,
        /// Grid for --axis as min,max,count.
        #[arg(long)]
        range: Option<String>,
        /// Second axis for a 2-D sweep.
        #[arg(long)]
        axis2: Option<String>,
        /// Grid for --axis2 as min,max,count.
        #[arg(long)]
        range2: Option<String>,
        #[arg(long, default_value = "dynamic")]
        policy: String,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Summarize saved simulation results.
    Report {
        #[arg(required = true)]
        results: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub scenario_fingerprints: Vec<String>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub policies: Vec<PolicyKind>,
    pub axes: Vec<String>,
    /// File name to SHA-256 hex digest.
    pub artifacts: BTreeMap<String, String>,
}

impl Manifest {
    fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            scenario_fingerprints: Vec::new(),
            seed: None,
            epochs: None,
            policies: Vec::new(),
            axes: Vec::new(),
            artifacts: BTreeMap::new(),
        }
    }

    fn for_scenario(command: &str, scenario: &Scenario) -> Self {
        Self {
            scenario_fingerprints: vec![scenario.fingerprint()],
            seed: Some(scenario.seed),
            epochs: Some(scenario.epochs),
            ..Self::new(command)
        }
    }
}

/// Output directory that tracks what has been written to it.
struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.root.join(name)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    fn csv(&mut self, name: &str, table: &SweepTable) -> Result<()> {
        let path = self.path(name);
        report::emit_csv(table, path).map(drop)
    }

    fn svg(&mut self, name: &str, table: &SweepTable, chart: &ChartSpec) -> Result<()> {
        let path = self.path(name);
        report::emit_svg(table, chart, path).map(drop)
    }

    fn finish(self, mut manifest: Manifest) -> Result<PathBuf> {
        for name in &self.written {
            let path = self.root.join(name);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            manifest
                .artifacts
                .insert(name.clone(), hex::encode(Sha256::digest(&bytes)));
        }
        let path = self.root.join("manifest.json");
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        Ok(self.root)
    }
}

fn load_scenario(path: &Path, overrides: &Overrides) -> Result<Scenario> {
    let mut scenario = parse_scenario(path)?;
    if let Some(seed) = overrides.seed {
        scenario.seed = seed;
    }
    if let Some(epochs) = overrides.epochs {
        scenario.epochs = epochs;
    }
    scenario.validated()
}

fn parse_range(text: &str) -> Result<RangeSpec> {
    let bad = || Error::Usage(format!("range '{text}' must be min,max,count"));
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let [min, max, count] = parts.as_slice() else {
        return Err(bad());
    };
    Ok(RangeSpec::new(
        min.parse().map_err(|_| bad())?,
        max.parse().map_err(|_| bad())?,
        count.parse().map_err(|_| bad())?,
    ))
}

fn parse_policies(text: &str) -> Result<Vec<PolicyKind>> {
    text.split(',')
        .map(|p| p.trim().parse::<PolicyKind>())
        .collect()
}

/// One row per epoch: epoch index followed by every metric.
pub fn epoch_table(result: &SimulationResult) -> SweepTable {
    let mut columns = vec!["epoch".to_string()];
    columns.extend(sweep::metric_columns(result.class_names.len()));
    let rows: Vec<Vec<f64>> = result
        .reports
        .iter()
        .map(|r| {
            let mut row = vec![r.epoch as f64];
            row.extend(sweep::metric_row(r));
            row
        })
        .collect();
    SweepTable {
        policy: result.policy,
        shape: vec![rows.len()],
        columns,
        axis_columns: 1,
        rows,
    }
}

/// Per-epoch `metric` for several results side by side.
fn overlay_table(results: &[(String, &SimulationResult)], metric: &str) -> SweepTable {
    let len = results
        .iter()
        .map(|(_, r)| r.reports.len())
        .min()
        .unwrap_or(0);
    let mut columns = vec!["epoch".to_string()];
    columns.extend(results.iter().map(|(label, _)| format!("{metric}.{label}")));
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|t| {
            let mut row = vec![t as f64];
            for (_, r) in results {
                let rep = &r.reports[t];
                row.push(match metric {
                    "objective" => rep.objective,
                    "throughput" => rep.throughput,
                    _ => rep.effective_throughput,
                });
            }
            row
        })
        .collect();
    SweepTable {
        policy: results
            .first()
            .map_or(PolicyKind::Static, |(_, r)| r.policy),
        shape: vec![rows.len()],
        columns,
        axis_columns: 1,
        rows,
    }
}

fn overlay_chart(table: &SweepTable, title: &str) -> ChartSpec {
    ChartSpec {
        title: title.to_string(),
        kind: ChartKind::Line {
            metrics: table.metric_columns().to_vec(),
        },
    }
}

fn labels(policies: &[PolicyKind]) -> Vec<String> {
    let unique = policies
        .iter()
        .enumerate()
        .all(|(i, p)| !policies[..i].contains(p));
    policies
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if unique {
                p.short_name().to_string()
            } else {
                format!("{i}_{}", p.short_name())
            }
        })
        .collect()
}

fn cmd_run(path: &Path, policy: &str, overrides: &Overrides, out: &Path) -> Result<String> {
    let scenario = load_scenario(path, overrides)?;
    let policy: PolicyKind = policy.parse()?;
    let result = simulator::run(&scenario, policy)?;
    let summary = report::summarize(std::slice::from_ref(&result))?;

    let mut dir = OutDir::create(out)?;
    dir.json("result.json", &result)?;
    let table = epoch_table(&result);
    dir.csv("epochs.csv", &table)?;
    let chart = ChartSpec {
        title: format!("{policy}: throughput per epoch"),
        kind: ChartKind::Line {
            metrics: vec!["throughput".into(), "effective_throughput".into()],
        },
    };
    dir.svg("epochs.svg", &table, &chart)?;
    dir.json("summary.json", &summary)?;
    let mut manifest = Manifest::for_scenario("run", &scenario);
    manifest.policies = vec![policy];
    let root = dir.finish(manifest)?;

    let s = &summary.policies[0];
    Ok(format!(
        "{policy}: mean throughput {}, mean objective {}, mean effective throughput {} -> {}",
        report::format_float(s.mean_throughput),
        report::format_float(s.mean_objective),
        report::format_float(s.mean_effective_throughput),
        root.display()
    ))
}

fn write_comparison_csv(path: &Path, labels: &[String], cmp: &Comparison) -> Result<u64> {
    let header: Vec<String> = [
        "policy",
        "mean_throughput",
        "mean_objective",
        "mean_effective_throughput",
        "delta_mean_throughput",
        "delta_mean_objective",
        "delta_mean_effective_throughput",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let records = cmp.results.iter().enumerate().map(|(i, r)| {
        let deltas = match i {
            0 => [0.0; 3],
            _ => {
                let d = &cmp.deltas[i - 1];
                [
                    d.mean_throughput,
                    d.mean_objective,
                    d.mean_effective_throughput,
                ]
            }
        };
        let mut rec = vec![
            labels[i].clone(),
            report::format_float(r.stats.mean_throughput),
            report::format_float(r.stats.mean_objective),
            report::format_float(r.stats.mean_effective_throughput),
        ];
        rec.extend(deltas.iter().map(|v| report::format_float(*v)));
        rec
    });
    report::write_csv(path, &header, records)
}

fn cmd_compare(path: &Path, policies: &str, overrides: &Overrides, out: &Path) -> Result<String> {
    let scenario = load_scenario(path, overrides)?;
    let policies = parse_policies(policies)?;
    let cmp = simulator::compare_policies(&scenario, &policies)?;
    let labels = labels(&policies);
    let summary = report::summarize(&cmp.results)?;

    let mut dir = OutDir::create(out)?;
    for (label, result) in labels.iter().zip(&cmp.results) {
        dir.json(&format!("result_{label}.json"), result)?;
        dir.csv(&format!("epochs_{label}.csv"), &epoch_table(result))?;
    }
    let csv_path = dir.path("comparison.csv");
    write_comparison_csv(&csv_path, &labels, &cmp)?;
    let pairs: Vec<(String, &SimulationResult)> =
        labels.iter().cloned().zip(cmp.results.iter()).collect();
    for (metric, name) in [
        ("effective_throughput", "compare_effective_throughput.svg"),
        ("objective", "compare_objective.svg"),
    ] {
        let table = overlay_table(&pairs, metric);
        dir.svg(
            name,
            &table,
            &overlay_chart(&table, &format!("{metric} per epoch")),
        )?;
    }
    dir.json("summary.json", &summary)?;
    let mut manifest = Manifest::for_scenario("compare", &scenario);
    manifest.policies = policies;
    let root = dir.finish(manifest)?;

    let mut lines: Vec<String> = cmp
        .deltas
        .iter()
        .map(|d| {
            format!(
                "{} vs {}: mean objective delta {}, mean effective throughput delta {}",
                d.policy,
                d.baseline,
                report::format_float(d.mean_objective),
                report::format_float(d.mean_effective_throughput),
            )
        })
        .collect();
    lines.push(format!("artifacts -> {}", root.display()));
    Ok(lines.join("\n"))
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    path: &Path,
    axis: &str,
    range: Option<&str>,
    axis2: Option<&str>,
    range2: Option<&str>,
    policy: &str,
    overrides: &Overrides,
    out: &Path,
) -> Result<String> {
    let scenario = load_scenario(path, overrides)?;
    let policy: PolicyKind = policy.parse()?;
    let range = range.map(parse_range).transpose()?;
    let axis_a = SweepAxis::resolve(&scenario, axis, range)?;
    let (table, axes) = match axis2 {
        None => (
            sweep::sweep1d(&scenario, &axis_a, policy)?,
            vec![axis_a.label()],
        ),
        Some(spec) => {
            let range2 = range2.map(parse_range).transpose()?;
            let axis_b = SweepAxis::resolve(&scenario, spec, range2)?;
            (
                sweep::sweep2d(&scenario, &axis_a, &axis_b, policy)?,
                vec![axis_a.label(), axis_b.label()],
            )
        }
    };
    let mut dir = OutDir::create(out)?;
    dir.csv("sweep.csv", &table)?;
    let title = format!("{policy}: effective_throughput over {}", axes.join(" x "));
    dir.svg("sweep.svg", &table, &ChartSpec::default_for(&table, title))?;
    let mut manifest = Manifest::for_scenario("sweep", &scenario);
    manifest.policies = vec![policy];
    manifest.axes = axes;
    let root = dir.finish(manifest)?;
    Ok(format!("{} rows -> {}", table.rows.len(), root.display()))
}

fn cmd_report(paths: &[PathBuf], out: &Path) -> Result<String> {
    let results = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<SimulationResult>(&text).map_err(|e| Error::Parse {
                path: p.clone(),
                message: e.to_string(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = report::summarize(&results)?;

    let mut dir = OutDir::create(out)?;
    dir.json("summary.json", &summary)?;
    let csv_path = dir.path("summary.csv");
    report::emit_summary_csv(&summary, &csv_path)?;
    let pairs: Vec<(String, &SimulationResult)> = results
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("{i}_{}", r.policy.short_name()), r))
        .collect();
    let table = overlay_table(&pairs, "effective_throughput");
    if !table.rows.is_empty() {
        dir.svg(
            "report.svg",
            &table,
            &overlay_chart(&table, "effective_throughput per epoch"),
        )?;
    }
    let mut manifest = Manifest::new("report");
    for r in &results {
        if !manifest.scenario_fingerprints.contains(&r.fingerprint) {
            manifest.scenario_fingerprints.push(r.fingerprint.clone());
        }
    }
    manifest.policies = results.iter().map(|r| r.policy).collect();
    let root = dir.finish(manifest)?;
    Ok(format!(
        "summarized {} result(s) -> {}",
        results.len(),
        root.display()
    ))
}

pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Validate {
            scenario,
            overrides,
        } => {
            let s = load_scenario(scenario, overrides)?;
            Ok(format!(
                "ok: {} classes, {} epochs, seed {}, fingerprint {}",
                s.n_classes(),
                s.epochs,
                s.seed,
                s.fingerprint()
            ))
        }
        Command::Run {
            scenario,
            policy,
            overrides,
            out,
        } => cmd_run(scenario, policy, overrides, out),
        Command::Compare {
            scenario,
            policies,
            overrides,
            out,
        } => cmd_compare(scenario, policies, overrides, out),
        Command::Sweep {
            scenario,
            axis,
            range,
            axis2,
            range2,
            policy,
            overrides,
            out,
        } => cmd_sweep(
            scenario,
            axis,
            range.as_deref(),
            axis2.as_deref(),
            range2.as_deref(),
            policy,
            overrides,
            out,
        ),
        Command::Report { results, out } => cmd_report(results, out),
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(message) => {
            println!("{message}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            if e.is_user_error() {
                EXIT_USAGE
            } else {
                EXIT_RUNTIME
            }
        }
    }
}
