//! CSV and SVG emission, and run summaries.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::allocator::PolicyKind;
use crate::error::{Error, Result};
use crate::simulator::SimulationResult;
use crate::sweep::SweepTable;

pub const SVG_WIDTH: u32 = 800;
pub const SVG_HEIGHT: u32 = 500;

const FOOTER: &str = "Directional reproduction under this scenario's own parameters; \
effective_throughput is a simulator-defined QoS-derated metric.";

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Formats `x` with 9 significant digits, `%.9g` style.
pub fn format_float(x: f64) -> String {
    format_sig(x, 9)
}

fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes header and records as LF-terminated CSV; returns the bytes written.
pub fn write_csv<I>(path: &Path, header: &[String], records: I) -> Result<u64>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::io(path, std::io::Error::other(e));
    writer.write_record(header).map_err(csv_err)?;
    for record in records {
        writer.write_record(&record).map_err(csv_err)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
    Ok(bytes.len() as u64)
}

pub fn emit_csv(table: &SweepTable, path: impl AsRef<Path>) -> Result<u64> {
    let records = table
        .rows
        .iter()
        .map(|row| row.iter().map(|v| format_float(*v)).collect());
    write_csv(path.as_ref(), &table.columns, records)
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChartKind {
    /// One polyline per metric column against the first axis column.
    Line { metrics: Vec<String> },
    /// Cells colored by one metric over a 2-D grid.
    Heatmap { metric: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartSpec {
    pub title: String,
    pub kind: ChartKind,
}

impl ChartSpec {
    /// Effective throughput as a line (1-D) or heatmap (2-D).
    pub fn default_for(table: &SweepTable, title: impl Into<String>) -> Self {
        let metric = "effective_throughput".to_string();
        let kind = if table.axis_columns >= 2 {
            ChartKind::Heatmap { metric }
        } else {
            ChartKind::Line {
                metrics: vec![metric],
            }
        };
        Self {
            title: title.into(),
            kind,
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.05 };
        (lo - pad, hi + pad)
    } else {
        (lo, hi)
    }
}

const LEFT: f64 = 90.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 90.0;

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_WIDTH}" height="{SVG_HEIGHT}" viewBox="0 0 {SVG_WIDTH} {SVG_HEIGHT}" font-family="sans-serif" font-size="12">
<text x="{}" y="28" text-anchor="middle" font-size="16">{}</text>"#,
        SVG_WIDTH / 2,
        escape(title)
    );
}

fn footer(out: &mut String) {
    let _ = writeln!(
        out,
        r##"<text x="10" y="{}" font-size="10" fill="#555">{}</text>
</svg>"##,
        SVG_HEIGHT - 8,
        escape(FOOTER)
    );
}

fn axes(out: &mut String, x_label: &str, y_label: &str, x: (f64, f64), y: (f64, f64)) {
    let (w, h) = (SVG_WIDTH as f64, SVG_HEIGHT as f64);
    let (x0, x1, y0, y1) = (LEFT, w - RIGHT, TOP, h - BOTTOM);
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>
<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let px = x0 + f * (x1 - x0);
        let py = y1 - f * (y1 - y0);
        let _ = writeln!(
            out,
            r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>
<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            y1 + 16.0,
            format_sig(x.0 + f * (x.1 - x.0), 4),
            x0 - 6.0,
            py + 4.0,
            format_sig(y.0 + f * (y.1 - y.0), 4),
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>
<text x="20" y="{:.2}" text-anchor="middle" transform="rotate(-90 20 {:.2})">{}</text>"#,
        (x0 + x1) / 2.0,
        y1 + 40.0,
        escape(x_label),
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label),
    );
}

fn column_index(table: &SweepTable, name: &str) -> Result<usize> {
    table
        .columns
        .iter()
        .position(|c| c == name)
        .ok_or_else(|| Error::Usage(format!("table has no column '{name}'")))
}

fn line_chart(table: &SweepTable, title: &str, metrics: &[String]) -> Result<String> {
    if metrics.is_empty() {
        return Err(Error::Usage("line chart needs at least one metric".into()));
    }
    let idx: Vec<usize> = metrics
        .iter()
        .map(|m| column_index(table, m))
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = table.rows.iter().map(|r| r[0]).collect();
    let x_ext = extent(xs.iter().copied());
    let y_ext = extent(
        table
            .rows
            .iter()
            .flat_map(|r| idx.iter().map(move |i| r[*i])),
    );
    let (w, h) = (SVG_WIDTH as f64, SVG_HEIGHT as f64);
    let sx = |v: f64| LEFT + (v - x_ext.0) / (x_ext.1 - x_ext.0) * (w - RIGHT - LEFT);
    let sy = |v: f64| (h - BOTTOM) - (v - y_ext.0) / (y_ext.1 - y_ext.0) * (h - BOTTOM - TOP);

    let mut out = String::new();
    header(&mut out, title);
    let y_label = if metrics.len() == 1 {
        metrics[0].as_str()
    } else {
        "value"
    };
    axes(&mut out, &table.columns[0], y_label, x_ext, y_ext);
    for (k, (name, col)) in metrics.iter().zip(&idx).enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = table
            .rows
            .iter()
            .map(|r| format!("{:.2},{:.2}", sx(r[0]), sy(r[*col])))
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>
<text x="{:.2}" y="{:.2}" fill="{color}">{}</text>"#,
            points.join(" "),
            w - RIGHT + 10.0,
            TOP + 14.0 + 16.0 * k as f64,
            escape(name)
        );
    }
    footer(&mut out);
    Ok(out)
}

fn heat_color(t: f64) -> String {
    // Dark purple to yellow.
    let lerp = |a: f64, b: f64| (a + (b - a) * t.clamp(0.0, 1.0)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        lerp(68.0, 253.0),
        lerp(1.0, 231.0),
        lerp(84.0, 37.0)
    )
}

fn heatmap(table: &SweepTable, title: &str, metric: &str) -> Result<String> {
    if table.axis_columns < 2 || table.shape.len() < 2 {
        return Err(Error::Usage("heatmap needs a 2-D table".into()));
    }
    let col = column_index(table, metric)?;
    let (na, nb) = (table.shape[0], table.shape[1]);
    if na * nb != table.rows.len() {
        return Err(Error::Usage("table shape does not match its rows".into()));
    }
    let a_ext = extent(table.rows.iter().map(|r| r[0]));
    let b_ext = extent(table.rows.iter().map(|r| r[1]));
    let (lo, hi) = extent(table.rows.iter().map(|r| r[col]));

    let (w, h) = (SVG_WIDTH as f64, SVG_HEIGHT as f64);
    let cell_w = (w - RIGHT - LEFT) / nb as f64;
    let cell_h = (h - BOTTOM - TOP) / na as f64;

    let mut out = String::new();
    header(&mut out, title);
    for (k, row) in table.rows.iter().enumerate() {
        let (ia, ib) = (k / nb, k % nb);
        let x = LEFT + ib as f64 * cell_w;
        let y = (h - BOTTOM) - (ia + 1) as f64 * cell_h;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{cell_w:.2}" height="{cell_h:.2}" fill="{}"/>"#,
            heat_color((row[col] - lo) / (hi - lo))
        );
    }
    axes(&mut out, &table.columns[1], &table.columns[0], b_ext, a_ext);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}">{}</text>
<text x="{:.2}" y="{:.2}" fill="{}">max {}</text>
<text x="{:.2}" y="{:.2}" fill="{}">min {}</text>"#,
        w - RIGHT + 10.0,
        TOP + 14.0,
        escape(metric),
        w - RIGHT + 10.0,
        TOP + 32.0,
        heat_color(1.0),
        format_sig(hi, 6),
        w - RIGHT + 10.0,
        TOP + 50.0,
        heat_color(0.0),
        format_sig(lo, 6),
    );
    footer(&mut out);
    Ok(out)
}

/// Renders `table` as a standalone SVG document.
pub fn render_svg(table: &SweepTable, chart: &ChartSpec) -> Result<String> {
    if table.rows.is_empty() {
        return Err(Error::EmptyInput("cannot chart an empty table"));
    }
    match &chart.kind {
        ChartKind::Line { metrics } => line_chart(table, &chart.title, metrics),
        ChartKind::Heatmap { metric } => heatmap(table, &chart.title, metric),
    }
}

pub fn emit_svg(table: &SweepTable, chart: &ChartSpec, path: impl AsRef<Path>) -> Result<u64> {
    let path = path.as_ref();
    let svg = render_svg(table, chart)?;
    fs::write(path, svg.as_bytes()).map_err(|e| Error::io(path, e))?;
    Ok(svg.len() as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: PolicyKind,
    pub fingerprint: String,
    pub epochs: usize,
    pub mean_throughput: f64,
    pub min_throughput: f64,
    pub max_throughput: f64,
    pub mean_objective: f64,
    pub mean_effective_throughput: f64,
    pub mean_qos: Vec<f64>,
    pub total_violations: usize,
    /// Coefficient of variation of throughput over the final quarter of epochs.
    pub plateau_cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub policies: Vec<PolicySummary>,
}

/// Population coefficient of variation; 0 for a constant or all-zero series.
pub fn coefficient_of_variation(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    if var == 0.0 {
        0.0
    } else {
        var.sqrt() / mean.abs()
    }
}

pub fn plateau_statistic(throughputs: &[f64]) -> f64 {
    let tail = throughputs.len().div_ceil(4).max(1).min(throughputs.len());
    coefficient_of_variation(&throughputs[throughputs.len() - tail..])
}

pub fn summarize(results: &[SimulationResult]) -> Result<Summary> {
    if results.is_empty() {
        return Err(Error::EmptyInput("no simulation results to summarize"));
    }
    let policies = results
        .iter()
        .map(|r| {
            let n_classes = r.class_names.len();
            let epochs = r.reports.len().max(1) as f64;
            let mut mean_qos = vec![0.0; n_classes];
            for rep in &r.reports {
                for (m, q) in mean_qos.iter_mut().zip(&rep.qos) {
                    *m += q;
                }
            }
            mean_qos.iter_mut().for_each(|m| *m /= epochs);
            let throughputs: Vec<f64> = r.reports.iter().map(|x| x.throughput).collect();
            PolicySummary {
                policy: r.policy,
                fingerprint: r.fingerprint.clone(),
                epochs: r.reports.len(),
                mean_throughput: r.stats.mean_throughput,
                min_throughput: r.stats.min_throughput,
                max_throughput: r.stats.max_throughput,
                mean_objective: r.stats.mean_objective,
                mean_effective_throughput: r.stats.mean_effective_throughput,
                mean_qos,
                total_violations: r.stats.violation_counts.iter().sum(),
                plateau_cv: plateau_statistic(&throughputs),
            }
        })
        .collect();
    Ok(Summary { policies })
}

pub fn emit_summary_csv(summary: &Summary, path: impl AsRef<Path>) -> Result<u64> {
    let header: Vec<String> = [
        "policy",
        "epochs",
        "mean_throughput",
        "min_throughput",
        "max_throughput",
        "mean_objective",
        "mean_effective_throughput",
        "total_violations",
        "plateau_cv",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let records = summary.policies.iter().map(|p| {
        vec![
            p.policy.to_string(),
            p.epochs.to_string(),
            format_float(p.mean_throughput),
            format_float(p.min_throughput),
            format_float(p.max_throughput),
            format_float(p.mean_objective),
            format_float(p.mean_effective_throughput),
            p.total_violations.to_string(),
            format_float(p.plateau_cv),
        ]
    });
    write_csv(path.as_ref(), &header, records)
}
