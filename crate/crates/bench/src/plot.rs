//! Plot data: one CSV per curve, one curve per arm label.
//!
//! | kind | x column | statistic over seeds of |
//! |------|----------|-------------------------|
//! | `accuracy_vs_epsilon` | `epsilon` | test accuracy |
//! | `risk_vs_n` | `n` | excess empirical risk |
//! | `risk_vs_p` | `p` | excess empirical risk |
//! | `convergence_curves` | `t` | empirical risk at iteration `t` |
//!
//! The first three carry `mean,median,min,max,count`; convergence curves
//! carry `mean_risk,min_risk,max_risk`. Failed runs are left out, so `count`
//! says how many seeds made it. Within a label every grid axis other than x
//! must be fixed, otherwise the reports are heterogeneous and nothing is
//! written.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use mngp::report::RunStatus;
use mngp::RunReport;
use serde::{Deserialize, Serialize};

use crate::experiment::write_atomic;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    AccuracyVsEpsilon,
    ConvergenceCurves,
    RiskVsN,
    RiskVsP,
}

impl PlotKind {
    pub fn name(&self) -> &'static str {
        match self {
            PlotKind::AccuracyVsEpsilon => "accuracy_vs_epsilon",
            PlotKind::ConvergenceCurves => "convergence_curves",
            PlotKind::RiskVsN => "risk_vs_n",
            PlotKind::RiskVsP => "risk_vs_p",
        }
    }
}

impl std::str::FromStr for PlotKind {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "accuracy_vs_epsilon" => PlotKind::AccuracyVsEpsilon,
            "convergence_curves" => PlotKind::ConvergenceCurves,
            "risk_vs_n" => PlotKind::RiskVsN,
            "risk_vs_p" => PlotKind::RiskVsP,
            other => bail!("unknown plot kind `{other}`"),
        })
    }
}

/// One curve, ready to be written.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotTable {
    pub label: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<f64>>,
}

impl PlotTable {
    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

/// Order statistics of a non-empty sample.
pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    let median = if k % 2 == 1 { v[k / 2] } else { 0.5 * (v[k / 2 - 1] + v[k / 2]) };
    Some(Summary {
        mean: v.iter().sum::<f64>() / k as f64,
        median,
        min: v[0],
        max: v[k - 1],
        count: k,
    })
}

/// Grid coordinates of a report other than the seed.
fn axes(r: &RunReport) -> [f64; 3] {
    [r.config.epsilon, r.n as f64, r.p as f64]
}

fn x_axis(kind: PlotKind) -> Option<usize> {
    match kind {
        PlotKind::AccuracyVsEpsilon => Some(0),
        PlotKind::RiskVsN => Some(1),
        PlotKind::RiskVsP => Some(2),
        PlotKind::ConvergenceCurves => None,
    }
}

fn check_homogeneous(reports: &[RunReport], kind: PlotKind) -> Result<BTreeMap<&str, Vec<&RunReport>>> {
    if reports.is_empty() {
        bail!("no reports to plot");
    }
    let dataset = &reports[0].dataset;
    if let Some(r) = reports.iter().find(|r| &r.dataset != dataset) {
        bail!("heterogeneous reports: datasets `{dataset}` and `{}`", r.dataset);
    }
    let mut groups: BTreeMap<&str, Vec<&RunReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(r.label.as_str()).or_default().push(r);
    }
    let x = x_axis(kind);
    for (label, group) in &groups {
        let first = axes(group[0]);
        for r in group {
            let a = axes(r);
            for axis in 0..3 {
                if Some(axis) != x && a[axis] != first[axis] {
                    bail!(
                        "heterogeneous reports for `{label}`: {} varies but is not the plotted axis",
                        ["epsilon", "n", "p"][axis]
                    );
                }
            }
        }
    }
    Ok(groups)
}

/// Builds the curves for `kind` without writing anything.
pub fn plot_data(reports: &[RunReport], kind: PlotKind) -> Result<Vec<PlotTable>> {
    let groups = check_homogeneous(reports, kind)?;
    let mut tables = Vec::new();
    for (label, group) in groups {
        let done: Vec<&RunReport> = group.into_iter().filter(|r| r.status == RunStatus::Completed).collect();
        let table = match x_axis(kind) {
            Some(axis) => {
                let mut by_x: BTreeMap<u64, (f64, Vec<f64>)> = BTreeMap::new();
                for r in &done {
                    let metric = match kind {
                        PlotKind::AccuracyVsEpsilon => r.test_accuracy,
                        _ => r.excess_empirical_risk,
                    };
                    let Some(m) = metric else {
                        bail!("run `{label}` seed {} lacks the plotted metric", r.config.seed);
                    };
                    let x = axes(r)[axis];
                    // Non-negative floats sort like their bit patterns.
                    by_x.entry(x.to_bits()).or_insert_with(|| (x, Vec::new())).1.push(m);
                }
                let rows = by_x
                    .into_values()
                    .filter_map(|(x, values)| {
                        summarize(&values).map(|s| vec![x, s.mean, s.median, s.min, s.max, s.count as f64])
                    })
                    .collect();
                let x_name = ["epsilon", "n", "p"][axis];
                PlotTable {
                    label: label.to_owned(),
                    header: vec![x_name, "mean", "median", "min", "max", "count"],
                    rows,
                }
            }
            None => {
                let curves: Vec<&Vec<f64>> = done.iter().map(|r| &r.risk_curve).collect();
                let len = curves.first().map_or(0, |c| c.len());
                if len == 0 || curves.iter().any(|c| c.len() != len) {
                    bail!("convergence curves for `{label}` are missing or differ in length");
                }
                let rows = (0..len)
                    .map(|t| {
                        let column: Vec<f64> = curves.iter().map(|c| c[t]).collect();
                        let s = summarize(&column).expect("non-empty");
                        vec![t as f64, s.mean, s.min, s.max]
                    })
                    .collect();
                PlotTable {
                    label: label.to_owned(),
                    header: vec!["t", "mean_risk", "min_risk", "max_risk"],
                    rows,
                }
            }
        };
        tables.push(table);
    }
    Ok(tables)
}

fn file_safe(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes `<dir>/<kind>-<label>.csv` for every curve and returns the paths.
pub fn emit_plot_data(reports: &[RunReport], kind: PlotKind, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = plot_data(reports, kind)?;
    let mut paths = Vec::with_capacity(tables.len());
    for table in tables {
        let path = dir.join(format!("{}-{}.csv", kind.name(), file_safe(&table.label)));
        let mut text = table.to_csv();
        // Integer-valued columns read better without the trailing `.0`.
        if kind != PlotKind::AccuracyVsEpsilon {
            text = text.lines().map(integer_first_cell).collect::<Vec<_>>().join("\n") + "\n";
        }
        write_atomic(&path, text.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}

fn integer_first_cell(line: &str) -> String {
    match line.split_once(',') {
        Some((first, rest)) if first.ends_with(".0") => format!("{},{rest}", &first[..first.len() - 2]),
        _ => line.to_owned(),
    }
}
