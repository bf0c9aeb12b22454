use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::PValueMethod;
use crate::harness::experiment::{CellResult, ExperimentReport, MetricKind, Technique};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// Human-readable table; `*` marks the best technique per block and
    /// every technique not significantly worse than it.
    Table,
    /// One row per (cell, metric) with all per-run values.
    Csv,
}

/// One row of the CSV report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub train_fraction: f64,
    pub technique: Technique,
    pub top_r: usize,
    pub metric: String,
    pub mean: f64,
    /// Per-run values joined with `;`.
    pub per_run: String,
}

impl ReportRow {
    pub fn per_run_values(&self) -> Result<Vec<f64>> {
        self.per_run
            .split(';')
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::InvalidDataset(format!("bad per-run value {s:?}")))
            })
            .collect()
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

pub fn emit_report<W: Write>(report: &ExperimentReport, format: ReportFormat, out: W) -> Result<()> {
    match format {
        ReportFormat::Csv => emit_csv(report, out),
        ReportFormat::Table => emit_table(report, out),
    }
}

fn emit_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["dataset", "train_fraction", "technique", "top_r", "metric", "mean", "per_run"])?;
    for cell in &report.cells {
        for metric in [MetricKind::Ndcg, MetricKind::Map] {
            w.write_record([
                cell.dataset.clone(),
                cell.train_fraction.to_string(),
                cell.technique.name().to_string(),
                cell.top_r.to_string(),
                metric.name().to_string(),
                cell.mean(metric).to_string(),
                join(cell.runs(metric)),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("<report>", e))
}

/// Whether `a` and `b` differ significantly in the given block.
fn differs(report: &ExperimentReport, cell: &CellResult, other: Technique, metric: MetricKind) -> bool {
    report.significance.iter().any(|s| {
        s.dataset == cell.dataset
            && s.train_fraction == cell.train_fraction
            && s.top_r == cell.top_r
            && s.metric == metric
            && ((s.a == cell.technique && s.b == other) || (s.b == cell.technique && s.a == other))
            && s.result.is_some_and(|r| r.significant)
    })
}

fn emit_table<W: Write>(report: &ExperimentReport, mut out: W) -> Result<()> {
    let mut text = String::new();
    let mut blocks: Vec<(&str, f64, usize)> = Vec::new();
    for c in &report.cells {
        let key = (c.dataset.as_str(), c.train_fraction, c.top_r);
        if !blocks.contains(&key) {
            blocks.push(key);
        }
    }
    let _ = writeln!(
        text,
        "{:<16} {:>6} {:>5}  {:<10} {:>10} {:>10}",
        "dataset", "train", "top_r", "technique", "ndcg", "map"
    );
    for (dataset, fraction, top_r) in blocks {
        let cells: Vec<&CellResult> = report
            .cells
            .iter()
            .filter(|c| c.dataset == dataset && c.train_fraction == fraction && c.top_r == top_r)
            .collect();
        let best = |metric: MetricKind| {
            cells
                .iter()
                .max_by(|a, b| a.mean(metric).total_cmp(&b.mean(metric)).then(b.technique.cmp(&a.technique)))
                .map(|c| c.technique)
                .expect("block is nonempty")
        };
        let (best_ndcg, best_map) = (best(MetricKind::Ndcg), best(MetricKind::Map));
        for cell in &cells {
            let mark = |metric, best| {
                if cell.technique == best || !differs(report, cell, best, metric) {
                    "*"
                } else {
                    " "
                }
            };
            let _ = writeln!(
                text,
                "{:<16} {:>6} {:>5}  {:<10} {:>9.4}{} {:>9.4}{}",
                dataset,
                fraction,
                top_r,
                cell.technique.name(),
                cell.ndcg_mean,
                mark(MetricKind::Ndcg, best_ndcg),
                cell.map_mean,
                mark(MetricKind::Map, best_map),
            );
        }
    }
    out.write_all(text.as_bytes()).map_err(|e| Error::io("<report>", e))
}

pub fn emit_significance_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "train_fraction",
        "top_r",
        "metric",
        "technique_a",
        "technique_b",
        "statistic",
        "n_effective",
        "p_value",
        "significant",
        "method",
    ])?;
    for s in &report.significance {
        let (stat, n, p, sig, method) = match &s.result {
            Some(r) => (
                r.statistic.to_string(),
                r.n_effective.to_string(),
                r.p_value.to_string(),
                r.significant.to_string(),
                match r.method {
                    PValueMethod::Exact => "exact",
                    PValueMethod::NormalApproximation => "normal",
                },
            ),
            None => (String::new(), "0".into(), String::new(), "false".into(), "not-applicable"),
        };
        w.write_record([
            s.dataset.clone(),
            s.train_fraction.to_string(),
            s.top_r.to_string(),
            s.metric.name().to_string(),
            s.a.name().to_string(),
            s.b.name().to_string(),
            stat,
            n,
            p,
            sig,
            method.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<significance>", e))
}

pub fn emit_timing_csv<W: Write>(report: &ExperimentReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "dataset",
        "train_fraction",
        "technique",
        "mean_ranking_seconds",
        "mean_training_seconds",
        "ranking_seconds",
        "selected_k",
    ])?;
    for t in &report.timings {
        w.write_record([
            t.dataset.clone(),
            t.train_fraction.to_string(),
            t.technique.name().to_string(),
            t.mean_ranking_seconds().to_string(),
            t.mean_training_seconds().to_string(),
            join(&t.ranking_seconds),
            t.selected_k.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(";"),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<timing>", e))
}

pub fn parse_report_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}
