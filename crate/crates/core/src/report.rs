//! Report rendering: plain-text tables plus machine-readable CSV twins.
//!
//! Output is a pure function of the run summary, with fixed float formatting
//! and no clocks or paths, so identical runs serialize byte-identically.

use std::path::{Path, PathBuf};

use crate::control::EcaRuleSet;
use crate::error::Result;
use crate::pipeline::RunSummary;

/// All rendered report documents.
#[derive(Debug, Clone, PartialEq)]
pub struct Reports {
    pub summary_txt: String,
    pub queue_metrics_txt: String,
    pub queue_metrics_csv: String,
    pub adaptation_ledger_txt: String,
    pub adaptation_ledger_csv: String,
    pub recommendations_txt: String,
    pub recommendations_csv: String,
}

pub fn render(summary: &RunSummary, rules: &EcaRuleSet) -> Reports {
    Reports {
        summary_txt: render_summary(summary),
        queue_metrics_txt: render_queue_table(summary),
        queue_metrics_csv: render_queue_csv(summary),
        adaptation_ledger_txt: render_ledger_table(summary),
        adaptation_ledger_csv: render_ledger_csv(summary),
        recommendations_txt: render_rules_table(rules),
        recommendations_csv: render_rules_csv(rules),
    }
}

/// Writes the report files into `dir`, creating it if needed.
pub fn write_files(reports: &Reports, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let files = [
        ("summary.txt", &reports.summary_txt),
        ("queue_metrics.txt", &reports.queue_metrics_txt),
        ("queue_metrics.csv", &reports.queue_metrics_csv),
        ("adaptation_ledger.txt", &reports.adaptation_ledger_txt),
        ("adaptation_ledger.csv", &reports.adaptation_ledger_csv),
        ("recommendations.txt", &reports.recommendations_txt),
        ("recommendations.csv", &reports.recommendations_csv),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, contents) in files {
        let path = dir.join(name);
        std::fs::write(&path, contents)?;
        written.push(path);
    }
    Ok(written)
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// Strips characters that would break the naive CSV layout.
fn csv_safe(text: &str) -> String {
    text.replace(['\n', '\r'], " ").replace(',', ";")
}

/// Renders rows as a fixed-width table with a header rule.
fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let mut out = String::new();
    let render_row = |cells: Vec<String>, widths: &[usize]| {
        let mut line = String::new();
        for (i, cell) in cells.iter().enumerate() {
            if i > 0 {
                line.push_str("  ");
            }
            line.push_str(&format!("{cell:<width$}", width = widths[i]));
        }
        line.trim_end().to_string()
    };
    out.push_str(&render_row(headers.iter().map(|h| h.to_string()).collect(), &widths));
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
    out.push('\n');
    for row in rows {
        out.push_str(&render_row(row.clone(), &widths));
        out.push('\n');
    }
    out
}

fn render_summary(s: &RunSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!("session           {}\n", s.session_id));
    out.push_str(&format!("samples           {}\n", s.samples));
    out.push_str(&format!("anomalies         {}\n", s.anomalies_total));
    for (category, count) in &s.anomalies_by_category {
        out.push_str(&format!("  {:<15} {}\n", category.to_string(), count));
    }
    out.push_str(&format!("processed         {}\n", s.queue.processed_total));
    out.push_str(&format!("severe            {}\n", s.queue.processed_severe));
    out.push_str(&format!("rejected          {}\n", s.queue.rejected));
    out.push_str(&format!("adaptations       {}\n", s.enactments.len()));
    if s.unenactable > 0 {
        out.push_str(&format!("unenactable       {}\n", s.unenactable));
    }
    out.push_str(&format!("accrued cost      {}\n", fmt(s.final_state.accrued_cost)));
    out.push_str(&format!("mean excess pre   {} ms\n", fmt(s.mean_pre_excess_ms)));
    out.push_str(&format!("mean excess post  {} ms\n", fmt(s.mean_post_excess_ms)));
    out.push_str(&format!("kb records        {}\n", s.kb_records));
    out
}

fn queue_row(s: &RunSummary) -> Vec<String> {
    let accepted = s.queue.arrivals - s.queue.rejected;
    vec![
        accepted.to_string(),
        fmt(s.queue.mean_wq_s),
        fmt(s.queue.mean_x_bar_s),
        fmt(s.mean_rs_s),
        s.queue.processed_severe.to_string(),
    ]
}

const QUEUE_HEADERS: [&str; 5] =
    ["events_in_queue", "wq_s", "x_bar_s", "rs_s", "processed_severe"];

fn render_queue_table(s: &RunSummary) -> String {
    table(&QUEUE_HEADERS, &[queue_row(s)])
}

fn render_queue_csv(s: &RunSummary) -> String {
    format!("{}\n{}\n", QUEUE_HEADERS.join(","), queue_row(s).join(","))
}

const LEDGER_HEADERS: [&str; 7] = [
    "anomaly_event",
    "adaptation",
    "decisions",
    "cost_per_hr",
    "threshold_metric",
    "rat_s",
    "delta_cs_pct",
];

fn ledger_rows(s: &RunSummary) -> Vec<Vec<String>> {
    s.ledger
        .iter()
        .map(|row| {
            vec![
                row.category.to_string(),
                row.adaptation.clone(),
                row.decisions.to_string(),
                format!("{:.2}", row.cost_per_hr),
                csv_safe(&row.threshold_metric),
                fmt(row.rat_s),
                fmt_opt(row.measured_delta_cs_pct),
            ]
        })
        .collect()
}

fn render_ledger_table(s: &RunSummary) -> String {
    table(&LEDGER_HEADERS, &ledger_rows(s))
}

fn render_ledger_csv(s: &RunSummary) -> String {
    let mut out = LEDGER_HEADERS.join(",");
    out.push('\n');
    for row in ledger_rows(s) {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

const RULE_HEADERS: [&str; 10] = [
    "anomaly",
    "scenario",
    "then_adaptation",
    "then_risk",
    "then_cost",
    "then_delta_cs_pct",
    "else_adaptation",
    "else_risk",
    "else_cost",
    "else_delta_cs_pct",
];

fn rule_rows(rules: &EcaRuleSet) -> Vec<Vec<String>> {
    rules
        .rules
        .iter()
        .map(|rule| {
            vec![
                rule.anomaly.to_string(),
                csv_safe(&rule.scenario),
                rule.then_branch.adaptation.clone(),
                rule.then_branch.risk_level.letter().to_string(),
                rule.then_branch.cost_level.letter().to_string(),
                rule.then_branch
                    .delta_cs
                    .map(|d| format!("{:.2}", d * 100.0))
                    .unwrap_or_else(|| "-".into()),
                rule.else_branch.adaptation.clone(),
                rule.else_branch.risk_level.letter().to_string(),
                rule.else_branch.cost_level.letter().to_string(),
                rule.else_branch
                    .delta_cs
                    .map(|d| format!("{:.2}", d * 100.0))
                    .unwrap_or_else(|| "-".into()),
            ]
        })
        .collect()
}

fn render_rules_table(rules: &EcaRuleSet) -> String {
    table(&RULE_HEADERS, &rule_rows(rules))
}

fn render_rules_csv(rules: &EcaRuleSet) -> String {
    let mut out = RULE_HEADERS.join(",");
    out.push('\n');
    for row in rule_rows(rules) {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
