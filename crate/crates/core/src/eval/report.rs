use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::metrics::{avg_tpr, code_gen_success_rate, pass_at_k, AttemptGrade, MetricError};

/// Metrics of one experimental condition, laid out like a column of the
/// result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub condition: String,
    pub n: usize,
    pub avg_tpr: f64,
    /// Keyed by k; only sample sizes up to n appear.
    pub pass_at: BTreeMap<usize, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code_gen_success_rate: Option<f64>,
    /// How many attempts failed each assertion.
    pub assertion_failures: BTreeMap<String, usize>,
}

impl ExperimentReport {
    /// Summarizes graded attempts. `ks` larger than the attempt count are
    /// left out.
    pub fn from_grades(condition: &str, grades: &[AttemptGrade], ks: &[usize]) -> Result<Self, MetricError> {
        let n = grades.len();
        let c = grades.iter().filter(|g| g.correct).count();
        let mut pass_at = BTreeMap::new();
        for &k in ks.iter().filter(|&&k| k >= 1 && k <= n) {
            pass_at.insert(k, pass_at_k(n, c, k)?);
        }
        let code_gen = if grades.iter().any(|g| g.code_gen_ok.is_some()) {
            Some(code_gen_success_rate(grades)?)
        } else {
            None
        };
        let mut assertion_failures = BTreeMap::new();
        for id in grades.iter().flat_map(|g| &g.failed) {
            *assertion_failures.entry(id.clone()).or_insert(0) += 1;
        }
        Ok(Self {
            condition: condition.to_string(),
            n,
            avg_tpr: avg_tpr(grades)?,
            pass_at,
            code_gen_success_rate: code_gen,
            assertion_failures,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Markdown => "md",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

impl fmt::Display for ReportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReportFormat::Markdown => "markdown",
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        })
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

/// Two decimals, trailing zeros dropped but at least one kept: 1 -> "1.0",
/// 0.8 -> "0.8", 0.4234 -> "0.42".
pub fn format_metric(v: f64) -> String {
    let mut s = format!("{v:.2}");
    while s.ends_with('0') && !s.ends_with(".0") {
        s.pop();
    }
    s
}

fn all_ks(reports: &[ExperimentReport]) -> Vec<usize> {
    let ks: BTreeSet<usize> = reports.iter().flat_map(|r| r.pass_at.keys().copied()).collect();
    ks.into_iter().collect()
}

/// Metrics as rows and conditions as columns for markdown; one row per
/// condition for csv.
pub fn render_report(reports: &[ExperimentReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => markdown(reports),
        ReportFormat::Csv => csv_text(reports),
        ReportFormat::Json => crate::config::canonical_json(&crate::config::to_value(&reports)),
    }
}

fn markdown(reports: &[ExperimentReport]) -> String {
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut header = vec!["Metric".to_string()];
    header.extend(reports.iter().map(|r| r.condition.clone()));
    rows.push(header);
    let cell = |v: Option<f64>| v.map(format_metric).unwrap_or_else(|| "-".into());
    let mut metric = |name: String, f: &dyn Fn(&ExperimentReport) -> Option<f64>| {
        let mut row = vec![name];
        row.extend(reports.iter().map(|r| cell(f(r))));
        rows.push(row);
    };
    if !reports.is_empty() {
        metric("Avg TPR".into(), &|r| Some(r.avg_tpr));
        if reports.iter().any(|r| r.code_gen_success_rate.is_some()) {
            metric("Code gen. success rate".into(), &|r| r.code_gen_success_rate);
        }
        for k in all_ks(reports) {
            metric(format!("Pass@{k}"), &|r| r.pass_at.get(&k).copied());
        }
    }
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        out.push_str("| ");
        out.push_str(&row.join(" | "));
        out.push_str(" |\n");
        if i == 0 {
            out.push('|');
            out.push_str(&"---|".repeat(row.len()));
            out.push('\n');
        }
    }
    out
}

fn csv_text(reports: &[ExperimentReport]) -> String {
    let ks = all_ks(reports);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["condition".to_string(), "n".into(), "avg_tpr".into()];
    header.extend(ks.iter().map(|k| format!("pass@{k}")));
    header.push("code_gen_success_rate".into());
    w.write_record(&header).expect("writing to memory");
    for r in reports {
        let mut row = vec![r.condition.clone(), r.n.to_string(), r.avg_tpr.to_string()];
        row.extend(ks.iter().map(|k| r.pass_at.get(k).map(f64::to_string).unwrap_or_default()));
        row.push(r.code_gen_success_rate.map(|v| v.to_string()).unwrap_or_default());
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("csv output is UTF-8")
}
