//! Table documents for recall, style and agreement results, rendered to
//! Markdown (two decimals), CSV and JSON (full precision).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agreement::AgreementStats;
use crate::metrics::{avg_word_length, MetricsError, SampleSummary};
use crate::schema::Schema;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no rows to report")]
    Empty,
    #[error("rows were computed with different configurations: {0} vs {1}")]
    MixedConfigs(String, String),
    #[error("inconsistent event counts for {domain} / {system}")]
    InconsistentCounts { domain: String, system: String },
    #[error("malformed table CSV: {0}")]
    Malformed(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cell {
    Text { value: String },
    Number { value: f64 },
    MeanStd { mean: f64, std: f64, n: usize },
    Empty,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text { value: s.into() }
    }

    pub fn number(v: f64) -> Self {
        Cell::Number { value: v }
    }

    fn markdown(&self) -> String {
        match self {
            Cell::Text { value } => value.replace('|', "\\|"),
            Cell::Number { value } => format!("{value:.2}"),
            Cell::MeanStd { mean, std, .. } => format!("{mean:.2}±{std:.2}"),
            Cell::Empty => String::new(),
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Text { value } => value.clone(),
            Cell::Number { value } => format!("{value:?}"),
            Cell::MeanStd { mean, std, n } => format!("{mean:?}±{std:?}/{n}"),
            Cell::Empty => String::new(),
        }
    }

    /// Inverse of the CSV rendering for numeric cells; anything else is text.
    fn parse_csv(field: &str) -> Cell {
        if field.is_empty() {
            return Cell::Empty;
        }
        if let Some((mean, rest)) = field.split_once('±') {
            if let Some((std, n)) = rest.split_once('/') {
                if let (Ok(mean), Ok(std), Ok(n)) = (mean.parse(), std.parse(), n.parse()) {
                    return Cell::MeanStd { mean, std, n };
                }
            }
        }
        match field.parse::<f64>() {
            Ok(value) if field.contains('.') || field.contains('e') => Cell::Number { value },
            _ => Cell::text(field),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableDocument {
    pub title: String,
    pub notes: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl TableDocument {
    pub fn to_markdown(&self) -> String {
        let mut out = format!("## {}\n\n", self.title);
        for note in &self.notes {
            let _ = writeln!(out, "> {note}");
        }
        if !self.notes.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "| {} |", self.columns.join(" | "));
        let _ = writeln!(out, "|{}", "---|".repeat(self.columns.len()));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::markdown).collect();
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::csv)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("table serializes");
        s.push('\n');
        s
    }

    /// Parses CSV produced by [`TableDocument::to_csv`] back into columns and cells.
    pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<Cell>>), ReportError> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let columns = r
            .headers()
            .map_err(|e| ReportError::Malformed(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| ReportError::Malformed(e.to_string()))?;
            rows.push(rec.iter().map(Cell::parse_csv).collect());
        }
        Ok((columns, rows))
    }

    /// Writes `<dir>/<stem>.{md,csv,json}`.
    pub fn write_all(&self, dir: &Path, stem: &str) -> Result<Vec<PathBuf>, ReportError> {
        fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let outputs = [
            ("md", self.to_markdown()),
            ("csv", self.to_csv()),
            ("json", self.to_json()),
        ];
        let mut paths = Vec::new();
        for (ext, body) in outputs {
            let path = dir.join(format!("{stem}.{ext}"));
            fs::write(&path, body).map_err(|source| ReportError::Io {
                path: path.display().to_string(),
                source,
            })?;
            paths.push(path);
        }
        Ok(paths)
    }
}

/// One (domain, system, gold dataset) cell of the recall table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallRow {
    pub domain: String,
    pub system: String,
    pub gold_dataset: String,
    pub summary: SampleSummary,
    /// Mean number of predicted events per generation.
    pub event_count: f64,
    pub config_fingerprint: String,
}

fn distinct_in_order<'a>(items: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for item in items {
        if !out.iter().any(|x| x == item) {
            out.push(item.to_string());
        }
    }
    out
}

/// Recall table: per domain a `# Events` row and one row per gold dataset,
/// one column per system, and a final cross-domain average row (unweighted
/// mean over every domain × gold-dataset cell).
pub fn build_recall_table(rows: &[RecallRow]) -> Result<TableDocument, ReportError> {
    let first = rows.first().ok_or(ReportError::Empty)?;
    if let Some(other) = rows.iter().find(|r| r.config_fingerprint != first.config_fingerprint) {
        return Err(ReportError::MixedConfigs(
            first.config_fingerprint.clone(),
            other.config_fingerprint.clone(),
        ));
    }
    let domains = distinct_in_order(rows.iter().map(|r| r.domain.as_str()));
    let systems = distinct_in_order(rows.iter().map(|r| r.system.as_str()));
    let golds = distinct_in_order(rows.iter().map(|r| r.gold_dataset.as_str()));

    let mut cells: BTreeMap<(&str, &str, &str), &RecallRow> = BTreeMap::new();
    let mut counts: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for r in rows {
        cells.insert((&r.domain, &r.system, &r.gold_dataset), r);
        let c = counts.entry((&r.domain, &r.system)).or_insert(r.event_count);
        if *c != r.event_count {
            return Err(ReportError::InconsistentCounts {
                domain: r.domain.clone(),
                system: r.system.clone(),
            });
        }
    }

    let mut columns = vec!["Domain".to_string(), "Gold Schema".to_string()];
    columns.extend(systems.iter().cloned());
    let mut table_rows = Vec::new();
    for d in &domains {
        let mut count_row = vec![Cell::text(d), Cell::text("# Events")];
        for s in &systems {
            count_row.push(
                counts
                    .get(&(d.as_str(), s.as_str()))
                    .map_or(Cell::Empty, |&c| Cell::number(c)),
            );
        }
        table_rows.push(count_row);
        for g in &golds {
            let mut row = vec![Cell::Empty, Cell::text(g)];
            for s in &systems {
                row.push(match cells.get(&(d.as_str(), s.as_str(), g.as_str())) {
                    Some(r) => Cell::MeanStd {
                        mean: r.summary.mean,
                        std: r.summary.std,
                        n: r.summary.n,
                    },
                    None => Cell::Empty,
                });
            }
            table_rows.push(row);
        }
    }
    let mut avg_row = vec![Cell::text("Average Across Domains"), Cell::text(golds.join(" & "))];
    for s in &systems {
        let means: Vec<f64> = rows.iter().filter(|r| &r.system == s).map(|r| r.summary.mean).collect();
        avg_row.push(Cell::number(means.iter().sum::<f64>() / means.len() as f64));
    }
    table_rows.push(avg_row);

    Ok(TableDocument {
        title: "Event recall".into(),
        notes: vec![
            format!("config: {}", first.config_fingerprint),
            "cells: mean±population std of recall over samples".into(),
            "average row: unweighted mean over domain × gold-dataset cells".into(),
        ],
        columns,
        rows: table_rows,
    })
}

/// Average event length in words, per domain (rows) and source (columns),
/// with a mean row. Several schemas in one cell (e.g. samples) are averaged.
pub fn build_style_table(schemas: &[Schema]) -> Result<TableDocument, ReportError> {
    if schemas.is_empty() {
        return Err(ReportError::Empty);
    }
    let labels: Vec<String> = schemas.iter().map(|s| s.source.system_label()).collect();
    let domains = distinct_in_order(schemas.iter().map(|s| s.domain.id.as_str()));
    let sources = distinct_in_order(labels.iter().map(String::as_str));
    let mut acc: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for (schema, label) in schemas.iter().zip(&labels) {
        acc.entry((schema.domain.id.clone(), label.clone()))
            .or_default()
            .push(avg_word_length(schema)?);
    }
    let cell_value = |d: &str, s: &str| {
        acc.get(&(d.to_string(), s.to_string()))
            .map(|v| v.iter().sum::<f64>() / v.len() as f64)
    };

    let mut columns = vec!["Domain".to_string()];
    columns.extend(sources.iter().cloned());
    let mut rows = Vec::new();
    for d in &domains {
        let mut row = vec![Cell::text(d)];
        for s in &sources {
            row.push(cell_value(d, s).map_or(Cell::Empty, Cell::number));
        }
        rows.push(row);
    }
    let mut mean_row = vec![Cell::text("Mean")];
    for s in &sources {
        let vals: Vec<f64> = domains.iter().filter_map(|d| cell_value(d, s)).collect();
        mean_row.push(Cell::number(vals.iter().sum::<f64>() / vals.len() as f64));
    }
    rows.push(mean_row);
    Ok(TableDocument {
        title: "Average event length in words".into(),
        notes: vec!["tokens are whitespace-delimited; punctuation is kept".into()],
        columns,
        rows,
    })
}

pub fn build_agreement_table(stats: &[AgreementStats]) -> Result<TableDocument, ReportError> {
    if stats.is_empty() {
        return Err(ReportError::Empty);
    }
    let rows = stats
        .iter()
        .map(|s| {
            vec![
                Cell::text(&s.condition),
                Cell::number(s.majority_vote),
                Cell::number(s.at_least_one),
                Cell::number(s.alpha.alpha),
            ]
        })
        .collect();
    let mut notes = vec!["alpha: nominal metric; items with a single judgment are excluded".to_string()];
    if stats.iter().any(|s| s.alpha.degenerate) {
        notes.push("alpha is degenerate (all judgments identical) for at least one condition".into());
    }
    Ok(TableDocument {
        title: "Human agreement".into(),
        notes,
        columns: vec![
            "Condition".into(),
            "Majority Vote".into(),
            "Atleast One Vote".into(),
            "Krippendorff's Alpha".into(),
        ],
        rows,
    })
}
