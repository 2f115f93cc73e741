//! Event recall, sample summaries, style statistics and schema overlap.
//!
//! The per-gold-event score is `r(s, Ŝ) = max over ŝ of combine(E(s, ŝ), E(ŝ, s))`
//! where `combine` is `max` (any-directional) or `min` (bidirectional).
//! Schema-level recall is either the fraction of gold events whose score
//! reaches the threshold τ (`hard`) or the mean score (`soft`).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::entailment::{
    any_directional, bidirectional, build_score_matrix, EntailmentError, EntailmentScorer, Grid, ScoreMatrix,
};
use crate::schema::{EventStatement, Schema, SourceTag};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("score matrix is {matrix_gold}x{matrix_pred} but schemas have {gold} gold and {pred} predicted events")]
    DimensionMismatch {
        matrix_gold: usize,
        matrix_pred: usize,
        gold: usize,
        pred: usize,
    },
    #[error("score matrix was built from different event texts")]
    EventMismatch,
    #[error("threshold must be in (0, 1], got {0}")]
    InvalidThreshold(f64),
    #[error("cannot summarize an empty list of recalls")]
    NoSamples,
    #[error("schema has no events")]
    EmptySchema,
    #[error(transparent)]
    Entailment(#[from] EntailmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    #[default]
    AnyDirectional,
    Bidirectional,
}

impl std::str::FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.replace('-', "_").as_str() {
            "any_directional" | "any" => Ok(Direction::AnyDirectional),
            "bidirectional" | "bi" => Ok(Direction::Bidirectional),
            other => Err(format!("unknown direction {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Hard,
    Soft,
}

impl std::str::FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "hard" => Ok(Aggregation::Hard),
            "soft" => Ok(Aggregation::Soft),
            other => Err(format!("unknown aggregation {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecallConfig {
    pub direction: Direction,
    pub aggregation: Aggregation,
    pub tau: f64,
}

impl Default for RecallConfig {
    fn default() -> Self {
        Self {
            direction: Direction::AnyDirectional,
            aggregation: Aggregation::Hard,
            tau: 0.5,
        }
    }
}

impl RecallConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(MetricsError::InvalidThreshold(self.tau));
        }
        Ok(())
    }

    fn combined(&self, m: &ScoreMatrix) -> Grid {
        match self.direction {
            Direction::AnyDirectional => any_directional(m),
            Direction::Bidirectional => bidirectional(m),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub gold_event: EventStatement,
    pub predicted_event: EventStatement,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub domain: String,
    pub per_gold_event_score: Vec<f64>,
    pub recall: f64,
    pub matched_pairs: Vec<MatchedPair>,
    pub config: RecallConfig,
    pub gold_source: SourceTag,
    pub predicted_source: SourceTag,
    pub predicted_event_count: usize,
}

/// Per-gold-event best score and the lowest predicted index achieving it.
pub fn best_matches(combined: &Grid) -> Vec<(f64, usize)> {
    (0..combined.rows())
        .map(|i| {
            combined.row(i).iter().enumerate().fold(
                (f64::NEG_INFINITY, 0),
                |best, (j, &s)| if s > best.0 { (s, j) } else { best },
            )
        })
        .collect()
}

/// Aggregates per-gold-event scores into schema-level recall.
pub fn aggregate(scores: &[f64], cfg: &RecallConfig) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    match cfg.aggregation {
        Aggregation::Hard => scores.iter().filter(|&&s| s >= cfg.tau).count() as f64 / scores.len() as f64,
        Aggregation::Soft => scores.iter().sum::<f64>() / scores.len() as f64,
    }
}

fn check_matrix(gold: &Schema, pred: &Schema, m: &ScoreMatrix) -> Result<(), MetricsError> {
    let (g, p) = (m.forward.rows(), m.forward.cols());
    if g != gold.events.len() || p != pred.events.len() || m.gold_events.len() != g || m.predicted_events.len() != p {
        return Err(MetricsError::DimensionMismatch {
            matrix_gold: g,
            matrix_pred: p,
            gold: gold.events.len(),
            pred: pred.events.len(),
        });
    }
    let same = |a: &[EventStatement], b: &[EventStatement]| a.iter().zip(b).all(|(x, y)| x.text == y.text);
    if !same(&m.gold_events, &gold.events) || !same(&m.predicted_events, &pred.events) {
        return Err(MetricsError::EventMismatch);
    }
    Ok(())
}

pub fn event_recall(
    gold: &Schema,
    pred: &Schema,
    matrix: &ScoreMatrix,
    cfg: &RecallConfig,
) -> Result<RecallReport, MetricsError> {
    cfg.validate()?;
    check_matrix(gold, pred, matrix)?;
    let best = best_matches(&cfg.combined(matrix));
    let per_gold_event_score: Vec<f64> = best.iter().map(|b| b.0).collect();
    let matched_pairs = best
        .iter()
        .enumerate()
        .filter(|(_, (score, _))| *score >= cfg.tau)
        .map(|(i, &(score, j))| MatchedPair {
            gold_event: gold.events[i].clone(),
            predicted_event: pred.events[j].clone(),
            score,
        })
        .collect();
    Ok(RecallReport {
        domain: gold.domain.id.clone(),
        recall: aggregate(&per_gold_event_score, cfg),
        per_gold_event_score,
        matched_pairs,
        config: *cfg,
        gold_source: gold.source.clone(),
        predicted_source: pred.source.clone(),
        predicted_event_count: pred.events.len(),
    })
}

/// Mean and population standard deviation over samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

pub fn summarize_samples(values: &[f64]) -> Result<SampleSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    // identical samples must give exactly zero, not rounding noise
    let std = if values.iter().all(|v| *v == values[0]) {
        0.0
    } else {
        var.sqrt()
    };
    Ok(SampleSummary { mean, std, n })
}

/// Mean whitespace-token count per event.
pub fn avg_word_length(schema: &Schema) -> Result<f64, MetricsError> {
    if schema.events.is_empty() {
        return Err(MetricsError::EmptySchema);
    }
    let tokens: usize = schema.events.iter().map(|e| e.text.split_whitespace().count()).sum();
    Ok(tokens as f64 / schema.events.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub a_given_b: RecallReport,
    pub b_given_a: RecallReport,
}

impl OverlapReport {
    pub fn recalls(&self) -> (f64, f64) {
        (self.a_given_b.recall, self.b_given_a.recall)
    }
}

/// Recall of `a` against `b` and of `b` against `a`. Both come from a single
/// score matrix, since swapping roles only transposes it.
pub fn schema_overlap(
    a: &Schema,
    b: &Schema,
    cfg: &RecallConfig,
    scorer: &EntailmentScorer,
) -> Result<OverlapReport, MetricsError> {
    let m = build_score_matrix(a, b, scorer)?;
    Ok(OverlapReport {
        a_given_b: event_recall(a, b, &m, cfg)?,
        b_given_a: event_recall(b, a, &m.transposed(), cfg)?,
    })
}

/// Hard recall under both directions from one matrix: `(any, bi)`.
pub fn directional_comparison(
    gold: &Schema,
    pred: &Schema,
    matrix: &ScoreMatrix,
    tau: f64,
) -> Result<(f64, f64), MetricsError> {
    let cfg = |direction| RecallConfig {
        direction,
        aggregation: Aggregation::Hard,
        tau,
    };
    let any = event_recall(gold, pred, matrix, &cfg(Direction::AnyDirectional))?;
    let bi = event_recall(gold, pred, matrix, &cfg(Direction::Bidirectional))?;
    Ok((any.recall, bi.recall))
}
