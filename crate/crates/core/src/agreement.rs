//! Human-agreement study support: sampling matched pairs for annotation,
//! CSV export/import, and the agreement statistics (majority vote,
//! at-least-one vote, Krippendorff's alpha for binary nominal labels).

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{Read, Write};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::content_key;
use crate::metrics::{Direction, RecallReport};
use crate::schema::SourceTag;

#[derive(Debug, Error)]
pub enum AgreementError {
    #[error("requested {requested} pairs but only {available} matched pairs are available")]
    InsufficientPairs { requested: usize, available: usize },
    #[error("sample size must be positive")]
    EmptySample,
    #[error("report for domain {0} uses bidirectional matching; annotation pairs come from any-directional matches")]
    WrongDirection(String),
    #[error("record {pair_id} has {count} judgments; majority vote needs an odd count of at least 3")]
    BadJudgmentCount { pair_id: String, count: usize },
    #[error("record {0} is malformed: judgments and annotator ids must be non-empty and of equal length")]
    MalformedRecord(String),
    #[error("need at least {0}")]
    NotEnoughData(&'static str),
    #[error("line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("CSV error: {0}")]
    CsvIo(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationPair {
    pub pair_id: String,
    pub domain: String,
    pub gold_event: String,
    pub predicted_event: String,
    pub any_directional_score: f64,
    pub gold_source: SourceTag,
    pub predicted_source: SourceTag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub pair_id: String,
    /// `true` means the annotator judged the events equivalent.
    pub judgments: Vec<bool>,
    pub annotator_ids: Vec<String>,
}

impl AnnotationRecord {
    pub fn new(pair_id: impl Into<String>, judgments: &[u8]) -> Self {
        Self {
            pair_id: pair_id.into(),
            judgments: judgments.iter().map(|&j| j != 0).collect(),
            annotator_ids: (0..judgments.len()).map(|i| format!("a{i}")).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), AgreementError> {
        if self.judgments.is_empty() || self.judgments.len() != self.annotator_ids.len() {
            return Err(AgreementError::MalformedRecord(self.pair_id.clone()));
        }
        Ok(())
    }

    fn positives(&self) -> usize {
        self.judgments.iter().filter(|&&j| j).count()
    }
}

fn pair_id(domain: &str, gold: &str, pred: &str, gs: &SourceTag, ps: &SourceTag) -> String {
    content_key(&(domain, gold, pred, gs, ps))[..16].to_string()
}

/// Draws `k` matched pairs without replacement, allocated across domains in
/// proportion to their available pairs (largest remainder), deterministically
/// for a given seed. Identical pairs appearing in several reports count once.
pub fn sample_pairs(reports: &[RecallReport], k: usize, seed: u64) -> Result<Vec<AnnotationPair>, AgreementError> {
    if k == 0 {
        return Err(AgreementError::EmptySample);
    }
    let mut by_domain: BTreeMap<String, BTreeMap<String, AnnotationPair>> = BTreeMap::new();
    for report in reports {
        if report.config.direction != Direction::AnyDirectional {
            return Err(AgreementError::WrongDirection(report.domain.clone()));
        }
        for m in &report.matched_pairs {
            let id = pair_id(
                &report.domain,
                &m.gold_event.text,
                &m.predicted_event.text,
                &report.gold_source,
                &report.predicted_source,
            );
            by_domain
                .entry(report.domain.clone())
                .or_default()
                .entry(id.clone())
                .or_insert_with(|| AnnotationPair {
                    pair_id: id,
                    domain: report.domain.clone(),
                    gold_event: m.gold_event.text.clone(),
                    predicted_event: m.predicted_event.text.clone(),
                    any_directional_score: m.score,
                    gold_source: report.gold_source.clone(),
                    predicted_source: report.predicted_source.clone(),
                });
        }
    }
    let available: usize = by_domain.values().map(BTreeMap::len).sum();
    if available < k {
        return Err(AgreementError::InsufficientPairs {
            requested: k,
            available,
        });
    }

    let sizes: Vec<usize> = by_domain.values().map(BTreeMap::len).collect();
    let quotas = proportional_quotas(&sizes, k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(k);
    for (pairs, quota) in by_domain.into_values().zip(quotas) {
        let pool: Vec<AnnotationPair> = pairs.into_values().collect();
        for i in index::sample(&mut rng, pool.len(), quota) {
            out.push(pool[i].clone());
        }
    }
    Ok(out)
}

/// Largest-remainder apportionment of `k` over groups of the given sizes.
/// Ties in remainder go to the earlier group. Assumes `k <= sum(sizes)`.
fn proportional_quotas(sizes: &[usize], k: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let mut quotas: Vec<usize> = sizes.iter().map(|&n| n * k / total).collect();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // remainder of n*k/total, compared as n*k mod total
    order.sort_by_key(|&i| std::cmp::Reverse((sizes[i] * k) % total));
    let mut left = k - quotas.iter().sum::<usize>();
    while left > 0 {
        let before = left;
        for &i in &order {
            if left > 0 && quotas[i] < sizes[i] {
                quotas[i] += 1;
                left -= 1;
            }
        }
        assert!(left < before, "apportionment cannot exceed available pairs");
    }
    quotas
}

/// Fraction of records where strictly more than half the judgments are positive.
pub fn majority_vote_rate(records: &[AnnotationRecord]) -> Result<f64, AgreementError> {
    if records.is_empty() {
        return Err(AgreementError::NotEnoughData("one record"));
    }
    let mut wins = 0;
    for r in records {
        r.validate()?;
        let n = r.judgments.len();
        if n < 3 || n % 2 == 0 {
            return Err(AgreementError::BadJudgmentCount {
                pair_id: r.pair_id.clone(),
                count: n,
            });
        }
        if 2 * r.positives() > n {
            wins += 1;
        }
    }
    Ok(wins as f64 / records.len() as f64)
}

/// Fraction of records with at least one positive judgment.
pub fn at_least_one_rate(records: &[AnnotationRecord]) -> Result<f64, AgreementError> {
    if records.is_empty() {
        return Err(AgreementError::NotEnoughData("one record"));
    }
    for r in records {
        r.validate()?;
    }
    Ok(records.iter().filter(|r| r.positives() > 0).count() as f64 / records.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    /// Set when every pairable judgment carries the same label, so expected
    /// disagreement is zero; alpha is then reported as 1.
    pub degenerate: bool,
    pub units_used: usize,
    pub pairable_values: usize,
}

/// Krippendorff's alpha, nominal metric, binary labels.
///
/// Units with fewer than two judgments contribute no pairs and are skipped.
/// For a unit with `m` judgments of which `a` are positive, the off-diagonal
/// coincidence contribution is `a(m-a)/(m-1)` in each direction.
pub fn krippendorff_alpha(records: &[AnnotationRecord]) -> Result<AlphaResult, AgreementError> {
    if records.len() < 2 {
        return Err(AgreementError::NotEnoughData("two records"));
    }
    let mut n_pos = 0.0;
    let mut n_neg = 0.0;
    let mut disagree = 0.0;
    let mut units_used = 0;
    for r in records {
        r.validate()?;
        let m = r.judgments.len();
        if m < 2 {
            continue;
        }
        units_used += 1;
        let a = r.positives() as f64;
        let b = m as f64 - a;
        n_pos += a;
        n_neg += b;
        disagree += 2.0 * a * b / (m as f64 - 1.0);
    }
    if units_used == 0 {
        return Err(AgreementError::NotEnoughData("one record with two or more judgments"));
    }
    let n = n_pos + n_neg;
    let expected = 2.0 * n_pos * n_neg;
    if expected == 0.0 {
        return Ok(AlphaResult {
            alpha: 1.0,
            degenerate: true,
            units_used,
            pairable_values: n as usize,
        });
    }
    Ok(AlphaResult {
        alpha: 1.0 - (n - 1.0) * disagree / expected,
        degenerate: false,
        units_used,
        pairable_values: n as usize,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementStats {
    pub condition: String,
    pub records: usize,
    pub majority_vote: f64,
    pub at_least_one: f64,
    pub alpha: AlphaResult,
}

pub fn agreement_stats(
    condition: impl Into<String>,
    records: &[AnnotationRecord],
) -> Result<AgreementStats, AgreementError> {
    Ok(AgreementStats {
        condition: condition.into(),
        records: records.len(),
        majority_vote: majority_vote_rate(records)?,
        at_least_one: at_least_one_rate(records)?,
        alpha: krippendorff_alpha(records)?,
    })
}

/// Annotator-facing CSV: `pair_id,domain,gold_event,predicted_event`. Scores
/// are left out so they cannot anchor judgments.
pub fn export_pairs_csv<W: Write>(pairs: &[AnnotationPair], out: W) -> Result<(), AgreementError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["pair_id", "domain", "gold_event", "predicted_event"])?;
    for p in pairs {
        w.write_record([&p.pair_id, &p.domain, &p.gold_event, &p.predicted_event])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Deserialize)]
struct JudgmentRow {
    pair_id: String,
    annotator_id: String,
    judgment: String,
}

/// Reads `pair_id,annotator_id,judgment` rows (judgment `1` or `0`) and groups
/// them into records in order of first appearance.
pub fn import_judgments_csv<R: Read>(input: R) -> Result<Vec<AnnotationRecord>, AgreementError> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    for required in ["pair_id", "annotator_id", "judgment"] {
        if !headers.iter().any(|h| h == required) {
            return Err(AgreementError::Csv {
                line: 1,
                message: format!("missing column {required:?}"),
            });
        }
    }
    let mut records: Vec<AnnotationRecord> = Vec::new();
    let mut slot: HashMap<String, usize> = HashMap::new();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| AgreementError::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let row: JudgmentRow = rec.deserialize(Some(&headers)).map_err(|e| AgreementError::Csv {
            line,
            message: e.to_string(),
        })?;
        let judgment = match row.judgment.as_str() {
            "1" => true,
            "0" => false,
            other => {
                return Err(AgreementError::Csv {
                    line,
                    message: format!("judgment must be 1 or 0, got {other:?}"),
                })
            }
        };
        if row.pair_id.is_empty() || row.annotator_id.is_empty() {
            return Err(AgreementError::Csv {
                line,
                message: "empty pair_id or annotator_id".into(),
            });
        }
        if !seen.insert((row.pair_id.clone(), row.annotator_id.clone())) {
            return Err(AgreementError::Csv {
                line,
                message: format!("annotator {} judged pair {} twice", row.annotator_id, row.pair_id),
            });
        }
        let i = *slot.entry(row.pair_id.clone()).or_insert_with(|| {
            records.push(AnnotationRecord {
                pair_id: row.pair_id.clone(),
                judgments: Vec::new(),
                annotator_ids: Vec::new(),
            });
            records.len() - 1
        });
        records[i].judgments.push(judgment);
        records[i].annotator_ids.push(row.annotator_id);
    }
    Ok(records)
}
