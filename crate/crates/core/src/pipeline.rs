//! File-level orchestration behind the command-line subcommands.
//!
//! Generated schemas are named `<domain>__<prompt_id>__s<sample>.json`; pooled
//! schemas are `<domain>__union__merged.json` (prompt union) and
//! `<domain>__simple-triplet__s<sample>.json` (one per sample index).
//! Evaluation writes `reports/<pred>__vs__<gold>.report.json`, `summary.json`
//! and the recall and style tables into its output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::{info, warn};
use serde::Serialize;
use thiserror::Error;

use crate::agreement::{
    agreement_stats, export_pairs_csv, import_judgments_csv, sample_pairs, AgreementError, AgreementStats,
    AnnotationPair,
};
use crate::cache::content_key;
use crate::config::{ConfigError, RunConfig};
use crate::entailment::{build_score_matrix, EntailmentError, EntailmentScorer};
use crate::generation::{GenerationClient, GenerationError};
use crate::metrics::{
    event_recall, schema_overlap, summarize_samples, MetricsError, OverlapReport, RecallConfig, RecallReport,
};
use crate::parser::{merge_schemas, parse_generation, DedupPolicy, ParseError};
use crate::prompt::{PromptError, PromptSpec};
use crate::reporting::{build_agreement_table, build_recall_table, build_style_table, RecallRow, ReportError};
use crate::schema::{load_schema, save_schema, Schema, SchemaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Data,
    Transport,
    Other,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error("prompt {prompt_id}: {source}")]
    Generation {
        prompt_id: String,
        #[source]
        source: GenerationError,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("{file}: {source}")]
    Metrics {
        file: String,
        #[source]
        source: MetricsError,
    },
    #[error("{file}: no gold schema for domain {domain:?}")]
    NoGoldForDomain { file: String, domain: String },
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Agreement(#[from] AgreementError),
    #[error("{file}: {message}")]
    BadReport { file: String, message: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl PipelineError {
    pub fn category(&self) -> ErrorCategory {
        fn generation(e: &GenerationError) -> ErrorCategory {
            match e {
                GenerationError::MissingApiKey(_) | GenerationError::InvalidConfig(_) => ErrorCategory::Config,
                GenerationError::Cache(_) => ErrorCategory::Data,
                _ => ErrorCategory::Transport,
            }
        }
        fn entailment(e: &EntailmentError) -> ErrorCategory {
            match e {
                EntailmentError::Transport(_) | EntailmentError::Provider { .. } | EntailmentError::Contract(_) => {
                    ErrorCategory::Transport
                }
                EntailmentError::InvalidConfig(_) => ErrorCategory::Config,
                _ => ErrorCategory::Data,
            }
        }
        match self {
            PipelineError::Config(ConfigError::Generation(e)) => generation(e),
            PipelineError::Config(ConfigError::Schema(_)) => ErrorCategory::Data,
            PipelineError::Config(_) | PipelineError::Prompt(_) | PipelineError::Usage(_) => ErrorCategory::Config,
            PipelineError::Generation { source, .. } => generation(source),
            PipelineError::Metrics {
                source: MetricsError::Entailment(e),
                ..
            } => entailment(e),
            PipelineError::Metrics {
                source: MetricsError::InvalidThreshold(_),
                ..
            } => ErrorCategory::Config,
            PipelineError::Io { .. } => ErrorCategory::Other,
            _ => ErrorCategory::Data,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut body = serde_json::to_string_pretty(value).expect("report types serialize");
    body.push('\n');
    fs::write(path, body).map_err(io_err(path))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenerateMode {
    Zero,
    One,
    Union,
    SimpleTriplet,
}

impl FromStr for GenerateMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(GenerateMode::Zero),
            "one" => Ok(GenerateMode::One),
            "union" => Ok(GenerateMode::Union),
            "simple-triplet" => Ok(GenerateMode::SimpleTriplet),
            other => Err(format!(
                "unknown mode {other:?}; expected zero, one, union or simple-triplet"
            )),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenerateOutcome {
    /// One file per (prompt, sample) that parsed.
    pub files: Vec<PathBuf>,
    /// Pooled schemas (union and simple-triplet modes).
    pub merged: Vec<PathBuf>,
    /// `prompt_id#sample: reason` for generations that did not parse.
    pub skipped: Vec<String>,
}

pub fn generation_file_name(domain: &str, prompt_id: &str, sample: usize) -> String {
    format!("{domain}__{prompt_id}__s{sample}.json")
}

pub fn prompt_specs(cfg: &RunConfig, domain_id: &str, mode: GenerateMode) -> Result<Vec<PromptSpec>, PipelineError> {
    let domain = cfg.domain(domain_id)?;
    let templates = cfg.templates()?;
    Ok(match mode {
        GenerateMode::Zero => vec![templates.render_zero_shot(cfg.zero_shot.verbalizer, domain, cfg.sampling)?],
        GenerateMode::One => templates.build_one_shot_set(
            cfg.one_shot.verbalizer,
            domain,
            &cfg.demonstrations(domain_id)?,
            cfg.sampling,
        )?,
        GenerateMode::Union => templates.build_prompt_union(domain, cfg.sampling)?,
        GenerateMode::SimpleTriplet => templates.build_simple_triplet(domain, cfg.sampling)?,
    })
}

/// Generates, parses and saves schemas for one domain. Generations that do
/// not parse are reported in `skipped` rather than failing the run.
pub fn generate(
    cfg: &RunConfig,
    client: &GenerationClient,
    domain_id: &str,
    mode: GenerateMode,
    out_dir: &Path,
) -> Result<GenerateOutcome, PipelineError> {
    let specs = prompt_specs(cfg, domain_id, mode)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut outcome = GenerateOutcome::default();
    let mut parsed: Vec<Schema> = Vec::new();
    for spec in &specs {
        let prompt_id = spec.prompt_id();
        let records = client.generate(spec).map_err(|source| PipelineError::Generation {
            prompt_id: prompt_id.clone(),
            source,
        })?;
        for record in &records {
            match parse_generation(record) {
                Ok(schema) => {
                    let path = out_dir.join(generation_file_name(domain_id, &prompt_id, record.sample_index));
                    save_schema(&schema, &path)?;
                    outcome.files.push(path);
                    parsed.push(schema);
                }
                Err(e) => {
                    warn!("{prompt_id} sample {}: {e}", record.sample_index);
                    outcome
                        .skipped
                        .push(format!("{prompt_id}#{}: {e}", record.sample_index));
                }
            }
        }
    }
    match mode {
        GenerateMode::Union if !parsed.is_empty() => {
            let merged = merge_schemas(&parsed, DedupPolicy::ExactNormalized)?;
            let path = out_dir.join(format!("{domain_id}__union__merged.json"));
            save_schema(&merged, &path)?;
            outcome.merged.push(path);
        }
        GenerateMode::SimpleTriplet => {
            for sample in 0..cfg.sampling.num_samples {
                let parts: Vec<Schema> = parsed
                    .iter()
                    .filter(|s| s.source.sample_index == Some(sample))
                    .cloned()
                    .collect();
                if parts.is_empty() {
                    continue;
                }
                let mut merged = merge_schemas(&parts, DedupPolicy::ExactNormalized)?;
                merged.source.sample_index = Some(sample);
                let path = out_dir.join(format!("{domain_id}__simple-triplet__s{sample}.json"));
                save_schema(&merged, &path)?;
                outcome.merged.push(path);
            }
        }
        _ => {}
    }
    info!(
        "{domain_id}: {} schema files, {} pooled, {} skipped",
        outcome.files.len(),
        outcome.merged.len(),
        outcome.skipped.len()
    );
    Ok(outcome)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "schema".into())
}

/// Content hashes of input files, for deriving run ids.
pub fn input_digests(paths: &[PathBuf]) -> Result<Vec<String>, PipelineError> {
    paths
        .iter()
        .map(|p| {
            let bytes = fs::read(p).map_err(|source| SchemaError::Io {
                path: p.display().to_string(),
                source,
            })?;
            Ok(content_key(&bytes))
        })
        .collect()
}

/// Fingerprint tying recall rows to the scorer and metric settings.
pub fn evaluation_fingerprint(scorer: &EntailmentScorer, recall: &RecallConfig) -> String {
    content_key(&(scorer.fingerprint(), recall))[..16].to_string()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOutcome {
    pub report_files: Vec<PathBuf>,
    pub reports: Vec<RecallReport>,
    pub summaries: Vec<RecallRow>,
}

/// Scores every prediction against every gold schema of the same domain,
/// then summarizes across samples per (domain, system, gold dataset).
pub fn evaluate(
    scorer: &EntailmentScorer,
    gold_paths: &[PathBuf],
    pred_paths: &[PathBuf],
    recall: &RecallConfig,
    out_dir: &Path,
) -> Result<EvaluateOutcome, PipelineError> {
    if gold_paths.is_empty() || pred_paths.is_empty() {
        return Err(PipelineError::Usage(
            "evaluate needs at least one gold and one predicted schema".into(),
        ));
    }
    recall.validate().map_err(|source| PipelineError::Metrics {
        file: "<config>".into(),
        source,
    })?;
    let golds: Vec<(PathBuf, Schema)> = gold_paths
        .iter()
        .map(|p| Ok((p.clone(), load_schema(p)?)))
        .collect::<Result<_, PipelineError>>()?;
    let preds: Vec<(PathBuf, Schema)> = pred_paths
        .iter()
        .map(|p| Ok((p.clone(), load_schema(p)?)))
        .collect::<Result<_, PipelineError>>()?;

    let report_dir = out_dir.join("reports");
    fs::create_dir_all(&report_dir).map_err(io_err(&report_dir))?;
    let fingerprint = evaluation_fingerprint(scorer, recall);

    struct Group {
        domain: String,
        system: String,
        gold_dataset: String,
        recalls: Vec<f64>,
        counts: Vec<usize>,
    }
    let mut groups: Vec<Group> = Vec::new();
    let mut outcome = EvaluateOutcome {
        report_files: Vec::new(),
        reports: Vec::new(),
        summaries: Vec::new(),
    };
    for (pred_path, pred) in &preds {
        let file = pred_path.display().to_string();
        let matching: Vec<&(PathBuf, Schema)> = golds.iter().filter(|(_, g)| g.domain.id == pred.domain.id).collect();
        if matching.is_empty() {
            return Err(PipelineError::NoGoldForDomain {
                file,
                domain: pred.domain.id.clone(),
            });
        }
        for (gold_path, gold) in matching {
            let metrics = |source: MetricsError| PipelineError::Metrics {
                file: file.clone(),
                source,
            };
            let matrix = build_score_matrix(gold, pred, scorer)
                .map_err(MetricsError::from)
                .map_err(metrics)?;
            let report = event_recall(gold, pred, &matrix, recall).map_err(metrics)?;
            let path = report_dir.join(format!(
                "{}__vs__{}.report.json",
                file_stem(pred_path),
                file_stem(gold_path)
            ));
            write_json(&path, &report)?;

            let system = pred.source.system_label();
            let gold_dataset = gold.source.dataset_or_model.clone();
            let idx = match groups
                .iter()
                .position(|g| g.domain == report.domain && g.system == system && g.gold_dataset == gold_dataset)
            {
                Some(i) => i,
                None => {
                    groups.push(Group {
                        domain: report.domain.clone(),
                        system,
                        gold_dataset,
                        recalls: Vec::new(),
                        counts: Vec::new(),
                    });
                    groups.len() - 1
                }
            };
            groups[idx].recalls.push(report.recall);
            groups[idx].counts.push(report.predicted_event_count);
            outcome.report_files.push(path);
            outcome.reports.push(report);
        }
    }
    for g in groups {
        let summary = summarize_samples(&g.recalls).map_err(|source| PipelineError::Metrics {
            file: g.domain.clone(),
            source,
        })?;
        outcome.summaries.push(RecallRow {
            domain: g.domain,
            system: g.system,
            gold_dataset: g.gold_dataset,
            summary,
            event_count: g.counts.iter().sum::<usize>() as f64 / g.counts.len() as f64,
            config_fingerprint: fingerprint.clone(),
        });
    }
    write_json(&out_dir.join("summary.json"), &outcome.summaries)?;
    build_recall_table(&outcome.summaries)?.write_all(out_dir, "recall")?;
    let all_schemas: Vec<Schema> = golds.into_iter().chain(preds).map(|(_, s)| s).collect();
    build_style_table(&all_schemas)?.write_all(out_dir, "style")?;
    Ok(outcome)
}

pub fn overlap(
    scorer: &EntailmentScorer,
    a_path: &Path,
    b_path: &Path,
    recall: &RecallConfig,
) -> Result<OverlapReport, PipelineError> {
    let a = load_schema(a_path)?;
    let b = load_schema(b_path)?;
    schema_overlap(&a, &b, recall, scorer).map_err(|source| PipelineError::Metrics {
        file: format!("{} / {}", a_path.display(), b_path.display()),
        source,
    })
}

/// All `*.report.json` files under `dir`, recursively, in path order.
pub fn find_reports(dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).map_err(io_err(&d))? {
            let path = entry.map_err(io_err(&d))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.to_string_lossy().ends_with(".report.json") {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub fn load_report(path: &Path) -> Result<RecallReport, PipelineError> {
    let raw = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&raw).map_err(|e| PipelineError::BadReport {
        file: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Samples `k` matched pairs from the reports under `reports_dir` and writes
/// `pairs.csv` (annotator-facing) and `pairs.json` (with scores and sources).
pub fn sample_for_annotation(
    reports_dir: &Path,
    k: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<AnnotationPair>, PipelineError> {
    let paths = find_reports(reports_dir)?;
    if paths.is_empty() {
        return Err(PipelineError::Usage(format!(
            "no *.report.json files under {}",
            reports_dir.display()
        )));
    }
    let reports = paths.iter().map(|p| load_report(p)).collect::<Result<Vec<_>, _>>()?;
    let pairs = sample_pairs(&reports, k, seed)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let csv_path = out_dir.join("pairs.csv");
    let file = fs::File::create(&csv_path).map_err(io_err(&csv_path))?;
    export_pairs_csv(&pairs, file)?;
    write_json(&out_dir.join("pairs.json"), &pairs)?;
    Ok(pairs)
}

/// Reads judgments, computes the three statistics and writes the agreement table.
pub fn import_annotations(csv_path: &Path, condition: &str, out_dir: &Path) -> Result<AgreementStats, PipelineError> {
    let file = fs::File::open(csv_path).map_err(io_err(csv_path))?;
    let records = import_judgments_csv(file)?;
    let stats = agreement_stats(condition, &records)?;
    build_agreement_table(std::slice::from_ref(&stats))?.write_all(out_dir, "agreement")?;
    Ok(stats)
}
