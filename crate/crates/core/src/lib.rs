//! Drafting event schemas with language models and scoring them against
//! gold schemas through entailment-based event recall.

pub mod agreement;
pub mod cache;
pub mod config;
pub mod entailment;
pub mod generation;
pub mod metrics;
pub mod parallel;
pub mod parser;
pub mod pipeline;
pub mod prompt;
pub mod reporting;
pub mod schema;

pub use agreement::{AgreementStats, AlphaResult, AnnotationPair, AnnotationRecord};
pub use config::RunConfig;
pub use entailment::{EntailmentDistribution, EntailmentProvider, EntailmentScorer, Grid, ScoreMatrix};
pub use generation::{CompletionBackend, GenerationClient, GenerationRecord};
pub use metrics::{Aggregation, Direction, RecallConfig, RecallReport, SampleSummary};
pub use parser::DedupPolicy;
pub use pipeline::{ErrorCategory, GenerateMode, PipelineError};
pub use prompt::{PromptSpec, SamplingParams, VerbalizerId};
pub use reporting::{Cell, TableDocument};
pub use schema::{Domain, EventStatement, Phase, Schema, ShotMode, SourceKind, SourceTag};
