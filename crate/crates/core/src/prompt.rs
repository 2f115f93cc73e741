//! Verbalizer templates and prompt rendering for zero-shot, one-shot,
//! prompt-union and simple-triplet generation.
//!
//! Templates use two placeholders: `{d}` is replaced by the domain's display
//! name and `{a_d}` by the display name preceded by "a" or "an".

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{Domain, Phase, Schema, ShotMode};

#[derive(Debug, Error, PartialEq)]
pub enum PromptError {
    #[error("unknown verbalizer id {0:?}")]
    UnknownVerbalizer(String),
    #[error("verbalizer {0} is not a zero-shot template")]
    NotZeroShot(VerbalizerId),
    #[error("demonstration must come from a different domain")]
    SameDomainDemonstration,
    #[error("demonstration schema has no events")]
    EmptyDemonstration,
    #[error("domain {0:?} has an empty display name")]
    EmptyDisplayName(String),
    #[error("rendered prompt does not mention the domain {0:?}")]
    DomainMissing(String),
    #[error("invalid sampling parameters: {0}")]
    InvalidSampling(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerbalizerId {
    Temporal,
    Causes,
    CausesTemporal,
    SimpleBefore,
    SimpleDuring,
    SimpleAfter,
    StepsBaseline,
}

impl VerbalizerId {
    pub const ALL: [VerbalizerId; 7] = [
        VerbalizerId::Temporal,
        VerbalizerId::Causes,
        VerbalizerId::CausesTemporal,
        VerbalizerId::SimpleBefore,
        VerbalizerId::SimpleDuring,
        VerbalizerId::SimpleAfter,
        VerbalizerId::StepsBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            VerbalizerId::Temporal => "temporal",
            VerbalizerId::Causes => "causes",
            VerbalizerId::CausesTemporal => "causes_temporal",
            VerbalizerId::SimpleBefore => "simple_before",
            VerbalizerId::SimpleDuring => "simple_during",
            VerbalizerId::SimpleAfter => "simple_after",
            VerbalizerId::StepsBaseline => "steps_baseline",
        }
    }

    /// The phase every event from this verbalizer's output belongs to, if fixed.
    pub fn implied_phase(self) -> Option<Phase> {
        match self {
            VerbalizerId::SimpleBefore => Some(Phase::Before),
            VerbalizerId::SimpleDuring => Some(Phase::During),
            VerbalizerId::SimpleAfter => Some(Phase::After),
            _ => None,
        }
    }

    fn default_template(self) -> &'static str {
        match self {
            VerbalizerId::Temporal => {
                "List 10 things that each happen (1) before; (2) during; and (3) after {a_d}?\n\nBefore {a_d}, there are several things that can happen:\n\n1."
            }
            VerbalizerId::Causes => {
                "List causes and events that can happen over the course of {a_d}?\n\nCauses of {a_d}:\n\n1."
            }
            VerbalizerId::CausesTemporal => {
                "List causes and events that can happen before, during and after {a_d}?\n\nCauses of {a_d}:\n\n1."
            }
            VerbalizerId::SimpleBefore => "List events that occur before {a_d}.\n\n1.",
            VerbalizerId::SimpleDuring => "List events that occur during {a_d}.\n\n1.",
            VerbalizerId::SimpleAfter => "List events that occur after {a_d}.\n\n1.",
            VerbalizerId::StepsBaseline => "What are the steps involved in {d}? 1.",
        }
    }
}

impl fmt::Display for VerbalizerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VerbalizerId {
    type Err = PromptError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        VerbalizerId::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| PromptError::UnknownVerbalizer(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub top_p: f64,
    pub temperature: f64,
    pub num_samples: usize,
    pub max_tokens: u32,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            top_p: 1.0,
            temperature: 0.7,
            num_samples: 3,
            max_tokens: 1024,
        }
    }
}

impl SamplingParams {
    pub fn with_samples(mut self, num_samples: usize) -> Self {
        self.num_samples = num_samples;
        self
    }

    pub fn validate(&self) -> Result<(), PromptError> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(PromptError::InvalidSampling(format!(
                "top_p must be in (0, 1], got {}",
                self.top_p
            )));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(PromptError::InvalidSampling(format!(
                "temperature must be non-negative, got {}",
                self.temperature
            )));
        }
        if self.num_samples == 0 {
            return Err(PromptError::InvalidSampling("num_samples must be positive".into()));
        }
        if self.max_tokens == 0 {
            return Err(PromptError::InvalidSampling("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demonstration {
    pub domain: Domain,
    pub schema: Schema,
}

/// A fully rendered prompt plus the strategy that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptSpec {
    pub verbalizer: VerbalizerId,
    pub domain: Domain,
    pub shot_mode: ShotMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demonstration: Option<Demonstration>,
    pub rendered_text: String,
    pub sampling: SamplingParams,
}

impl PromptSpec {
    /// Identifier recorded in generated schemas' source tags, e.g. `temporal`
    /// or `temporal.demo-kidnapping`.
    pub fn prompt_id(&self) -> String {
        match &self.demonstration {
            Some(demo) => format!("{}.demo-{}", self.verbalizer, demo.domain.id),
            None => self.verbalizer.to_string(),
        }
    }
}

/// Verbalizer template table. Starts from the built-in templates; entries may
/// be overridden from the run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Templates {
    table: BTreeMap<VerbalizerId, String>,
}

impl Default for Templates {
    fn default() -> Self {
        Self {
            table: VerbalizerId::ALL
                .into_iter()
                .map(|v| (v, v.default_template().to_string()))
                .collect(),
        }
    }
}

impl Templates {
    pub fn with_overrides<'a>(overrides: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, PromptError> {
        let mut templates = Self::default();
        for (id, text) in overrides {
            templates.table.insert(id.parse()?, text.to_string());
        }
        Ok(templates)
    }

    pub fn get(&self, verbalizer: VerbalizerId) -> &str {
        &self.table[&verbalizer]
    }

    fn fill(&self, verbalizer: VerbalizerId, domain: &Domain) -> String {
        fill_placeholders(self.get(verbalizer), domain)
    }

    pub fn render_zero_shot(
        &self,
        verbalizer: VerbalizerId,
        domain: &Domain,
        sampling: SamplingParams,
    ) -> Result<PromptSpec, PromptError> {
        check_domain(domain)?;
        let rendered_text = self.fill(verbalizer, domain);
        finish(PromptSpec {
            verbalizer,
            domain: domain.clone(),
            shot_mode: ShotMode::ZeroShot,
            demonstration: None,
            rendered_text,
            sampling,
        })
    }

    pub fn render_one_shot(
        &self,
        verbalizer: VerbalizerId,
        domain: &Domain,
        demo: &Demonstration,
        sampling: SamplingParams,
    ) -> Result<PromptSpec, PromptError> {
        check_domain(domain)?;
        check_domain(&demo.domain)?;
        if demo.domain.id == domain.id {
            return Err(PromptError::SameDomainDemonstration);
        }
        if demo.schema.events.is_empty() {
            return Err(PromptError::EmptyDemonstration);
        }
        let mut text = render_demonstration(demo);
        text.push('\n');
        text.push_str(&self.fill(verbalizer, domain));
        finish(PromptSpec {
            verbalizer,
            domain: domain.clone(),
            shot_mode: ShotMode::OneShot,
            demonstration: Some(demo.clone()),
            rendered_text: text,
            sampling,
        })
    }

    /// The three zero-shot prompts whose samples are pooled in prompt-union mode.
    pub fn build_prompt_union(
        &self,
        domain: &Domain,
        sampling: SamplingParams,
    ) -> Result<Vec<PromptSpec>, PromptError> {
        [
            VerbalizerId::Temporal,
            VerbalizerId::Causes,
            VerbalizerId::CausesTemporal,
        ]
        .into_iter()
        .map(|v| self.render_zero_shot(v, domain, sampling))
        .collect()
    }

    /// Independent before / during / after prompts for models that struggle
    /// with the combined temporal prompt.
    pub fn build_simple_triplet(
        &self,
        domain: &Domain,
        sampling: SamplingParams,
    ) -> Result<Vec<PromptSpec>, PromptError> {
        [
            VerbalizerId::SimpleBefore,
            VerbalizerId::SimpleDuring,
            VerbalizerId::SimpleAfter,
        ]
        .into_iter()
        .map(|v| self.render_zero_shot(v, domain, sampling))
        .collect()
    }

    /// One one-shot prompt per demonstration, in the order given.
    pub fn build_one_shot_set(
        &self,
        verbalizer: VerbalizerId,
        domain: &Domain,
        demos: &[Demonstration],
        sampling: SamplingParams,
    ) -> Result<Vec<PromptSpec>, PromptError> {
        demos
            .iter()
            .map(|demo| self.render_one_shot(verbalizer, domain, demo, sampling))
            .collect()
    }
}

pub fn render_zero_shot(
    verbalizer: VerbalizerId,
    domain: &Domain,
    sampling: SamplingParams,
) -> Result<PromptSpec, PromptError> {
    Templates::default().render_zero_shot(verbalizer, domain, sampling)
}

pub fn render_one_shot(
    verbalizer: VerbalizerId,
    domain: &Domain,
    demo: &Demonstration,
    sampling: SamplingParams,
) -> Result<PromptSpec, PromptError> {
    Templates::default().render_one_shot(verbalizer, domain, demo, sampling)
}

pub fn build_prompt_union(domain: &Domain, sampling: SamplingParams) -> Result<Vec<PromptSpec>, PromptError> {
    Templates::default().build_prompt_union(domain, sampling)
}

pub fn build_simple_triplet(domain: &Domain, sampling: SamplingParams) -> Result<Vec<PromptSpec>, PromptError> {
    Templates::default().build_simple_triplet(domain, sampling)
}

/// "a" or "an" by first letter.
pub fn indefinite_article(phrase: &str) -> &'static str {
    match phrase.trim_start().chars().next().map(|c| c.to_ascii_lowercase()) {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn with_article(phrase: &str) -> String {
    format!("{} {}", indefinite_article(phrase), phrase)
}

fn fill_placeholders(template: &str, domain: &Domain) -> String {
    template
        .replace("{a_d}", &with_article(&domain.display_name))
        .replace("{d}", &domain.display_name)
}

fn check_domain(domain: &Domain) -> Result<(), PromptError> {
    if domain.display_name.trim().is_empty() {
        return Err(PromptError::EmptyDisplayName(domain.id.clone()));
    }
    Ok(())
}

fn finish(spec: PromptSpec) -> Result<PromptSpec, PromptError> {
    spec.sampling.validate()?;
    if !spec.rendered_text.contains(&spec.domain.display_name) {
        return Err(PromptError::DomainMissing(spec.domain.display_name.clone()));
    }
    Ok(spec)
}

fn phase_heading(phase: Phase, demo_domain: &str) -> String {
    let a_d = with_article(demo_domain);
    match phase {
        Phase::Before => format!("Before {a_d}:"),
        Phase::During => format!("During {a_d}:"),
        Phase::After => format!("After {a_d}:"),
        Phase::Unspecified => "Other events:".to_string(),
    }
}

/// Demonstration block: a header naming the demo domain, then its events as
/// a numbered list. Phase-tagged demos get a subheading whenever the phase
/// changes, with numbering restarting under each subheading.
fn render_demonstration(demo: &Demonstration) -> String {
    let name = &demo.domain.display_name;
    let mut out = format!("Schema for {}:\n", with_article(name));
    let sectioned = demo.schema.events.iter().any(|e| e.phase() != Phase::Unspecified);
    let mut current: Option<Phase> = None;
    let mut number = 0;
    for event in &demo.schema.events {
        if sectioned && current != Some(event.phase()) {
            current = Some(event.phase());
            number = 0;
            out.push_str(&phase_heading(event.phase(), name));
            out.push('\n');
        }
        number += 1;
        out.push_str(&format!("{number}. {}\n", event.text));
    }
    out
}
