//! Domains, event statements and schemas, plus the canonical JSON file format.
//!
//! A schema is an ordered list of short natural-language event statements
//! anchored to a domain. Order is significant and is never changed by any
//! operation in this module.

use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("failed to parse schema {path}: {source} (line {line}, column {column})", line = .source.line(), column = .source.column())]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("schema has no events")]
    NoEvents,
    #[error("duplicate event index {0}")]
    DuplicateIndex(usize),
    #[error("event indices are not contiguous: expected {expected}, found {found}")]
    NonContiguousIndex { expected: usize, found: usize },
    #[error("event {index} has empty text")]
    EmptyEventText { index: usize },
    #[error("event {index} carries a list-numbering prefix: {text:?}")]
    NumberingPrefix { index: usize, text: String },
    #[error("invalid domain id {0:?}: expected lowercase hyphen-delimited words")]
    InvalidDomainId(String),
    #[error("domain {0:?} has an empty display name")]
    EmptyDisplayName(String),
    #[error("invalid source tag: {0}")]
    InvalidSource(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The topic a schema is anchored to, e.g. `disease-outbreak` / "disease outbreak".
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Domain {
    pub id: String,
    pub display_name: String,
}

impl Domain {
    pub fn new(id: impl Into<String>, display_name: impl Into<String>) -> Result<Self, SchemaError> {
        let domain = Self {
            id: id.into(),
            display_name: display_name.into(),
        };
        domain.validate()?;
        Ok(domain)
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        static ID: OnceLock<Regex> = OnceLock::new();
        let re = ID.get_or_init(|| Regex::new(r"^[a-z0-9]+(-[a-z0-9]+)*$").unwrap());
        if !re.is_match(&self.id) {
            return Err(SchemaError::InvalidDomainId(self.id.clone()));
        }
        if self.display_name.trim().is_empty() {
            return Err(SchemaError::EmptyDisplayName(self.id.clone()));
        }
        Ok(())
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display_name)
    }
}

/// Temporal section of a structured generation an event came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Before,
    During,
    After,
    #[default]
    Unspecified,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Before => "before",
            Phase::During => "during",
            Phase::After => "after",
            Phase::Unspecified => "unspecified",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventStatement {
    pub index: usize,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
}

impl EventStatement {
    pub fn new(index: usize, text: impl Into<String>) -> Self {
        Self {
            index,
            text: text.into().trim().to_string(),
            phase: None,
        }
    }

    pub fn with_phase(mut self, phase: Phase) -> Self {
        self.phase = Some(phase);
        self
    }

    pub fn phase(&self) -> Phase {
        self.phase.unwrap_or_default()
    }
}

/// Returns true when `text` starts with a list marker such as `1.`, `(2)` or `3)`.
pub fn has_numbering_prefix(text: &str) -> bool {
    static PREFIX: OnceLock<Regex> = OnceLock::new();
    let re = PREFIX.get_or_init(|| Regex::new(r"^\s*(\(\d+\)|\d+[.)])(\s|$)").unwrap());
    re.is_match(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Gold,
    Generated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotMode {
    ZeroShot,
    OneShot,
}

impl ShotMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ShotMode::ZeroShot => "zero_shot",
            ShotMode::OneShot => "one_shot",
        }
    }
}

/// Where a schema came from: a gold dataset, or a model under a given prompt and sample.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceTag {
    pub kind: SourceKind,
    pub dataset_or_model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot_mode: Option<ShotMode>,
}

impl SourceTag {
    pub fn gold(dataset: impl Into<String>) -> Self {
        Self {
            kind: SourceKind::Gold,
            dataset_or_model: dataset.into(),
            prompt_id: None,
            sample_index: None,
            shot_mode: None,
        }
    }

    pub fn generated(
        model: impl Into<String>,
        prompt_id: impl Into<String>,
        sample_index: usize,
        shot_mode: ShotMode,
    ) -> Self {
        Self {
            kind: SourceKind::Generated,
            dataset_or_model: model.into(),
            prompt_id: Some(prompt_id.into()),
            sample_index: Some(sample_index),
            shot_mode: Some(shot_mode),
        }
    }

    pub fn validate(&self) -> Result<(), SchemaError> {
        let extras = [
            self.prompt_id.is_some(),
            self.sample_index.is_some(),
            self.shot_mode.is_some(),
        ];
        match self.kind {
            SourceKind::Gold if extras.iter().any(|&x| x) => Err(SchemaError::InvalidSource(
                "gold sources must not carry prompt_id, sample_index or shot_mode".into(),
            )),
            SourceKind::Generated if !extras.iter().all(|&x| x) => Err(SchemaError::InvalidSource(
                "generated sources require prompt_id, sample_index and shot_mode".into(),
            )),
            _ => Ok(()),
        }
    }

    /// Short label used to group schemas into table columns, e.g. `resin-11`
    /// or `text-davinci-003 zero_shot`.
    pub fn system_label(&self) -> String {
        match (self.kind, self.shot_mode) {
            (SourceKind::Generated, Some(mode)) => {
                let union = self
                    .prompt_id
                    .as_deref()
                    .is_some_and(|p| p.starts_with(crate::parser::UNION_PREFIX));
                if union {
                    format!("{} {} union", self.dataset_or_model, mode.as_str())
                } else {
                    format!("{} {}", self.dataset_or_model, mode.as_str())
                }
            }
            _ => self.dataset_or_model.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub domain: Domain,
    pub source: SourceTag,
    pub events: Vec<EventStatement>,
}

impl Schema {
    /// Builds a schema from event texts, assigning contiguous indices.
    pub fn from_texts<I, S>(domain: Domain, source: SourceTag, texts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let events = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| EventStatement::new(i, t))
            .collect();
        Self { domain, source, events }
    }

    pub fn event_count(&self) -> usize {
        self.events.len()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.events.iter().map(|e| e.text.as_str())
    }

    /// Reassigns indices 0..n-1 in current order.
    pub fn reindex(&mut self) {
        for (i, event) in self.events.iter_mut().enumerate() {
            event.index = i;
        }
    }

    /// Checks every invariant, including non-emptiness.
    pub fn validate(&self) -> Result<(), SchemaError> {
        self.validate_structure()?;
        if self.events.is_empty() {
            return Err(SchemaError::NoEvents);
        }
        Ok(())
    }

    /// Checks every invariant except non-emptiness.
    pub fn validate_structure(&self) -> Result<(), SchemaError> {
        self.domain.validate()?;
        self.source.validate()?;
        let mut seen = vec![false; self.events.len()];
        for event in &self.events {
            if event.index < seen.len() && seen[event.index] {
                return Err(SchemaError::DuplicateIndex(event.index));
            }
            if event.index < seen.len() {
                seen[event.index] = true;
            }
        }
        for (expected, event) in self.events.iter().enumerate() {
            if event.index != expected {
                return Err(SchemaError::NonContiguousIndex {
                    expected,
                    found: event.index,
                });
            }
            if event.text.trim().is_empty() {
                return Err(SchemaError::EmptyEventText { index: event.index });
            }
            if has_numbering_prefix(&event.text) {
                return Err(SchemaError::NumberingPrefix {
                    index: event.index,
                    text: event.text.clone(),
                });
            }
        }
        Ok(())
    }
}

/// Number of events in a schema.
pub fn event_count(schema: &Schema) -> usize {
    schema.event_count()
}

pub fn load_schema(path: impl AsRef<Path>) -> Result<Schema, SchemaError> {
    let path = path.as_ref();
    let raw = fs::read_to_string(path).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut schema = parse_schema_json(&raw, &path.display().to_string())?;
    for event in &mut schema.events {
        event.text = event.text.trim().to_string();
    }
    schema.validate()?;
    Ok(schema)
}

/// Parses schema JSON without validation.
pub fn parse_schema_json(raw: &str, origin: &str) -> Result<Schema, SchemaError> {
    serde_json::from_str(raw).map_err(|source| SchemaError::Parse {
        path: origin.to_string(),
        source,
    })
}

/// Canonical pretty-printed JSON with a trailing newline.
pub fn to_canonical_json(schema: &Schema) -> String {
    let mut out = serde_json::to_string_pretty(schema).expect("schema serializes");
    out.push('\n');
    out
}

pub fn save_schema(schema: &Schema, path: impl AsRef<Path>) -> Result<(), SchemaError> {
    let path = path.as_ref();
    fs::write(path, to_canonical_json(schema)).map_err(|source| SchemaError::Io {
        path: path.display().to_string(),
        source,
    })
}
