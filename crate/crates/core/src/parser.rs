//! Turns raw completion text into schemas, and merges schemas into unions.
//!
//! Parsing rules, applied line by line:
//!
//! * blank lines are skipped;
//! * list markers (`1.`, `(2)`, `3)`, `-`, `*`, `+`, `•`) are stripped, as
//!   are heading hashes and balanced emphasis wrappers;
//! * a header is a line ending in `:`, or an unnumbered line that starts with
//!   before/during/after and mentions the domain. Headers are consumed; if
//!   they name before/during/after, later events get that phase;
//! * numbered or bulleted lines are events;
//! * the first content line is an event even without a marker, because the
//!   prompt's trailing `1.` primer already numbered it;
//! * other unmarked lines are dropped.
//!
//! Output with no list markers at all is rejected rather than treated as a
//! single event.

use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generation::GenerationRecord;
use crate::schema::{Domain, EventStatement, Phase, Schema, SourceKind, SourceTag};

/// Prefix of the `prompt_id` carried by merged schemas.
pub const UNION_PREFIX: &str = "union:";

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("generation contains no list structure; raw text: {raw_text:?}")]
    NoListStructure { raw_text: String },
    #[error("no events extracted from generation; raw text: {raw_text:?}")]
    NoEvents { raw_text: String },
    #[error("cannot merge an empty list of schemas")]
    NothingToMerge,
    #[error("cannot merge schemas from different domains: {0} and {1}")]
    MixedDomains(String, String),
    #[error("cannot merge gold and generated schemas")]
    MixedSources,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DedupPolicy {
    /// Drop events whose normalized text was already seen.
    #[default]
    ExactNormalized,
    Keep,
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^(?:\(\d+\)|\d+[.)]|[-*•+])(?:\s+|$)").unwrap())
}

fn phase_word_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(before|during|after)\b").unwrap())
}

fn leading_phase_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^(before|during|after)\b").unwrap())
}

/// Strips every leading list marker; returns whether any was present.
fn strip_markers(line: &str) -> (bool, &str) {
    let mut rest = line;
    let mut marked = false;
    while let Some(m) = marker_re().find(rest) {
        marked = true;
        rest = rest[m.end()..].trim_start();
    }
    (marked, rest)
}

/// Removes heading hashes and balanced `*`/`_` wrappers; a lone leading `*`
/// is a bullet and stays.
fn strip_emphasis(line: &str) -> &str {
    let mut s = line.trim().trim_start_matches('#').trim();
    while let Some(c) = s.chars().next().filter(|c| matches!(c, '*' | '_')) {
        if s.len() < 2 || !s.ends_with(c) {
            break;
        }
        s = s[1..s.len() - 1].trim();
    }
    s
}

fn phase_from_header(header: &str) -> Phase {
    match phase_word_re()
        .captures(header)
        .map(|c| c[1].to_ascii_lowercase())
        .as_deref()
    {
        Some("before") => Phase::Before,
        Some("during") => Phase::During,
        Some("after") => Phase::After,
        _ => Phase::Unspecified,
    }
}

fn is_header(body: &str, marked: bool, domain: &Domain) -> bool {
    if body.ends_with(':') {
        return true;
    }
    !marked && leading_phase_re().is_match(body) && body.to_lowercase().contains(&domain.display_name.to_lowercase())
}

/// Phase in effect at the end of a prompt, taken from its last header line.
fn trailing_prompt_phase(prompt: &str) -> Phase {
    prompt
        .lines()
        .map(strip_emphasis)
        .rfind(|l| l.ends_with(':'))
        .map(phase_from_header)
        .unwrap_or(Phase::Unspecified)
}

struct Line<'a> {
    text: &'a str,
    phase: Phase,
}

fn extract_lines<'a>(raw: &'a str, domain: &Domain, initial: Phase) -> (bool, Vec<Line<'a>>) {
    let mut phase = initial;
    let mut any_marked = false;
    let mut out = Vec::new();
    let mut first = true;
    for line in raw.lines() {
        let cleaned = strip_emphasis(line);
        if cleaned.is_empty() {
            continue;
        }
        let (marked, body) = strip_markers(cleaned);
        let body = strip_emphasis(body);
        let was_first = std::mem::replace(&mut first, false);
        any_marked |= marked;
        if body.is_empty() {
            continue;
        }
        if is_header(body, marked, domain) {
            phase = phase_from_header(body);
            continue;
        }
        if marked || was_first {
            out.push(Line { text: body, phase });
        }
    }
    (any_marked, out)
}

/// Parses a record's raw text into a schema tagged with the record's source.
pub fn parse_generation(record: &GenerationRecord) -> Result<Schema, ParseError> {
    let spec = &record.prompt;
    let raw = &record.raw_text;
    let initial = trailing_prompt_phase(&spec.rendered_text);
    let (any_marked, lines) = extract_lines(raw, &spec.domain, initial);
    if !any_marked {
        return Err(ParseError::NoListStructure { raw_text: raw.clone() });
    }
    let forced = spec.verbalizer.implied_phase();
    let mut seen = HashSet::new();
    let mut events = Vec::new();
    for line in lines {
        if !seen.insert(normalize_for_dedup(line.text)) {
            continue;
        }
        let phase = forced.unwrap_or(line.phase);
        let mut event = EventStatement::new(events.len(), line.text);
        if phase != Phase::Unspecified {
            event.phase = Some(phase);
        }
        events.push(event);
    }
    if events.is_empty() {
        return Err(ParseError::NoEvents { raw_text: raw.clone() });
    }
    Ok(Schema {
        domain: spec.domain.clone(),
        source: SourceTag::generated(
            record.model.clone(),
            spec.prompt_id(),
            record.sample_index,
            spec.shot_mode,
        ),
        events,
    })
}

/// Key used only for duplicate detection: lowercased, whitespace collapsed,
/// trailing punctuation removed.
pub fn normalize_for_dedup(text: &str) -> String {
    let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    collapsed
        .trim_end_matches(|c: char| matches!(c, '.' | '!' | '?' | ';' | ':' | ',') || c.is_whitespace())
        .to_string()
}

fn join_distinct<'a>(items: impl Iterator<Item = &'a str>) -> String {
    let mut seen = Vec::<&str>::new();
    for item in items {
        if !seen.contains(&item) {
            seen.push(item);
        }
    }
    seen.join("+")
}

/// Concatenates parts in order, drops duplicates per `dedup`, and reindexes.
pub fn merge_schemas(parts: &[Schema], dedup: DedupPolicy) -> Result<Schema, ParseError> {
    let first = parts.first().ok_or(ParseError::NothingToMerge)?;
    for part in parts {
        if part.domain.id != first.domain.id {
            return Err(ParseError::MixedDomains(
                first.domain.id.clone(),
                part.domain.id.clone(),
            ));
        }
        if part.source.kind != first.source.kind {
            return Err(ParseError::MixedSources);
        }
    }
    let mut seen = HashSet::new();
    let mut events = Vec::new();
    for event in parts.iter().flat_map(|p| &p.events) {
        if dedup == DedupPolicy::ExactNormalized && !seen.insert(normalize_for_dedup(&event.text)) {
            continue;
        }
        events.push(EventStatement {
            index: events.len(),
            ..event.clone()
        });
    }
    let names = join_distinct(parts.iter().map(|p| p.source.dataset_or_model.as_str()));
    let source = match first.source.kind {
        SourceKind::Gold => SourceTag::gold(names),
        SourceKind::Generated => {
            let prompts = join_distinct(
                parts
                    .iter()
                    .filter_map(|p| p.source.prompt_id.as_deref())
                    .map(|id| id.strip_prefix(UNION_PREFIX).unwrap_or(id)),
            );
            SourceTag {
                kind: SourceKind::Generated,
                dataset_or_model: names,
                prompt_id: Some(format!("{UNION_PREFIX}{prompts}")),
                sample_index: Some(0),
                shot_mode: first.source.shot_mode,
            }
        }
    };
    Ok(Schema {
        domain: first.domain.clone(),
        source,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{render_zero_shot, SamplingParams, VerbalizerId};
    use crate::schema::ShotMode;

    fn record(verbalizer: VerbalizerId, domain: (&str, &str), raw: &str) -> GenerationRecord {
        let spec = render_zero_shot(
            verbalizer,
            &Domain::new(domain.0, domain.1).unwrap(),
            SamplingParams::default(),
        )
        .unwrap();
        GenerationRecord {
            prompt: spec,
            model: "text-davinci-003".into(),
            sample_index: 1,
            raw_text: raw.into(),
            cache_key: "k".into(),
            timestamp: "t".into(),
        }
    }

    fn texts(s: &Schema) -> Vec<(&str, Phase)> {
        s.events.iter().map(|e| (e.text.as_str(), e.phase())).collect()
    }

    #[test]
    fn plain_numbered_list() {
        let r = record(
            VerbalizerId::Causes,
            ("international-conflict", "international conflict"),
            "1. Tensions rise\n2. Diplomats meet\n3. Sanctions are imposed",
        );
        let s = parse_generation(&r).unwrap();
        assert_eq!(
            texts(&s),
            vec![
                ("Tensions rise", Phase::Unspecified),
                ("Diplomats meet", Phase::Unspecified),
                ("Sanctions are imposed", Phase::Unspecified)
            ]
        );
        assert!(s.events.iter().all(|e| e.phase.is_none()));
        assert_eq!(s.source.prompt_id.as_deref(), Some("causes"));
        assert_eq!(s.source.sample_index, Some(1));
        assert_eq!(s.source.shot_mode, Some(ShotMode::ZeroShot));
    }

    #[test]
    fn sectioned_output() {
        let r = record(
            VerbalizerId::Causes,
            ("flood", "flood"),
            "Before a flood:\n1. heavy rain\nDuring a flood:\n1. water rises",
        );
        let s = parse_generation(&r).unwrap();
        assert_eq!(
            texts(&s),
            vec![("heavy rain", Phase::Before), ("water rises", Phase::During)]
        );
    }

    #[test]
    fn star_bullets_and_bold_headers() {
        let r = record(
            VerbalizerId::Causes,
            ("flood", "flood"),
            "**During a flood:**\n* water rises\n- **roads close**\n*Aftermath:*\n* crops are lost",
        );
        let s = parse_generation(&r).unwrap();
        assert_eq!(
            texts(&s),
            vec![
                ("water rises", Phase::During),
                ("roads close", Phase::During),
                ("crops are lost", Phase::Unspecified)
            ]
        );
    }

    #[test]
    fn temporal_primer_continuation() {
        let r = record(
            VerbalizerId::Temporal,
            ("flood", "flood"),
            " Heavy rainfall\n2. Rivers swell\n\nDuring a flood, several things can happen:\n\n1. Roads close\n2. (3) Homes flood\n\nAfter a flood\n1. Cleanup begins",
        );
        let s = parse_generation(&r).unwrap();
        assert_eq!(
            texts(&s),
            vec![
                ("Heavy rainfall", Phase::Before),
                ("Rivers swell", Phase::Before),
                ("Roads close", Phase::During),
                ("Homes flood", Phase::During),
                ("Cleanup begins", Phase::After),
            ]
        );
    }

    #[test]
    fn prose_without_list_is_error() {
        let raw = "Floods are natural disasters that damage property.";
        let r = record(VerbalizerId::Causes, ("flood", "flood"), raw);
        assert_eq!(
            parse_generation(&r),
            Err(ParseError::NoListStructure { raw_text: raw.into() })
        );
    }

    #[test]
    fn headers_only_is_error() {
        let r = record(VerbalizerId::Causes, ("flood", "flood"), "Causes of a flood:\n1.\n2.");
        assert!(matches!(parse_generation(&r), Err(ParseError::NoEvents { .. })));
    }

    #[test]
    fn simple_prompt_forces_phase() {
        let r = record(
            VerbalizerId::SimpleAfter,
            ("kidnapping", "kidnapping"),
            "victim is released\n- ransom is paid\n- during the trial, witnesses testify",
        );
        let s = parse_generation(&r).unwrap();
        assert!(s.events.iter().all(|e| e.phase == Some(Phase::After)));
        assert_eq!(s.event_count(), 3);
    }

    #[test]
    fn duplicates_dropped_within_generation() {
        let r = record(
            VerbalizerId::Causes,
            ("flood", "flood"),
            "1. Rain falls.\n2. rain falls\n3. Rivers rise",
        );
        let s = parse_generation(&r).unwrap();
        assert_eq!(s.texts().collect::<Vec<_>>(), vec!["Rain falls.", "Rivers rise"]);
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_for_dedup("Protests break out.  "), "protests break out");
        assert_eq!(
            normalize_for_dedup("PROTESTS BREAK OUT"),
            normalize_for_dedup("protests break out.")
        );
        assert_ne!(
            normalize_for_dedup("civil unrest"),
            normalize_for_dedup("civil unrest in the capital")
        );
    }

    fn part(prompt: &str, sample: usize, texts: &[String]) -> Schema {
        Schema::from_texts(
            Domain::new("flood", "flood").unwrap(),
            SourceTag::generated("m", prompt, sample, ShotMode::ZeroShot),
            texts.iter().cloned(),
        )
    }

    #[test]
    fn merge_counts() {
        let a: Vec<String> = (0..10).map(|i| format!("event {i}")).collect();
        let b: Vec<String> = (5..15).map(|i| format!("event {i}")).collect();
        let c: Vec<String> = (100..110).map(|i| format!("event {i}")).collect();
        let merged = merge_schemas(
            &[part("temporal", 0, &a), part("causes", 0, &b), part("causes", 1, &c)],
            DedupPolicy::ExactNormalized,
        )
        .unwrap();
        assert_eq!(merged.event_count(), 25);
        assert!(merged.events.iter().enumerate().all(|(i, e)| e.index == i));
        assert_eq!(merged.source.prompt_id.as_deref(), Some("union:temporal+causes"));
        assert!(merged.validate().is_ok());
    }

    #[test]
    fn merge_single_part_is_identity() {
        let a: Vec<String> = (0..7).map(|i| format!("event {i}")).collect();
        let p = part("temporal", 2, &a);
        let merged = merge_schemas(std::slice::from_ref(&p), DedupPolicy::ExactNormalized).unwrap();
        assert_eq!(merged.events, p.events);
    }

    #[test]
    fn merge_fixture_totalling_215() {
        // nine generations of 30 events; later generations repeat 55 events of the first
        let mut parts = Vec::new();
        let mut next = 0;
        for g in 0..9 {
            let mut texts = Vec::new();
            for k in 0..30 {
                if g > 0 && k < 7 && !(g == 8 && k == 6) {
                    texts.push(format!("event {k}"));
                } else {
                    texts.push(format!("event {next}"));
                    next += 1;
                }
            }
            parts.push(part(["temporal", "causes", "causes_temporal"][g / 3], g % 3, &texts));
        }
        let merged = merge_schemas(&parts, DedupPolicy::ExactNormalized).unwrap();
        let raw_total: usize = parts.iter().map(|p| p.event_count()).sum();
        assert_eq!(raw_total, 270);
        assert_eq!(merged.event_count(), 215);
    }

    #[test]
    fn merge_rejects_mixed_domains() {
        let a = part("temporal", 0, &["x".to_string()]);
        let mut b = a.clone();
        b.domain = Domain::new("drought", "drought").unwrap();
        assert!(matches!(
            merge_schemas(&[a, b], DedupPolicy::Keep),
            Err(ParseError::MixedDomains(_, _))
        ));
        assert_eq!(merge_schemas(&[], DedupPolicy::Keep), Err(ParseError::NothingToMerge));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn event_text() -> impl Strategy<Value = String> {
            "[A-Za-z][a-z]{0,6}( [a-z]{1,6}){0,3}[.!]?"
        }

        proptest! {
            #[test]
            fn parsed_events_have_no_numbering(lines in prop::collection::vec(event_text(), 1..12)) {
                let raw: String = lines.iter().enumerate().map(|(i, l)| format!("{}. {}\n", i + 1, l)).collect();
                let r = record(VerbalizerId::Causes, ("flood", "flood"), &raw);
                let s = parse_generation(&r).unwrap();
                prop_assert!(s.validate().is_ok());
                prop_assert!(s.events.iter().all(|e| !crate::schema::has_numbering_prefix(&e.text)));
                prop_assert_eq!(parse_generation(&r).unwrap(), s);
            }

            #[test]
            fn merge_size_bounds(parts in prop::collection::vec(prop::collection::vec(event_text(), 1..8), 1..5)) {
                let schemas: Vec<Schema> = parts.iter().enumerate().map(|(i, t)| part("causes", i, t)).collect();
                let merged = merge_schemas(&schemas, DedupPolicy::ExactNormalized).unwrap();
                let total: usize = schemas.iter().map(|s| s.event_count()).sum();
                let distinct: HashSet<String> = parts.iter().flatten().map(|t| normalize_for_dedup(t)).collect();
                prop_assert!(merged.event_count() <= total);
                prop_assert_eq!(merged.event_count(), distinct.len());
                prop_assert_eq!(merged.event_count() == total, distinct.len() == total);
            }
        }
    }
}
