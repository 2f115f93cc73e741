//! Seeded input builders shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use schemadraft_core::agreement::AnnotationRecord;
use schemadraft_core::entailment::{Grid, ScoreMatrix};
use schemadraft_core::generation::GenerationRecord;
use schemadraft_core::prompt::{render_zero_shot, SamplingParams, VerbalizerId};
use schemadraft_core::schema::{Domain, Schema, ShotMode, SourceTag};

pub fn domain() -> Domain {
    Domain::new("bombing-attacks", "bombing attacks").unwrap()
}

/// Gold and predicted schemas of the given sizes plus a random score matrix between them.
pub fn recall_inputs(gold: usize, pred: usize, seed: u64) -> (Schema, Schema, ScoreMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Schema::from_texts(domain(), SourceTag::gold("g"), (0..gold).map(|i| format!("gold {i}")));
    let p = Schema::from_texts(
        domain(),
        SourceTag::generated("m", "temporal", 0, ShotMode::ZeroShot),
        (0..pred).map(|j| format!("pred {j}")),
    );
    let mut grid = || Grid::new(gold, pred, (0..gold * pred).map(|_| rng.random::<f64>()).collect());
    let forward = grid();
    let backward = grid();
    let m = ScoreMatrix::new(g.events.clone(), p.events.clone(), forward, backward, "bench").unwrap();
    (g, p, m)
}

/// `units` records with three binary judgments each.
pub fn annotation_records(units: usize, seed: u64) -> Vec<AnnotationRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..units)
        .map(|i| {
            let judgments: Vec<u8> = (0..3).map(|_| rng.random_range(0..=1)).collect();
            AnnotationRecord::new(format!("p{i}"), &judgments)
        })
        .collect()
}

/// A temporal-prompt generation with `per_section` numbered events under each phase header.
pub fn raw_generation(per_section: usize) -> GenerationRecord {
    let prompt = render_zero_shot(VerbalizerId::Temporal, &domain(), SamplingParams::default()).unwrap();
    let mut raw = String::new();
    for phase in ["Before", "During", "After"] {
        raw.push_str(&format!(
            "{phase} a bombing attack, there are several things that can happen:\n"
        ));
        for i in 1..=per_section {
            raw.push_str(&format!("{i}. {phase} event number {i} takes place\n"));
        }
        raw.push('\n');
    }
    GenerationRecord {
        prompt,
        model: "bench".into(),
        sample_index: 0,
        raw_text: raw,
        cache_key: String::new(),
        timestamp: String::new(),
    }
}
