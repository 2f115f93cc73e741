//! Directional entailment scoring between events, and the score matrices that
//! the recall metric consumes.
//!
//! `E(a, b)` is the provider's probability that premise `a` entails
//! hypothesis `b`; neutral and contradiction mass are both treated as
//! non-entailment.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{content_key, CacheError, ContentStore};
use crate::parallel::try_map_bounded;
use crate::schema::{EventStatement, Schema};

const DISTRIBUTION_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum EntailmentError {
    #[error("entailment transport error: {0}")]
    Transport(String),
    #[error("entailment provider returned HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("entailment provider broke its contract: {0}")]
    Contract(String),
    #[error("empty text in entailment pair")]
    EmptyText,
    #[error("cannot score an empty schema")]
    EmptySchema,
    #[error("invalid entailment configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntailmentPair {
    pub premise: String,
    pub hypothesis: String,
}

impl EntailmentPair {
    pub fn new(premise: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        Self {
            premise: premise.into(),
            hypothesis: hypothesis.into(),
        }
    }
}

/// Full three-class distribution as returned on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntailmentDistribution {
    pub p_entail: f64,
    pub p_neutral: f64,
    pub p_contra: f64,
}

impl EntailmentDistribution {
    pub fn check(&self) -> Result<(), EntailmentError> {
        let parts = [self.p_entail, self.p_neutral, self.p_contra];
        if parts
            .iter()
            .any(|p| !p.is_finite() || *p < -DISTRIBUTION_TOLERANCE || *p > 1.0 + DISTRIBUTION_TOLERANCE)
        {
            return Err(EntailmentError::Contract(format!(
                "probabilities out of range: {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > DISTRIBUTION_TOLERANCE {
            return Err(EntailmentError::Contract(format!(
                "distribution {parts:?} sums to {sum}, not 1"
            )));
        }
        Ok(())
    }

    pub fn entailment(&self) -> f64 {
        self.p_entail.clamp(0.0, 1.0)
    }
}

pub trait EntailmentProvider: Send + Sync {
    /// Identifies provider kind and model; part of pair-cache keys.
    fn fingerprint(&self) -> String;
    /// One distribution per pair, same order.
    fn score_batch(&self, pairs: &[EntailmentPair]) -> Result<Vec<EntailmentDistribution>, EntailmentError>;
}

/// Deterministic mock: a premise entails a hypothesis iff the strings are identical.
#[derive(Debug, Default, Clone, Copy)]
pub struct ExactMatchProvider;

impl EntailmentProvider for ExactMatchProvider {
    fn fingerprint(&self) -> String {
        "exact-match".into()
    }

    fn score_batch(&self, pairs: &[EntailmentPair]) -> Result<Vec<EntailmentDistribution>, EntailmentError> {
        Ok(pairs
            .iter()
            .map(|p| {
                if p.premise == p.hypothesis {
                    EntailmentDistribution {
                        p_entail: 1.0,
                        p_neutral: 0.0,
                        p_contra: 0.0,
                    }
                } else {
                    EntailmentDistribution {
                        p_entail: 0.0,
                        p_neutral: 1.0,
                        p_contra: 0.0,
                    }
                }
            })
            .collect())
    }
}

/// Wraps a provider and counts the pairs it is asked to score.
pub struct CountingProvider<P> {
    inner: P,
    pairs: AtomicUsize,
    batches: AtomicUsize,
}

impl<P> CountingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            pairs: AtomicUsize::new(0),
            batches: AtomicUsize::new(0),
        }
    }

    pub fn pairs_scored(&self) -> usize {
        self.pairs.load(Ordering::SeqCst)
    }

    pub fn batches(&self) -> usize {
        self.batches.load(Ordering::SeqCst)
    }
}

impl<P: EntailmentProvider> EntailmentProvider for CountingProvider<P> {
    fn fingerprint(&self) -> String {
        self.inner.fingerprint()
    }

    fn score_batch(&self, pairs: &[EntailmentPair]) -> Result<Vec<EntailmentDistribution>, EntailmentError> {
        self.pairs.fetch_add(pairs.len(), Ordering::SeqCst);
        self.batches.fetch_add(1, Ordering::SeqCst);
        self.inner.score_batch(pairs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntailmentProviderConfig {
    pub endpoint_url: String,
    #[serde(default = "default_model")]
    pub model_name: String,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_timeout", with = "crate::generation::duration_secs")]
    pub request_timeout: Duration,
}

fn default_model() -> String {
    "roberta-large-wanli".into()
}

fn default_batch() -> usize {
    32
}

fn default_timeout() -> Duration {
    Duration::from_secs(60)
}

impl EntailmentProviderConfig {
    pub fn new(endpoint_url: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: default_model(),
            batch_size: default_batch(),
            request_timeout: default_timeout(),
        }
    }

    pub fn validate(&self) -> Result<(), EntailmentError> {
        url::Url::parse(&self.endpoint_url)
            .map_err(|e| EntailmentError::InvalidConfig(format!("endpoint_url {:?}: {e}", self.endpoint_url)))?;
        if self.batch_size == 0 {
            return Err(EntailmentError::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct EntailRequest<'a> {
    pairs: &'a [EntailmentPair],
}

#[derive(Deserialize)]
struct EntailResponse {
    scores: Vec<EntailmentDistribution>,
}

/// Client for a batch entailment endpoint:
/// `POST {pairs: [{premise, hypothesis}]}` → `{scores: [{p_entail, p_neutral, p_contra}]}`.
pub struct HttpEntailmentProvider {
    config: EntailmentProviderConfig,
    agent: ureq::Agent,
}

impl HttpEntailmentProvider {
    pub fn new(config: EntailmentProviderConfig) -> Result<Self, EntailmentError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new().timeout(config.request_timeout).build();
        Ok(Self { config, agent })
    }
}

impl EntailmentProvider for HttpEntailmentProvider {
    fn fingerprint(&self) -> String {
        format!("http:{}", self.config.model_name)
    }

    fn score_batch(&self, pairs: &[EntailmentPair]) -> Result<Vec<EntailmentDistribution>, EntailmentError> {
        match self
            .agent
            .post(&self.config.endpoint_url)
            .send_json(EntailRequest { pairs })
        {
            Ok(response) => {
                let body: EntailResponse = response
                    .into_json()
                    .map_err(|e| EntailmentError::Contract(format!("malformed response: {e}")))?;
                if body.scores.len() != pairs.len() {
                    return Err(EntailmentError::Contract(format!(
                        "sent {} pairs, received {} scores",
                        pairs.len(),
                        body.scores.len()
                    )));
                }
                Ok(body.scores)
            }
            Err(ureq::Error::Status(status, response)) => Err(EntailmentError::Provider {
                status,
                body: response.into_string().unwrap_or_default(),
            }),
            Err(ureq::Error::Transport(t)) => Err(EntailmentError::Transport(t.to_string())),
        }
    }
}

#[derive(Serialize)]
struct PairKey<'a> {
    provider: &'a str,
    premise: &'a str,
    hypothesis: &'a str,
}

/// Provider plus optional pair cache, batching and bounded parallelism.
pub struct EntailmentScorer {
    provider: Arc<dyn EntailmentProvider>,
    cache: Option<ContentStore>,
    batch_size: usize,
    parallelism: usize,
}

impl EntailmentScorer {
    pub fn new(provider: Arc<dyn EntailmentProvider>) -> Self {
        Self {
            provider,
            cache: None,
            batch_size: default_batch(),
            parallelism: 4,
        }
    }

    pub fn with_cache(mut self, dir: impl Into<std::path::PathBuf>) -> Self {
        self.cache = Some(ContentStore::new(dir));
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size.max(1);
        self
    }

    pub fn with_parallelism(mut self, limit: usize) -> Self {
        self.parallelism = limit.max(1);
        self
    }

    pub fn fingerprint(&self) -> String {
        self.provider.fingerprint()
    }

    fn key(&self, fingerprint: &str, pair: &EntailmentPair) -> String {
        content_key(&PairKey {
            provider: fingerprint,
            premise: &pair.premise,
            hypothesis: &pair.hypothesis,
        })
    }

    /// Scores every pair, consulting the cache first. Output order matches input.
    pub fn score_pairs(&self, pairs: &[EntailmentPair]) -> Result<Vec<EntailmentDistribution>, EntailmentError> {
        if pairs
            .iter()
            .any(|p| p.premise.trim().is_empty() || p.hypothesis.trim().is_empty())
        {
            return Err(EntailmentError::EmptyText);
        }
        let fingerprint = self.provider.fingerprint();
        let mut results: Vec<Option<EntailmentDistribution>> = vec![None; pairs.len()];
        let mut missing = Vec::new();
        for (i, pair) in pairs.iter().enumerate() {
            let cached = match &self.cache {
                Some(store) => store.get::<EntailmentDistribution>(&self.key(&fingerprint, pair))?,
                None => None,
            };
            match cached {
                Some(d) => results[i] = Some(d),
                None => missing.push(i),
            }
        }
        let batches: Vec<&[usize]> = missing.chunks(self.batch_size).collect();
        let scored = try_map_bounded(&batches, self.parallelism, |batch| {
            let request: Vec<EntailmentPair> = batch.iter().map(|&i| pairs[i].clone()).collect();
            let scores = self.provider.score_batch(&request)?;
            if scores.len() != request.len() {
                return Err(EntailmentError::Contract(format!(
                    "sent {} pairs, received {} scores",
                    request.len(),
                    scores.len()
                )));
            }
            for d in &scores {
                d.check()?;
            }
            Ok(scores)
        })?;
        for (batch, scores) in batches.iter().zip(scored) {
            for (&i, d) in batch.iter().zip(scores) {
                if let Some(store) = &self.cache {
                    store.put(&self.key(&fingerprint, &pairs[i]), &d)?;
                }
                results[i] = Some(d);
            }
        }
        Ok(results.into_iter().map(|d| d.expect("all pairs scored")).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalScore {
    pub premise: EventStatement,
    pub hypothesis: EventStatement,
    pub p_entail: f64,
}

pub fn score_pair(
    premise: &EventStatement,
    hypothesis: &EventStatement,
    scorer: &EntailmentScorer,
) -> Result<DirectionalScore, EntailmentError> {
    let d = scorer.score_pairs(&[EntailmentPair::new(&premise.text, &hypothesis.text)])?;
    Ok(DirectionalScore {
        premise: premise.clone(),
        hypothesis: hypothesis.clone(),
        p_entail: d[0].entailment(),
    })
}

/// Dense row-major matrix of probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "grid data does not match its shape");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols.max(1), k % cols.max(1))).collect();
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transposed(&self) -> Grid {
        Grid::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    fn zip_with(&self, other: &Grid, f: impl Fn(f64, f64) -> f64) -> Grid {
        Grid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

/// Pairwise directional scores between a gold and a predicted schema.
/// `forward[i][j] = E(gold_i, pred_j)`, `backward[i][j] = E(pred_j, gold_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMatrix {
    pub gold_events: Vec<EventStatement>,
    pub predicted_events: Vec<EventStatement>,
    pub forward: Grid,
    pub backward: Grid,
    pub provider: String,
}

impl ScoreMatrix {
    pub fn new(
        gold_events: Vec<EventStatement>,
        predicted_events: Vec<EventStatement>,
        forward: Grid,
        backward: Grid,
        provider: impl Into<String>,
    ) -> Result<Self, EntailmentError> {
        let m = Self {
            gold_events,
            predicted_events,
            forward,
            backward,
            provider: provider.into(),
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), EntailmentError> {
        let shape = (self.gold_events.len(), self.predicted_events.len());
        for grid in [&self.forward, &self.backward] {
            if (grid.rows, grid.cols) != shape {
                return Err(EntailmentError::Contract(format!(
                    "matrix shape {}x{} does not match {}x{} events",
                    grid.rows, grid.cols, shape.0, shape.1
                )));
            }
            if grid.data.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(EntailmentError::Contract("matrix entry outside [0, 1]".into()));
            }
        }
        Ok(())
    }

    /// The matrix for the reversed comparison: predicted becomes gold.
    pub fn transposed(&self) -> ScoreMatrix {
        ScoreMatrix {
            gold_events: self.predicted_events.clone(),
            predicted_events: self.gold_events.clone(),
            forward: self.backward.transposed(),
            backward: self.forward.transposed(),
            provider: self.provider.clone(),
        }
    }
}

/// Scores all `2·|gold|·|pred|` directional pairs. Any provider error aborts
/// the whole matrix.
pub fn build_score_matrix(
    gold: &Schema,
    pred: &Schema,
    scorer: &EntailmentScorer,
) -> Result<ScoreMatrix, EntailmentError> {
    if gold.events.is_empty() || pred.events.is_empty() {
        return Err(EntailmentError::EmptySchema);
    }
    let (g, p) = (gold.events.len(), pred.events.len());
    let mut pairs = Vec::with_capacity(2 * g * p);
    for ge in &gold.events {
        for pe in &pred.events {
            pairs.push(EntailmentPair::new(&ge.text, &pe.text));
        }
    }
    for ge in &gold.events {
        for pe in &pred.events {
            pairs.push(EntailmentPair::new(&pe.text, &ge.text));
        }
    }
    let scores: Vec<f64> = scorer.score_pairs(&pairs)?.iter().map(|d| d.entailment()).collect();
    let (forward, backward) = scores.split_at(g * p);
    ScoreMatrix::new(
        gold.events.clone(),
        pred.events.clone(),
        Grid::new(g, p, forward.to_vec()),
        Grid::new(g, p, backward.to_vec()),
        scorer.fingerprint(),
    )
}

/// Elementwise `max(forward, backward)`.
pub fn any_directional(m: &ScoreMatrix) -> Grid {
    m.forward.zip_with(&m.backward, f64::max)
}

/// Elementwise `min(forward, backward)`: both directions must entail.
pub fn bidirectional(m: &ScoreMatrix) -> Grid {
    m.forward.zip_with(&m.backward, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{Domain, SourceTag};

    fn schema(texts: &[&str]) -> Schema {
        Schema::from_texts(
            Domain::new("flood", "flood").unwrap(),
            SourceTag::gold("g"),
            texts.iter().copied(),
        )
    }

    fn ev(t: &str) -> EventStatement {
        EventStatement::new(0, t)
    }

    struct Fixed(Vec<EntailmentDistribution>);

    impl EntailmentProvider for Fixed {
        fn fingerprint(&self) -> String {
            "fixed".into()
        }
        fn score_batch(&self, pairs: &[EntailmentPair]) -> Result<Vec<EntailmentDistribution>, EntailmentError> {
            Ok(self.0.iter().cycle().take(pairs.len()).copied().collect())
        }
    }

    #[test]
    fn exact_match_mock() {
        let scorer = EntailmentScorer::new(Arc::new(ExactMatchProvider));
        assert_eq!(score_pair(&ev("x"), &ev("x"), &scorer).unwrap().p_entail, 1.0);
        assert_eq!(score_pair(&ev("x"), &ev("y"), &scorer).unwrap().p_entail, 0.0);
    }

    #[test]
    fn bad_distribution_is_contract_error() {
        let provider = Fixed(vec![EntailmentDistribution {
            p_entail: 0.2,
            p_neutral: 0.5,
            p_contra: 0.4,
        }]);
        let scorer = EntailmentScorer::new(Arc::new(provider));
        let err = score_pair(&ev("a"), &ev("b"), &scorer).unwrap_err();
        assert!(matches!(err, EntailmentError::Contract(_)), "{err}");
    }

    #[test]
    fn empty_text_rejected() {
        let scorer = EntailmentScorer::new(Arc::new(ExactMatchProvider));
        let blank = EventStatement {
            index: 0,
            text: " ".into(),
            phase: None,
        };
        assert!(matches!(
            score_pair(&blank, &ev("b"), &scorer),
            Err(EntailmentError::EmptyText)
        ));
    }

    #[test]
    fn matrix_shape_and_call_count() {
        let counter = Arc::new(CountingProvider::new(ExactMatchProvider));
        let scorer = EntailmentScorer::new(counter.clone()).with_batch_size(5);
        let m = build_score_matrix(&schema(&["a", "b", "c"]), &schema(&["a", "x", "y", "c"]), &scorer).unwrap();
        assert_eq!((m.forward.rows(), m.forward.cols()), (3, 4));
        assert_eq!((m.backward.rows(), m.backward.cols()), (3, 4));
        assert_eq!(counter.pairs_scored(), 24);
        assert_eq!(counter.batches(), 5);
        assert_eq!(m.forward.get(2, 3), 1.0);
        assert_eq!(m.forward.get(1, 1), 0.0);
    }

    #[test]
    fn one_by_one_scores_both_directions() {
        let counter = Arc::new(CountingProvider::new(ExactMatchProvider));
        let scorer = EntailmentScorer::new(counter.clone());
        build_score_matrix(&schema(&["a"]), &schema(&["b"]), &scorer).unwrap();
        assert_eq!(counter.pairs_scored(), 2);
    }

    #[test]
    fn self_comparison_is_identity() {
        let s = schema(&["a", "b", "c", "d"]);
        let scorer = EntailmentScorer::new(Arc::new(ExactMatchProvider));
        let m = build_score_matrix(&s, &s, &scorer).unwrap();
        let identity = Grid::from_fn(4, 4, |i, j| if i == j { 1.0 } else { 0.0 });
        assert_eq!(m.forward, identity);
        assert_eq!(m.backward, identity);
        assert_eq!(any_directional(&m), identity);
    }

    #[test]
    fn provider_error_aborts_matrix() {
        struct Failing;
        impl EntailmentProvider for Failing {
            fn fingerprint(&self) -> String {
                "failing".into()
            }
            fn score_batch(&self, _: &[EntailmentPair]) -> Result<Vec<EntailmentDistribution>, EntailmentError> {
                Err(EntailmentError::Transport("down".into()))
            }
        }
        let scorer = EntailmentScorer::new(Arc::new(Failing));
        assert!(build_score_matrix(&schema(&["a"]), &schema(&["b"]), &scorer).is_err());
    }

    #[test]
    fn pair_cache_avoids_rescoring() {
        let dir = tempfile::tempdir().unwrap();
        let counter = Arc::new(CountingProvider::new(ExactMatchProvider));
        let scorer = EntailmentScorer::new(counter.clone()).with_cache(dir.path());
        let first = build_score_matrix(&schema(&["a", "b"]), &schema(&["b", "c"]), &scorer).unwrap();
        assert_eq!(counter.pairs_scored(), 8);
        let second = build_score_matrix(&schema(&["a", "b"]), &schema(&["b", "c"]), &scorer).unwrap();
        assert_eq!(counter.pairs_scored(), 8);
        assert_eq!(first, second);
    }

    fn matrix(forward: Vec<f64>, backward: Vec<f64>, g: usize, p: usize) -> ScoreMatrix {
        ScoreMatrix::new(
            (0..g).map(|i| EventStatement::new(i, format!("g{i}"))).collect(),
            (0..p).map(|i| EventStatement::new(i, format!("p{i}"))).collect(),
            Grid::new(g, p, forward),
            Grid::new(g, p, backward),
            "test",
        )
        .unwrap()
    }

    #[test]
    fn combinators() {
        let m = matrix(vec![0.9, 0.5, 1.0], vec![0.2, 0.5, 1.0], 1, 3);
        assert_eq!(any_directional(&m).row(0), &[0.9, 0.5, 1.0]);
        assert_eq!(bidirectional(&m).row(0), &[0.2, 0.5, 1.0]);
    }

    #[test]
    fn out_of_range_matrix_rejected() {
        let r = ScoreMatrix::new(
            vec![ev("a")],
            vec![ev("b")],
            Grid::new(1, 1, vec![1.5]),
            Grid::new(1, 1, vec![0.0]),
            "t",
        );
        assert!(r.is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn grids() -> impl Strategy<Value = (usize, usize, Vec<f64>, Vec<f64>)> {
            (1usize..8, 1usize..8).prop_flat_map(|(g, p)| {
                (
                    Just(g),
                    Just(p),
                    prop::collection::vec(0.0f64..=1.0, g * p),
                    prop::collection::vec(0.0f64..=1.0, g * p),
                )
            })
        }

        proptest! {
            #[test]
            fn bidirectional_never_exceeds_any((g, p, f, b) in grids()) {
                let m = matrix(f, b, g, p);
                let any = any_directional(&m);
                let bi = bidirectional(&m);
                for i in 0..g {
                    for j in 0..p {
                        prop_assert!(bi.get(i, j) <= any.get(i, j));
                    }
                }
            }

            #[test]
            fn swapping_schemas_transposes((g, p, f, b) in grids()) {
                let m = matrix(f, b, g, p);
                let t = m.transposed();
                prop_assert_eq!(any_directional(&t), any_directional(&m).transposed());
                prop_assert_eq!(bidirectional(&t), bidirectional(&m).transposed());
            }

            #[test]
            fn batching_never_changes_entries(
                gold in prop::collection::vec("[a-c]{1,2}", 1..6),
                pred in prop::collection::vec("[a-c]{1,2}", 1..6),
                batch in 1usize..9,
                par in 1usize..5,
            ) {
                let gs = Schema::from_texts(Domain::new("x", "x").unwrap(), SourceTag::gold("g"), gold);
                let ps = Schema::from_texts(Domain::new("x", "x").unwrap(), SourceTag::gold("g"), pred);
                let base = build_score_matrix(&gs, &ps, &EntailmentScorer::new(Arc::new(ExactMatchProvider)).with_batch_size(1000).with_parallelism(1)).unwrap();
                let other = build_score_matrix(&gs, &ps, &EntailmentScorer::new(Arc::new(ExactMatchProvider)).with_batch_size(batch).with_parallelism(par)).unwrap();
                prop_assert_eq!(base, other);
            }
        }
    }
}
