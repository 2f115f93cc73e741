//! Text-generation client: runs prompt specs against an OpenAI-compatible
//! completions endpoint, one request per sample, behind a content-addressed
//! response cache.
//!
//! Once a sample is cached it is never regenerated; with a warm cache the
//! client makes no network calls at all.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::{content_key, CacheError, ContentStore};
use crate::parallel::try_map_bounded;
use crate::prompt::{PromptSpec, SamplingParams};

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("provider refused the request with HTTP {status}: {body}")]
    Provider { status: u16, body: String },
    #[error("malformed provider response: {0}")]
    MalformedResponse(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("invalid provider configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cache(#[from] CacheError),
}

impl GenerationError {
    fn is_retryable(&self) -> bool {
        matches!(self, GenerationError::Transport { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationProviderConfig {
    pub endpoint_url: String,
    pub model_name: String,
    #[serde(default)]
    pub auth_token_env: Option<String>,
    #[serde(default = "default_timeout", with = "duration_secs")]
    pub request_timeout: Duration,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff", with = "duration_millis")]
    pub retry_base_delay: Duration,
}

fn default_timeout() -> Duration {
    Duration::from_secs(60)
}

fn default_retries() -> u32 {
    3
}

fn default_backoff() -> Duration {
    Duration::from_millis(500)
}

pub(crate) mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

pub(crate) mod duration_millis {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(d.as_millis() as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_millis(u64::deserialize(d)?))
    }
}

impl GenerationProviderConfig {
    pub fn new(endpoint_url: impl Into<String>, model_name: impl Into<String>) -> Self {
        Self {
            endpoint_url: endpoint_url.into(),
            model_name: model_name.into(),
            auth_token_env: None,
            request_timeout: default_timeout(),
            max_retries: default_retries(),
            retry_base_delay: default_backoff(),
        }
    }

    pub fn validate(&self) -> Result<(), GenerationError> {
        url::Url::parse(&self.endpoint_url)
            .map_err(|e| GenerationError::InvalidConfig(format!("endpoint_url {:?}: {e}", self.endpoint_url)))?;
        if self.max_retries > 5 {
            return Err(GenerationError::InvalidConfig(format!(
                "max_retries must be at most 5, got {}",
                self.max_retries
            )));
        }
        if self.model_name.trim().is_empty() {
            return Err(GenerationError::InvalidConfig("model_name is empty".into()));
        }
        Ok(())
    }
}

/// Request body for one completion. This is the exact wire shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub model: String,
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
    pub n: u32,
}

/// Something that turns a completion request into text.
pub trait CompletionBackend: Send + Sync {
    /// Provider family, part of every cache key.
    fn provider_name(&self) -> &str;
    fn model_name(&self) -> &str;
    fn complete(&self, request: &CompletionRequest) -> Result<String, GenerationError>;
}

#[derive(Deserialize)]
struct CompletionResponse {
    choices: Vec<CompletionChoice>,
}

#[derive(Deserialize)]
struct CompletionChoice {
    text: String,
}

/// OpenAI-compatible `/v1/completions` backend with exponential-backoff retries.
pub struct OpenAiCompletions {
    config: GenerationProviderConfig,
    agent: ureq::Agent,
}

impl OpenAiCompletions {
    pub fn new(config: GenerationProviderConfig) -> Result<Self, GenerationError> {
        config.validate()?;
        let agent = ureq::AgentBuilder::new().timeout(config.request_timeout).build();
        Ok(Self { config, agent })
    }

    fn attempt(&self, request: &CompletionRequest, token: Option<&str>) -> Result<String, GenerationError> {
        let mut call = self.agent.post(&self.config.endpoint_url);
        if let Some(token) = token {
            call = call.set("Authorization", &format!("Bearer {token}"));
        }
        match call.send_json(request) {
            Ok(response) => {
                let body: CompletionResponse = response
                    .into_json()
                    .map_err(|e| GenerationError::MalformedResponse(e.to_string()))?;
                body.choices
                    .into_iter()
                    .next()
                    .map(|c| c.text)
                    .ok_or_else(|| GenerationError::MalformedResponse("no choices in response".into()))
            }
            Err(ureq::Error::Status(status, response)) => {
                let body = response.into_string().unwrap_or_default();
                if status == 429 || status >= 500 {
                    Err(GenerationError::Transport {
                        attempts: 1,
                        message: format!("HTTP {status}: {body}"),
                    })
                } else {
                    Err(GenerationError::Provider { status, body })
                }
            }
            Err(ureq::Error::Transport(t)) => Err(GenerationError::Transport {
                attempts: 1,
                message: t.to_string(),
            }),
        }
    }
}

impl CompletionBackend for OpenAiCompletions {
    fn provider_name(&self) -> &str {
        "openai-completions"
    }

    fn model_name(&self) -> &str {
        &self.config.model_name
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, GenerationError> {
        let token = match &self.config.auth_token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| GenerationError::MissingApiKey(var.clone()))?),
            None => None,
        };
        let attempts = self.config.max_retries + 1;
        let mut delay = self.config.retry_base_delay;
        let mut attempt = 1;
        loop {
            match self.attempt(request, token.as_deref()) {
                Err(e) if e.is_retryable() && attempt < attempts => {
                    log::warn!("completion attempt {attempt}/{attempts} failed: {e}; retrying in {delay:?}");
                    std::thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
                Err(GenerationError::Transport { message, .. }) => {
                    return Err(GenerationError::Transport {
                        attempts: attempt,
                        message,
                    })
                }
                other => return other,
            }
        }
    }
}

/// Raw model output for one sample of one prompt.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub prompt: PromptSpec,
    pub model: String,
    pub sample_index: usize,
    pub raw_text: String,
    pub cache_key: String,
    pub timestamp: String,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    provider: &'a str,
    model: &'a str,
    rendered_text: &'a str,
    top_p: f64,
    temperature: f64,
    max_tokens: u32,
    sample_index: usize,
}

/// Deterministic key over everything that determines one sample's request.
/// `num_samples` is excluded so that raising it reuses earlier samples.
pub fn cache_key(
    provider: &str,
    model: &str,
    rendered_text: &str,
    sampling: &SamplingParams,
    sample_index: usize,
) -> String {
    content_key(&KeyMaterial {
        provider,
        model,
        rendered_text,
        top_p: sampling.top_p,
        temperature: sampling.temperature,
        max_tokens: sampling.max_tokens,
        sample_index,
    })
}

#[derive(Debug, Clone)]
pub struct GenerationCache {
    store: ContentStore,
}

impl GenerationCache {
    pub fn new(dir: impl Into<std::path::PathBuf>) -> Self {
        Self {
            store: ContentStore::new(dir),
        }
    }

    pub fn lookup(&self, key: &str) -> Result<Option<GenerationRecord>, CacheError> {
        self.store.get(key)
    }

    pub fn store(&self, record: &GenerationRecord) -> Result<(), CacheError> {
        self.store.put(&record.cache_key, record)
    }
}

/// Backend plus cache, with a counter of backend calls actually made.
pub struct GenerationClient {
    backend: Arc<dyn CompletionBackend>,
    cache: Option<GenerationCache>,
    parallelism: usize,
    calls: AtomicUsize,
}

impl GenerationClient {
    pub fn new(backend: Arc<dyn CompletionBackend>, cache: Option<GenerationCache>) -> Self {
        Self {
            backend,
            cache,
            parallelism: 4,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn with_parallelism(mut self, limit: usize) -> Self {
        self.parallelism = limit.max(1);
        self
    }

    pub fn model_name(&self) -> &str {
        self.backend.model_name()
    }

    /// Number of backend calls made so far (cache hits excluded).
    pub fn provider_calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn key_for(&self, spec: &PromptSpec, sample_index: usize) -> String {
        cache_key(
            self.backend.provider_name(),
            self.backend.model_name(),
            &spec.rendered_text,
            &spec.sampling,
            sample_index,
        )
    }

    /// Returns `spec.sampling.num_samples` records ordered by sample index.
    pub fn generate(&self, spec: &PromptSpec) -> Result<Vec<GenerationRecord>, GenerationError> {
        let indices: Vec<usize> = (0..spec.sampling.num_samples).collect();
        try_map_bounded(&indices, self.parallelism, |&i| self.generate_sample(spec, i))
    }

    fn generate_sample(&self, spec: &PromptSpec, sample_index: usize) -> Result<GenerationRecord, GenerationError> {
        let key = self.key_for(spec, sample_index);
        if let Some(cache) = &self.cache {
            if let Some(mut record) = cache.lookup(&key)? {
                // the cached record may come from a spec with a different num_samples
                record.prompt = spec.clone();
                return Ok(record);
            }
        }
        let request = CompletionRequest {
            model: self.backend.model_name().to_string(),
            prompt: spec.rendered_text.clone(),
            temperature: spec.sampling.temperature,
            top_p: spec.sampling.top_p,
            max_tokens: spec.sampling.max_tokens,
            n: 1,
        };
        self.calls.fetch_add(1, Ordering::SeqCst);
        let raw_text = self.backend.complete(&request)?;
        let record = GenerationRecord {
            prompt: spec.clone(),
            model: self.backend.model_name().to_string(),
            sample_index,
            raw_text,
            cache_key: key,
            timestamp: chrono::Utc::now().to_rfc3339(),
        };
        if let Some(cache) = &self.cache {
            cache.store(&record)?;
        }
        Ok(record)
    }
}

/// Deterministic offline backend: returns a numbered list derived from the
/// prompt text and request parameters. Used for dry runs and tests.
pub struct EchoBackend {
    model: String,
}

impl EchoBackend {
    pub fn new(model: impl Into<String>) -> Self {
        Self { model: model.into() }
    }
}

impl CompletionBackend for EchoBackend {
    fn provider_name(&self) -> &str {
        "echo"
    }

    fn model_name(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &CompletionRequest) -> Result<String, GenerationError> {
        let seed = content_key(request);
        let first_line = request.prompt.lines().next().unwrap_or_default();
        Ok((1..=5)
            .map(|i| {
                format!(
                    "{i}. event {} from {}: {first_line}",
                    &seed[i * 4..i * 4 + 6],
                    self.model
                )
            })
            .collect::<Vec<_>>()
            .join("\n"))
    }
}
