//! Declarative run configuration (TOML).
//!
//! Relative paths are resolved against the directory holding the config file.
//!
//! ```toml
//! [paths]
//! cache_dir = ".cache"
//! reports_dir = "reports"
//!
//! [[domains]]
//! id = "bombing-attacks"
//! display_name = "bombing attacks"
//!
//! [generation]
//! backend = "openai-completions"
//! endpoint_url = "http://localhost:8000/v1/completions"
//! model_name = "text-davinci-003"
//! auth_token_env = "OPENAI_API_KEY"
//!
//! [sampling]
//! temperature = 0.7
//!
//! [one_shot]
//! demo_domains = ["kidnapping"]
//! demo_schemas = { kidnapping = "gold/kidnapping.json" }
//!
//! [entailment]
//! backend = "http"
//! endpoint_url = "http://localhost:8001/entail"
//!
//! [evaluation]
//! direction = "any_directional"
//! tau = 0.5
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cache::content_key;
use crate::entailment::{
    EntailmentError, EntailmentProvider, EntailmentProviderConfig, EntailmentScorer, ExactMatchProvider,
    HttpEntailmentProvider,
};
use crate::generation::{
    CompletionBackend, EchoBackend, GenerationCache, GenerationClient, GenerationError, GenerationProviderConfig,
    OpenAiCompletions,
};
use crate::metrics::RecallConfig;
use crate::prompt::{Demonstration, PromptError, SamplingParams, Templates, VerbalizerId};
use crate::schema::{load_schema, Domain, SchemaError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: String, message: String },
    #[error("unknown domain {0:?}")]
    UnknownDomain(String),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Generation(#[from] GenerationError),
    #[error(transparent)]
    Entailment(#[from] EntailmentError),
    #[error(transparent)]
    Schema(#[from] SchemaError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub cache_dir: PathBuf,
    pub reports_dir: PathBuf,
    pub schemas_dir: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self {
            cache_dir: ".cache".into(),
            reports_dir: "reports".into(),
            schemas_dir: "schemas".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenerationBackend {
    #[default]
    OpenaiCompletions,
    /// Offline deterministic backend; needs no endpoint.
    Echo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationSection {
    #[serde(default)]
    pub backend: GenerationBackend,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    pub model_name: String,
    #[serde(default)]
    pub auth_token_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: f64,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff_ms")]
    pub retry_base_delay_ms: u64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

fn default_timeout_secs() -> f64 {
    60.0
}

fn default_retries() -> u32 {
    3
}

fn default_backoff_ms() -> u64 {
    500
}

fn default_parallelism() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeroShotSection {
    pub verbalizer: VerbalizerId,
}

impl Default for ZeroShotSection {
    fn default() -> Self {
        Self {
            verbalizer: VerbalizerId::Temporal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OneShotSection {
    pub verbalizer: VerbalizerId,
    /// Demonstration domains in prompt order. Empty means every key of `demo_schemas`.
    pub demo_domains: Vec<String>,
    pub demo_schemas: BTreeMap<String, PathBuf>,
}

impl Default for OneShotSection {
    fn default() -> Self {
        Self {
            verbalizer: VerbalizerId::Temporal,
            demo_domains: Vec::new(),
            demo_schemas: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntailmentBackend {
    #[default]
    Http,
    /// Built-in mock: entailment iff the two texts are identical.
    ExactMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntailmentSection {
    #[serde(default)]
    pub backend: EntailmentBackend,
    #[serde(default)]
    pub endpoint_url: Option<String>,
    #[serde(default = "default_nli_model")]
    pub model_name: String,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_timeout_secs")]
    pub request_timeout_secs: f64,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
}

impl Default for EntailmentSection {
    fn default() -> Self {
        Self {
            backend: EntailmentBackend::Http,
            endpoint_url: None,
            model_name: default_nli_model(),
            batch_size: default_batch(),
            request_timeout_secs: default_timeout_secs(),
            parallelism: default_parallelism(),
        }
    }
}

fn default_nli_model() -> String {
    "roberta-large-wanli".into()
}

fn default_batch() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run_id: Option<String>,
    #[serde(default)]
    pub paths: PathsConfig,
    pub domains: Vec<Domain>,
    pub generation: GenerationSection,
    #[serde(default)]
    pub sampling: SamplingParams,
    #[serde(default)]
    pub zero_shot: ZeroShotSection,
    #[serde(default)]
    pub one_shot: OneShotSection,
    #[serde(default)]
    pub entailment: EntailmentSection,
    #[serde(default)]
    pub evaluation: RecallConfig,
    #[serde(default)]
    pub templates: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })
    }

    /// Parses, resolves relative paths against `base_dir`, and validates.
    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<string>".into(),
            message: e.to_string(),
        })?;
        cfg.resolve_paths(base_dir);
        cfg.validate()?;
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.paths.cache_dir);
        fix(&mut self.paths.reports_dir);
        fix(&mut self.paths.schemas_dir);
        self.one_shot.demo_schemas.values_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.domains.is_empty() {
            return Err(ConfigError::Invalid("at least one domain is required".into()));
        }
        for (i, d) in self.domains.iter().enumerate() {
            d.validate()?;
            if self.domains[..i].iter().any(|e| e.id == d.id) {
                return Err(ConfigError::Invalid(format!("domain {:?} listed twice", d.id)));
            }
        }
        self.sampling.validate()?;
        self.evaluation
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.templates()?;
        if self.generation.backend == GenerationBackend::OpenaiCompletions {
            self.generation_provider_config()?.validate()?;
        }
        if self.entailment.backend == EntailmentBackend::Http {
            self.entailment_provider_config()?.validate()?;
        }
        if self.generation.parallelism == 0 || self.entailment.parallelism == 0 {
            return Err(ConfigError::Invalid("parallelism must be at least 1".into()));
        }
        for id in &self.one_shot.demo_domains {
            if !self.one_shot.demo_schemas.contains_key(id) {
                return Err(ConfigError::Invalid(format!("demo domain {id:?} has no demo schema")));
            }
        }
        Ok(())
    }

    pub fn domain(&self, id: &str) -> Result<&Domain, ConfigError> {
        self.domains
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| ConfigError::UnknownDomain(id.to_string()))
    }

    pub fn templates(&self) -> Result<Templates, ConfigError> {
        Ok(Templates::with_overrides(
            self.templates.iter().map(|(k, v)| (k.as_str(), v.as_str())),
        )?)
    }

    fn generation_provider_config(&self) -> Result<GenerationProviderConfig, ConfigError> {
        let g = &self.generation;
        let endpoint = g
            .endpoint_url
            .clone()
            .ok_or_else(|| ConfigError::Invalid("generation.endpoint_url is required".into()))?;
        let mut cfg = GenerationProviderConfig::new(endpoint, &g.model_name);
        cfg.auth_token_env = g.auth_token_env.clone();
        cfg.request_timeout = Duration::try_from_secs_f64(g.request_timeout_secs)
            .map_err(|e| ConfigError::Invalid(format!("generation.request_timeout_secs: {e}")))?;
        cfg.max_retries = g.max_retries;
        cfg.retry_base_delay = Duration::from_millis(g.retry_base_delay_ms);
        Ok(cfg)
    }

    fn entailment_provider_config(&self) -> Result<EntailmentProviderConfig, ConfigError> {
        let e = &self.entailment;
        let endpoint = e
            .endpoint_url
            .clone()
            .ok_or_else(|| ConfigError::Invalid("entailment.endpoint_url is required".into()))?;
        let mut cfg = EntailmentProviderConfig::new(endpoint);
        cfg.model_name = e.model_name.clone();
        cfg.batch_size = e.batch_size;
        cfg.request_timeout = Duration::try_from_secs_f64(e.request_timeout_secs)
            .map_err(|err| ConfigError::Invalid(format!("entailment.request_timeout_secs: {err}")))?;
        Ok(cfg)
    }

    pub fn completion_backend(&self) -> Result<Arc<dyn CompletionBackend>, ConfigError> {
        Ok(match self.generation.backend {
            GenerationBackend::OpenaiCompletions => {
                Arc::new(OpenAiCompletions::new(self.generation_provider_config()?)?)
            }
            GenerationBackend::Echo => Arc::new(EchoBackend::new(&self.generation.model_name)),
        })
    }

    pub fn generation_client(&self) -> Result<GenerationClient, ConfigError> {
        Ok(self.generation_client_with(self.completion_backend()?))
    }

    /// Client over an explicit backend, with this config's cache and parallelism.
    pub fn generation_client_with(&self, backend: Arc<dyn CompletionBackend>) -> GenerationClient {
        GenerationClient::new(
            backend,
            Some(GenerationCache::new(self.paths.cache_dir.join("generations"))),
        )
        .with_parallelism(self.generation.parallelism)
    }

    pub fn entailment_provider(&self) -> Result<Arc<dyn EntailmentProvider>, ConfigError> {
        Ok(match self.entailment.backend {
            EntailmentBackend::Http => Arc::new(HttpEntailmentProvider::new(self.entailment_provider_config()?)?),
            EntailmentBackend::ExactMatch => Arc::new(ExactMatchProvider),
        })
    }

    pub fn entailment_scorer(&self) -> Result<EntailmentScorer, ConfigError> {
        Ok(self.entailment_scorer_with(self.entailment_provider()?))
    }

    pub fn entailment_scorer_with(&self, provider: Arc<dyn EntailmentProvider>) -> EntailmentScorer {
        EntailmentScorer::new(provider)
            .with_cache(self.paths.cache_dir.join("entailment"))
            .with_batch_size(self.entailment.batch_size)
            .with_parallelism(self.entailment.parallelism)
    }

    /// Demonstrations for a one-shot run on `target`, in configured order.
    /// Demo domains equal to the target are skipped.
    pub fn demonstrations(&self, target: &str) -> Result<Vec<Demonstration>, ConfigError> {
        let ids: Vec<&String> = if self.one_shot.demo_domains.is_empty() {
            self.one_shot.demo_schemas.keys().collect()
        } else {
            self.one_shot.demo_domains.iter().collect()
        };
        let mut demos = Vec::new();
        for id in ids.into_iter().filter(|id| id.as_str() != target) {
            let schema = load_schema(&self.one_shot.demo_schemas[id])?;
            if &schema.domain.id != id {
                return Err(ConfigError::Invalid(format!(
                    "demo schema for {id:?} belongs to domain {:?}",
                    schema.domain.id
                )));
            }
            demos.push(Demonstration {
                domain: schema.domain.clone(),
                schema,
            });
        }
        if demos.is_empty() {
            return Err(ConfigError::Invalid(format!(
                "one-shot mode needs a demo schema from a domain other than {target:?}"
            )));
        }
        Ok(demos)
    }

    /// Content hash of the effective configuration (with `run_id` cleared).
    pub fn fingerprint(&self) -> String {
        let mut effective = self.clone();
        effective.run_id = None;
        content_key(&effective)
    }

    /// Configured run id, or a short hash of the effective config plus `inputs`.
    pub fn run_id(&self, inputs: &[&str]) -> String {
        match &self.run_id {
            Some(id) => id.clone(),
            None => content_key(&(self.fingerprint(), inputs))[..12].to_string(),
        }
    }

    pub fn reports_dir(&self, run_id: &str) -> PathBuf {
        self.paths.reports_dir.join(run_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[[domains]]
id = "bombing-attacks"
display_name = "bombing attacks"

[generation]
backend = "echo"
model_name = "echo-1"

[entailment]
backend = "exact-match"
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let cfg = RunConfig::from_toml_str(MINIMAL, Path::new("/base")).unwrap();
        assert_eq!(cfg.sampling, SamplingParams::default());
        assert_eq!(cfg.evaluation, RecallConfig::default());
        assert_eq!(cfg.paths.cache_dir, PathBuf::from("/base/.cache"));
        assert_eq!(cfg.domain("bombing-attacks").unwrap().display_name, "bombing attacks");
        assert!(matches!(cfg.domain("flood"), Err(ConfigError::UnknownDomain(_))));
    }

    #[test]
    fn run_id_tracks_effective_config() {
        let a = RunConfig::from_toml_str(MINIMAL, Path::new("/base")).unwrap();
        let mut b = a.clone();
        assert_eq!(a.run_id(&["x"]), b.run_id(&["x"]));
        assert_ne!(a.run_id(&["x"]), a.run_id(&["y"]));
        b.sampling.temperature = 0.2;
        assert_ne!(a.run_id(&["x"]), b.run_id(&["x"]));
        b.run_id = Some("fixed".into());
        assert_eq!(b.run_id(&["x"]), "fixed");
    }

    #[test]
    fn http_backends_need_endpoints() {
        let text = MINIMAL.replace("backend = \"exact-match\"", "backend = \"http\"");
        let err = RunConfig::from_toml_str(&text, Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("entailment.endpoint_url"), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        let unknown_key = format!("{MINIMAL}\n[sampling]\ntemprature = 0.3\n");
        assert!(matches!(
            RunConfig::from_toml_str(&unknown_key, Path::new(".")),
            Err(ConfigError::Parse { .. })
        ));
        let bad_tau = format!("{MINIMAL}\n[evaluation]\ntau = 0.0\n");
        assert!(RunConfig::from_toml_str(&bad_tau, Path::new(".")).is_err());
        let bad_template = format!("{MINIMAL}\n[templates]\nnope = \"x\"\n");
        assert!(matches!(
            RunConfig::from_toml_str(&bad_template, Path::new(".")),
            Err(ConfigError::Prompt(PromptError::UnknownVerbalizer(_)))
        ));
        let dup = format!("{MINIMAL}\n[[domains]]\nid = \"bombing-attacks\"\ndisplay_name = \"x\"\n");
        assert!(RunConfig::from_toml_str(&dup, Path::new(".")).is_err());
    }
}
