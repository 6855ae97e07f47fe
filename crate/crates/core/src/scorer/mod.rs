//! Feature scoring: mapping (context reviews, candidate summary) text to a
//! feature vector.
//!
//! Two backends share one interface: a deterministic rule-based scorer for
//! desk-scale work, and a remote judge client that renders one prompt per
//! feature, POSTs it, parses the first number out of the reply, and clamps
//! it into the feature's bounds. Remote scores are cached by content hash.

mod cache;
mod lexicon;
mod remote;
mod rules;

pub use cache::{cache_key, template_version, ScoreCache, ScoreCacheEntry};
pub use remote::{parse_first_number, HttpTransport, JudgeTransport};
pub use rules::CONCISENESS_TARGET_WORDS;

use crate::error::{Error, Result};
use crate::schema::{FeatureSchema, FeatureVector};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Backend {
    RuleBased,
    Remote,
}

#[derive(Debug, Clone)]
pub struct ScorerConfig {
    pub backend: Backend,
    pub remote_endpoint: Option<String>,
    /// One prompt template per schema feature, in schema order. Placeholders
    /// `{reviews}`, `{summary}` and `{feature_rubric}` are substituted.
    pub prompt_templates: Vec<String>,
    pub cache_path: Option<PathBuf>,
    pub max_parallel_requests: usize,
    pub retry_limit: usize,
}

impl ScorerConfig {
    pub fn rule_based() -> Self {
        ScorerConfig {
            backend: Backend::RuleBased,
            remote_endpoint: None,
            prompt_templates: Vec::new(),
            cache_path: None,
            max_parallel_requests: 1,
            retry_limit: 0,
        }
    }

    pub fn remote(endpoint: impl Into<String>, schema: &FeatureSchema) -> Self {
        ScorerConfig {
            backend: Backend::Remote,
            remote_endpoint: Some(endpoint.into()),
            prompt_templates: default_templates(schema),
            cache_path: None,
            max_parallel_requests: 4,
            retry_limit: 2,
        }
    }

    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        if self.max_parallel_requests == 0 {
            return Err(Error::Config(
                "max_parallel_requests must be at least 1".into(),
            ));
        }
        if self.backend == Backend::Remote {
            if self.remote_endpoint.as_deref().unwrap_or("").is_empty() {
                return Err(Error::Config(
                    "remote backend requires remote_endpoint".into(),
                ));
            }
            if self.prompt_templates.len() != schema.len() {
                return Err(Error::Config(format!(
                    "remote backend requires {} prompt templates (one per feature), got {}",
                    schema.len(),
                    self.prompt_templates.len()
                )));
            }
        }
        Ok(())
    }
}

/// Editable default prompt template, one copy per feature.
pub fn default_templates(schema: &FeatureSchema) -> Vec<String> {
    schema
        .features()
        .iter()
        .map(|_| DEFAULT_TEMPLATE.to_string())
        .collect()
}

pub const DEFAULT_TEMPLATE: &str =
    "You are grading an opinion summary against the reviews it summarizes.\n\
{feature_rubric}\n\
Reviews:\n{reviews}\n\
Summary:\n{summary}\n\
Reply with the score as a single number.";

/// One-line grading rubric for a feature, by name.
pub fn feature_rubric(schema: &FeatureSchema, index: usize) -> String {
    let def = schema.feature(index);
    let (min, max) = (def.min, def.max);
    let detail = match def.name.as_str() {
        "aspect-coverage" => {
            "how many of the product aspects raised in the reviews the summary mentions"
        }
        "opinion-faithfulness" => {
            "whether the opinions the summary attributes to reviewers match what the reviews say"
        }
        "opinion-coverage" => "how many of the reviewers' opinions the summary picks up",
        "conciseness" => "whether the summary is complete yet free of filler",
        "relevance" => "how relevant the summary is to these reviews and this product",
        "hallucination" => {
            "how well grounded the summary is in the reviews (higher means fewer fabrications)"
        }
        "language-correctness" => "grammaticality and fluency of the summary text",
        _ => "overall quality on this dimension",
    };
    format!(
        "Rate '{}' from {min} (worst) to {max} (best): {detail}.",
        def.name
    )
}

/// Feature scorer over a fixed schema and backend configuration.
pub struct Scorer {
    config: ScorerConfig,
    schema: FeatureSchema,
    cache: ScoreCache,
    template_versions: Vec<String>,
    transport: Arc<dyn JudgeTransport>,
}

impl Scorer {
    pub fn new(config: ScorerConfig, schema: FeatureSchema) -> Result<Self> {
        Self::with_transport(config, schema, Arc::new(HttpTransport::default()))
    }

    /// Injects a transport; used by tests to fake the judge endpoint.
    pub fn with_transport(
        config: ScorerConfig,
        schema: FeatureSchema,
        transport: Arc<dyn JudgeTransport>,
    ) -> Result<Self> {
        config.validate(&schema)?;
        let cache = match &config.cache_path {
            Some(path) => ScoreCache::persistent(path)?,
            None => ScoreCache::in_memory(),
        };
        let template_versions = config
            .prompt_templates
            .iter()
            .map(|t| template_version(t))
            .collect();
        Ok(Scorer {
            config,
            schema,
            cache,
            template_versions,
            transport,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn cache(&self) -> &ScoreCache {
        &self.cache
    }

    /// Scores one (context, candidate) pair across all schema features.
    pub fn score(&self, context: &str, candidate: &str) -> Result<FeatureVector> {
        if candidate.trim().is_empty() {
            return Err(Error::Validation("empty candidate".into()));
        }
        let values = match self.config.backend {
            Backend::RuleBased => self.score_rule_based(context, candidate)?,
            Backend::Remote => self.score_remote(context, candidate)?,
        };
        Ok(FeatureVector::new(values))
    }

    fn score_rule_based(&self, context: &str, candidate: &str) -> Result<Vec<f64>> {
        self.schema
            .features()
            .iter()
            .map(|def| {
                let frac = match def.name.as_str() {
                    "aspect-coverage" => rules::aspect_coverage(context, candidate),
                    "opinion-faithfulness" => rules::opinion_faithfulness(context, candidate),
                    "opinion-coverage" => rules::opinion_coverage(context, candidate),
                    "conciseness" => rules::conciseness(candidate),
                    "relevance" => rules::relevance(context, candidate),
                    "hallucination" => rules::hallucination(context, candidate),
                    "language-correctness" => rules::language_correctness(candidate),
                    other => {
                        return Err(Error::Config(format!(
                            "rule-based scorer has no rule for feature '{other}'"
                        )))
                    }
                };
                Ok(def.min + frac * def.range())
            })
            .collect()
    }

    fn score_remote(&self, context: &str, candidate: &str) -> Result<Vec<f64>> {
        let endpoint = self.config.remote_endpoint.as_deref().expect("validated");
        let mut values = Vec::with_capacity(self.schema.len());
        for (i, def) in self.schema.features().iter().enumerate() {
            let key = cache_key(&def.name, &self.template_versions[i], context, candidate);
            if let Some(value) = self.cache.get(&key) {
                values.push(value);
                continue;
            }
            let prompt = self.config.prompt_templates[i]
                .replace("{feature_rubric}", &feature_rubric(&self.schema, i))
                .replace("{reviews}", context)
                .replace("{summary}", candidate);
            let reply = self.call_with_retries(endpoint, &prompt)?;
            let value = parse_first_number(&reply)?.clamp(def.min, def.max);
            self.cache.insert(key, value)?;
            values.push(value);
        }
        Ok(values)
    }

    fn call_with_retries(&self, endpoint: &str, prompt: &str) -> Result<String> {
        let attempts = self.config.retry_limit + 1;
        let mut last_error = String::new();
        for _ in 0..attempts {
            match self.transport.complete(endpoint, prompt) {
                Ok(reply) => return Ok(reply),
                Err(e) => last_error = e,
            }
        }
        Err(Error::Remote(format!(
            "judge call failed after {attempts} attempt(s): {last_error}"
        )))
    }

    /// Scores many items, preserving input order. At most
    /// `max_parallel_requests` items are processed concurrently; the first
    /// failure (by item index) aborts the batch.
    pub fn score_batch(&self, items: &[(String, String)]) -> Result<Vec<FeatureVector>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let workers = self.config.max_parallel_requests.min(items.len());
        if workers == 1 {
            return items
                .iter()
                .enumerate()
                .map(|(i, (ctx, cand))| {
                    self.score(ctx, cand).map_err(|e| annotate_item_error(e, i))
                })
                .collect();
        }
        let cursor = AtomicUsize::new(0);
        let results: Mutex<Vec<Option<Result<FeatureVector>>>> =
            Mutex::new((0..items.len()).map(|_| None).collect());
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::SeqCst);
                    if i >= items.len() {
                        break;
                    }
                    let outcome = self.score(&items[i].0, &items[i].1);
                    results.lock().unwrap()[i] = Some(outcome);
                });
            }
        });
        let mut out = Vec::with_capacity(items.len());
        for (i, slot) in results.into_inner().unwrap().into_iter().enumerate() {
            match slot.expect("every item visited") {
                Ok(v) => out.push(v),
                Err(e) => return Err(annotate_item_error(e, i)),
            }
        }
        Ok(out)
    }
}

fn annotate_item_error(e: Error, index: usize) -> Error {
    match e {
        Error::Remote(msg) => Error::Remote(format!("item {index}: {msg}")),
        Error::Validation(msg) => Error::Validation(format!("item {index}: {msg}")),
        other => other,
    }
}
