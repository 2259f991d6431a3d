//! Generation client: sampling parameters, length enforcement, the backend
//! request contract and a content-addressed cache of finished generations.

mod backend;
mod stub;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

pub use backend::HttpGenerationBackend;
pub use stub::StubGenerator;

use crate::error::{Error, Result};
use crate::http::{CallResult, RetryPolicy};
use crate::promptkit::PromptSpec;
use crate::util::{derive_seed, digest_fields, excerpt, read_json, word_count, write_json_pretty, Clock};

pub const DEFAULT_SEPARATOR: &str = "<|reply|>";
/// Backends count tokens, not words; bounds are hinted at this ratio.
pub const TOKENS_PER_WORD: f64 = 1.5;
pub const REGENERATION_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingParams {
    pub n_per_prompt: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub no_repeat_ngram: usize,
    pub seed: Option<u64>,
    pub backend_model_id: String,
}

impl Default for SamplingParams {
    fn default() -> Self {
        Self {
            n_per_prompt: 50,
            min_words: 25,
            max_words: 50,
            no_repeat_ngram: 3,
            seed: None,
            backend_model_id: String::new(),
        }
    }
}

impl SamplingParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_words == 0 || self.min_words > self.max_words {
            return Err(Error::InvalidArgument(format!(
                "need 0 < min_words <= max_words, got {}..{}",
                self.min_words, self.max_words
            )));
        }
        if self.n_per_prompt == 0 {
            return Err(Error::InvalidArgument("n_per_prompt must be at least 1".into()));
        }
        Ok(())
    }

    /// Digest of everything that shapes a single sample. `n_per_prompt` is
    /// left out so raising N reuses the samples already generated.
    pub fn digest(&self) -> String {
        let seed = self.seed.map(|s| s.to_string()).unwrap_or_else(|| "none".into());
        digest_fields([
            self.min_words.to_string(),
            self.max_words.to_string(),
            self.no_repeat_ngram.to_string(),
            seed,
            self.backend_model_id.clone(),
        ])[..16]
            .to_string()
    }

    pub fn min_tokens(&self) -> usize {
        (self.min_words as f64 * TOKENS_PER_WORD).ceil() as usize
    }

    pub fn max_tokens(&self) -> usize {
        (self.max_words as f64 * TOKENS_PER_WORD).ceil() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Finetuned,
    Baseline,
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "finetuned" => Ok(ModelKind::Finetuned),
            "baseline" => Ok(ModelKind::Baseline),
            other => Err(format!("unknown model kind {other:?} (expected finetuned or baseline)")),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Finetuned => "finetuned",
            ModelKind::Baseline => "baseline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthFlag {
    Ok,
    Truncated,
    Short,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Generation {
    pub prompt_id: String,
    pub model_id: String,
    pub sample_index: usize,
    pub text: String,
    pub word_count: usize,
    pub length_flag: LengthFlag,
    pub created_at: String,
    pub params_digest: String,
}

/// `POST /generate` request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub prompt: String,
    pub n: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub no_repeat_ngram: usize,
    pub seed: Option<u64>,
    pub model_id: String,
}

/// `POST /generate` response body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub texts: Vec<String>,
}

pub trait GenerationBackend: Send + Sync {
    /// Return exactly `req.n` texts. Count checking happens in the client.
    fn generate(&self, req: &GenerateRequest) -> CallResult<Vec<String>>;
}

/// Text actually sent to the model: fine-tuned models expect the
/// post/comment separator after the prompt, baselines get the bare prompt.
pub fn prompt_payload(rendered: &str, kind: ModelKind, separator: &str) -> String {
    match kind {
        ModelKind::Finetuned => format!("{rendered}{separator}"),
        ModelKind::Baseline => rendered.to_string(),
    }
}

pub fn cache_key(model_id: &str, payload: &str, params_digest: &str, sample_index: usize) -> String {
    digest_fields([model_id, payload, params_digest, &sample_index.to_string()])
}

/// Byte spans of whitespace-separated words.
fn word_spans(text: &str) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(s)) => {
                spans.push((s, i));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push((s, text.len()));
    }
    spans
}

fn ends_sentence(word: &str) -> bool {
    let trimmed = word.trim_end_matches(['"', '\'', ')', ']']);
    trimmed.ends_with(['.', '!', '?'])
}

/// Bring a raw backend reply within the word bounds.
///
/// Overlong text is cut at the last sentence end that leaves between
/// `min_words` and `max_words` words, or hard-cut at `max_words` when there is
/// none. Short text is returned unchanged and flagged; regeneration is the
/// caller's job.
pub fn enforce_length(text: &str, params: &SamplingParams) -> (String, LengthFlag) {
    let spans = word_spans(text);
    let n = spans.len();
    if n < params.min_words {
        return (text.trim().to_string(), LengthFlag::Short);
    }
    if n <= params.max_words {
        return (text.trim().to_string(), LengthFlag::Ok);
    }
    let cut = (params.min_words..=params.max_words)
        .rev()
        .find(|&k| ends_sentence(&text[spans[k - 1].0..spans[k - 1].1]))
        .unwrap_or(params.max_words);
    let start = spans[0].0;
    (text[start..spans[cut - 1].1].to_string(), LengthFlag::Truncated)
}

/// Finished generations stored one JSON file per cache key.
#[derive(Debug, Clone)]
pub struct GenCache {
    dir: PathBuf,
}

impl GenCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(&key[..2]).join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<Generation> {
        let path = self.path(key);
        if !path.exists() {
            return None;
        }
        match read_json(&path) {
            Ok(g) => Some(g),
            Err(e) => {
                log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
                None
            }
        }
    }

    pub fn put(&self, key: &str, generation: &Generation) -> Result<()> {
        write_json_pretty(&self.path(key), generation)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// Everything that identifies one model's generation run.
#[derive(Debug, Clone)]
pub struct ModelRun {
    pub model_id: String,
    pub kind: ModelKind,
    pub params: SamplingParams,
    pub separator: String,
}

#[derive(Debug, Default)]
pub struct ClientStats {
    pub backend_requests: AtomicUsize,
    pub cache_hits: AtomicUsize,
    pub regenerations: AtomicUsize,
}

pub struct GenClient<'a> {
    backend: &'a dyn GenerationBackend,
    cache: GenCache,
    pub retry: RetryPolicy,
    pub concurrency: usize,
    pub clock: Clock,
    pub stats: ClientStats,
}

impl<'a> GenClient<'a> {
    pub fn new(backend: &'a dyn GenerationBackend, cache: GenCache) -> Self {
        Self {
            backend,
            cache,
            retry: RetryPolicy::default(),
            concurrency: 4,
            clock: Clock::System,
            stats: ClientStats::default(),
        }
    }

    fn call(&self, prompt: &PromptSpec, req: &GenerateRequest) -> Result<Vec<String>> {
        let texts = self.retry.run(Some(&prompt.prompt_id), || {
            self.stats.backend_requests.fetch_add(1, Ordering::Relaxed);
            self.backend.generate(req)
        })?;
        if texts.len() != req.n {
            return Err(Error::Contract(format!(
                "asked for {} texts for prompt {}, got {}: {}",
                req.n,
                prompt.prompt_id,
                texts.len(),
                excerpt(&format!("{texts:?}"), 200)
            )));
        }
        Ok(texts)
    }

    fn request(&self, payload: &str, n: usize, seed: Option<u64>, params: &SamplingParams) -> GenerateRequest {
        GenerateRequest {
            prompt: payload.to_string(),
            n,
            min_tokens: params.min_tokens(),
            max_tokens: params.max_tokens(),
            no_repeat_ngram: params.no_repeat_ngram,
            seed,
            model_id: params.backend_model_id.clone(),
        }
    }

    /// All `n_per_prompt` generations for one prompt. Cached samples are
    /// served locally; the rest are requested in one batch, short replies are
    /// regenerated up to three times, and every result is cached before
    /// returning.
    pub fn request_generations(&self, prompt: &PromptSpec, run: &ModelRun) -> Result<Vec<Generation>> {
        let params = &run.params;
        params.validate()?;
        let payload = prompt_payload(&prompt.rendered, run.kind, &run.separator);
        let digest = params.digest();
        let keys: Vec<String> =
            (0..params.n_per_prompt).map(|i| cache_key(&run.model_id, &payload, &digest, i)).collect();

        let mut out: Vec<Option<Generation>> = keys.iter().map(|k| self.cache.get(k)).collect();
        let missing: Vec<usize> = (0..out.len()).filter(|&i| out[i].is_none()).collect();
        self.stats.cache_hits.fetch_add(out.len() - missing.len(), Ordering::Relaxed);
        if missing.is_empty() {
            return Ok(out.into_iter().flatten().collect());
        }

        let index_list = missing.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(",");
        let seed = params.seed.map(|s| derive_seed(s, [prompt.prompt_id.as_str(), "batch", &index_list]));
        let texts = self.call(prompt, &self.request(&payload, missing.len(), seed, params))?;
        let mut fresh: Vec<(usize, String, LengthFlag)> = missing
            .iter()
            .zip(texts)
            .map(|(&i, t)| {
                let (text, flag) = enforce_length(&t, params);
                (i, text, flag)
            })
            .collect();

        for attempt in 1..=REGENERATION_ATTEMPTS {
            let short: Vec<usize> = (0..fresh.len()).filter(|&j| fresh[j].2 == LengthFlag::Short).collect();
            if short.is_empty() {
                break;
            }
            self.stats.regenerations.fetch_add(short.len(), Ordering::Relaxed);
            let seed = params
                .seed
                .map(|s| derive_seed(s, [prompt.prompt_id.as_str(), "regen", &attempt.to_string(), &index_list]));
            let texts = self.call(prompt, &self.request(&payload, short.len(), seed, params))?;
            for (j, t) in short.into_iter().zip(texts) {
                let (text, flag) = enforce_length(&t, params);
                fresh[j].1 = text;
                fresh[j].2 = flag;
            }
        }

        let created_at = self.clock.now();
        for (i, text, flag) in fresh {
            let g = Generation {
                prompt_id: prompt.prompt_id.clone(),
                model_id: run.model_id.clone(),
                sample_index: i,
                word_count: word_count(&text),
                text,
                length_flag: flag,
                created_at: created_at.clone(),
                params_digest: digest.clone(),
            };
            self.cache.put(&keys[i], &g)?;
            out[i] = Some(g);
        }
        Ok(out.into_iter().flatten().collect())
    }

    /// Generate for every prompt with up to `concurrency` requests in flight.
    /// Output is ordered by suite position, then sample index. The first
    /// failure stops new work; finished prompts stay cached for resumption.
    pub fn generate_suite(&self, prompts: &[PromptSpec], run: &ModelRun) -> Result<Vec<Generation>> {
        run.params.validate()?;
        let next = AtomicUsize::new(0);
        let done = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let slots: Vec<Mutex<Option<Vec<Generation>>>> = prompts.iter().map(|_| Mutex::new(None)).collect();
        let failure: Mutex<Option<(usize, Error)>> = Mutex::new(None);
        let workers = self.concurrency.clamp(1, prompts.len().max(1));
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    if abort.load(Ordering::Relaxed) {
                        break;
                    }
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    let Some(prompt) = prompts.get(idx) else { break };
                    match self.request_generations(prompt, run) {
                        Ok(gens) => {
                            *slots[idx].lock().unwrap() = Some(gens);
                            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                            if n % 50 == 0 || n == prompts.len() {
                                log::info!("{}: {n}/{} prompts generated", run.model_id, prompts.len());
                            }
                        }
                        Err(e) => {
                            abort.store(true, Ordering::Relaxed);
                            let mut f = failure.lock().unwrap();
                            if f.as_ref().is_none_or(|(i, _)| idx < *i) {
                                *f = Some((idx, e));
                            }
                            break;
                        }
                    }
                });
            }
        });
        if let Some((_, e)) = failure.into_inner().unwrap() {
            return Err(e);
        }
        Ok(slots.into_iter().flat_map(|s| s.into_inner().unwrap().unwrap_or_default()).collect())
    }
}
