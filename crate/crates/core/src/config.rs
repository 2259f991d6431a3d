//! Run configuration: one TOML file describing inputs, backends, sampling,
//! models and output location.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use crate::corpus::InputSpec;
use crate::error::{Error, Result};
use crate::genclient::{ModelKind, ModelRun, SamplingParams, DEFAULT_SEPARATOR};
use crate::http::RetryPolicy;
use crate::metrics::RECOMMENDED_EPSILON;
use crate::util::digest_fields;

/// Backend address meaning "use the built-in deterministic stub".
pub const STUB: &str = "stub";
pub const DEFAULT_AUTH_ENV: &str = "COMMBIAS_API_TOKEN";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub inputs: Vec<InputSpec>,
    pub output: PathBuf,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self { inputs: Vec::new(), output: "corpus/train.jsonl".into() }
    }
}

/// Missing paths mean the shipped lexicon and templates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptsConfig {
    pub lexicon: Option<PathBuf>,
    pub templates: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendsConfig {
    /// Base URL of the generation service, or `"stub"`.
    pub generation: String,
    /// Base URL of the toxicity service, or `"stub"` for constant scores.
    pub toxicity: String,
    pub auth_header: String,
    pub auth_prefix: String,
    /// Environment variable holding the token. Tokens never live in config.
    pub auth_env: String,
    pub timeout_secs: u64,
    pub concurrency: usize,
    pub toxicity_batch_size: usize,
    pub retry: RetryPolicy,
}

impl Default for BackendsConfig {
    fn default() -> Self {
        Self {
            generation: STUB.into(),
            toxicity: STUB.into(),
            auth_header: "Authorization".into(),
            auth_prefix: "Bearer ".into(),
            auth_env: DEFAULT_AUTH_ENV.into(),
            timeout_secs: 120,
            concurrency: 4,
            toxicity_batch_size: 32,
            retry: RetryPolicy::default(),
        }
    }
}

impl BackendsConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout_secs)
    }

    /// Header to attach to backend requests, if the token variable is set.
    pub fn auth(&self) -> Option<(String, String)> {
        let token = std::env::var(&self.auth_env).ok().filter(|t| !t.is_empty())?;
        Some((self.auth_header.clone(), format!("{}{token}", self.auth_prefix)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingConfig {
    pub n_per_prompt: usize,
    pub min_words: usize,
    pub max_words: usize,
    pub no_repeat_ngram: usize,
    pub separator: String,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        let p = SamplingParams::default();
        Self {
            n_per_prompt: p.n_per_prompt,
            min_words: p.min_words,
            max_words: p.max_words,
            no_repeat_ngram: p.no_repeat_ngram,
            separator: DEFAULT_SEPARATOR.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub epsilon: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { epsilon: RECOMMENDED_EPSILON }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub top_k: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { top_k: 10 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Base seed for all sampling; absent means unseeded backends.
    pub seed: Option<u64>,
    /// Fixed timestamps and zeroed timings, for byte-identical reruns.
    pub reproducible: bool,
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    pub kind: ModelKind,
    /// Name the backend knows the model by; defaults to `id`.
    pub backend_model_id: String,
    pub separator: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub output_root: PathBuf,
    pub corpus: CorpusConfig,
    pub prompts: PromptsConfig,
    pub backends: BackendsConfig,
    pub sampling: SamplingConfig,
    pub metrics: MetricsConfig,
    pub report: ReportConfig,
    pub run: RunSection,
    pub models: Vec<ModelConfig>,
}

// Raw file shape. Fields that get semantic checks keep their spans so
// errors can point at a line.

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    output_root: Option<PathBuf>,
    #[serde(default)]
    corpus: CorpusConfig,
    #[serde(default)]
    prompts: PromptsConfig,
    #[serde(default)]
    backends: BackendsConfig,
    #[serde(default)]
    sampling: Option<Spanned<SamplingConfig>>,
    #[serde(default)]
    metrics: Option<Spanned<MetricsConfig>>,
    #[serde(default)]
    report: ReportConfig,
    #[serde(default)]
    run: RunSection,
    #[serde(default)]
    models: Vec<RawModel>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    id: Spanned<String>,
    kind: Spanned<String>,
    #[serde(default)]
    backend_model_id: Option<String>,
    #[serde(default)]
    separator: Option<String>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` at or after `from`, else the line of `from`.
fn key_line(text: &str, from: usize, key: &str) -> usize {
    let start = from.min(text.len());
    let found = text[start..]
        .lines()
        .scan(start, |pos, l| {
            let here = *pos;
            *pos += l.len() + 1;
            Some((here, l))
        })
        .find(|(_, l)| l.trim_start().strip_prefix(key).is_some_and(|r| r.trim_start().starts_with('=')));
    line_of(text, found.map(|(p, _)| p).unwrap_or(start))
}

fn valid_model_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Parse, apply defaults, resolve relative paths against `base`, and
    /// check for contradictions. All violations are reported together.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        let mut problems = Vec::new();

        let sampling = match raw.sampling {
            Some(s) => {
                let at = s.span().start;
                let s = s.into_inner();
                if s.min_words == 0 || s.min_words > s.max_words {
                    problems.push(format!(
                        "sampling.min_words (line {}): need 0 < min_words <= max_words, got {} > {}",
                        key_line(text, at, "min_words"),
                        s.min_words,
                        s.max_words
                    ));
                }
                if s.n_per_prompt == 0 {
                    problems.push(format!(
                        "sampling.n_per_prompt (line {}): must be at least 1",
                        key_line(text, at, "n_per_prompt")
                    ));
                }
                s
            }
            None => SamplingConfig::default(),
        };
        let metrics = match raw.metrics {
            Some(m) => {
                let line = key_line(text, m.span().start, "epsilon");
                let m = m.into_inner();
                if !(m.epsilon >= 0.0 && m.epsilon.is_finite()) {
                    problems.push(format!("metrics.epsilon (line {line}): must be finite and >= 0, got {}", m.epsilon));
                }
                m
            }
            None => MetricsConfig::default(),
        };

        let mut models = Vec::new();
        let mut ids = BTreeSet::new();
        for (i, m) in raw.models.into_iter().enumerate() {
            let id_line = line_of(text, m.id.span().start);
            let kind_line = line_of(text, m.kind.span().start);
            let id = m.id.into_inner();
            if !valid_model_id(&id) {
                problems.push(format!("models[{i}].id (line {id_line}): {id:?} must be non-empty [A-Za-z0-9._-]"));
            }
            if !ids.insert(id.clone()) {
                problems.push(format!("models[{i}].id (line {id_line}): duplicate model id {id:?}"));
            }
            let kind = match m.kind.get_ref().parse::<ModelKind>() {
                Ok(k) => k,
                Err(msg) => {
                    problems.push(format!("models[{i}].kind (line {kind_line}): {msg}"));
                    ModelKind::Baseline
                }
            };
            models.push(ModelConfig {
                backend_model_id: m.backend_model_id.unwrap_or_else(|| id.clone()),
                id,
                kind,
                separator: m.separator,
            });
        }
        if models.is_empty() {
            problems.push("models: at least one [[models]] entry is required".into());
        }

        let b = &raw.backends;
        if b.concurrency == 0 {
            problems.push("backends.concurrency: must be at least 1".into());
        }
        if b.toxicity_batch_size == 0 {
            problems.push("backends.toxicity_batch_size: must be at least 1".into());
        }
        for (name, url) in [("generation", &b.generation), ("toxicity", &b.toxicity)] {
            if url != STUB && !(url.starts_with("http://") || url.starts_with("https://")) {
                problems.push(format!("backends.{name}: expected \"stub\" or an http(s) URL, got {url:?}"));
            }
        }

        let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        let output_root = resolve(raw.output_root.as_deref().unwrap_or(Path::new("run")));
        let mut corpus = raw.corpus;
        for (i, input) in corpus.inputs.iter_mut().enumerate() {
            input.path = resolve(&input.path);
            if !input.path.exists() {
                problems.push(format!("corpus.inputs[{i}].path: {} does not exist", input.path.display()));
            }
        }
        corpus.output = if corpus.output.is_absolute() { corpus.output } else { output_root.join(&corpus.output) };
        let mut prompts = raw.prompts;
        for (name, p) in [("lexicon", &mut prompts.lexicon), ("templates", &mut prompts.templates)] {
            if let Some(p) = p {
                *p = resolve(p);
                if !p.exists() {
                    problems.push(format!("prompts.{name}: {} does not exist", p.display()));
                }
            }
        }
        let mut run = raw.run;
        run.cache_dir = run.cache_dir.map(|p| resolve(&p));

        if !problems.is_empty() {
            return Err(Error::Config(problems.join("\n  ")));
        }
        Ok(RunConfig {
            output_root,
            corpus,
            prompts,
            backends: raw.backends,
            sampling,
            metrics,
            report: raw.report,
            run,
            models,
        })
    }

    /// Normalized TOML with every default spelled out.
    pub fn dump(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }

    /// Digest of the settings that shape results. Output location and cache
    /// placement are left out so identical runs in different directories
    /// share a digest.
    pub fn digest(&self) -> String {
        let mut c = self.clone();
        c.output_root = PathBuf::new();
        c.run.cache_dir = None;
        c.corpus.output = PathBuf::new();
        digest_fields([serde_json::to_string(&c).unwrap_or_default()])
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.run.cache_dir.clone().unwrap_or_else(|| self.output_root.join("cache"))
    }

    /// Keep only the named models, in config order.
    pub fn select_models(&mut self, names: &[String]) -> Result<()> {
        if names.is_empty() {
            return Ok(());
        }
        let known: BTreeSet<&str> = self.models.iter().map(|m| m.id.as_str()).collect();
        let unknown: Vec<&String> = names.iter().filter(|n| !known.contains(n.as_str())).collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("--models: unknown model ids {unknown:?}")));
        }
        self.models.retain(|m| names.contains(&m.id));
        Ok(())
    }

    pub fn model_run(&self, model: &ModelConfig) -> ModelRun {
        ModelRun {
            model_id: model.id.clone(),
            kind: model.kind,
            params: SamplingParams {
                n_per_prompt: self.sampling.n_per_prompt,
                min_words: self.sampling.min_words,
                max_words: self.sampling.max_words,
                no_repeat_ngram: self.sampling.no_repeat_ngram,
                seed: self.run.seed,
                backend_model_id: model.backend_model_id.clone(),
            },
            separator: model.separator.clone().unwrap_or_else(|| self.sampling.separator.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[[models]]\nid = \"m\"\nkind = \"finetuned\"\n";

    #[test]
    fn minimal_gets_defaults() {
        let c = RunConfig::parse(MINIMAL, Path::new("/tmp")).unwrap();
        assert_eq!(c.sampling.n_per_prompt, 50);
        assert_eq!((c.sampling.min_words, c.sampling.max_words), (25, 50));
        assert_eq!(c.sampling.no_repeat_ngram, 3);
        assert_eq!(c.models[0].backend_model_id, "m");
        let dump = c.dump();
        assert!(dump.contains("n_per_prompt = 50"), "{dump}");
        assert!(dump.contains("min_words = 25"));
        assert!(dump.contains("no_repeat_ngram = 3"));
        let again: RunConfig = toml::from_str(&dump).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn word_bounds_contradiction() {
        let text = format!("{MINIMAL}\n[sampling]\nmin_words = 60\nmax_words = 50\n");
        let err = RunConfig::parse(&text, Path::new("/tmp")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("sampling.min_words") && msg.contains("line 6"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn unknown_kind_names_field() {
        let text = "[[models]]\nid = \"a\"\nkind = \"finetuned\"\n\n[[models]]\nid = \"b\"\nkind = \"large\"\n";
        let msg = RunConfig::parse(text, Path::new("/tmp")).unwrap_err().to_string();
        assert!(msg.contains("models[1].kind") && msg.contains("line 7") && msg.contains("large"), "{msg}");
    }

    #[test]
    fn duplicate_ids_and_missing_paths_reported_together() {
        let text = "[prompts]\nlexicon = \"nope.tsv\"\n[[models]]\nid = \"a\"\nkind = \"baseline\"\n[[models]]\nid = \"a\"\nkind = \"baseline\"\n";
        let msg = RunConfig::parse(text, Path::new("/nonexistent")).unwrap_err().to_string();
        assert!(msg.contains("duplicate model id"), "{msg}");
        assert!(msg.contains("prompts.lexicon"), "{msg}");
    }

    #[test]
    fn syntax_error_has_line() {
        let msg = RunConfig::parse("[sampling\n", Path::new("/tmp")).unwrap_err().to_string();
        assert!(msg.contains("line 1"), "{msg}");
        let msg = RunConfig::parse("[sampling]\nbogus = 1\n", Path::new("/tmp")).unwrap_err().to_string();
        assert!(msg.contains("bogus") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn digest_ignores_location() {
        let a = RunConfig::parse(MINIMAL, Path::new("/tmp/a")).unwrap();
        let b = RunConfig::parse(MINIMAL, Path::new("/tmp/b")).unwrap();
        assert_ne!(a.output_root, b.output_root);
        assert_eq!(a.digest(), b.digest());
        let c = RunConfig::parse(&format!("{MINIMAL}[run]\nseed = 1\n"), Path::new("/tmp/a")).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn model_selection() {
        let text = "[[models]]\nid = \"a\"\nkind = \"baseline\"\n[[models]]\nid = \"b\"\nkind = \"finetuned\"\nseparator = \"<|sep|>\"\n";
        let mut c = RunConfig::parse(text, Path::new("/tmp")).unwrap();
        assert_eq!(c.model_run(&c.models[1]).separator, "<|sep|>");
        assert_eq!(c.model_run(&c.models[0]).separator, DEFAULT_SEPARATOR);
        assert!(c.select_models(&["zzz".into()]).is_err());
        c.select_models(&["b".into()]).unwrap();
        assert_eq!(c.models.len(), 1);
    }
}
