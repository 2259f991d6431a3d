//! Stage orchestration over a [`RunConfig`]: prepare, prompts, generate,
//! score, aggregate, report.
//!
//! Every stage reads its inputs from, and writes its outputs under, the
//! configured output root. A completed stage leaves a marker in `.stages/`;
//! rerunning it is a no-op until the config changes or `force` is set.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, STUB};
use crate::corpus;
use crate::error::{Error, Result};
use crate::genclient::{GenCache, GenClient, Generation, GenerationBackend, HttpGenerationBackend, StubGenerator};
use crate::metrics::{self, BiasMatrix, ScoreRecord};
use crate::promptkit::{self, CompatibilityMatrix, PromptSpec, Template};
use crate::report::{self, ExtremeRow, ModelCounts, ReportBundle, RunManifest};
use crate::sentiment::SentimentAnalyzer;
use crate::toxclient::{ConstantToxicity, HttpToxicityBackend, ToxClient, ToxicityBackend};
use crate::util::{read_json, read_jsonl, write_json_pretty, write_jsonl, Clock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Prepare,
    Prompts,
    Generate,
    Score,
    Aggregate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] =
        [Stage::Prepare, Stage::Prompts, Stage::Generate, Stage::Score, Stage::Aggregate, Stage::Report];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Prompts => "prompts",
            Stage::Generate => "generate",
            Stage::Score => "score",
            Stage::Aggregate => "aggregate",
            Stage::Report => "report",
        }
    }
}

impl FromStr for Stage {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where each artifact lives under the output root.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn suite(&self) -> PathBuf {
        self.root.join("prompts/suite.jsonl")
    }
    pub fn generations(&self, model: &str) -> PathBuf {
        self.root.join(format!("generations/{model}.jsonl"))
    }
    pub fn scores(&self, model: &str) -> PathBuf {
        self.root.join(format!("scores/{model}.jsonl"))
    }
    pub fn score_meta(&self, model: &str) -> PathBuf {
        self.root.join(format!("scores/{model}.meta.json"))
    }
    pub fn matrix(&self) -> PathBuf {
        self.root.join("aggregate/matrix.json")
    }
    pub fn generation_gaps(&self) -> PathBuf {
        self.root.join("aggregate/generation_gaps.json")
    }
    pub fn reports(&self) -> PathBuf {
        self.root.join("reports")
    }
    pub fn marker(&self, stage: Stage, model: Option<&str>) -> PathBuf {
        let name = match model {
            Some(m) => format!("{stage}.{m}.json"),
            None => format!("{stage}.json"),
        };
        self.root.join(".stages").join(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMarker {
    pub stage: Stage,
    pub model: Option<String>,
    pub config_digest: String,
    pub completed_at: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMeta {
    pub classifier_version: String,
    pub records: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Completed,
    Skipped,
}

fn require(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingPrerequisite(path.to_path_buf()))
    }
}

pub struct Pipeline {
    pub config: RunConfig,
    pub layout: Layout,
    pub force: bool,
    pub clock: Clock,
    digest: String,
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Self {
        let clock = if config.run.reproducible { Clock::reproducible() } else { Clock::System };
        let digest = config.digest();
        Self { layout: Layout { root: config.output_root.clone() }, config, force: false, clock, digest }
    }

    fn done(&self, stage: Stage, model: Option<&str>) -> bool {
        if self.force {
            return false;
        }
        read_json::<StageMarker>(&self.layout.marker(stage, model))
            .map(|m| m.config_digest == self.digest)
            .unwrap_or(false)
    }

    fn mark(&self, stage: Stage, model: Option<&str>, started: Instant) -> Result<()> {
        let seconds = if self.config.run.reproducible { 0.0 } else { started.elapsed().as_secs_f64() };
        let marker = StageMarker {
            stage,
            model: model.map(str::to_string),
            config_digest: self.digest.clone(),
            completed_at: self.clock.now(),
            seconds,
        };
        write_json_pretty(&self.layout.marker(stage, model), &marker)
    }

    /// Run one stage, or skip it if already complete.
    pub fn run_stage(&self, stage: Stage) -> Result<StageOutcome> {
        match stage {
            Stage::Prepare => self.once(stage, || self.prepare()),
            Stage::Prompts => self.once(stage, || self.prompts()),
            Stage::Generate => self.per_model(stage, |m| self.generate(m)),
            Stage::Score => self.per_model(stage, |m| self.score(m)),
            Stage::Aggregate => self.once(stage, || self.aggregate()),
            Stage::Report => self.once(stage, || self.report()),
        }
    }

    /// Run every stage in order.
    pub fn run_all(&self) -> Result<()> {
        for stage in Stage::ALL {
            self.run_stage(stage)?;
        }
        Ok(())
    }

    fn once(&self, stage: Stage, body: impl FnOnce() -> Result<()>) -> Result<StageOutcome> {
        if self.done(stage, None) {
            log::info!("{stage}: already complete, skipping (use --force to rerun)");
            return Ok(StageOutcome::Skipped);
        }
        let started = Instant::now();
        log::info!("{stage}: running");
        body()?;
        self.mark(stage, None, started)?;
        Ok(StageOutcome::Completed)
    }

    fn per_model(&self, stage: Stage, body: impl Fn(&str) -> Result<()>) -> Result<StageOutcome> {
        let mut outcome = StageOutcome::Skipped;
        for model in &self.config.models {
            if self.done(stage, Some(&model.id)) {
                log::info!("{stage} {}: already complete, skipping", model.id);
                continue;
            }
            let started = Instant::now();
            log::info!("{stage} {}: running", model.id);
            body(&model.id)?;
            self.mark(stage, Some(&model.id), started)?;
            outcome = StageOutcome::Completed;
        }
        Ok(outcome)
    }

    fn prepare(&self) -> Result<()> {
        if self.config.corpus.inputs.is_empty() {
            log::warn!("prepare: no [corpus] inputs configured, nothing to do");
            return Ok(());
        }
        let manifest = corpus::prepare(&self.config.corpus.inputs, &self.config.corpus.output)?;
        log::info!(
            "prepare: {} examples from {} comments ({} dropped)",
            manifest.examples_emitted,
            manifest.total_comments,
            manifest.records_dropped.values().sum::<usize>()
        );
        Ok(())
    }

    pub fn templates(&self) -> Result<(Vec<Template>, CompatibilityMatrix)> {
        match &self.config.prompts.templates {
            Some(p) => promptkit::load_templates(p),
            None => Ok(promptkit::shipped_templates()),
        }
    }

    fn prompts(&self) -> Result<()> {
        let lexicon = match &self.config.prompts.lexicon {
            Some(p) => promptkit::load_lexicon(p)?,
            None => promptkit::shipped_lexicon(),
        };
        let (templates, compat) = self.templates()?;
        let suite = promptkit::enumerate_suite(&templates, &lexicon, &compat);
        if suite.is_empty() {
            return Err(Error::Config("prompt suite is empty; check the compatibility matrix".into()));
        }
        write_jsonl(&self.layout.suite(), &suite)
    }

    pub fn suite(&self) -> Result<Vec<PromptSpec>> {
        require(&self.layout.suite())?;
        read_jsonl(&self.layout.suite())
    }

    fn generation_backend(&self) -> Box<dyn GenerationBackend> {
        let b = &self.config.backends;
        if b.generation == STUB {
            Box::new(StubGenerator)
        } else {
            Box::new(HttpGenerationBackend::new(&b.generation, b.timeout(), b.auth()))
        }
    }

    fn toxicity_backend(&self) -> Box<dyn ToxicityBackend> {
        let b = &self.config.backends;
        if b.toxicity == STUB {
            Box::new(ConstantToxicity::default())
        } else {
            Box::new(HttpToxicityBackend::new(&b.toxicity, b.timeout(), b.auth()))
        }
    }

    fn model_config(&self, model: &str) -> &crate::config::ModelConfig {
        self.config.models.iter().find(|m| m.id == model).expect("model comes from config")
    }

    fn generate(&self, model: &str) -> Result<()> {
        let suite = self.suite()?;
        let run = self.config.model_run(self.model_config(model));
        let backend = self.generation_backend();
        let mut client = GenClient::new(backend.as_ref(), GenCache::new(self.config.cache_dir().join("generations")));
        client.concurrency = self.config.backends.concurrency;
        client.retry = self.config.backends.retry.clone();
        client.clock = self.clock.clone();
        let generations = client.generate_suite(&suite, &run)?;
        log::info!(
            "generate {model}: {} generations ({} backend requests, {} cache hits, {} regenerations)",
            generations.len(),
            client.stats.backend_requests.load(std::sync::atomic::Ordering::Relaxed),
            client.stats.cache_hits.load(std::sync::atomic::Ordering::Relaxed),
            client.stats.regenerations.load(std::sync::atomic::Ordering::Relaxed),
        );
        write_jsonl(&self.layout.generations(model), &generations)
    }

    fn score(&self, model: &str) -> Result<()> {
        let suite = self.suite()?;
        let gen_path = self.layout.generations(model);
        require(&gen_path)?;
        let generations: Vec<Generation> = read_jsonl(&gen_path)?;
        let by_id: HashMap<&str, &PromptSpec> = suite.iter().map(|p| (p.prompt_id.as_str(), p)).collect();

        let backend = self.toxicity_backend();
        let mut tox = ToxClient::new(
            backend.as_ref(),
            Some(&self.config.cache_dir().join("toxicity")),
            self.config.backends.retry.clone(),
        )?;
        tox.batch_size = self.config.backends.toxicity_batch_size;
        tox.concurrency = self.config.backends.concurrency;
        let texts: Vec<String> = generations.iter().map(|g| g.text.clone()).collect();
        let tox_scores = tox.score_batch(&texts)?;

        let analyzer = SentimentAnalyzer::default();
        let mut records = Vec::with_capacity(generations.len());
        for (g, t) in generations.iter().zip(&tox_scores) {
            let spec = by_id.get(g.prompt_id.as_str()).ok_or_else(|| {
                Error::Contract(format!("generation for unknown prompt {} in {}", g.prompt_id, gen_path.display()))
            })?;
            records.push(ScoreRecord {
                prompt_id: g.prompt_id.clone(),
                model_id: model.to_string(),
                demographic_id: spec.demographic_id.clone(),
                dimension_id: spec.dimension_id.clone(),
                template_id: spec.template_id.clone(),
                sample_index: g.sample_index,
                sentiment_compound: analyzer.compound(&g.text).compound,
                toxicity: t.toxicity,
                identity_attack: t.identity_attack,
            });
        }
        write_jsonl(&self.layout.scores(model), &records)?;
        let meta = ScoreMeta { classifier_version: tox.version().to_string(), records: records.len() };
        write_json_pretty(&self.layout.score_meta(model), &meta)
    }

    fn scores(&self, model: &str) -> Result<Vec<ScoreRecord>> {
        let path = self.layout.scores(model);
        require(&path)?;
        read_jsonl(&path)
    }

    fn aggregate(&self) -> Result<()> {
        let suite = self.suite()?;
        let mut records = Vec::new();
        for m in &self.config.models {
            records.extend(self.scores(&m.id)?);
        }
        let eps = self.config.metrics.epsilon;
        let matrix = metrics::aggregate(&records, Some(&suite), self.config.sampling.n_per_prompt, eps)?;
        write_json_pretty(&self.layout.matrix(), &matrix)?;
        write_json_pretty(&self.layout.generation_gaps(), &metrics::generation_level_gaps(&records, eps))
    }

    fn report(&self) -> Result<()> {
        require(&self.layout.matrix())?;
        let matrix: BiasMatrix = read_json(&self.layout.matrix())?;
        let suite = self.suite()?;
        let (templates, _) = self.templates()?;
        let patterns: HashMap<&str, &str> = templates.iter().map(|t| (t.id.as_str(), t.pattern.as_str())).collect();
        let by_id: HashMap<&str, &PromptSpec> = suite.iter().map(|p| (p.prompt_id.as_str(), p)).collect();
        let models: Vec<String> = self.config.models.iter().map(|m| m.id.clone()).collect();
        let n = self.config.sampling.n_per_prompt;

        let mut rows = Vec::new();
        let mut manifest = RunManifest {
            suite_size: suite.len(),
            n_per_prompt: n,
            config_digest: self.digest.clone(),
            epsilon: self.config.metrics.epsilon,
            missing_cells: report::missing_cells(&matrix, &models),
            created_at: self.clock.now(),
            ..Default::default()
        };
        for m in &self.config.models {
            let generations: Vec<Generation> = read_jsonl_if_exists(&self.layout.generations(&m.id))?;
            let scores: Vec<ScoreRecord> = read_jsonl_if_exists(&self.layout.scores(&m.id))?;
            let meta: Option<ScoreMeta> = read_json(&self.layout.score_meta(&m.id)).ok();
            let mut flags = BTreeMap::new();
            for g in &generations {
                *flags.entry(format!("{:?}", g.length_flag).to_lowercase()).or_insert(0) += 1;
            }
            let texts: HashMap<(&str, usize), &str> =
                generations.iter().map(|g| ((g.prompt_id.as_str(), g.sample_index), g.text.as_str())).collect();
            for s in &scores {
                let (Some(text), Some(spec)) =
                    (texts.get(&(s.prompt_id.as_str(), s.sample_index)), by_id.get(s.prompt_id.as_str()))
                else {
                    continue;
                };
                rows.push(ExtremeRow {
                    model_id: s.model_id.clone(),
                    prompt_id: s.prompt_id.clone(),
                    sample_index: s.sample_index,
                    template: patterns.get(spec.template_id.as_str()).unwrap_or(&spec.template_id.as_str()).to_string(),
                    keyword: spec.surface.clone(),
                    demographic_id: spec.demographic_id.clone(),
                    text: text.to_string(),
                    sentiment: s.sentiment_compound,
                    toxicity: s.toxicity,
                });
            }
            if generations.is_empty() {
                manifest.warnings.push(format!("{}: no generations persisted", m.id));
            }
            manifest.models.push(ModelCounts {
                model_id: m.id.clone(),
                kind: m.kind.to_string(),
                generations_expected: suite.len() * n,
                generations_persisted: generations.len(),
                scores_persisted: scores.len(),
                length_flags: flags,
                classifier_version: meta.map(|m| m.classifier_version),
            });
        }
        for stage in Stage::ALL {
            let mut secs = read_json::<StageMarker>(&self.layout.marker(stage, None)).map(|m| m.seconds).unwrap_or(0.0);
            for m in &self.config.models {
                secs +=
                    read_json::<StageMarker>(&self.layout.marker(stage, Some(&m.id))).map(|m| m.seconds).unwrap_or(0.0);
            }
            manifest.timing.insert(stage.name().to_string(), secs);
        }
        if !matrix.excluded_prompts.is_empty() {
            manifest.warnings.push(format!("{} model/prompt pairs have no samples", matrix.excluded_prompts.len()));
        }
        manifest.finalize();

        let bundle = ReportBundle {
            extremes: report::extract_extremes(&rows, self.config.report.top_k),
            matrix,
            models,
            manifest,
        };
        bundle.write(&self.layout.reports())?;
        Ok(())
    }
}

fn read_jsonl_if_exists<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    if path.exists() {
        read_jsonl(path)
    } else {
        Ok(Vec::new())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, n: usize) -> RunConfig {
        let text = format!(
            "output_root = \"out\"\n[sampling]\nn_per_prompt = {n}\n[run]\nseed = 7\nreproducible = true\n\
             [[models]]\nid = \"ft\"\nkind = \"finetuned\"\n[[models]]\nid = \"base\"\nkind = \"baseline\"\n"
        );
        RunConfig::parse(&text, dir).unwrap()
    }

    #[test]
    fn stage_names_round_trip() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("all".parse::<Stage>().is_err());
    }

    #[test]
    fn missing_prerequisites_exit_3() {
        let dir = tempfile::tempdir().unwrap();
        let p = Pipeline::new(config(dir.path(), 1));
        for stage in [Stage::Generate, Stage::Score, Stage::Aggregate, Stage::Report] {
            let err = p.run_stage(stage).unwrap_err();
            assert_eq!(err.exit_code(), 3, "{stage}: {err}");
        }
        let err = p.run_stage(Stage::Report).unwrap_err();
        assert!(err.to_string().contains("matrix.json"), "{err}");
    }

    #[test]
    fn rerun_is_noop_unless_forced() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = Pipeline::new(config(dir.path(), 1));
        assert_eq!(p.run_stage(Stage::Prompts).unwrap(), StageOutcome::Completed);
        assert_eq!(p.run_stage(Stage::Prompts).unwrap(), StageOutcome::Skipped);
        p.force = true;
        assert_eq!(p.run_stage(Stage::Prompts).unwrap(), StageOutcome::Completed);
        assert_eq!(p.suite().unwrap().len(), 266);
    }

    #[test]
    fn stages_individually_equal_all() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let pa = Pipeline::new(config(a.path(), 2));
        pa.run_all().unwrap();
        let pb = Pipeline::new(config(b.path(), 2));
        for s in Stage::ALL {
            pb.run_stage(s).unwrap();
        }
        for f in report::REPORT_FILES {
            let x = std::fs::read(pa.layout.reports().join(f)).unwrap();
            let y = std::fs::read(pb.layout.reports().join(f)).unwrap();
            assert!(x == y, "{f} differs");
        }
    }
}
