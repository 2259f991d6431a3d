//! Toxicity client: batched scoring against a remote classifier with
//! range/count validation and a per-classifier-version cache.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::http::{CallResult, HttpClient, RetryPolicy, ServiceInfo};
use crate::util::{digest_fields, ensure_parent};

pub const CONSTANT_STUB_VERSION: &str = "constant-stub";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToxicityScores {
    pub toxicity: f64,
    pub identity_attack: f64,
    #[serde(flatten)]
    pub extra: BTreeMap<String, f64>,
}

impl ToxicityScores {
    pub fn new(toxicity: f64, identity_attack: f64) -> Self {
        Self { toxicity, identity_attack, extra: BTreeMap::new() }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let fields = [("toxicity", &self.toxicity), ("identity_attack", &self.identity_attack)];
        for (name, v) in fields.into_iter().chain(self.extra.iter().map(|(k, v)| (k.as_str(), v))) {
            if !(0.0..=1.0).contains(v) {
                return Err(format!("{name}={v} outside [0, 1]"));
            }
        }
        Ok(())
    }
}

/// `POST /score/toxicity` request body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToxicityRequest {
    pub texts: Vec<String>,
}

/// `POST /score/toxicity` response body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToxicityResponse {
    pub scores: Vec<ToxicityScores>,
}

pub trait ToxicityBackend: Send + Sync {
    fn score(&self, texts: &[String]) -> CallResult<Vec<ToxicityScores>>;
    /// Classifier name and version, recorded in manifests and cache keys.
    fn version(&self) -> CallResult<String>;
}

#[derive(Debug, Clone)]
pub struct HttpToxicityBackend {
    client: HttpClient,
}

impl HttpToxicityBackend {
    pub fn new(base_url: &str, timeout: Duration, auth: Option<(String, String)>) -> Self {
        Self { client: HttpClient::new(base_url, timeout, auth) }
    }
}

impl ToxicityBackend for HttpToxicityBackend {
    fn score(&self, texts: &[String]) -> CallResult<Vec<ToxicityScores>> {
        let req = ToxicityRequest { texts: texts.to_vec() };
        let resp: ToxicityResponse = self.client.post_json("/score/toxicity", &req)?;
        Ok(resp.scores)
    }

    fn version(&self) -> CallResult<String> {
        let info: ServiceInfo = self.client.get_json("/info")?;
        let c = info.toxicity_classifier;
        if c.name.is_empty() || c.version.is_empty() {
            return Err(crate::http::CallError::contract("/info: empty classifier name or version"));
        }
        Ok(format!("{}@{}", c.name, c.version))
    }
}

/// Returns the same scores for every text.
#[derive(Debug, Clone)]
pub struct ConstantToxicity {
    pub scores: ToxicityScores,
}

impl Default for ConstantToxicity {
    fn default() -> Self {
        Self { scores: ToxicityScores::new(0.1, 0.05) }
    }
}

impl ToxicityBackend for ConstantToxicity {
    fn score(&self, texts: &[String]) -> CallResult<Vec<ToxicityScores>> {
        Ok(vec![self.scores.clone(); texts.len()])
    }

    fn version(&self) -> CallResult<String> {
        Ok(CONSTANT_STUB_VERSION.to_string())
    }
}

#[derive(Serialize, Deserialize)]
struct CacheLine {
    key: String,
    scores: ToxicityScores,
}

#[derive(Debug, Default)]
pub struct ToxStats {
    pub backend_requests: AtomicUsize,
    pub texts_sent: AtomicUsize,
    pub cache_hits: AtomicUsize,
}

pub struct ToxClient<'a> {
    backend: &'a dyn ToxicityBackend,
    version: String,
    memory: Mutex<HashMap<String, ToxicityScores>>,
    disk: Option<Mutex<File>>,
    pub batch_size: usize,
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub stats: ToxStats,
}

fn text_key(version: &str, text: &str) -> String {
    digest_fields([version, text])
}

impl<'a> ToxClient<'a> {
    /// Query the classifier version and open the cache for it. With
    /// `cache_dir`, scores persist in `<cache_dir>/<version digest>.jsonl`.
    pub fn new(backend: &'a dyn ToxicityBackend, cache_dir: Option<&Path>, retry: RetryPolicy) -> Result<Self> {
        let version = retry.run(None, || backend.version())?;
        let mut memory = HashMap::new();
        let disk = match cache_dir {
            Some(dir) => {
                let path = Self::cache_path(dir, &version);
                memory = load_cache(&path)?;
                ensure_parent(&path)?;
                let file = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| Error::io(&path, e))?;
                Some(Mutex::new(file))
            }
            None => None,
        };
        Ok(Self {
            backend,
            version,
            memory: Mutex::new(memory),
            disk,
            batch_size: 32,
            concurrency: 4,
            retry,
            stats: ToxStats::default(),
        })
    }

    pub fn cache_path(dir: &Path, version: &str) -> PathBuf {
        dir.join(format!("{}.jsonl", &digest_fields([version])[..16]))
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    fn call(&self, batch: &[String]) -> Result<Vec<ToxicityScores>> {
        let scores = self.retry.run(None, || {
            self.stats.backend_requests.fetch_add(1, Ordering::Relaxed);
            self.backend.score(batch)
        })?;
        if scores.len() != batch.len() {
            return Err(Error::Contract(format!(
                "sent {} texts for toxicity scoring, got {} scores",
                batch.len(),
                scores.len()
            )));
        }
        for (s, t) in scores.iter().zip(batch) {
            s.validate().map_err(|e| Error::Contract(format!("toxicity score for {t:?}: {e}")))?;
        }
        self.stats.texts_sent.fetch_add(batch.len(), Ordering::Relaxed);
        Ok(scores)
    }

    fn remember(&self, batch: &[String], scores: &[ToxicityScores]) -> Result<()> {
        let mut lines = Vec::new();
        {
            let mut mem = self.memory.lock().unwrap();
            for (t, s) in batch.iter().zip(scores) {
                let key = text_key(&self.version, t);
                let line = CacheLine { key: key.clone(), scores: s.clone() };
                lines.extend(serde_json::to_vec(&line)?);
                lines.push(b'\n');
                mem.insert(key, s.clone());
            }
        }
        if let Some(disk) = &self.disk {
            let mut f = disk.lock().unwrap();
            f.write_all(&lines).and_then(|_| f.flush()).map_err(|e| Error::io("toxicity cache", e))?;
        }
        Ok(())
    }

    /// One score per input text, in input order. Only texts not already
    /// scored under this classifier version reach the backend.
    pub fn score_batch(&self, texts: &[String]) -> Result<Vec<ToxicityScores>> {
        let mut pending: Vec<String> = Vec::new();
        {
            let mem = self.memory.lock().unwrap();
            let mut queued = std::collections::HashSet::new();
            for t in texts {
                let key = text_key(&self.version, t);
                if mem.contains_key(&key) {
                    self.stats.cache_hits.fetch_add(1, Ordering::Relaxed);
                } else if queued.insert(key) {
                    pending.push(t.clone());
                }
            }
        }
        let batches: Vec<&[String]> = pending.chunks(self.batch_size.max(1)).collect();
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let failure: Mutex<Option<Error>> = Mutex::new(None);
        std::thread::scope(|scope| {
            for _ in 0..self.concurrency.clamp(1, batches.len().max(1)) {
                scope.spawn(|| loop {
                    if abort.load(Ordering::Relaxed) {
                        break;
                    }
                    let Some(batch) = batches.get(next.fetch_add(1, Ordering::Relaxed)) else { break };
                    let result = self.call(batch).and_then(|scores| self.remember(batch, &scores));
                    if let Err(e) = result {
                        abort.store(true, Ordering::Relaxed);
                        failure.lock().unwrap().get_or_insert(e);
                        break;
                    }
                });
            }
        });
        if let Some(e) = failure.into_inner().unwrap() {
            return Err(e);
        }
        let mem = self.memory.lock().unwrap();
        Ok(texts.iter().map(|t| mem[&text_key(&self.version, t)].clone()).collect())
    }
}

fn load_cache(path: &Path) -> Result<HashMap<String, ToxicityScores>> {
    let mut out = HashMap::new();
    let Ok(file) = File::open(path) else { return Ok(out) };
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        // A crash mid-append can leave a torn last line; skip it.
        if let Ok(entry) = serde_json::from_str::<CacheLine>(&line) {
            if entry.scores.validate().is_ok() {
                out.insert(entry.key, entry.scores);
            }
        }
    }
    Ok(out)
}
