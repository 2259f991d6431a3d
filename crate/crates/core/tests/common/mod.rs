#![allow(dead_code)]

use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

#[derive(Debug, Clone)]
pub struct Recorded {
    pub method: String,
    pub path: String,
    pub body: String,
    pub headers: Vec<(String, String)>,
}

impl Recorded {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers.iter().find(|(k, _)| k.eq_ignore_ascii_case(name)).map(|(_, v)| v.as_str())
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::from_str(&self.body).unwrap()
    }
}

/// Local HTTP server answering every request with `handler(request, index)`.
pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<Recorded>>>,
    server: Arc<tiny_http::Server>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn start<F>(handler: F) -> Self
    where
        F: Fn(&Recorded, usize) -> (u16, String) + Send + 'static,
    {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let port = server.server_addr().to_ip().unwrap().port();
        let requests: Arc<Mutex<Vec<Recorded>>> = Arc::default();
        let (srv, log) = (server.clone(), requests.clone());
        let thread = std::thread::spawn(move || {
            for mut req in srv.incoming_requests() {
                let mut body = String::new();
                let _ = req.as_reader().read_to_string(&mut body);
                let rec = Recorded {
                    method: req.method().to_string(),
                    path: req.url().to_string(),
                    body,
                    headers: req
                        .headers()
                        .iter()
                        .map(|h| (h.field.as_str().to_string(), h.value.as_str().to_string()))
                        .collect(),
                };
                let idx = {
                    let mut l = log.lock().unwrap();
                    l.push(rec.clone());
                    l.len() - 1
                };
                let (status, reply) = handler(&rec, idx);
                let resp = tiny_http::Response::from_string(reply)
                    .with_status_code(status)
                    .with_header("Content-Type: application/json".parse::<tiny_http::Header>().unwrap());
                let _ = req.respond(resp);
            }
        });
        Self { url: format!("http://127.0.0.1:{port}"), requests, server, thread: Some(thread) }
    }

    pub fn count(&self) -> usize {
        self.requests.lock().unwrap().len()
    }

    pub fn recorded(&self) -> Vec<Recorded> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

pub fn fixture(name: &str) -> String {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

use commbias::metrics::ScoreRecord;
use commbias::promptkit::PromptSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random score records over the shipped suite. `drop_rate` > 0 removes
/// samples so prompts end up with unequal counts.
pub fn synthetic_records(
    seed: u64,
    suite: &[PromptSpec],
    models: &[&str],
    n: usize,
    drop_rate: f64,
) -> Vec<ScoreRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for model in models {
        for p in suite {
            for i in 0..n {
                if drop_rate > 0.0 && i > 0 && rng.random_bool(drop_rate) {
                    continue;
                }
                out.push(ScoreRecord {
                    prompt_id: p.prompt_id.clone(),
                    model_id: model.to_string(),
                    demographic_id: p.demographic_id.clone(),
                    dimension_id: p.dimension_id.clone(),
                    template_id: p.template_id.clone(),
                    sample_index: i,
                    sentiment_compound: rng.random_range(-1.0..=1.0),
                    toxicity: rng.random_range(0.0..=1.0),
                    identity_attack: rng.random_range(0.0..=1.0),
                });
            }
        }
    }
    out
}

/// Straightforward loops, no sorting or shared helpers: the reference for
/// `(model, demographic) -> (S, T, I)` means.
pub fn brute_force_means(records: &[ScoreRecord]) -> std::collections::BTreeMap<(String, String), [f64; 3]> {
    use std::collections::BTreeMap;
    let mut per_prompt: BTreeMap<(String, String, String), ([f64; 3], usize)> = BTreeMap::new();
    for r in records {
        let e = per_prompt
            .entry((r.model_id.clone(), r.demographic_id.clone(), r.prompt_id.clone()))
            .or_insert(([0.0; 3], 0));
        e.0[0] += r.sentiment_compound;
        e.0[1] += r.toxicity;
        e.0[2] += r.identity_attack;
        e.1 += 1;
    }
    let mut per_demo: BTreeMap<(String, String), ([f64; 3], usize)> = BTreeMap::new();
    for ((m, d, _), (sums, n)) in per_prompt {
        let e = per_demo.entry((m, d)).or_insert(([0.0; 3], 0));
        for (acc, sum) in e.0.iter_mut().zip(sums) {
            *acc += sum / n as f64;
        }
        e.1 += 1;
    }
    per_demo.into_iter().map(|(k, (s, x))| (k, [s[0] / x as f64, s[1] / x as f64, s[2] / x as f64])).collect()
}
