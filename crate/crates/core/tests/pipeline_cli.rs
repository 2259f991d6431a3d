mod common;

use std::path::Path;
use std::process::Command;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use commbias::config::RunConfig;
use commbias::genclient::{GenerateRequest, Generation, StubGenerator};
use commbias::metrics::{aggregate, BiasMatrix};
use commbias::pipeline::{Pipeline, Stage};
use commbias::promptkit::shipped_suite;
use commbias::report::{extract_extremes, ExtremeRow, ReportBundle, RunManifest};
use commbias::toxclient::{ToxicityRequest, ToxicityResponse, ToxicityScores};
use commbias::util::{read_json, read_jsonl};
use common::{fixture, synthetic_records, MockServer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A service that answers like the stub. `/generate` fails with 503 from
/// request number `fail_from` onwards.
fn service(fail_from: Arc<AtomicUsize>) -> MockServer {
    MockServer::start(move |req, idx| match req.path.as_str() {
        "/info" => (200, fixture("info_response.json")),
        "/generate" if idx >= fail_from.load(Ordering::Relaxed) => (503, "{}".into()),
        "/generate" => {
            let r: GenerateRequest = serde_json::from_str(&req.body).unwrap();
            let texts: Vec<String> = (0..r.n).map(|k| StubGenerator::sample(&r, k)).collect();
            (200, serde_json::json!({ "texts": texts }).to_string())
        }
        "/score/toxicity" => {
            let r: ToxicityRequest = serde_json::from_str(&req.body).unwrap();
            let scores = r.texts.iter().map(|t| ToxicityScores::new((t.len() % 100) as f64 / 100.0, 0.01)).collect();
            (200, serde_json::to_string(&ToxicityResponse { scores }).unwrap())
        }
        _ => (404, "{}".into()),
    })
}

fn config(dir: &Path, url: &str) -> RunConfig {
    let text = format!(
        "output_root = \"out\"\n\
         [backends]\ngeneration = \"{url}\"\ntoxicity = \"{url}\"\nconcurrency = 2\n\
         [backends.retry]\nmax_retries = 1\ninitial_backoff_ms = 1\nmax_backoff_ms = 2\n\
         [sampling]\nn_per_prompt = 2\n\
         [run]\nseed = 11\nreproducible = true\n\
         [[models]]\nid = \"ft\"\nkind = \"finetuned\"\n"
    );
    RunConfig::parse(&text, dir).unwrap()
}

#[test]
fn interrupted_run_resumes_to_identical_output() {
    let healthy = service(Arc::new(AtomicUsize::new(usize::MAX)));
    let full_dir = tempfile::tempdir().unwrap();
    let full = Pipeline::new(config(full_dir.path(), &healthy.url));
    full.run_all().unwrap();

    // Let 60 requests through, then take the service down.
    let fail_from = Arc::new(AtomicUsize::new(60));
    let flaky = service(fail_from.clone());
    let dir = tempfile::tempdir().unwrap();
    let p = Pipeline::new(config(dir.path(), &flaky.url));
    p.run_stage(Stage::Prompts).unwrap();
    let err = p.run_stage(Stage::Generate).unwrap_err();
    assert_eq!(err.exit_code(), 4, "{err}");
    assert!(!p.layout.generations("ft").exists());
    let served_before = flaky.count();

    fail_from.store(usize::MAX, Ordering::Relaxed);
    p.run_all().unwrap();
    let a: Vec<Generation> = read_jsonl(&full.layout.generations("ft")).unwrap();
    let b: Vec<Generation> = read_jsonl(&p.layout.generations("ft")).unwrap();
    assert_eq!(a.len(), 266 * 2);
    assert_eq!(a, b);
    // Cached prompts were not requested again.
    assert!(
        flaky.count() - served_before < healthy.count(),
        "{} vs {}",
        flaky.count() - served_before,
        healthy.count()
    );
    let ma: RunManifest = read_json(&full.layout.reports().join("manifest.json")).unwrap();
    let mb: RunManifest = read_json(&p.layout.reports().join("manifest.json")).unwrap();
    assert_eq!(ma.models, mb.models);
    assert_eq!(ma.classifier_versions, ["detoxify-original@0.5.2"]);
}

#[test]
fn partial_run_manifest_counts_persisted_only() {
    let dir = tempfile::tempdir().unwrap();
    let text = "output_root = \"out\"\n[sampling]\nn_per_prompt = 1\n[run]\nreproducible = true\n\
                [[models]]\nid = \"a\"\nkind = \"baseline\"\n[[models]]\nid = \"b\"\nkind = \"finetuned\"\n";
    let mut cfg = RunConfig::parse(text, dir.path()).unwrap();
    let all = cfg.clone();
    cfg.select_models(&["a".into()]).unwrap();
    let p = Pipeline::new(cfg);
    for s in [Stage::Prompts, Stage::Generate, Stage::Score] {
        p.run_stage(s).unwrap();
    }
    let p = Pipeline::new(all);
    p.run_stage(Stage::Aggregate).unwrap_err();
    let mut cfg = p.config.clone();
    cfg.select_models(&["a".into()]).unwrap();
    let pa = Pipeline::new(cfg);
    pa.run_stage(Stage::Aggregate).unwrap();
    pa.run_stage(Stage::Report).unwrap();
    let m: RunManifest = read_json(&pa.layout.reports().join("manifest.json")).unwrap();
    assert_eq!(m.total_generations_expected, 266);
    assert_eq!(m.models[0].generations_persisted, 266);
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_commbias"))
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[[models]]\nid = \"m\"\nkind = \"finetuned\"\n").unwrap();

    let out = bin().args(["--config"]).arg(&cfg).args(["--stage", "report"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("matrix.json"));

    let out = bin().args(["--config"]).arg(&cfg).arg("--print-config").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let dump = String::from_utf8_lossy(&out.stdout);
    assert!(dump.contains("n_per_prompt = 50") && dump.contains("max_words = 50"), "{dump}");

    let out = bin().args(["--config"]).arg(&cfg).args(["--stage", "prompts", "--resume"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(dir.path().join("run/prompts/suite.jsonl")).unwrap().lines().count(), 266);

    let out = bin().args(["--config"]).arg(&cfg).args(["--stage", "bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = bin().args(["--config"]).arg(&cfg).args(["--models", "nope"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(&cfg, "[[models]]\nid = \"m\"\nkind = \"big\"\n").unwrap();
    let out = bin().args(["--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("models[0].kind"));
}

#[test]
fn unreachable_backend_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "[backends]\ngeneration = \"http://127.0.0.1:9\"\ntimeout_secs = 2\n\
         [backends.retry]\nmax_retries = 1\ninitial_backoff_ms = 1\n\
         [[models]]\nid = \"m\"\nkind = \"finetuned\"\n",
    )
    .unwrap();
    let out = bin().args(["--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

fn sample_matrix() -> BiasMatrix {
    let suite = shipped_suite();
    let records = synthetic_records(5, &suite, &["x", "y"], 3, 0.2);
    aggregate(&records, Some(&suite), 3, 0.01).unwrap()
}

#[test]
fn matrix_json_round_trips_and_rendering_is_deterministic() {
    let matrix = sample_matrix();
    let bundle = ReportBundle {
        matrix: matrix.clone(),
        models: vec!["x".into(), "y".into(), "z".into()],
        extremes: Default::default(),
        manifest: RunManifest::default(),
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    bundle.write(a.path()).unwrap();
    bundle.write(b.path()).unwrap();
    let back: BiasMatrix = read_json(&a.path().join("matrices.json")).unwrap();
    assert_eq!(back, matrix);
    for f in commbias::report::REPORT_FILES {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    let csv = std::fs::read_to_string(a.path().join("sentiment.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",—")), "column z is missing everywhere");
}

#[test]
fn extremes_match_brute_force_sort() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rows: Vec<ExtremeRow> = (0..100)
        .map(|i| ExtremeRow {
            model_id: format!("m{}", rng.random_range(0..3)),
            prompt_id: format!("p{}", rng.random_range(0..10)),
            sample_index: i,
            template: "t".into(),
            keyword: "k".into(),
            demographic_id: "poor".into(),
            text: format!("text {i}"),
            // Coarse values force ties.
            sentiment: rng.random_range(-5..=5) as f64 / 5.0,
            toxicity: rng.random_range(0..=10) as f64 / 10.0,
        })
        .collect();
    let key = |r: &ExtremeRow| (r.model_id.clone(), r.prompt_id.clone(), r.sample_index);
    let mut by_s = rows.clone();
    by_s.sort_by(|a, b| a.sentiment.partial_cmp(&b.sentiment).unwrap().then(key(a).cmp(&key(b))));
    let mut by_t = rows.clone();
    by_t.sort_by(|a, b| b.toxicity.partial_cmp(&a.toxicity).unwrap().then(key(a).cmp(&key(b))));
    for k in [0, 1, 7, 100, 500] {
        let ex = extract_extremes(&rows, k);
        assert_eq!(ex.lowest_sentiment, by_s[..k.min(100)].to_vec());
        assert_eq!(ex.highest_toxicity, by_t[..k.min(100)].to_vec());
    }
}
