//! Python bindings for `commbias`.
//!
//! Structured values cross the boundary as plain dicts and lists with the
//! same field names as the JSON artifacts the pipeline writes.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use commbias::config::RunConfig;
use commbias::corpus::{self, InputFormat, InputSpec};
use commbias::genclient::{GenerateRequest, StubGenerator};
use commbias::metrics::{self, ScoreRecord};
use commbias::pipeline::{Pipeline, Stage};
use commbias::promptkit;
use commbias::sentiment;

create_exception!(commbias_py, CommbiasError, PyException);
create_exception!(commbias_py, ConfigError, CommbiasError);
create_exception!(commbias_py, MissingPrerequisiteError, CommbiasError);
create_exception!(commbias_py, BackendError, CommbiasError);
create_exception!(commbias_py, ContractError, CommbiasError);

fn to_pyerr(e: commbias::Error) -> PyErr {
    use commbias::Error as E;
    let msg = e.to_string();
    match e {
        E::Config(_) | E::Lexicon { .. } => ConfigError::new_err(msg),
        E::MissingPrerequisite(_) => MissingPrerequisiteError::new_err(msg),
        E::BackendUnavailable { .. } => BackendError::new_err(msg),
        E::Contract(_) | E::Incompatible { .. } => ContractError::new_err(msg),
        E::InvalidArgument(_) => PyValueError::new_err(msg),
        _ => CommbiasError::new_err(msg),
    }
}

fn json_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_bound_py_any(py)?,
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_bound_py_any(py)?,
            (None, Some(u)) => u.into_bound_py_any(py)?,
            _ => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py)?,
        },
        Value::String(s) => s.into_bound_py_any(py)?,
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, json_to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    json_to_py(py, &v)
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let json = obj.py().import("json")?;
    let text: String = json.call_method1("dumps", (obj,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Rule-based sentiment scorer.
#[pyclass(frozen, module = "commbias_py")]
struct SentimentAnalyzer {
    inner: sentiment::SentimentAnalyzer,
}

#[pymethods]
impl SentimentAnalyzer {
    #[new]
    fn new() -> Self {
        Self { inner: sentiment::SentimentAnalyzer::default() }
    }

    /// Normalized compound score in [-1, 1].
    fn compound(&self, text: &str) -> f64 {
        self.inner.compound(text).compound
    }

    /// Dict with compound, pos, neu, neg and label.
    fn polarity_scores<'py>(&self, py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.compound(text))
    }

    fn score_many(&self, py: Python<'_>, texts: Vec<String>) -> Vec<f64> {
        py.detach(|| texts.iter().map(|t| self.inner.compound(t).compound).collect())
    }
}

/// "positive", "neutral" or "negative" for a compound score.
#[pyfunction]
fn classify(compound: f64) -> PyResult<String> {
    let label = sentiment::classify(compound).map_err(to_pyerr)?;
    Ok(serde_json::to_value(label).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default())
}

#[pyfunction]
fn clean_text(text: &str) -> String {
    corpus::redact_personal(&corpus::clean_text(text))
}

/// Pair posts and comments from JSONL or CSV dumps into a training file.
/// Returns the corpus manifest.
#[pyfunction]
#[pyo3(signature = (inputs, output, format = "jsonl"))]
fn prepare_corpus<'py>(
    py: Python<'py>,
    inputs: Vec<PathBuf>,
    output: PathBuf,
    format: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let fmt = match format {
        "jsonl" => InputFormat::Jsonl,
        "csv" => InputFormat::Csv,
        other => return Err(PyValueError::new_err(format!("unknown format {other:?}"))),
    };
    let specs: Vec<InputSpec> = inputs.into_iter().map(|p| InputSpec::new(p, fmt)).collect();
    let manifest = py.detach(|| corpus::prepare(&specs, &output)).map_err(to_pyerr)?;
    to_py(py, &manifest)
}

/// The prompt suite as a list of dicts. Paths default to the shipped files.
#[pyfunction]
#[pyo3(signature = (lexicon = None, templates = None))]
fn prompt_suite<'py>(
    py: Python<'py>,
    lexicon: Option<PathBuf>,
    templates: Option<PathBuf>,
) -> PyResult<Bound<'py, PyAny>> {
    let lexicon = match lexicon {
        Some(p) => promptkit::load_lexicon(&p).map_err(to_pyerr)?,
        None => promptkit::shipped_lexicon(),
    };
    let (templates, compat) = match templates {
        Some(p) => promptkit::load_templates(&p).map_err(to_pyerr)?,
        None => promptkit::shipped_templates(),
    };
    to_py(py, &promptkit::enumerate_suite(&templates, &lexicon, &compat))
}

/// Aggregate score records (dicts) into the bias matrix.
#[pyfunction]
#[pyo3(signature = (records, n_per_prompt, epsilon = metrics::RECOMMENDED_EPSILON))]
fn aggregate<'py>(
    py: Python<'py>,
    records: &Bound<'py, PyAny>,
    n_per_prompt: usize,
    epsilon: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let records: Vec<ScoreRecord> = from_py(records)?;
    let matrix = metrics::aggregate(&records, None, n_per_prompt, epsilon).map_err(to_pyerr)?;
    to_py(py, &matrix)
}

/// Texts the built-in stub backend returns for a `/generate` request dict.
#[pyfunction]
fn stub_generate(request: &Bound<'_, PyAny>) -> PyResult<Vec<String>> {
    let req: GenerateRequest = from_py(request)?;
    Ok((0..req.n).map(|k| StubGenerator::sample(&req, k)).collect())
}

/// Normalized config as TOML text.
#[pyfunction]
fn load_config(path: PathBuf) -> PyResult<String> {
    Ok(RunConfig::load(&path).map_err(to_pyerr)?.dump())
}

/// Run one stage, or all of them, for the config at `path`.
#[pyfunction]
#[pyo3(signature = (path, stage = "all", force = false, models = None))]
fn run_pipeline(py: Python<'_>, path: PathBuf, stage: &str, force: bool, models: Option<Vec<String>>) -> PyResult<()> {
    let mut config = RunConfig::load(&path).map_err(to_pyerr)?;
    config.select_models(&models.unwrap_or_default()).map_err(to_pyerr)?;
    let stages = if stage == "all" {
        Stage::ALL.to_vec()
    } else {
        vec![stage.parse::<Stage>().map_err(ConfigError::new_err)?]
    };
    let mut pipeline = Pipeline::new(config);
    pipeline.force = force;
    py.detach(|| stages.into_iter().try_for_each(|s| pipeline.run_stage(s).map(|_| ()))).map_err(to_pyerr)
}

#[pymodule]
fn commbias_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<SentimentAnalyzer>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(clean_text, m)?)?;
    m.add_function(wrap_pyfunction!(prepare_corpus, m)?)?;
    m.add_function(wrap_pyfunction!(prompt_suite, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(stub_generate, m)?)?;
    m.add_function(wrap_pyfunction!(load_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("CommbiasError", py.get_type::<CommbiasError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("MissingPrerequisiteError", py.get_type::<MissingPrerequisiteError>())?;
    m.add("BackendError", py.get_type::<BackendError>())?;
    m.add("ContractError", py.get_type::<ContractError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
