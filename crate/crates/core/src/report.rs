//! Demographic x model matrices, extreme-generation extracts and the run
//! manifest.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::metrics::{BiasMatrix, DemographicAggregate};
use crate::promptkit::{taxonomy_position, TAXONOMY};
use crate::util::{atomic_write, write_json_pretty};

pub const MISSING: &str = "—";

pub const CONTENT_WARNING: &str = "> **Content warning:** the generations below were selected for \
being negative or toxic and contain offensive language about social groups. Reader discretion is advised.";

/// Three-decimal display, round-half-even on the stored binary value.
pub fn fmt3(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Sentiment,
    Toxicity,
    Identity,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Sentiment, Channel::Toxicity, Channel::Identity];

    pub fn name(self) -> &'static str {
        match self {
            Channel::Sentiment => "sentiment",
            Channel::Toxicity => "toxicity",
            Channel::Identity => "identity",
        }
    }

    fn value(self, a: &DemographicAggregate) -> f64 {
        match self {
            Channel::Sentiment => a.s_mean,
            Channel::Toxicity => a.t_mean,
            Channel::Identity => a.i_mean,
        }
    }

    fn title(self) -> &'static str {
        match self {
            Channel::Sentiment => "Mean sentiment",
            Channel::Toxicity => "Mean toxicity",
            Channel::Identity => "Mean identity attack",
        }
    }
}

/// Rows in taxonomy order, then any other demographics found in the matrix.
fn rows(matrix: &BiasMatrix) -> Vec<(String, String)> {
    let mut rows: Vec<(String, String)> =
        TAXONOMY.iter().flat_map(|(dim, demos)| demos.iter().map(move |d| (dim.to_string(), d.to_string()))).collect();
    let mut extra: Vec<(String, String)> = matrix
        .models
        .values()
        .flat_map(|m| m.values())
        .filter(|a| taxonomy_position(&a.demographic_id).is_none())
        .map(|a| (a.dimension_id.clone(), a.demographic_id.clone()))
        .collect();
    extra.sort();
    extra.dedup();
    rows.extend(extra);
    rows
}

fn cell(matrix: &BiasMatrix, model: &str, demo: &str, channel: Channel) -> Option<String> {
    matrix.aggregate(model, demo).map(|a| fmt3(channel.value(a)))
}

/// `(model, demographic)` cells with no aggregate.
pub fn missing_cells(matrix: &BiasMatrix, models: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for (_, demo) in rows(matrix) {
        for m in models {
            if matrix.aggregate(m, &demo).is_none() {
                out.push(format!("{m}/{demo}"));
            }
        }
    }
    out
}

pub fn matrix_csv(matrix: &BiasMatrix, models: &[String], channel: Channel) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["dimension".to_string(), "demographic".to_string()];
    header.extend(models.iter().cloned());
    w.write_record(&header).map_err(std::io::Error::other).map_err(|e| crate::Error::io("csv", e))?;
    if !models.is_empty() {
        for (dim, demo) in rows(matrix) {
            let mut row = vec![dim, demo.clone()];
            row.extend(models.iter().map(|m| cell(matrix, m, &demo, channel).unwrap_or_else(|| MISSING.into())));
            w.write_record(&row).map_err(std::io::Error::other).map_err(|e| crate::Error::io("csv", e))?;
        }
    }
    let bytes = w.into_inner().map_err(|e| crate::Error::io("csv", std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn matrices_markdown(matrix: &BiasMatrix, models: &[String]) -> String {
    let mut out = String::new();
    for channel in Channel::ALL {
        let _ = writeln!(out, "## {}\n", channel.title());
        let _ = writeln!(out, "| Demographic | {} |", models.join(" | "));
        let _ = writeln!(out, "|---|{}", "---:|".repeat(models.len()));
        if !models.is_empty() {
            let mut current_dim = String::new();
            for (dim, demo) in rows(matrix) {
                if dim != current_dim {
                    let _ = writeln!(out, "| **{dim}** |{}", " |".repeat(models.len()));
                    current_dim = dim;
                }
                let cells: Vec<String> =
                    models.iter().map(|m| cell(matrix, m, &demo, channel).unwrap_or_else(|| MISSING.into())).collect();
                let _ = writeln!(out, "| {demo} | {} |", cells.join(" | "));
            }
        }
        out.push('\n');
    }
    if models.len() > 1 {
        out.push_str(
            "Values come from different models; compare demographics within a column, \
             not values across columns.\n",
        );
    }
    out
}

/// One scored generation joined with its prompt metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeRow {
    pub model_id: String,
    pub prompt_id: String,
    pub sample_index: usize,
    pub template: String,
    pub keyword: String,
    pub demographic_id: String,
    pub text: String,
    pub sentiment: f64,
    pub toxicity: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Extremes {
    pub lowest_sentiment: Vec<ExtremeRow>,
    pub highest_toxicity: Vec<ExtremeRow>,
}

fn tiebreak(a: &ExtremeRow, b: &ExtremeRow) -> Ordering {
    a.model_id.cmp(&b.model_id).then_with(|| a.prompt_id.cmp(&b.prompt_id)).then(a.sample_index.cmp(&b.sample_index))
}

/// Top-`k` rows by lowest sentiment and by highest toxicity. Ties are broken
/// by (model, prompt, sample index), so the ranking is total.
pub fn extract_extremes(rows: &[ExtremeRow], k: usize) -> Extremes {
    let mut by_sentiment: Vec<&ExtremeRow> = rows.iter().collect();
    by_sentiment.sort_by(|a, b| a.sentiment.total_cmp(&b.sentiment).then_with(|| tiebreak(a, b)));
    let mut by_toxicity: Vec<&ExtremeRow> = rows.iter().collect();
    by_toxicity.sort_by(|a, b| b.toxicity.total_cmp(&a.toxicity).then_with(|| tiebreak(a, b)));
    Extremes {
        lowest_sentiment: by_sentiment.into_iter().take(k).cloned().collect(),
        highest_toxicity: by_toxicity.into_iter().take(k).cloned().collect(),
    }
}

fn md_escape(text: &str) -> String {
    text.replace('|', "\\|").replace(['\n', '\r'], " ")
}

pub fn extremes_markdown(ex: &Extremes) -> String {
    let mut out = format!("# Extreme generations\n\n{CONTENT_WARNING}\n\n");
    for (title, rows) in [("Lowest sentiment", &ex.lowest_sentiment), ("Highest toxicity", &ex.highest_toxicity)] {
        let _ = writeln!(out, "## {title}\n");
        let _ = writeln!(out, "| Template | Keyword | Model | Generated text | Sentiment | Toxicity |");
        let _ = writeln!(out, "|---|---|---|---|---:|---:|");
        for r in rows {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                md_escape(&r.template),
                md_escape(&r.keyword),
                md_escape(&r.model_id),
                md_escape(&r.text),
                fmt3(r.sentiment),
                fmt3(r.toxicity)
            );
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelCounts {
    pub model_id: String,
    pub kind: String,
    pub generations_expected: usize,
    pub generations_persisted: usize,
    pub scores_persisted: usize,
    pub length_flags: BTreeMap<String, usize>,
    pub classifier_version: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub suite_size: usize,
    pub n_per_prompt: usize,
    pub models: Vec<ModelCounts>,
    pub total_generations_expected: usize,
    pub total_generations_persisted: usize,
    pub classifier_versions: Vec<String>,
    pub config_digest: String,
    pub epsilon: f64,
    pub missing_cells: Vec<String>,
    pub warnings: Vec<String>,
    pub created_at: String,
    /// Wall-clock seconds per stage; zero in reproducible runs.
    pub timing: BTreeMap<String, f64>,
}

impl RunManifest {
    /// Fill the totals from the per-model counts.
    pub fn finalize(&mut self) {
        self.total_generations_expected = self.models.iter().map(|m| m.generations_expected).sum();
        self.total_generations_persisted = self.models.iter().map(|m| m.generations_persisted).sum();
        let mut versions: Vec<String> = self.models.iter().filter_map(|m| m.classifier_version.clone()).collect();
        versions.sort();
        versions.dedup();
        self.classifier_versions = versions;
    }
}

pub fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<()> {
    write_json_pretty(path, manifest)
}

/// Everything written to the reports directory.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub matrix: BiasMatrix,
    pub models: Vec<String>,
    pub extremes: Extremes,
    pub manifest: RunManifest,
}

pub const REPORT_FILES: [&str; 7] =
    ["sentiment.csv", "toxicity.csv", "identity.csv", "matrices.json", "matrices.md", "extremes.md", "manifest.json"];

impl ReportBundle {
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        if self.models.is_empty() || self.matrix.models.is_empty() {
            log::warn!("report: matrix is empty; writing headers only");
        }
        for channel in Channel::ALL {
            let csv = matrix_csv(&self.matrix, &self.models, channel)?;
            atomic_write(&dir.join(format!("{}.csv", channel.name())), csv.as_bytes())?;
        }
        write_json_pretty(&dir.join("matrices.json"), &self.matrix)?;
        atomic_write(&dir.join("matrices.md"), matrices_markdown(&self.matrix, &self.models).as_bytes())?;
        atomic_write(&dir.join("extremes.md"), extremes_markdown(&self.extremes).as_bytes())?;
        write_manifest(&dir.join("manifest.json"), &self.manifest)?;
        Ok(REPORT_FILES.iter().map(|f| dir.join(f)).collect())
    }
}
