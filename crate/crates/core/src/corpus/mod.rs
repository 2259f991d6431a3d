//! Corpus preparation: ingest raw post/comment dumps, clean and redact them,
//! and pair every post with each of its direct comments.

mod clean;
mod ingest;

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

pub use clean::{
    clean_text, has_emoji_residue, has_handle_residue, has_html_residue, has_invisible_residue, is_emoji,
    redact_personal,
};
pub use ingest::{read_records, FieldMap, InputFormat, InputSpec, ReadOutcome};

use crate::error::Result;
use crate::util::{atomic_write_with, file_sha256, write_json_pretty};

/// Bodies the platform substitutes for deleted content.
pub const DELETED_MARKERS: [&str; 2] = ["[deleted]", "[removed]"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordKind {
    Post,
    Comment,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    pub record_id: String,
    pub kind: RecordKind,
    pub parent_id: Option<String>,
    pub title: Option<String>,
    pub body: String,
    pub author_handle: Option<String>,
}

impl RawRecord {
    pub fn post(id: &str, title: Option<&str>, body: &str) -> Self {
        Self {
            record_id: id.to_string(),
            kind: RecordKind::Post,
            parent_id: None,
            title: title.map(str::to_string),
            body: body.to_string(),
            author_handle: None,
        }
    }

    pub fn comment(id: &str, parent: &str, body: &str) -> Self {
        Self {
            record_id: id.to_string(),
            kind: RecordKind::Comment,
            parent_id: Some(parent.to_string()),
            title: None,
            body: body.to_string(),
            author_handle: None,
        }
    }

    fn is_deleted(&self) -> bool {
        let body = self.body.trim();
        DELETED_MARKERS.contains(&body)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub post_text: String,
    pub comment_text: String,
    /// (post record id, comment record id)
    pub source_ids: (String, String),
}

/// Serialized form of one line of the training file.
#[derive(Debug, Serialize, Deserialize)]
pub struct TrainingLine {
    pub post: String,
    pub comment: String,
}

/// Why a comment record did not become a training example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    EmptyAfterClean,
    DeletedMarker,
    OrphanComment,
    /// Reply to another comment; only direct post/comment pairs are kept.
    NestedReply,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingOutcome {
    pub examples: Vec<TrainingExample>,
    pub total_comments: usize,
    pub dropped: BTreeMap<DropReason, usize>,
}

impl PairingOutcome {
    pub fn dropped_total(&self) -> usize {
        self.dropped.values().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub input_paths: Vec<PathBuf>,
    pub output_path: PathBuf,
    pub total_comments: usize,
    pub examples_emitted: usize,
    pub records_dropped: BTreeMap<DropReason, usize>,
    pub malformed_records: usize,
    pub malformed_samples: Vec<String>,
    pub checksum: String,
    pub warnings: Vec<String>,
}

fn cleaned(text: &str) -> String {
    redact_personal(&clean_text(text))
}

fn post_text(post: &RawRecord) -> String {
    let title = post.title.as_deref().map(cleaned).unwrap_or_default();
    let body = cleaned(&post.body);
    match (title.is_empty(), body.is_empty()) {
        (false, false) => format!("{title}\n{body}"),
        (false, true) => title,
        _ => body,
    }
}

/// Pair posts with their direct comments.
///
/// Records may arrive in any order. Output is sorted by `(post id, comment id)`.
/// Every comment record is either emitted or counted under one drop reason.
pub fn pair_examples<I>(records: I) -> PairingOutcome
where
    I: IntoIterator<Item = RawRecord>,
{
    let mut posts: HashMap<String, RawRecord> = HashMap::new();
    let mut comments: Vec<RawRecord> = Vec::new();
    for record in records {
        match record.kind {
            RecordKind::Post => {
                posts.entry(record.record_id.clone()).or_insert(record);
            }
            RecordKind::Comment => comments.push(record),
        }
    }
    let comment_ids: std::collections::HashSet<&str> = comments.iter().map(|c| c.record_id.as_str()).collect();

    let mut post_cache: HashMap<&str, Option<String>> = HashMap::new();
    let mut outcome = PairingOutcome { total_comments: comments.len(), ..Default::default() };
    for comment in &comments {
        let parent = comment.parent_id.as_deref().unwrap_or_default();
        let reason = match posts.get(parent) {
            None if comment_ids.contains(parent) => Some(DropReason::NestedReply),
            None => Some(DropReason::OrphanComment),
            Some(post) if post.is_deleted() || comment.is_deleted() => Some(DropReason::DeletedMarker),
            Some(post) => {
                let text = post_cache
                    .entry(post.record_id.as_str())
                    .or_insert_with(|| Some(post_text(post)).filter(|t| !t.is_empty()));
                let comment_text = cleaned(&comment.body);
                match text {
                    Some(text) if !comment_text.is_empty() => {
                        outcome.examples.push(TrainingExample {
                            post_text: text.clone(),
                            comment_text,
                            source_ids: (post.record_id.clone(), comment.record_id.clone()),
                        });
                        None
                    }
                    _ => Some(DropReason::EmptyAfterClean),
                }
            }
        };
        if let Some(reason) = reason {
            *outcome.dropped.entry(reason).or_default() += 1;
        }
    }
    outcome.examples.sort_by(|a, b| a.source_ids.cmp(&b.source_ids));
    outcome
}

/// Write examples as JSONL `{"post", "comment"}` lines and return the
/// manifest. The file is replaced atomically; a failed write leaves nothing
/// behind.
pub fn emit_training_file(
    outcome: &PairingOutcome,
    input_paths: Vec<PathBuf>,
    malformed: &[String],
    out_path: &Path,
) -> Result<CorpusManifest> {
    atomic_write_with(out_path, |w| {
        for ex in &outcome.examples {
            let line = TrainingLine { post: ex.post_text.clone(), comment: ex.comment_text.clone() };
            serde_json::to_writer(&mut *w, &line).map_err(std::io::Error::other)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })?;
    let mut warnings = Vec::new();
    if outcome.examples.is_empty() {
        warnings.push("no training examples emitted".to_string());
        log::warn!("{}: no training examples emitted", out_path.display());
    }
    if !malformed.is_empty() {
        warnings.push(format!("{} malformed records skipped", malformed.len()));
    }
    Ok(CorpusManifest {
        input_paths,
        output_path: out_path.to_path_buf(),
        total_comments: outcome.total_comments,
        examples_emitted: outcome.examples.len(),
        records_dropped: outcome.dropped.clone(),
        malformed_records: malformed.len(),
        malformed_samples: malformed.iter().take(20).cloned().collect(),
        checksum: file_sha256(out_path)?,
        warnings,
    })
}

/// Sidecar manifest path for a training file: `<file>.manifest.json`.
pub fn manifest_path(out_path: &Path) -> PathBuf {
    let mut name = out_path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out_path.with_file_name(name)
}

/// Read every input, pair, and emit the training file plus its manifest.
pub fn prepare(inputs: &[InputSpec], out_path: &Path) -> Result<CorpusManifest> {
    let mut records = Vec::new();
    let mut malformed = Vec::new();
    for input in inputs {
        let read = read_records(input)?;
        records.extend(read.records);
        malformed.extend(read.malformed);
    }
    let outcome = pair_examples(records);
    let paths = inputs.iter().map(|i| i.path.clone()).collect();
    let manifest = emit_training_file(&outcome, paths, &malformed, out_path)?;
    write_json_pretty(&manifest_path(out_path), &manifest)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_post_two_comments() {
        let out = pair_examples(vec![
            RawRecord::comment("c2", "p", "second"),
            RawRecord::post("p", Some("Title"), "Body text"),
            RawRecord::comment("c1", "p", "first"),
        ]);
        assert_eq!(out.examples.len(), 2);
        assert_eq!(out.examples[0].source_ids, ("p".into(), "c1".into()));
        assert_eq!(out.examples[0].post_text, "Title\nBody text");
        assert_eq!(out.examples[1].comment_text, "second");
    }

    #[test]
    fn orphan_comment_counted() {
        let out = pair_examples(vec![RawRecord::comment("c", "missing", "hello")]);
        assert!(out.examples.is_empty());
        assert_eq!(out.dropped[&DropReason::OrphanComment], 1);
    }

    #[test]
    fn removed_post_drops_all_pairs() {
        let out = pair_examples(vec![
            RawRecord::post("p", Some("t"), "[removed]"),
            RawRecord::comment("c1", "p", "a"),
            RawRecord::comment("c2", "p", "b"),
        ]);
        assert!(out.examples.is_empty());
        assert_eq!(out.dropped[&DropReason::DeletedMarker], 2);
    }

    #[test]
    fn nested_and_empty_comments() {
        let out = pair_examples(vec![
            RawRecord::post("p", None, "post"),
            RawRecord::comment("c1", "p", "😀 &nbsp;"),
            RawRecord::comment("c2", "c1", "reply to reply"),
            RawRecord::comment("c3", "p", "[deleted]"),
        ]);
        assert!(out.examples.is_empty());
        assert_eq!(out.dropped[&DropReason::EmptyAfterClean], 1);
        assert_eq!(out.dropped[&DropReason::NestedReply], 1);
        assert_eq!(out.dropped[&DropReason::DeletedMarker], 1);
        assert_eq!(out.dropped_total(), out.total_comments);
    }

    #[test]
    fn emit_counts_and_determinism() {
        let dir = tempfile::tempdir().unwrap();
        let out = pair_examples(vec![
            RawRecord::post("p", None, "post"),
            RawRecord::comment("c1", "p", "a"),
            RawRecord::comment("c2", "p", "b"),
            RawRecord::comment("c3", "p", "c"),
        ]);
        let path = dir.path().join("train.jsonl");
        let m1 = emit_training_file(&out, vec![], &[], &path).unwrap();
        assert_eq!(m1.examples_emitted, 3);
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);
        let m2 = emit_training_file(&out, vec![], &[], &path).unwrap();
        assert_eq!(m1.checksum, m2.checksum);

        let empty = pair_examples(Vec::new());
        let m = emit_training_file(&empty, vec![], &[], &path).unwrap();
        assert_eq!(m.examples_emitted, 0);
        assert!(!m.warnings.is_empty());
        assert_eq!(std::fs::read(&path).unwrap().len(), 0);
    }
}
