//! Reading raw records from JSONL or CSV dumps with a configurable field map.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{RawRecord, RecordKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

/// Source column/key names for each [`RawRecord`] field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldMap {
    pub record_id: String,
    pub kind: String,
    pub parent_id: String,
    pub title: String,
    pub body: String,
    pub author_handle: String,
}

impl Default for FieldMap {
    fn default() -> Self {
        Self {
            record_id: "id".into(),
            kind: "kind".into(),
            parent_id: "parent_id".into(),
            title: "title".into(),
            body: "body".into(),
            author_handle: "author".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSpec {
    pub path: PathBuf,
    pub format: InputFormat,
    #[serde(default)]
    pub fields: FieldMap,
    /// Every record in the file has this kind; the kind column is ignored.
    #[serde(default)]
    pub kind: Option<RecordKind>,
    /// Prefixes removed from parent ids, e.g. `t3_` in Reddit dumps.
    #[serde(default)]
    pub strip_parent_prefixes: Vec<String>,
}

impl InputSpec {
    pub fn new(path: impl Into<PathBuf>, format: InputFormat) -> Self {
        Self { path: path.into(), format, fields: FieldMap::default(), kind: None, strip_parent_prefixes: Vec::new() }
    }
}

#[derive(Debug, Default)]
pub struct ReadOutcome {
    pub records: Vec<RawRecord>,
    /// One short description per skipped record.
    pub malformed: Vec<String>,
}

fn parse_kind(raw: &str) -> Option<RecordKind> {
    match raw.trim().to_ascii_lowercase().as_str() {
        "post" | "submission" | "t3" => Some(RecordKind::Post),
        "comment" | "reply" | "t1" => Some(RecordKind::Comment),
        _ => None,
    }
}

fn build<F>(spec: &InputSpec, get: F) -> std::result::Result<RawRecord, String>
where
    F: Fn(&str) -> Option<String>,
{
    let f = &spec.fields;
    let record_id = get(&f.record_id).filter(|s| !s.is_empty()).ok_or_else(|| format!("missing {}", f.record_id))?;
    let kind = match spec.kind {
        Some(kind) => kind,
        None => {
            let raw = get(&f.kind).ok_or_else(|| format!("missing {}", f.kind))?;
            parse_kind(&raw).ok_or_else(|| format!("unknown kind {raw:?}"))?
        }
    };
    let parent_id = get(&f.parent_id).filter(|s| !s.is_empty()).map(|p| {
        spec.strip_parent_prefixes.iter().find_map(|pre| p.strip_prefix(pre.as_str())).map(str::to_string).unwrap_or(p)
    });
    if kind == RecordKind::Comment && parent_id.is_none() {
        return Err(format!("comment {record_id} has no {}", f.parent_id));
    }
    let body = get(&f.body).ok_or_else(|| format!("record {record_id}: missing {}", f.body))?;
    Ok(RawRecord {
        record_id,
        kind,
        parent_id: if kind == RecordKind::Post { None } else { parent_id },
        title: get(&f.title).filter(|s| !s.is_empty()),
        body,
        author_handle: get(&f.author_handle).filter(|s| !s.is_empty()),
    })
}

fn json_scalar(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// Read one input file. Unreadable files are errors; individual bad records
/// are skipped and described in [`ReadOutcome::malformed`].
pub fn read_records(spec: &InputSpec) -> Result<ReadOutcome> {
    let path = &spec.path;
    let mut out = ReadOutcome::default();
    match spec.format {
        InputFormat::Jsonl => {
            let file = File::open(path).map_err(|e| Error::io(path, e))?;
            for (idx, line) in BufReader::new(file).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<Value>(&line).map_err(|e| e.to_string()).and_then(|v| match v {
                    Value::Object(map) => build(spec, |k| map.get(k).and_then(json_scalar)),
                    _ => Err("not a JSON object".to_string()),
                });
                match parsed {
                    Ok(r) => out.records.push(r),
                    Err(e) => out.malformed.push(format!("{}:{}: {e}", path.display(), idx + 1)),
                }
            }
        }
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .flexible(true)
                .from_path(path)
                .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
            let headers = reader.headers().map_err(|e| Error::io(path, std::io::Error::other(e)))?.clone();
            for (idx, row) in reader.records().enumerate() {
                let line = idx + 2;
                let parsed = row.map_err(|e| e.to_string()).and_then(|row| {
                    build(spec, |k| headers.iter().position(|h| h == k).and_then(|i| row.get(i)).map(str::to_string))
                });
                match parsed {
                    Ok(r) => out.records.push(r),
                    Err(e) => out.malformed.push(format!("{}:{line}: {e}", path.display())),
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_with_malformed_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("in.jsonl");
        std::fs::write(
            &path,
            concat!(
                "{\"id\":\"p1\",\"kind\":\"post\",\"title\":\"T\",\"body\":\"b\"}\n",
                "{\"id\":\"c1\",\"kind\":\"comment\",\"parent_id\":\"t3_p1\",\"body\":\"hi\"}\n",
                "not json\n",
                "{\"id\":\"c2\",\"kind\":\"comment\",\"body\":\"no parent\"}\n",
                "\n",
                "{\"id\":7,\"kind\":\"t1\",\"parent_id\":\"p1\",\"body\":\"num id\"}\n",
            ),
        )
        .unwrap();
        let mut spec = InputSpec::new(&path, InputFormat::Jsonl);
        spec.strip_parent_prefixes = vec!["t3_".into()];
        let out = read_records(&spec).unwrap();
        assert_eq!(out.records.len(), 3);
        assert_eq!(out.malformed.len(), 2);
        assert_eq!(out.records[1].parent_id.as_deref(), Some("p1"));
        assert_eq!(out.records[2].record_id, "7");
    }

    #[test]
    fn csv_with_field_map_and_fixed_kind() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("comments.csv");
        std::fs::write(&path, "cid,link,text\nc1,p1,\"hello, world\"\nc2,,orphanless\n").unwrap();
        let mut spec = InputSpec::new(&path, InputFormat::Csv);
        spec.kind = Some(RecordKind::Comment);
        spec.fields.record_id = "cid".into();
        spec.fields.parent_id = "link".into();
        spec.fields.body = "text".into();
        let out = read_records(&spec).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].body, "hello, world");
        assert_eq!(out.malformed.len(), 1);
    }

    #[test]
    fn missing_file_is_error() {
        let spec = InputSpec::new("/nonexistent/x.jsonl", InputFormat::Jsonl);
        assert!(read_records(&spec).is_err());
    }
}
