//! JSONL records exchanged between stages.
//!
//! Every intermediate record carries `v`, the schema version; readers refuse
//! other versions. Files are written to a temporary sibling and renamed, so
//! a stage output is either complete or absent.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use selfcall_core::call::{AnnotatedExample, ApiCall, ExecutedCall};
use selfcall_core::evalgen::TaskFamily;
use selfcall_core::filtering::ScoredCall;
use selfcall_core::{Date, ToolKind};

pub const SCHEMA_VERSION: u32 = 1;

fn current() -> u32 {
    SCHEMA_VERSION
}

/// Records that carry a schema version.
pub trait Versioned {
    fn version(&self) -> u32;
}

macro_rules! versioned {
    ($($t:ty),*) => {
        $(impl Versioned for $t {
            fn version(&self) -> u32 {
                self.v
            }
        })*
    };
}

/// A sampled call before execution. `position` is a token position in the
/// whole document; `window` the token range it was sampled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateRecord {
    #[serde(default = "current")]
    pub v: u32,
    pub doc_id: String,
    pub window: [usize; 2],
    pub position: usize,
    pub prob: f64,
    pub tool: ToolKind,
    pub input: String,
    /// Document date for the calendar.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<Date>,
}

impl CandidateRecord {
    pub fn call(&self) -> ApiCall {
        ApiCall::new(self.tool, self.input.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExecutedRecord {
    #[serde(default = "current")]
    pub v: u32,
    pub doc_id: String,
    pub window: [usize; 2],
    pub position: usize,
    pub prob: f64,
    pub tool: ToolKind,
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<Date>,
    pub result: Option<String>,
    /// Why the tool failed, when it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl ExecutedRecord {
    pub fn new(c: CandidateRecord, result: Option<String>, failure: Option<String>) -> Self {
        ExecutedRecord {
            v: SCHEMA_VERSION,
            doc_id: c.doc_id,
            window: c.window,
            position: c.position,
            prob: c.prob,
            tool: c.tool,
            input: c.input,
            date: c.date,
            result,
            failure,
        }
    }

    pub fn executed(&self) -> ExecutedCall {
        ExecutedCall {
            call: ApiCall::new(self.tool, self.input.clone()),
            result: self.result.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoredRecord {
    #[serde(default = "current")]
    pub v: u32,
    pub doc_id: String,
    pub position: usize,
    pub tool: ToolKind,
    pub input: String,
    pub result: Option<String>,
    pub l_plus: f64,
    pub l_minus: f64,
    pub l_empty: f64,
    pub gain: f64,
}

impl ScoredRecord {
    pub fn new(doc_id: &str, s: &ScoredCall) -> Self {
        ScoredRecord {
            v: SCHEMA_VERSION,
            doc_id: doc_id.into(),
            position: s.position,
            tool: s.executed.call.tool,
            input: s.executed.call.input.clone(),
            result: s.executed.result.clone(),
            l_plus: s.l_plus,
            l_minus: s.l_minus,
            l_empty: s.l_empty,
            gain: s.gain,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InsertionRecord {
    pub char_pos: usize,
    pub token_pos: usize,
    pub tool: ToolKind,
    pub input: String,
    pub result: Option<String>,
    pub gain: f64,
}

/// One document of the augmented dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotatedRecord {
    #[serde(default = "current")]
    pub v: u32,
    pub doc_id: String,
    pub text: String,
    pub insertions: Vec<InsertionRecord>,
}

impl From<&AnnotatedExample> for AnnotatedRecord {
    fn from(ex: &AnnotatedExample) -> Self {
        AnnotatedRecord {
            v: SCHEMA_VERSION,
            doc_id: ex.doc_id.clone(),
            text: ex.text.clone(),
            insertions: ex
                .insertions
                .iter()
                .map(|i| InsertionRecord {
                    char_pos: i.char_pos,
                    token_pos: i.position,
                    tool: i.executed.call.tool,
                    input: i.executed.call.input.clone(),
                    result: i.executed.result.clone(),
                    gain: i.gain,
                })
                .collect(),
        }
    }
}

versioned!(CandidateRecord, ExecutedRecord, ScoredRecord, AnnotatedRecord);

/// Mock service fixture line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRecord {
    pub input: String,
    pub output: String,
}

/// Benchmark item in the generic evaluation format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub task_id: String,
    pub family: TaskFamily,
    #[serde(default)]
    pub context: String,
    #[serde(default)]
    pub question: String,
    pub golds: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub task_id: String,
    pub family: TaskFamily,
    pub prediction: String,
    pub golds: Vec<String>,
    /// Whether the decoder made a call for this item.
    #[serde(default)]
    pub called: bool,
}

/// Reads one JSON value per non-blank line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}: malformed record", path.display(), i + 1))?;
        out.push(value);
    }
    Ok(out)
}

/// Like [`read_jsonl`], and also checks the schema version.
pub fn read_records<T: DeserializeOwned + Versioned>(path: &Path) -> Result<Vec<T>> {
    let records: Vec<T> = read_jsonl(path)?;
    if let Some((i, r)) = records.iter().enumerate().find(|(_, r)| r.version() != SCHEMA_VERSION) {
        bail!(
            "{}: record {} has schema version {}, expected {}",
            path.display(),
            i + 1,
            r.version(),
            SCHEMA_VERSION
        );
    }
    Ok(records)
}

pub fn write_jsonl<'a, T, I>(path: &Path, records: I) -> Result<usize>
where
    T: Serialize + 'a,
    I: IntoIterator<Item = &'a T>,
{
    write_atomic(path, |w| {
        let mut n = 0;
        for r in records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
            n += 1;
        }
        Ok(n)
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")?;
        Ok(())
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, |w| Ok(w.write_all(text.as_bytes())?))
}

fn write_atomic<R>(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> Result<R>) -> Result<R> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let tmp = tmp_path(path);
    let file = File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
    let mut w = BufWriter::new(file);
    let out = body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.into_inner()
        .map_err(|e| e.into_error())
        .and_then(|f| f.sync_all())
        .with_context(|| format!("flushing {}", tmp.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(out)
}

fn tmp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidate() -> CandidateRecord {
        CandidateRecord {
            v: SCHEMA_VERSION,
            doc_id: "d1".into(),
            window: [0, 12],
            position: 4,
            prob: 0.25,
            tool: ToolKind::Calculator,
            input: "27 + 4 * 2".into(),
            date: None,
        }
    }

    #[test]
    fn round_trip_and_field_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/c.jsonl");
        let recs = vec![candidate()];
        assert_eq!(write_jsonl(&path, &recs).unwrap(), 1);
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "{\"v\":1,\"doc_id\":\"d1\",\"window\":[0,12],\"position\":4,\"prob\":0.25,\
             \"tool\":\"Calculator\",\"input\":\"27 + 4 * 2\"}\n"
        );
        assert_eq!(read_records::<CandidateRecord>(&path).unwrap(), recs);
        assert!(!tmp_path(&path).exists());
    }

    #[test]
    fn version_mismatch_and_unknown_fields_fail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let mut c = candidate();
        c.v = 2;
        write_jsonl(&path, &[c]).unwrap();
        let err = read_records::<CandidateRecord>(&path).unwrap_err();
        assert!(err.to_string().contains("schema version 2"));

        fs::write(&path, "{\"input\":\"a\",\"output\":\"b\",\"extra\":1}\n").unwrap();
        let err = read_jsonl::<FixtureRecord>(&path).unwrap_err();
        assert!(format!("{err:#}").contains(":1: malformed record"));
    }

    #[test]
    fn missing_version_reads_as_current() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(
            &path,
            "{\"doc_id\":\"d\",\"window\":[0,1],\"position\":0,\"prob\":1.0,\"tool\":\"Calendar\",\"input\":\"\"}\n\n",
        )
        .unwrap();
        assert_eq!(read_records::<CandidateRecord>(&path).unwrap().len(), 1);
    }
}
