//! The three file-to-file stages: annotate, execute, filter.
//!
//! Each stage reads only files, writes its outputs atomically and leaves a
//! manifest in the output directory, so any stage can be rerun on its own.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use log::{info, warn};

use selfcall_core::filtering::{build_dataset, DatasetStats, DocScores, ScoredCall, Scorer};
use selfcall_core::prefilter::{mt_postfilter, prefilter};
use selfcall_core::sampling::{sample_calls, sample_positions, split_windows, PromptedWindow, ToolPrompt};
use selfcall_core::seed::derive_seed;
use selfcall_core::tools::{CallContext, LanguageIdentifier, ToolOutcome, ToolRegistry, TrigramDetector};
use selfcall_core::{ApiCall, Date, Document, LanguageModel, ToolKind};

use crate::config::PipelineConfig;
use crate::formats::{
    read_records, write_json, write_jsonl, write_text, AnnotatedRecord, CandidateRecord, ExecutedRecord,
    ScoredRecord, SCHEMA_VERSION,
};
use crate::manifest::{hash_files, RunManifest, RunStatus};
use crate::models::{build_registry, load_lm, load_prompts, read_corpus};
use crate::pool::Pool;

pub const CANDIDATES: &str = "candidates.jsonl";
pub const EXECUTED: &str = "executed.jsonl";
pub const SCORED: &str = "scored.jsonl";
pub const ANNOTATED: &str = "annotated.jsonl";
pub const STATS_JSON: &str = "stats.json";
pub const STATS_TXT: &str = "stats.txt";

/// Everything a stage needs besides its input file.
pub struct Session {
    pub cfg: PipelineConfig,
    pub corpus: Vec<Document>,
    pub prompts: BTreeMap<ToolKind, ToolPrompt>,
    pub lm: Box<dyn LanguageModel>,
    pub pool: Pool,
    pub corpus_sha256: String,
}

impl Session {
    pub fn open(cfg: &PipelineConfig) -> Result<Self> {
        let corpus = read_corpus(&cfg.corpus)?;
        let prompts = load_prompts(cfg)?;
        let lm = load_lm(&cfg.lm, &corpus, &prompts)?;
        Ok(Session {
            cfg: cfg.clone(),
            corpus_sha256: hash_files(&cfg.corpus)?,
            corpus,
            prompts,
            lm,
            pool: Pool::new(cfg.workers)?,
        })
    }

    fn manifest(&self, stage: &str) -> RunManifest {
        let mut m = RunManifest::new(stage, &self.cfg);
        m.corpus_sha256 = Some(self.corpus_sha256.clone());
        m.tokenizer_id = Some(self.lm.tokenizer().id().to_string());
        m.inputs.insert("documents".into(), self.corpus.len());
        m
    }
}

/// Writes a failure manifest when `run` errors.
fn with_manifest<R>(cfg: &PipelineConfig, stage: &str, run: impl FnOnce() -> Result<R>) -> Result<R> {
    run().inspect_err(|e| {
        let mut m = RunManifest::new(stage, cfg);
        m.status = RunStatus::Failed(format!("{e:#}"));
        if let Err(w) = m.write(&cfg.output_dir) {
            warn!("could not write failure manifest: {w:#}");
        }
    })
}

fn report(stage: &str, n: usize, start: Instant) {
    let secs = start.elapsed().as_secs_f64();
    info!("{stage}: {n} items in {secs:.2}s ({:.1}/s)", n as f64 / secs.max(1e-9));
}

/// Candidate calls for one document, in tool, window and position order.
pub fn annotate_document(
    lm: &dyn LanguageModel,
    prompts: &BTreeMap<ToolKind, ToolPrompt>,
    langid: &dyn LanguageIdentifier,
    cfg: &PipelineConfig,
    doc: &Document,
) -> Vec<CandidateRecord> {
    let tok = lm.tokenizer();
    let tokens = tok.encode(&doc.text);
    let mut out = Vec::new();
    for &tool in &cfg.tools {
        let gate = prefilter(doc, tool, tok, langid, &cfg.prefilter, cfg.seed);
        if !gate.keep {
            continue;
        }
        let scfg = cfg.sampling_for(tool);
        for w in split_windows(tok, &tokens, scfg.window) {
            let window = PromptedWindow::new(tok, &prompts[&tool], &tokens[w.clone()]);
            let seed = derive_seed(cfg.seed, &format!("sample/{tool}/{}/{}", doc.id, w.start));
            for c in sample_positions(lm, &window, &scfg) {
                let position = w.start + c.position;
                for call in sample_calls(lm, &window, c.position, tool, &scfg, seed) {
                    if tool == ToolKind::Mt && !mt_postfilter(tok, &tokens, &call, position) {
                        continue;
                    }
                    out.push(CandidateRecord {
                        v: SCHEMA_VERSION,
                        doc_id: doc.id.clone(),
                        window: [w.start, w.end],
                        position,
                        prob: c.prob,
                        tool,
                        input: call.input,
                        date: gate.date,
                    });
                }
            }
        }
    }
    out
}

pub fn run_annotate(cfg: &PipelineConfig) -> Result<PathBuf> {
    with_manifest(cfg, "annotate", || {
        let s = Session::open(cfg)?;
        let mut m = s.manifest("annotate");
        let start = Instant::now();
        let langid = TrigramDetector::default();
        let per_doc = m.timed("annotate", || {
            s.pool.map(&s.corpus, |doc| {
                annotate_document(s.lm.as_ref(), &s.prompts, &langid, &s.cfg, doc)
            })
        });
        let records: Vec<CandidateRecord> = per_doc.into_iter().flatten().collect();
        report("annotate", s.corpus.len(), start);
        let path = cfg.output_dir.join(CANDIDATES);
        m.outputs.insert(CANDIDATES.into(), write_jsonl(&path, &records)?);
        for tool in ToolKind::ALL {
            let n = records.iter().filter(|r| r.tool == tool).count();
            m.outputs.insert(format!("candidates.{tool}"), n);
        }
        m.write(&cfg.output_dir)?;
        Ok(path)
    })
}

/// Runs each distinct (call, date) once and fans the outcome back out.
pub fn execute_candidates(reg: &ToolRegistry, pool: &Pool, candidates: Vec<CandidateRecord>) -> Vec<ExecutedRecord> {
    let mut keys: Vec<(ApiCall, Option<Date>)> = candidates.iter().map(|c| (c.call(), c.date)).collect();
    keys.sort();
    keys.dedup();
    let outcomes = pool.map(&keys, |(call, date)| reg.execute(call, &CallContext { date: *date }));
    let table: HashMap<&(ApiCall, Option<Date>), &ToolOutcome> = keys.iter().zip(&outcomes).collect();
    candidates
        .into_iter()
        .map(|c| {
            let outcome = table[&(c.call(), c.date)];
            match outcome {
                ToolOutcome::Result(r) => ExecutedRecord::new(c, Some(r.clone()), None),
                ToolOutcome::NoResult => ExecutedRecord::new(c, None, None),
                ToolOutcome::Failed(f) => {
                    warn!("{} call {:?} in {} failed: {f}", c.tool, c.input, c.doc_id);
                    ExecutedRecord::new(c, None, Some(f.to_string()))
                }
            }
        })
        .collect()
}

pub fn run_execute(cfg: &PipelineConfig, input: Option<&Path>) -> Result<PathBuf> {
    with_manifest(cfg, "execute", || {
        let input = input.map_or_else(|| cfg.output_dir.join(CANDIDATES), Path::to_path_buf);
        let candidates: Vec<CandidateRecord> = read_records(&input)?;
        let mut m = RunManifest::new("execute", cfg);
        m.inputs.insert("candidates".into(), candidates.len());
        let reg = build_registry(&cfg.services)?;
        let pool = Pool::new(cfg.workers)?;
        let start = Instant::now();
        let n = candidates.len();
        let executed = m.timed("execute", || execute_candidates(&reg, &pool, candidates));
        report("execute", n, start);
        let results = executed.iter().filter(|e| e.result.is_some()).count();
        let failures = executed.iter().filter(|e| e.failure.is_some()).count();
        let path = cfg.output_dir.join(EXECUTED);
        m.outputs.insert(EXECUTED.into(), write_jsonl(&path, &executed)?);
        m.outputs.insert("with_result".into(), results);
        m.outputs.insert("failed".into(), failures);
        m.write(&cfg.output_dir)?;
        Ok(path)
    })
}

/// Scores one document's executed calls. Each call is scored inside the
/// window it was sampled in; positions at or past the window end are
/// dropped.
pub fn score_document(
    lm: &dyn LanguageModel,
    doc: &Document,
    records: &[&ExecutedRecord],
    cfg: &PipelineConfig,
) -> Result<DocScores> {
    let tok = lm.tokenizer();
    let original = tok.sequence(&doc.text);
    let scheme = cfg.filter.scheme();
    let mut by_window: BTreeMap<[usize; 2], Vec<&ExecutedRecord>> = BTreeMap::new();
    for r in records {
        let [s, e] = r.window;
        if s > e || e > original.len() || r.position < s || r.position > e {
            bail!(
                "{}: window {:?} / position {} do not fit {} tokens",
                doc.id,
                r.window,
                r.position,
                original.len()
            );
        }
        by_window.entry(r.window).or_default().push(r);
    }
    let mut scored: Vec<ScoredCall> = Vec::new();
    for ([s, e], rs) in by_window {
        let mut scorer = Scorer::new(lm, &original.tokens[s..e], &scheme);
        for r in rs {
            if let Some(mut sc) = scorer.score(r.position - s, &r.executed()) {
                sc.position = r.position;
                scored.push(sc);
            }
        }
    }
    scored.sort_by(|a, b| {
        a.position
            .cmp(&b.position)
            .then_with(|| a.executed.call.cmp(&b.executed.call))
            .then_with(|| a.executed.result.cmp(&b.executed.result))
    });
    scored.dedup_by(|a, b| a.position == b.position && a.executed == b.executed);
    Ok(DocScores {
        doc_id: doc.id.clone(),
        original,
        scored,
    })
}

pub fn run_filter_merge(cfg: &PipelineConfig, input: Option<&Path>) -> Result<DatasetStats> {
    with_manifest(cfg, "filter", || {
        let s = Session::open(cfg)?;
        let input = input.map_or_else(|| cfg.output_dir.join(EXECUTED), Path::to_path_buf);
        let executed: Vec<ExecutedRecord> = read_records(&input)?;
        let mut m = s.manifest("filter");
        m.inputs.insert("executed".into(), executed.len());

        let mut by_doc: BTreeMap<&str, Vec<&ExecutedRecord>> = BTreeMap::new();
        for r in &executed {
            by_doc.entry(r.doc_id.as_str()).or_default().push(r);
        }
        if let Some(unknown) = by_doc.keys().find(|id| !s.corpus.iter().any(|d| d.id == **id)) {
            bail!("{}: document {unknown:?} is not in the corpus", input.display());
        }

        let start = Instant::now();
        let docs: Vec<DocScores> = m
            .timed("score", || {
                s.pool.map(&s.corpus, |doc| {
                    let recs = by_doc.get(doc.id.as_str()).map_or(&[][..], Vec::as_slice);
                    score_document(s.lm.as_ref(), doc, recs, cfg)
                })
            })
            .into_iter()
            .collect::<Result<_>>()?;
        report("filter", executed.len(), start);

        let (examples, stats) = build_dataset(s.lm.tokenizer(), &docs, &cfg.filter)
            .context("merging kept calls")?;
        let scored: Vec<ScoredRecord> = docs
            .iter()
            .flat_map(|d| d.scored.iter().map(|sc| ScoredRecord::new(&d.doc_id, sc)))
            .collect();
        let annotated: Vec<AnnotatedRecord> = examples.iter().map(AnnotatedRecord::from).collect();

        let out = &cfg.output_dir;
        m.outputs.insert(SCORED.into(), write_jsonl(&out.join(SCORED), &scored)?);
        m.outputs.insert(ANNOTATED.into(), write_jsonl(&out.join(ANNOTATED), &annotated)?);
        write_json(&out.join(STATS_JSON), &stats)?;
        write_text(&out.join(STATS_TXT), &stats.to_table())?;
        m.write(out)?;
        Ok(stats)
    })
}

/// annotate → execute → filter.
pub fn run_all(cfg: &PipelineConfig) -> Result<DatasetStats> {
    run_annotate(cfg)?;
    run_execute(cfg, None)?;
    run_filter_merge(cfg, None)
}
