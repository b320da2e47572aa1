mod common;

use std::fs;

use common::*;
use selfcall::formats::{read_records, AnnotatedRecord, CandidateRecord, ExecutedRecord, ScoredRecord};
use selfcall::manifest::{RunManifest, RunStatus};
use selfcall::stages::{run_all, run_annotate, run_execute, run_filter_merge};
use selfcall::core::ToolKind;

fn manifest(dir: &std::path::Path, stage: &str) -> RunManifest {
    serde_json::from_slice(&fs::read(RunManifest::path(dir, stage)).unwrap()).unwrap()
}

#[test]
fn toy_corpus_end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_fixture(tmp.path(), 2, "out");
    let stats = run_all(&cfg).unwrap();
    let out = &cfg.output_dir;

    let cands: Vec<CandidateRecord> = read_records(&out.join("candidates.jsonl")).unwrap();
    // the prose document has no numbers, so no calculator candidates
    assert!(!cands.iter().any(|c| c.doc_id == "d2" && c.tool == ToolKind::Calculator));
    // the translation input that only shows up later was removed
    assert!(!cands.iter().any(|c| c.input == "le pays"));
    let cal = cands.iter().find(|c| c.tool == ToolKind::Calendar).unwrap();
    assert_eq!(cal.date.unwrap().to_string(), "2020-11-20");

    let executed: Vec<ExecutedRecord> = read_records(&out.join("executed.jsonl")).unwrap();
    assert_eq!(executed.len(), cands.len());
    let calc = executed.iter().find(|e| e.tool == ToolKind::Calculator).unwrap();
    assert_eq!(calc.result.as_deref(), Some("35"));
    let cal = executed.iter().find(|e| e.tool == ToolKind::Calendar).unwrap();
    assert_eq!(cal.result.as_deref(), Some("Today is Friday, November 20, 2020."));

    let scored: Vec<ScoredRecord> = read_records(&out.join("scored.jsonl")).unwrap();
    assert!(scored.iter().all(|s| s.l_minus <= s.l_empty));

    let annotated: Vec<AnnotatedRecord> = read_records(&out.join("annotated.jsonl")).unwrap();
    let ids: Vec<&str> = annotated.iter().map(|a| a.doc_id.as_str()).collect();
    assert_eq!(ids, ["d1", "d3", "d5"]);
    assert!(annotated.iter().all(|a| !a.insertions.is_empty()));
    assert!(annotated[0].text.contains(&format!(" of{CALC_CALL} 35 items")));
    assert_eq!(annotated[1].text, format!("The Nile flows into{QA_CALL} the Mediterranean Sea."));
    assert!(annotated[2].text.contains(&format!("The committee{MT_CALL} agreed")));
    let ins = &annotated[1].insertions[0];
    assert_eq!(ins.char_pos, "The Nile flows into".chars().count());

    // The calculator call pays off for every position whose loss window
    // reaches " 35", with gains proportional to the weight of that token.
    let calc: Vec<&ScoredRecord> = scored
        .iter()
        .filter(|s| s.doc_id == "d1" && s.gain > 0.0)
        .collect();
    let w = [1.0 / 3.0, 4.0 / 15.0, 1.0 / 5.0, 2.0 / 15.0, 1.0 / 15.0];
    assert_eq!(calc.len(), 5);
    let last = calc[4];
    for (t, s) in calc.iter().rev().enumerate() {
        assert!((s.gain / last.gain - w[t] / w[0]).abs() < 1e-9);
        assert_eq!(s.position, last.position - t);
    }
    let kept: Vec<usize> = annotated[0].insertions.iter().map(|i| i.token_pos).collect();
    assert_eq!(kept, (last.position - 3..=last.position).collect::<Vec<_>>());

    assert_eq!(stats.examples, 3);
    let calc = stats.tool(ToolKind::Calculator).unwrap();
    assert!(calc.examples_at[0] >= calc.examples_at[1] && calc.examples_at[1] >= calc.examples_at[2]);

    let m = manifest(out, "filter");
    assert_eq!(m.status, RunStatus::Ok);
    assert_eq!(m.outputs["annotated.jsonl"], 3);
    assert_eq!(m.corpus_sha256.as_deref().map(str::len), Some(64));
}

#[test]
fn golden_candidates() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_fixture(tmp.path(), 1, "out");
    run_all(&cfg).unwrap();
    let golden = golden_dir();
    if std::env::var_os("SELFCALL_BLESS").is_some() {
        fs::create_dir_all(&golden).unwrap();
        for name in DATA_FILES {
            fs::write(golden.join(name), read(&cfg.output_dir, name)).unwrap();
        }
    }
    for name in DATA_FILES {
        assert!(
            read(&cfg.output_dir, name) == read(&golden, name),
            "{name} differs from tests/golden"
        );
    }
}

#[test]
fn stages_resume_from_their_input_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_fixture(tmp.path(), 3, "out");
    run_annotate(&cfg).unwrap();
    run_execute(&cfg, None).unwrap();
    run_filter_merge(&cfg, None).unwrap();
    let first: Vec<Vec<u8>> = DATA_FILES.iter().map(|n| read(&cfg.output_dir, n)).collect();
    // rerun only the later stages on the files already on disk
    fs::remove_file(cfg.output_dir.join("annotated.jsonl")).unwrap();
    run_execute(&cfg, None).unwrap();
    run_filter_merge(&cfg, None).unwrap();
    let second: Vec<Vec<u8>> = DATA_FILES.iter().map(|n| read(&cfg.output_dir, n)).collect();
    assert_eq!(first, second);
}

#[test]
fn empty_corpus_gives_empty_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = write_fixture(tmp.path(), 1, "out");
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    cfg.corpus = vec![empty];
    let stats = run_all(&cfg).unwrap();
    assert_eq!((stats.documents, stats.examples), (0, 0));
    for name in ["candidates.jsonl", "executed.jsonl", "annotated.jsonl"] {
        assert!(read(&cfg.output_dir, name).is_empty());
    }
    let m = manifest(&cfg.output_dir, "annotate");
    assert_eq!(m.inputs["documents"], 0);
    assert_eq!(m.outputs["candidates.jsonl"], 0);
}

#[test]
fn unreadable_corpus_marks_the_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = write_fixture(tmp.path(), 1, "out");
    cfg.corpus = vec![tmp.path().join("missing.jsonl")];
    assert!(run_annotate(&cfg).is_err());
    let m = manifest(&cfg.output_dir, "annotate");
    assert!(matches!(m.status, RunStatus::Failed(ref e) if e.contains("missing.jsonl")));
}

#[test]
fn failing_services_do_not_stop_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = write_fixture(tmp.path(), 2, "out");
    // nothing listens here; every QA and MT request fails
    let closed = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    cfg.services.qa.url = Some(format!("http://{closed}/qa"));
    cfg.services.mt.url = Some(format!("http://{closed}/mt"));
    cfg.services.qa.timeout_ms = 500;
    cfg.services.mt.timeout_ms = 500;
    run_annotate(&cfg).unwrap();
    run_execute(&cfg, None).unwrap();
    let executed: Vec<ExecutedRecord> = read_records(&cfg.output_dir.join("executed.jsonl")).unwrap();
    let remote: Vec<&ExecutedRecord> = executed
        .iter()
        .filter(|e| matches!(e.tool, ToolKind::Qa | ToolKind::Mt))
        .collect();
    assert!(!remote.is_empty());
    assert!(remote.iter().all(|e| e.result.is_none() && e.failure.is_some()));
    let stats = run_filter_merge(&cfg, None).unwrap();
    assert_eq!(stats.tool(ToolKind::Qa).unwrap().examples, 0);
    assert_eq!(stats.tool(ToolKind::Calculator).unwrap().examples, 1);
}
