#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use selfcall::config::PipelineConfig;
use selfcall::core::lm::{Pattern, RuleSpec, ScriptSpec};
use selfcall::core::token::pretokenize;
use selfcall::core::Document;
use selfcall::formats::{write_json, write_jsonl, FixtureRecord};

pub const CALC_DOC: &str = "The store sold 27 apples and 4 boxes of 2 pears, a total of 35 items.";
pub const PROSE_DOC: &str = "The river is long and the city is old.";
pub const QA_DOC: &str = "The Nile flows into the Mediterranean Sea.";
pub const DATE_DOC: &str = "The report was published today.";
pub const MT_DOC: &str = "The minister spoke about safety and the plan today. La sûreté nucléaire est une \
                          priorité pour le pays. The committee agreed and the plan was approved by all.";

pub const CALC_CALL: &str = " [Calculator(27 + 4 * 2) -> 35]";
pub const QA_CALL: &str = " [QA(Where does the Nile flow into?) -> Mediterranean Sea]";
pub const MT_CALL: &str = " [MT(sûreté nucléaire) -> nuclear safety]";

pub fn corpus() -> Vec<Document> {
    vec![
        Document::new("d1", CALC_DOC),
        Document::new("d2", PROSE_DOC),
        Document::new("d3", QA_DOC),
        Document::new("d4", DATE_DOC).with_url("https://news.example.com/2020/11/20/report"),
        Document::new("d5", MT_DOC),
    ]
}

fn upto<'a>(doc: &'a str, marker: &str) -> &'a str {
    &doc[..doc.find(marker).expect("marker in doc") + marker.len()]
}

/// Scripted model: call-opening mass after a few trigger words, fixed call
/// texts after ` [`, and next-token certainty only when the right call and
/// result precede the document.
pub fn script() -> ScriptSpec {
    let opens = |w: &str| RuleSpec {
        pattern: Pattern::EndsWith(w.into()),
        dist: vec![(" [".into(), 0.5)],
    };
    let certain = |prefix: &str, doc: &str, upto_word: &str, next: &str| RuleSpec {
        pattern: Pattern::Exact(format!("{prefix}{}", upto(doc, upto_word))),
        dist: vec![(next.into(), 1.0)],
    };
    let scripts: Vec<(String, String)> = [
        (" [", "Calculator(27 + 4 * 2)]"),
        (" into [", "QA(Where does the Nile flow into?)]"),
        (" published [", "Calendar()]"),
        (" committee [", "MT(sûreté nucléaire)]"),
        (" minister [", "MT(le pays)]"),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect();

    let mut texts: Vec<String> = corpus().into_iter().map(|d| d.text).collect();
    texts.extend(scripts.iter().map(|(_, c)| c.clone()));
    texts.extend([CALC_CALL, QA_CALL, MT_CALL].map(String::from));
    let pieces: BTreeSet<String> = texts.iter().flat_map(|t| pretokenize(t)).map(String::from).collect();

    ScriptSpec {
        pieces: pieces.into_iter().collect(),
        support: None,
        rules: vec![
            opens(" of"),
            opens(" into"),
            opens(" published"),
            opens(" committee"),
            opens(" minister"),
            certain(CALC_CALL, CALC_DOC, "a total of", " 35"),
            certain(QA_CALL, QA_DOC, "flows into", " the"),
            certain(MT_CALL, MT_DOC, "The committee", " agreed"),
        ],
        scripts,
    }
}

/// Writes corpus, fixtures, model spec and config into `dir`, and loads the
/// config back through the normal path resolution.
pub fn write_fixture(dir: &Path, workers: usize, out: &str) -> PipelineConfig {
    write_jsonl(&dir.join("corpus.jsonl"), &corpus()).unwrap();
    write_jsonl(
        &dir.join("qa.jsonl"),
        &[FixtureRecord {
            input: "Where does the Nile flow into?".into(),
            output: "Mediterranean Sea".into(),
        }],
    )
    .unwrap();
    write_jsonl(
        &dir.join("mt.jsonl"),
        &[FixtureRecord {
            input: "sûreté nucléaire".into(),
            output: "nuclear safety".into(),
        }],
    )
    .unwrap();
    write_json(&dir.join("lm.json"), &script()).unwrap();
    let config = format!(
        r#"corpus = ["corpus.jsonl"]
output_dir = "{out}"
seed = 11
workers = {workers}

[lm]
kind = "scripted"
path = "lm.json"

[services.qa]
fixtures = "qa.jsonl"

[services.mt]
fixtures = "mt.jsonl"
"#
    );
    let path = dir.join(format!("{out}.toml"));
    std::fs::write(&path, config).unwrap();
    PipelineConfig::load(&path).unwrap()
}

/// Stage data files, manifests excluded (they carry timings).
pub const DATA_FILES: [&str; 6] = [
    "candidates.jsonl",
    "executed.jsonl",
    "scored.jsonl",
    "annotated.jsonl",
    "stats.json",
    "stats.txt",
];

pub fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}
