use std::fs;
use std::path::Path;
use std::process::Command;

use selfcall::core::lm::{Pattern, RuleSpec, ScriptSpec};
use selfcall::formats::write_json;

fn selfcall(args: &[&str]) -> String {
    let out = Command::new(env!("CARGO_BIN_EXE_selfcall"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn dateset_writes_every_item() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("dateset.jsonl");
    selfcall(&["dateset", "--seed", "3", "--out", path(&out)]);
    assert_eq!(fs::read_to_string(&out).unwrap().lines().count(), 9_400);
}

#[test]
fn index_builds_from_pages() {
    let tmp = tempfile::tempdir().unwrap();
    let pages = tmp.path().join("pages.jsonl");
    fs::write(
        &pages,
        r#"{"id":"p1","title":"Nile","sections":[{"heading":"Course","text":"The Nile flows into the Mediterranean Sea."}]}
{"id":"p2","title":"Rhine","sections":[{"heading":"","text":"The Rhine flows into the North Sea."}]}
"#,
    )
    .unwrap();
    let index = tmp.path().join("index.json");
    let stdout = selfcall(&["index", "--pages", path(&pages), "--out", path(&index)]);
    assert!(stdout.starts_with("indexed 2 sections"));
    assert!(index.exists());
}

#[test]
fn generate_runs_a_calculator_call() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("corpus.jsonl"), "").unwrap();
    let spec = ScriptSpec {
        pieces: ["Total", ":", "Calculator", "27", " +", " 4", " *", " 2", " 35", " items"]
            .map(String::from)
            .to_vec(),
        support: None,
        rules: vec![
            RuleSpec {
                pattern: Pattern::EndsWith("Total:".into()),
                dist: vec![(" [".into(), 0.9)],
            },
            RuleSpec {
                pattern: Pattern::EndsWith("35]".into()),
                dist: vec![(" items".into(), 1.0)],
            },
        ],
        scripts: vec![(" [".into(), "Calculator(27 + 4 * 2) ->".into())],
    };
    write_json(&dir.join("lm.json"), &spec).unwrap();
    fs::write(
        dir.join("run.toml"),
        "corpus = [\"corpus.jsonl\"]\noutput_dir = \"out\"\n\n[lm]\nkind = \"scripted\"\npath = \"lm.json\"\n",
    )
    .unwrap();
    fs::write(dir.join("prompt.txt"), "Total:").unwrap();
    let trace = dir.join("trace.json");
    let stdout = selfcall(&[
        "generate",
        "--config",
        path(&dir.join("run.toml")),
        "--prompt",
        path(&dir.join("prompt.txt")),
        "--max-tokens",
        "12",
        "--date-override",
        "2020-11-20",
        "--trace-out",
        path(&trace),
    ]);
    assert!(stdout.starts_with(" [Calculator(27 + 4 * 2) -> 35] items"), "{stdout:?}");
    assert!(fs::read_to_string(&trace).unwrap().contains("\"result\": \"35\""));

    let plain = selfcall(&[
        "generate",
        "--config",
        path(&dir.join("run.toml")),
        "--prompt",
        path(&dir.join("prompt.txt")),
        "--max-tokens",
        "4",
        "--disable-tools",
    ]);
    assert!(!plain.contains(" ["), "{plain:?}");
}
