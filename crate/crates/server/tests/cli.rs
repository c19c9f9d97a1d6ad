//! End-to-end runs of the `hetqa` binary on the demo snapshot.

mod common;

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn hetqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetqa"))
        .args(args)
        .env_remove("HETQA_STORE")
        .env_remove("HETQA_PORT")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hetqa(args);
    assert!(
        out.status.success(),
        "{args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn ingest_train_eval_answer() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let demo = common::demo_dir();
    let bench = demo.join("benchmark.jsonl");

    let msg = ok(&["ingest", "--snapshot", s(&demo), "--out", s(&store)]);
    assert!(
        msg.contains("evidences") && msg.contains("infobox"),
        "{msg}"
    );

    let train = |mode: &str, out: &Path| -> Value {
        let stdout = ok(&[
            "train",
            "--store",
            s(&store),
            "--benchmark",
            s(&bench),
            "--mode",
            mode,
            "--epochs",
            "8",
            "--lr",
            "0.003",
            "--weight-decay",
            "0",
            "--dim",
            "16",
            "--layers",
            "2",
            "--out",
            s(out),
        ]);
        serde_json::from_str(&stdout).unwrap()
    };
    let (pm, am) = (
        dir.path().join("pruning.ckpt"),
        dir.path().join("answering.ckpt"),
    );
    let summary = train("pruning", &pm);
    assert_eq!(summary["criterion"], "answer_presence_top5");
    let epochs = summary["history"].as_array().unwrap().len();
    assert!((1..=8).contains(&epochs), "{summary}");
    let summary = train("answering", &am);
    assert!(summary["instances"].as_u64().unwrap() >= 4);
    assert!(pm.exists() && am.exists());

    let models = [
        "--pruning-model",
        s(&pm),
        "--answering-model",
        s(&am),
        "--schedule",
        "10,5",
    ];
    let report_path = dir.path().join("report.json");
    let mut args = vec![
        "eval",
        "--store",
        s(&store),
        "--benchmark",
        s(&bench),
        "--gold-sr",
        "--report",
        s(&report_path),
    ];
    args.extend(models);
    let table = ok(&args);
    assert!(table.contains("P@1") && table.contains("MRR"), "{table}");
    let report: Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(report["questions"], 6);
    for k in ["p_at_1", "mrr", "hit_at_5"] {
        let v = report[k].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&v), "{k} = {v}");
    }
    assert_eq!(
        report["presence_after_pruning"].as_array().unwrap().len(),
        2
    );

    // follow-up question with a recorded history
    let history = dir.path().join("history.json");
    std::fs::write(
        &history,
        r#"{"turns": [{"question": "Who wrote the book Angels and Demons?", "answer_label": "Dan Brown", "answer_entity_id": "Q_DB"}]}"#,
    )
    .unwrap();
    let mut args = vec![
        "answer",
        "--store",
        s(&store),
        "--question",
        "the main character in his books?",
        "--history",
        s(&history),
    ];
    args.extend(models);
    let view: Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(view["turn"], 2);
    assert_eq!(view["sr"]["question"], "Dan Brown");
    assert!(view["evidences"].as_array().unwrap().len() <= 5);

    // an explicit SR is used verbatim
    let mut args = vec![
        "answer",
        "--store",
        s(&store),
        "--question",
        "who?",
        "--sr",
        "|Angels and Demons|who wrote the book|human",
    ];
    args.extend(models);
    let view: Value = serde_json::from_str(&ok(&args)).unwrap();
    assert_eq!(view["turn"], 1);
    assert_eq!(view["sr"]["relation"], "who wrote the book");
}

#[test]
fn store_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    ok(&[
        "ingest",
        "--snapshot",
        s(&common::demo_dir()),
        "--out",
        s(&store),
    ]);
    // no --store: the variable supplies it, so the failure is about the missing checkpoint
    let out = Command::new(env!("CARGO_BIN_EXE_hetqa"))
        .args([
            "answer",
            "--question",
            "x",
            "--pruning-model",
            "/nonexistent/p",
            "--answering-model",
            "/nonexistent/a",
        ])
        .env("HETQA_STORE", s(&store))
        .output()
        .unwrap();
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("/nonexistent/p"), "{err}");
}

#[test]
fn gradcheck_passes() {
    let out = ok(&["gradcheck", "--seed", "3"]);
    assert!(out.contains("max relative error"), "{out}");
    ok(&[
        "gradcheck",
        "--mode",
        "pruning",
        "--dim",
        "4",
        "--layers",
        "1",
    ]);
}

#[test]
fn bad_invocations_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = hetqa(&["ingest", "--out", s(&dir.path().join("x"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no snapshot files"));

    let out = hetqa(&[
        "train",
        "--store",
        "/nonexistent",
        "--benchmark",
        "b",
        "--mode",
        "sideways",
        "--out",
        "o",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("sideways"));

    let bad = dir.path().join("facts.jsonl");
    std::fs::write(&bad, "{not json\n").unwrap();
    let out = hetqa(&[
        "ingest",
        "--facts",
        s(&bad),
        "--out",
        s(&dir.path().join("y")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
