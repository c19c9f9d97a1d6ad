//! Drives the module through an embedded interpreter.

use std::ffi::CString;
use std::path::Path;

use hetqa::hetqa;
use pyo3::prelude::*;

fn demo() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures/demo")
        .display()
        .to_string()
}

fn exec(code: &str) {
    pyo3::append_to_inittab!(hetqa);
    Python::initialize();
    Python::attach(|py| {
        let code = CString::new(code).unwrap();
        if let Err(e) = py.run(&code, None, None) {
            e.display(py);
            panic!("python failed: {e}");
        }
    });
}

#[test]
fn end_to_end() {
    let tmp = tempfile::tempdir().unwrap();
    let script = format!(
        r#"
import hetqa, os
demo, tmp = {demo:?}, {tmp:?}
store = os.path.join(tmp, "store")
assert hetqa.ingest(demo, store) > 10

sr = hetqa.parse_sr("|Angels and Demons|who wrote the book|human")
assert sr == {{"context": "", "question": "Angels and Demons", "relation": "who wrote the book", "type": "human"}}
try:
    hetqa.parse_sr("a|b")
    raise AssertionError("accepted a two-slot SR")
except ValueError:
    pass
assert hetqa.is_existential("Is Tom Hanks an actor?")

bench = os.path.join(demo, "benchmark.jsonl")
paths = {{}}
for mode in ("pruning", "answering"):
    paths[mode] = os.path.join(tmp, mode + ".ckpt")
    s = hetqa.train(store, bench, mode, paths[mode], epochs=3, lr=0.003, dim=8, layers=1, seed=1)
    assert 1 <= len(s["history"]) <= 3, s
try:
    hetqa.train(store, bench, "sideways", "x")
    raise AssertionError("accepted an unknown mode")
except ValueError:
    pass

report = hetqa.evaluate(store, bench, paths["pruning"], paths["answering"], schedule="10,5", gold_sr=True)
assert report["questions"] == 6 and 0.0 <= report["p_at_1"] <= 1.0

p = hetqa.Pipeline(store, paths["pruning"], paths["answering"], schedule="10,5")
session = p.session()
t1 = session.ask("Who wrote the book Angels and Demons?")
assert t1["turn"] == 1 and t1["sr"]["question"] == "Angels and Demons"
assert len(t1["evidences"]) <= 5
t2 = session.ask("the main character in his books?")
assert t2["turn"] == 2 and len(session) == 2
assert session.turns[0] == t1

history = [dict(question="Who wrote the book Angels and Demons?", answer_label="Dan Brown", answer_entity_id="Q_DB")]
again = p.answer("the main character in his books?", history)
assert again["turn"] == 2 and again["sr"]["question"] == "Dan Brown"

assert hetqa.gradcheck() < 1e-4
assert hetqa.gradcheck("pruning", dim=4, layers=1, seed=2) < 1e-4
"#,
        demo = demo(),
        tmp = tmp.path().display().to_string(),
    );
    exec(&script);
}
