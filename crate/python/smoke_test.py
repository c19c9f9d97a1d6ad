"""Smoke test for the `hetqa` extension module.

    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/hetqa-*.whl
    python -m pytest python/smoke_test.py
"""

import os
import tempfile

import hetqa

DEMO = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "fixtures", "demo")
BENCH = os.path.join(DEMO, "benchmark.jsonl")


def test_sr_helpers():
    assert hetqa.parse_sr("|Angels and Demons|who wrote the book|human")["question"] == "Angels and Demons"
    assert hetqa.is_existential("Is Tom Hanks an actor?")
    assert not hetqa.is_existential("who played him?")


def test_gradients():
    assert hetqa.gradcheck(seed=4) < 1e-4


def test_demo_conversation():
    with tempfile.TemporaryDirectory() as tmp:
        store = os.path.join(tmp, "store")
        assert hetqa.ingest(DEMO, store) > 0
        models = {}
        for mode in ("pruning", "answering"):
            models[mode] = os.path.join(tmp, mode + ".ckpt")
            hetqa.train(store, BENCH, mode, models[mode], epochs=10, lr=0.003, weight_decay=0.0, seed=1)

        report = hetqa.evaluate(store, BENCH, models["pruning"], models["answering"], schedule="10,5", gold_sr=True)
        assert report["questions"] == 6

        pipeline = hetqa.Pipeline(store, models["pruning"], models["answering"], schedule="10,5")
        session = pipeline.session()
        first = session.ask("Who wrote the book Angels and Demons?")
        assert first["sr"]["question"] == "Angels and Demons"
        assert {e["source"] for e in first["evidences"]} <= {"kb", "text", "table", "infobox"}
        second = session.ask("the main character in his books?")
        assert second["turn"] == 2
        assert second["sr"]["question"] == first["answer"]["label"]
