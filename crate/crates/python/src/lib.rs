//! Python bindings. Results cross the boundary as plain dicts and lists
//! with the same shape as the HTTP API.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use hetqa_core::pipeline::{IterationSchedule, Pipeline, DEFAULT_EXPLANATIONS, RETRIEVAL_CAP};
use hetqa_core::sr::{self, BaselineSrGenerator, Conversation};
use hetqa_core::store::{ingest_snapshot, SnapshotPaths};
use hetqa_server::cli::{self, EvalArgs, GradcheckArgs, Mode, ModelArgs, StoreArg, TrainArgs};
use hetqa_server::views::{SrView, TurnView};

fn runtime<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn value<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(runtime)?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn from_py<T: serde::de::DeserializeOwned>(py: Python<'_>, obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&text).map_err(value)
}

fn mode(name: &str) -> PyResult<Mode> {
    match name {
        "pruning" => Ok(Mode::Pruning),
        "answering" => Ok(Mode::Answering),
        other => Err(PyValueError::new_err(format!(
            "mode must be 'pruning' or 'answering', got {other:?}"
        ))),
    }
}

fn model_args(
    pruning_model: PathBuf,
    answering_model: PathBuf,
    schedule: &str,
    explanations: usize,
    retrieval_cap: usize,
) -> PyResult<ModelArgs> {
    Ok(ModelArgs {
        pruning_model,
        answering_model,
        schedule: schedule.parse::<IterationSchedule>().map_err(value)?,
        explanations,
        retrieval_cap,
    })
}

/// Verbalizes the snapshot in `snapshot` into a store at `out`; returns the evidence count.
#[pyfunction]
fn ingest(py: Python<'_>, snapshot: PathBuf, out: PathBuf) -> PyResult<usize> {
    py.detach(|| {
        let store = ingest_snapshot(&SnapshotPaths::in_dir(&snapshot))?;
        store.save(&out)?;
        Ok::<_, hetqa_core::Error>(store.len())
    })
    .map_err(runtime)
}

/// Parses `context|question|relation|type`.
#[pyfunction]
fn parse_sr(py: Python<'_>, text: &str) -> PyResult<Py<PyAny>> {
    let sr = sr::parse_sr(text).map_err(value)?;
    to_py(py, &SrView::from(&sr))
}

#[pyfunction]
fn is_existential(question: &str) -> bool {
    sr::is_existential_question(question)
}

/// Trains a model and writes its checkpoint to `out`; returns the run summary.
#[pyfunction]
#[pyo3(signature = (
    store, benchmark, mode, out, *, dev=None, epochs=5, lr=1e-5, weight_decay=0.01, dim=32, layers=3,
    batch_size=1, seed=0, w_entity=None, w_evidence=None, retrieval_cap=RETRIEVAL_CAP
))]
#[allow(clippy::too_many_arguments)]
fn train(
    py: Python<'_>,
    store: PathBuf,
    benchmark: PathBuf,
    mode: &str,
    out: PathBuf,
    dev: Option<PathBuf>,
    epochs: usize,
    lr: f64,
    weight_decay: f64,
    dim: usize,
    layers: usize,
    batch_size: usize,
    seed: u64,
    w_entity: Option<f64>,
    w_evidence: Option<f64>,
    retrieval_cap: usize,
) -> PyResult<Py<PyAny>> {
    let args = TrainArgs {
        store: StoreArg { store },
        benchmark,
        dev,
        mode: self::mode(mode)?,
        w_entity,
        w_evidence,
        dim,
        layers,
        epochs,
        lr,
        weight_decay,
        batch_size,
        seed,
        retrieval_cap,
        out,
    };
    let summary = py.detach(|| cli::train_model(&args)).map_err(runtime)?;
    to_py(py, &summary)
}

/// Runs the full pipeline over a benchmark and returns the metrics report.
#[pyfunction]
#[pyo3(signature = (
    store, benchmark, pruning_model, answering_model, *, schedule="100,20", history="predicted",
    sources="kb,text,table,infobox", gold_sr=false
))]
#[allow(clippy::too_many_arguments)]
fn evaluate(
    py: Python<'_>,
    store: PathBuf,
    benchmark: PathBuf,
    pruning_model: PathBuf,
    answering_model: PathBuf,
    schedule: &str,
    history: &str,
    sources: &str,
    gold_sr: bool,
) -> PyResult<Py<PyAny>> {
    let args = EvalArgs {
        store: StoreArg { store },
        models: model_args(
            pruning_model,
            answering_model,
            schedule,
            DEFAULT_EXPLANATIONS,
            RETRIEVAL_CAP,
        )?,
        benchmark,
        history: history.parse().map_err(value)?,
        sources: sources.to_string(),
        gold_sr,
        report: None,
    };
    let report = py.detach(|| cli::eval_report(&args)).map_err(runtime)?;
    to_py(py, &report)
}

/// Largest relative gradient error of a fresh model on a random graph.
#[pyfunction]
#[pyo3(signature = (mode="answering", dim=6, layers=2, evidences=5, seed=0))]
fn gradcheck(
    py: Python<'_>,
    mode: &str,
    dim: usize,
    layers: usize,
    evidences: usize,
    seed: u64,
) -> PyResult<f64> {
    let args = GradcheckArgs {
        mode: self::mode(mode)?,
        dim,
        layers,
        evidences,
        seed,
        tolerance: f64::INFINITY,
    };
    let report = py
        .detach(|| cli::gradcheck_report(&args))
        .map_err(runtime)?;
    Ok(report.max_rel_error)
}

/// A loaded store plus pruning and answering models.
#[pyclass(name = "Pipeline", frozen)]
struct PyPipeline {
    inner: Arc<Pipeline>,
}

#[pymethods]
impl PyPipeline {
    #[new]
    #[pyo3(signature = (store, pruning_model, answering_model, *, schedule="100,20", explanations=DEFAULT_EXPLANATIONS, retrieval_cap=RETRIEVAL_CAP))]
    fn new(
        store: PathBuf,
        pruning_model: PathBuf,
        answering_model: PathBuf,
        schedule: &str,
        explanations: usize,
        retrieval_cap: usize,
    ) -> PyResult<Self> {
        let models = model_args(
            pruning_model,
            answering_model,
            schedule,
            explanations,
            retrieval_cap,
        )?;
        let inner =
            cli::build_pipeline(&store, &models, Arc::new(BaselineSrGenerator)).map_err(runtime)?;
        Ok(Self {
            inner: Arc::new(inner),
        })
    }

    /// Answers `question` after `history`, a list of
    /// `{"question", "answer_label", "answer_entity_id"?}` dicts.
    #[pyo3(signature = (question, history=None))]
    fn answer(
        &self,
        py: Python<'_>,
        question: &str,
        history: Option<&Bound<'_, PyAny>>,
    ) -> PyResult<Py<PyAny>> {
        let conversation = match history {
            Some(h) => Conversation {
                id: None,
                turns: from_py(py, h)?,
            },
            None => Conversation::new(),
        };
        let view = run(py, &self.inner, &conversation, question)?;
        to_py(py, &view)
    }

    /// Starts an empty conversation.
    fn session(&self) -> PySession {
        PySession {
            pipeline: self.inner.clone(),
            conversation: Conversation::new(),
            turns: Vec::new(),
        }
    }
}

fn run(
    py: Python<'_>,
    pipeline: &Arc<Pipeline>,
    conversation: &Conversation,
    question: &str,
) -> PyResult<TurnView> {
    let question = question.trim();
    if question.is_empty() {
        return Err(PyValueError::new_err("question must not be empty"));
    }
    let result = py
        .detach(|| pipeline.run_turn(conversation, question))
        .map_err(runtime)?;
    Ok(TurnView::from_result(
        conversation.next_turn_number(),
        &result,
    ))
}

/// A conversation whose history is the sequence of predicted answers.
#[pyclass(name = "Session")]
struct PySession {
    pipeline: Arc<Pipeline>,
    conversation: Conversation,
    turns: Vec<TurnView>,
}

#[pymethods]
impl PySession {
    fn ask(&mut self, py: Python<'_>, question: &str) -> PyResult<Py<PyAny>> {
        let view = run(py, &self.pipeline, &self.conversation, question)?;
        let (label, id) = view.history_answer();
        self.conversation.push(view.question.clone(), label, id);
        let out = to_py(py, &view);
        self.turns.push(view);
        out
    }

    #[getter]
    fn turns(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.turns)
    }

    fn __len__(&self) -> usize {
        self.turns.len()
    }
}

#[pymodule]
pub fn hetqa(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(ingest, m)?)?;
    m.add_function(wrap_pyfunction!(parse_sr, m)?)?;
    m.add_function(wrap_pyfunction!(is_existential, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_class::<PyPipeline>()?;
    m.add_class::<PySession>()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_and_schedules_validate() {
        assert_eq!(mode("pruning").unwrap(), Mode::Pruning);
        assert!(mode("Pruning").is_err());
        assert!(model_args("p".into(), "a".into(), "10,5", 5, 500).is_ok());
        assert!(model_args("p".into(), "a".into(), "5,10", 5, 500).is_err());
    }
}
