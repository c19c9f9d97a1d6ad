//! `hetqa` subcommands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hetqa_core::eval::{
    evaluate, gold_sr_generator, load_benchmark, training_instances, BenchmarkConversation,
    HistoryMode, MetricsReport,
};
use hetqa_core::gnn::{
    gradient_check, load_checkpoint, save_checkpoint, train, GnnConfig, GnnModel, GradCheckReport,
    OptimizerConfig, SelectionCriterion, Vocabulary,
};
use hetqa_core::matching::GoldAnswer;
use hetqa_core::pipeline::{
    IterationSchedule, Pipeline, PipelineConfig, DEFAULT_EXPLANATIONS, RETRIEVAL_CAP,
};
use hetqa_core::sr::{parse_sr, BaselineSrGenerator, Conversation, SrGenerator};
use hetqa_core::store::{ingest_snapshot, parse_sources, EvidenceStore, SnapshotPaths, Source};
use hetqa_core::synth::random_graph;

use crate::api::{router, AppState};
use crate::session::SessionStore;
use crate::views::TurnView;

pub const PORT_ENV: &str = "HETQA_PORT";
pub const STORE_ENV: &str = "HETQA_STORE";

pub type CliResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

#[derive(Debug, Parser)]
#[command(
    name = "hetqa",
    version,
    about = "Conversational QA over heterogeneous evidence with iterative GNN pruning"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verbalize a snapshot into an evidence store directory.
    Ingest(IngestArgs),
    /// Train a pruning or answering GNN on a benchmark.
    Train(TrainArgs),
    /// Evaluate a pipeline on a benchmark.
    Eval(EvalArgs),
    /// Answer one question, optionally after a recorded history.
    Answer(AnswerArgs),
    /// Compare analytic and numeric gradients on a random graph.
    Gradcheck(GradcheckArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Directory holding facts.jsonl, text.jsonl, tables.jsonl, infoboxes.jsonl.
    #[arg(long)]
    pub snapshot: Option<PathBuf>,
    #[arg(long)]
    pub facts: Option<PathBuf>,
    #[arg(long)]
    pub text: Option<PathBuf>,
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[arg(long)]
    pub infoboxes: Option<PathBuf>,
    /// Output store directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Pruning,
    Answering,
}

#[derive(Debug, Args)]
pub struct StoreArg {
    /// Evidence store directory written by `ingest`.
    #[arg(long, env = STORE_ENV)]
    pub store: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub pruning_model: PathBuf,
    #[arg(long)]
    pub answering_model: PathBuf,
    /// Comma-separated pruning budgets; empty for a single answering pass.
    #[arg(long, default_value = "100,20")]
    pub schedule: IterationSchedule,
    #[arg(long, default_value_t = DEFAULT_EXPLANATIONS)]
    pub explanations: usize,
    #[arg(long, default_value_t = RETRIEVAL_CAP)]
    pub retrieval_cap: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[arg(long)]
    pub benchmark: PathBuf,
    /// Dev benchmark for epoch selection; the training set when absent.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Answer-loss weight; defaults to the mode preset.
    #[arg(long)]
    pub w_entity: Option<f64>,
    /// Evidence-loss weight; defaults to one minus the answer weight.
    #[arg(long)]
    pub w_evidence: Option<f64>,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-5)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.01)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = RETRIEVAL_CAP)]
    pub retrieval_cap: usize,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub benchmark: PathBuf,
    #[arg(long, default_value = "predicted")]
    pub history: HistoryMode,
    #[arg(long, default_value = "kb,text,table,infobox")]
    pub sources: String,
    /// Use the benchmark's SRs where given instead of generating them.
    #[arg(long)]
    pub gold_sr: bool,
    /// Structured report to write.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnswerArgs {
    #[command(flatten)]
    pub store: StoreArg,
    #[command(flatten)]
    pub models: ModelArgs,
    #[arg(long)]
    pub question: String,
    /// JSON conversation `{"turns": [{"question", "answer_label", "answer_entity_id"?}]}`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    /// Use this SR instead of generating one.
    #[arg(long)]
    pub sr: Option<String>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, value_enum, default_value = "answering")]
    pub mode: Mode,
    #[arg(long, default_value_t = 6)]
    pub dim: usize,
    #[arg(long, default_value_t = 2)]
    pub layers: usize,
    #[arg(long, default_value_t = 5)]
    pub evidences: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = PORT_ENV, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[command(flatten)]
    pub store: StoreArg,
    #[command(flatten)]
    pub models: ModelArgs,
    /// Append-only session log; sessions are memory-only without it.
    #[arg(long)]
    pub sessions_file: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Train(a) => {
            train_model(&a).map(|s| println!("{}", serde_json::to_string_pretty(&s).unwrap()))
        }
        Command::Eval(a) => eval_cmd(&a),
        Command::Answer(a) => {
            answer_cmd(a).map(|v| println!("{}", serde_json::to_string_pretty(&v).unwrap()))
        }
        Command::Gradcheck(a) => gradcheck_cmd(&a),
        Command::Serve(a) => serve(a),
    }
}

fn ingest(a: IngestArgs) -> CliResult<()> {
    let mut paths = a
        .snapshot
        .as_deref()
        .map(SnapshotPaths::in_dir)
        .unwrap_or_default();
    paths.facts = a.facts.or(paths.facts);
    paths.text = a.text.or(paths.text);
    paths.tables = a.tables.or(paths.tables);
    paths.infoboxes = a.infoboxes.or(paths.infoboxes);
    if paths.facts.is_none()
        && paths.text.is_none()
        && paths.tables.is_none()
        && paths.infoboxes.is_none()
    {
        return Err(
            "no snapshot files given (use --snapshot or --facts/--text/--tables/--infoboxes)"
                .into(),
        );
    }
    let store = ingest_snapshot(&paths)?;
    store.save(&a.out)?;
    let count = |s: Source| store.evidences().filter(|e| e.source == s).count();
    println!(
        "{} evidences ({} kb, {} text, {} table, {} infobox), {} entities -> {}",
        store.len(),
        count(Source::Kb),
        count(Source::Text),
        count(Source::Table),
        count(Source::Infobox),
        store.entities().count(),
        a.out.display()
    );
    Ok(())
}

fn sr_generator(benchmark: &[BenchmarkConversation]) -> CliResult<Box<dyn SrGenerator>> {
    Ok(Box::new(gold_sr_generator(
        benchmark,
        Some(Box::new(BaselineSrGenerator)),
    )?))
}

/// Store vocabulary plus every benchmark question and SR.
pub fn training_vocabulary(
    store: &EvidenceStore,
    benchmarks: &[&[BenchmarkConversation]],
) -> Vocabulary {
    let extra: Vec<&str> = benchmarks
        .iter()
        .flat_map(|b| b.iter())
        .flat_map(|c| c.turns.iter())
        .flat_map(|t| std::iter::once(t.question.as_str()).chain(t.sr.as_deref()))
        .collect();
    Vocabulary::for_corpus(store, extra)
}

fn task_weights(mode: Mode, w_entity: Option<f64>, w_evidence: Option<f64>) -> (f64, f64) {
    let preset = match mode {
        Mode::Pruning => GnnConfig::pruning(),
        Mode::Answering => GnnConfig::answering(),
    };
    match (w_entity, w_evidence) {
        (Some(e), Some(v)) => (e, v),
        (Some(e), None) => (e, 1.0 - e),
        (None, Some(v)) => (1.0 - v, v),
        (None, None) => (preset.w_entity, preset.w_evidence),
    }
}

/// Trains and saves a checkpoint; returns the run summary.
pub fn train_model(a: &TrainArgs) -> CliResult<serde_json::Value> {
    let store = EvidenceStore::load(&a.store.store)?;
    let bench = load_benchmark(&a.benchmark)?;
    let dev_bench = a
        .dev
        .as_deref()
        .map(load_benchmark)
        .transpose()?
        .unwrap_or_default();
    let vocab = training_vocabulary(&store, &[&bench, &dev_bench]);
    let instances = |b: &[BenchmarkConversation]| -> CliResult<_> {
        Ok(training_instances(
            b,
            &store,
            sr_generator(b)?.as_ref(),
            a.retrieval_cap,
        )?)
    };
    let training = instances(&bench)?;
    let dev = instances(&dev_bench)?;

    let (w_entity, w_evidence) = task_weights(a.mode, a.w_entity, a.w_evidence);
    let (base, criterion) = match a.mode {
        Mode::Pruning => (GnnConfig::pruning(), SelectionCriterion::AnswerPresenceTop5),
        Mode::Answering => (GnnConfig::answering(), SelectionCriterion::AnswerP1),
    };
    let cfg = GnnConfig {
        dim: a.dim,
        layers: a.layers,
        w_entity,
        w_evidence,
        seed: a.seed,
        ..base
    };
    let model = GnnModel::new(cfg, vocab)?;
    let opt = OptimizerConfig {
        learning_rate: a.lr,
        weight_decay: a.weight_decay,
        epochs: a.epochs,
        batch_size: a.batch_size,
        seed: a.seed,
        ..Default::default()
    };
    let out = train(&model, &training, &dev, &opt, criterion)?;
    save_checkpoint(&out.model, &a.out)?;
    let summary = serde_json::json!({
        "checkpoint": a.out,
        "instances": training.len(),
        "skipped": out.skipped,
        "criterion": criterion,
        "best_epoch": out.best_epoch,
        "best_dev_score": out.best_dev_score,
        "history": out.history,
    });
    Ok(summary)
}

/// Loads both checkpoints and assembles a pipeline.
pub fn build_pipeline(
    store: &Path,
    models: &ModelArgs,
    generator: Arc<dyn SrGenerator>,
) -> CliResult<Pipeline> {
    let store = EvidenceStore::load(store).map_err(|e| format!("{}: {e}", store.display()))?;
    let load = |p: &Path| load_checkpoint(p).map_err(|e| format!("{}: {e}", p.display()));
    let pruning = load(&models.pruning_model)?;
    let answering = load(&models.answering_model)?;
    Ok(Pipeline {
        store: Arc::new(store),
        generator,
        pruning: Arc::new(pruning),
        answering: Arc::new(answering),
        config: PipelineConfig {
            schedule: models.schedule.clone(),
            retrieval_cap: models.retrieval_cap,
            explanation_size: models.explanations,
            ..Default::default()
        },
    })
}

/// Builds the pipeline described by `a` and scores it on the benchmark.
pub fn eval_report(a: &EvalArgs) -> CliResult<MetricsReport> {
    let bench = load_benchmark(&a.benchmark)?;
    let generator: Arc<dyn SrGenerator> = if a.gold_sr {
        Arc::from(sr_generator(&bench)?)
    } else {
        Arc::new(BaselineSrGenerator)
    };
    let pipeline = build_pipeline(&a.store.store, &a.models, generator)?;
    let sources = parse_sources(&a.sources)?;
    if sources.is_empty() {
        return Err("at least one evidence source is required".into());
    }
    Ok(evaluate(&bench, &pipeline, a.history, &sources)?)
}

fn eval_cmd(a: &EvalArgs) -> CliResult<()> {
    let report = eval_report(a)?;
    print!("{}", report.to_table());
    if let Some(path) = &a.report {
        std::fs::write(path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(())
}

/// Runs `hetqa answer` and returns the view it prints.
pub fn answer_cmd(a: AnswerArgs) -> CliResult<TurnView> {
    let history: Conversation = match &a.history {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
        None => Conversation::new(),
    };
    let generator: Arc<dyn SrGenerator> = match &a.sr {
        Some(sr) => Arc::new(FixedSr(parse_sr(sr)?)),
        None => Arc::new(BaselineSrGenerator),
    };
    let pipeline = build_pipeline(&a.store.store, &a.models, generator)?;
    let result = pipeline.run_turn(&history, &a.question)?;
    Ok(TurnView::from_result(history.next_turn_number(), &result))
}

struct FixedSr(hetqa_core::sr::StructuredRepresentation);

impl SrGenerator for FixedSr {
    fn generate(
        &self,
        _: &Conversation,
        _: &str,
    ) -> hetqa_core::Result<Vec<hetqa_core::sr::StructuredRepresentation>> {
        Ok(vec![self.0.clone()])
    }
}

/// Analytic vs numeric gradients of a fresh model on a random graph.
pub fn gradcheck_report(a: &GradcheckArgs) -> CliResult<GradCheckReport> {
    let graph = random_graph(a.evidences.max(1), a.evidences + 1, a.seed);
    let texts: Vec<String> = graph
        .evidences()
        .iter()
        .map(|e| e.evidence.text.clone())
        .chain(
            graph
                .entities()
                .iter()
                .map(|e| format!("{} {}", e.entity.label, e.entity.kb_type)),
        )
        .collect();
    let vocab = Vocabulary::build(texts.iter().map(|s| s.as_str()));
    let base = match a.mode {
        Mode::Pruning => GnnConfig::pruning(),
        Mode::Answering => GnnConfig::answering(),
    };
    let model = GnnModel::new(
        GnnConfig {
            dim: a.dim,
            layers: a.layers,
            seed: a.seed,
            ..base
        },
        vocab,
    )?;
    let gold = &graph.entities()[graph.num_entities() / 2].entity;
    let sr = parse_sr(&format!(
        "|{}|{}|thing",
        gold.label,
        graph.evidences()[0].evidence.text
    ))?;
    Ok(gradient_check(
        &model,
        &graph,
        &sr,
        &[GoldAnswer::new(gold.id.clone(), gold.label.clone())],
        None,
    )?)
}

fn gradcheck_cmd(a: &GradcheckArgs) -> CliResult<()> {
    let report = gradcheck_report(a)?;
    for g in &report.groups {
        println!(
            "{:<40} {:>6} {:>12.3e}",
            g.tensor, g.checked, g.max_rel_error
        );
    }
    println!(
        "checked {} parameters, max relative error {:.3e}",
        report.checked, report.max_rel_error
    );
    if report.max_rel_error > a.tolerance {
        return Err(format!(
            "gradient check failed: {:.3e} > {:.1e}",
            report.max_rel_error, a.tolerance
        )
        .into());
    }
    Ok(())
}

fn serve(a: ServeArgs) -> CliResult<()> {
    let pipeline = build_pipeline(&a.store.store, &a.models, Arc::new(BaselineSrGenerator))?;
    let sessions = match &a.sessions_file {
        Some(p) => SessionStore::persistent(p)?,
        None => SessionStore::in_memory(),
    };
    let state = AppState::new(pipeline, sessions);
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), a.port)).await?;
        log::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn weights_follow_mode_and_flags() {
        assert_eq!(task_weights(Mode::Pruning, None, None), (0.3, 0.7));
        assert_eq!(task_weights(Mode::Answering, None, None), (0.5, 0.5));
        assert_eq!(task_weights(Mode::Answering, Some(0.0), None), (0.0, 1.0));
        assert_eq!(task_weights(Mode::Pruning, None, Some(0.25)), (0.75, 0.25));
    }

    #[test]
    fn flags_beat_environment() {
        std::env::set_var(PORT_ENV, "9999");
        std::env::set_var(STORE_ENV, "/env/store");
        let parse = |extra: &[&str]| {
            let mut args = vec![
                "hetqa",
                "serve",
                "--pruning-model",
                "p",
                "--answering-model",
                "a",
            ];
            args.extend_from_slice(extra);
            match Cli::try_parse_from(args).unwrap().command {
                Command::Serve(s) => s,
                _ => unreachable!(),
            }
        };
        let s = parse(&[]);
        assert_eq!(
            (s.port, s.store.store.to_str().unwrap()),
            (9999, "/env/store")
        );
        let s = parse(&["--port", "7000", "--store", "/flag/store"]);
        assert_eq!(
            (s.port, s.store.store.to_str().unwrap()),
            (7000, "/flag/store")
        );
        assert_eq!(s.models.schedule.budgets(), &[100, 20]);
        std::env::remove_var(PORT_ENV);
        std::env::remove_var(STORE_ENV);
    }
}
