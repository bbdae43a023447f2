//! Command-line interface: one subcommand per workflow. Every subcommand
//! reads its inputs, writes artifacts only to the paths it was given, and
//! reports failures as a JSON object on stderr with a nonzero exit code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use kgvet_core::align::{gradient_check, AlignConfig};
use kgvet_core::embed::HashEmbedder;
use kgvet_core::kg::{KgFormat, KnowledgeGraph, ParseOptions};
use kgvet_core::medddx::{build_dataset, DdxCase};
use kgvet_core::question::{Perturbation, Question};
use kgvet_core::relations::DescriptionDictionary;
use kgvet_core::review::{review_triplet, ReviewVerdict, VerdictKind};
use kgvet_core::transe::{
    evaluate_link_prediction, train_transe_with_log, Distance, EmbeddingTable, TransEConfig,
};
use kgvet_core::Triplet;
use serde::Deserialize;

use crate::agent::{AgentConfig, AgentMode, LlmReviewer};
use crate::clock::ClockFactory;
use crate::gateway::{Gateway, HttpGateway, MockGateway, MockScript, ProviderConfig};
use crate::harness::{self, evaluate, AgentRunner, MatchStrategy, QuestionRunner, ReviewerSpec};
use crate::io;

#[derive(Parser)]
#[command(
    name = "kgvet",
    version,
    about = "Knowledge-graph-verified question answering"
)]
pub struct Cli {
    /// TOML config file; command-line flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train translation embeddings on a knowledge graph file.
    TrainEmbeddings(TrainArgs),
    /// Score held-out triplets with filtered ranking metrics.
    EvalLinkpred(LinkpredArgs),
    /// Run one question through the agent loop.
    Answer(AnswerArgs),
    /// Run a dataset across seeds and report accuracy statistics.
    Eval(EvalArgs),
    /// Rewrite a dataset with a label perturbation scheme.
    Perturb(PerturbArgs),
    /// Build a differential-diagnosis dataset with tiered difficulty.
    BuildMedddx(MedddxArgs),
    /// Verify analytic alignment gradients against finite differences.
    GradCheck(GradArgs),
    /// Review a single triplet against the graph.
    Review(ReviewArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Knowledge graph file (TSV by default, CSV by extension or --format).
    #[arg(long)]
    kg: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long, default_value_t = 128)]
    dim: usize,
    #[arg(long, default_value_t = 1.0)]
    margin: f64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    #[arg(long, default_value_t = 500)]
    epochs: usize,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, default_value_t = 1)]
    negatives: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = DistanceArg::L2)]
    distance: DistanceArg,
    /// Train on this fraction only, holding the rest out (same split as
    /// eval-linkpred given the same ratio and seed).
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, default_value_t = 42)]
    split_seed: u64,
    /// Where to write the embedding table.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LinkpredArgs {
    #[arg(long)]
    kg: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    table: PathBuf,
    /// Evaluate on a separate triplet file instead of a recomputed split.
    #[arg(long, conflicts_with = "split")]
    test: Option<PathBuf>,
    /// Recompute the train/test split and evaluate on the held-out part.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, default_value_t = 42)]
    split_seed: u64,
    /// Write metrics JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnswerArgs {
    /// Single question as a JSON object (dataset row schema).
    #[arg(long)]
    question: PathBuf,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Scripted-reply file; enables the deterministic mock gateway.
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    skip_review: bool,
    #[arg(long)]
    skip_revise: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::MultiChoice)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value_t = ReviewerArg::Llm)]
    reviewer: ReviewerArg,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Match open-ended answers offline instead of via the gateway.
    #[arg(long)]
    offline_match: bool,
    /// Write the trace JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    kg: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::MultiChoice)]
    mode: ModeArg,
    #[arg(long)]
    k: Option<u32>,
    #[arg(long)]
    skip_review: bool,
    #[arg(long)]
    skip_revise: bool,
    /// Comma-separated seed list.
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = ReviewerArg::Llm)]
    reviewer: ReviewerArg,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long)]
    offline_match: bool,
    /// Write the report JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write every trace as JSONL.
    #[arg(long)]
    traces_out: Option<PathBuf>,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// cycle_bcad, cycle_cab, swap_ba, or relabel_efgh.
    #[arg(long)]
    scheme: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MedddxArgs {
    /// Cases as JSONL: {"id", "question", "correct"} per line.
    #[arg(long)]
    cases: PathBuf,
    /// Candidate pool file: `name<TAB>v1,v2,...` per line.
    #[arg(long, conflicts_with = "names")]
    pool: Option<PathBuf>,
    /// Candidate names (one per line) to embed offline instead of a pool.
    #[arg(long)]
    names: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GradArgs {
    /// Random instances to check.
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    embed_dim: usize,
    #[arg(long, default_value_t = 7)]
    model_dim: usize,
    #[arg(long, default_value_t = 4)]
    hidden_dim: usize,
    #[arg(long, default_value_t = 6)]
    tokens: usize,
    #[arg(long)]
    scale_attention: bool,
    #[arg(long)]
    relu_ffn: bool,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

#[derive(Args)]
struct ReviewArgs {
    #[arg(long)]
    kg: PathBuf,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    head: String,
    #[arg(long)]
    relation: String,
    #[arg(long)]
    tail: String,
    #[arg(long, value_enum, default_value_t = ReviewerArg::Llm)]
    reviewer: ReviewerArg,
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    threshold: f64,
    #[arg(long)]
    script: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum FormatArg {
    Tsv,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum DistanceArg {
    L2,
    L1,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum ModeArg {
    #[value(name = "multi_choice")]
    MultiChoice,
    #[value(name = "open_ended")]
    OpenEnded,
}

#[derive(ValueEnum, Clone, Copy, PartialEq, Eq)]
enum ReviewerArg {
    Llm,
    Transe,
}

/// Values a config file can preset; flags beat these, these beat built-ins.
#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    provider: Option<ProviderConfig>,
    eval: EvalDefaults,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct EvalDefaults {
    k: Option<u32>,
    seeds: Option<Vec<u64>>,
    workers: Option<usize>,
}

/// Parse argv, dispatch, and translate failures into a JSON error line on
/// stderr. This is the whole program behind `main`.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!(
                "{}",
                serde_json::json!({"error": {"kind": "usage", "message": e.to_string()}})
            );
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({"error": {"kind": "runtime", "message": format!("{e:#}")}})
            );
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    let config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str::<FileConfig>(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => FileConfig::default(),
    };
    match cli.command {
        Command::TrainEmbeddings(args) => train_embeddings(args),
        Command::EvalLinkpred(args) => eval_linkpred(args),
        Command::Answer(args) => answer(args, &config),
        Command::Eval(args) => eval(args, &config),
        Command::Perturb(args) => perturb_cmd(args),
        Command::BuildMedddx(args) => build_medddx(args),
        Command::GradCheck(args) => grad_check(args),
        Command::Review(args) => review_cmd(args, &config),
    }
}

// ---------------------------------------------------------------------------
// Shared plumbing

fn graph_format(path: &Path, flag: Option<FormatArg>) -> KgFormat {
    match flag {
        Some(FormatArg::Tsv) => KgFormat::Tsv,
        Some(FormatArg::Csv) => KgFormat::Csv,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => KgFormat::Csv,
            _ => KgFormat::Tsv,
        },
    }
}

fn load_graph(path: &Path, flag: Option<FormatArg>) -> Result<KnowledgeGraph> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading graph {}", path.display()))?;
    KnowledgeGraph::parse(&text, ParseOptions::new(graph_format(path, flag)))
        .with_context(|| format!("parsing graph {}", path.display()))
}

fn load_table_file(path: &Path) -> Result<EmbeddingTable> {
    io::load_table(path).with_context(|| format!("reading embedding table {}", path.display()))
}

fn load_dataset_file(path: &Path) -> Result<Vec<Question>> {
    harness::load_dataset(path).with_context(|| format!("reading dataset {}", path.display()))
}

fn load_optional_graph(path: &Option<PathBuf>, flag: Option<FormatArg>) -> Result<KnowledgeGraph> {
    match path {
        Some(p) => load_graph(p, flag),
        // Without a graph nothing grounds, so review keeps everything as
        // incomplete; useful for dry runs and scripted tests.
        None => Ok(KnowledgeGraph::from_triplets(&[])),
    }
}

fn build_gateway(
    script: &Option<PathBuf>,
    config: &FileConfig,
) -> Result<(Box<dyn Gateway>, ClockFactory)> {
    match script {
        Some(path) => {
            let script = MockScript::load(path)
                .with_context(|| format!("reading script {}", path.display()))?;
            Ok((
                Box::new(MockGateway::new(script)),
                ClockFactory::Step { start: 0, step: 1 },
            ))
        }
        None => {
            let provider = config.provider.clone().unwrap_or_default();
            let gateway = HttpGateway::new(provider)?;
            Ok((Box::new(gateway), ClockFactory::System))
        }
    }
}

fn emit(out: &Option<PathBuf>, payload: &str) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, payload).with_context(|| format!("writing {}", path.display()))?
        }
        None => println!("{payload}"),
    }
    Ok(())
}

fn parse_scheme(name: &str) -> Result<Perturbation> {
    Perturbation::ALL
        .into_iter()
        .find(|p| p.name() == name)
        .ok_or_else(|| {
            let known: Vec<&str> = Perturbation::ALL.iter().map(|p| p.name()).collect();
            anyhow!(
                "unknown scheme '{name}'; expected one of {}",
                known.join(", ")
            )
        })
}

fn load_question_file(path: &Path) -> Result<Question> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        question: String,
        #[serde(default)]
        options: BTreeMap<String, String>,
        answer: String,
    }
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading question {}", path.display()))?;
    let row: Row = serde_json::from_str(&text)
        .with_context(|| format!("parsing question {}", path.display()))?;
    let question = Question::new(row.id, row.question, row.options, row.answer);
    question.validate()?;
    Ok(question)
}

// ---------------------------------------------------------------------------
// Subcommands

fn train_embeddings(args: TrainArgs) -> Result<i32> {
    let graph = load_graph(&args.kg, args.format)?;
    let cfg = TransEConfig {
        dim: args.dim,
        margin: args.margin,
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch,
        negatives_per_positive: args.negatives,
        seed: args.seed,
        distance: match args.distance {
            DistanceArg::L2 => Distance::L2,
            DistanceArg::L1 => Distance::L1,
        },
    };
    let train = match args.split {
        Some(ratio) => graph.split(ratio, args.split_seed)?.0,
        None => graph,
    };
    let (table, losses) = train_transe_with_log(&train, &cfg)?;
    io::save_table(&args.out, &table)
        .with_context(|| format!("writing table {}", args.out.display()))?;
    println!(
        "{}",
        serde_json::json!({
            "entities": table.entity_count(),
            "relations": table.relation_count(),
            "train_triplets": train.triplet_count(),
            "epochs": losses.len(),
            "final_loss": losses.last().copied().unwrap_or(0.0),
            "table": args.out.display().to_string(),
        })
    );
    Ok(0)
}

fn eval_linkpred(args: LinkpredArgs) -> Result<i32> {
    let full = load_graph(&args.kg, args.format)?;
    let table = load_table_file(&args.table)?;
    let test = match (&args.test, args.split) {
        (Some(path), _) => load_graph(path, args.format)?,
        (None, Some(ratio)) => full.split(ratio, args.split_seed)?.1,
        (None, None) => bail!("pass either --test or --split to pick the evaluation triplets"),
    };
    let metrics = evaluate_link_prediction(&table, &test, &full)?;
    let payload = serde_json::to_string_pretty(&metrics)?;
    emit(&args.out, &payload)?;
    Ok(0)
}

/// Scalar agent settings, pulled out of the per-command arg structs.
struct RunnerKnobs {
    mode: ModeArg,
    k: u32,
    skip_review: bool,
    skip_revise: bool,
    seed: u64,
    reviewer: ReviewerArg,
    threshold: f64,
    offline_match: bool,
}

fn agent_runner<'a>(
    gateway: &'a dyn Gateway,
    graph: &'a KnowledgeGraph,
    dictionary: &'a DescriptionDictionary,
    clock: ClockFactory,
    table: Option<&'a EmbeddingTable>,
    knobs: RunnerKnobs,
) -> Result<AgentRunner<'a>> {
    let reviewer = match knobs.reviewer {
        ReviewerArg::Llm => ReviewerSpec::Llm,
        ReviewerArg::Transe => {
            let table = table.ok_or_else(|| anyhow!("--reviewer transe needs --table"))?;
            ReviewerSpec::Transe {
                table,
                threshold: knobs.threshold,
            }
        }
    };
    Ok(AgentRunner {
        gateway,
        graph,
        dictionary,
        config: AgentConfig {
            k: knobs.k,
            skip_review: knobs.skip_review,
            skip_revise: knobs.skip_revise,
            mode: match knobs.mode {
                ModeArg::MultiChoice => AgentMode::MultiChoice,
                ModeArg::OpenEnded => AgentMode::OpenEnded,
            },
            seed: knobs.seed,
        },
        reviewer,
        clock,
        matching: if knobs.offline_match {
            MatchStrategy::Offline
        } else {
            MatchStrategy::Gateway
        },
    })
}

fn answer(args: AnswerArgs, config: &FileConfig) -> Result<i32> {
    let question = load_question_file(&args.question)?;
    let graph = load_optional_graph(&args.kg, args.format)?;
    let dictionary = DescriptionDictionary::default();
    let (gateway, clock) = build_gateway(&args.script, config)?;
    let table = args.table.as_deref().map(load_table_file).transpose()?;
    let runner = agent_runner(
        gateway.as_ref(),
        &graph,
        &dictionary,
        clock,
        table.as_ref(),
        RunnerKnobs {
            mode: args.mode,
            k: args.k.or(config.eval.k).unwrap_or(1),
            skip_review: args.skip_review,
            skip_revise: args.skip_revise,
            seed: args.seed,
            reviewer: args.reviewer,
            threshold: args.threshold,
            offline_match: args.offline_match,
        },
    )?;
    let trace = runner.run_question(&question, args.seed);
    emit(&args.out, &trace.to_json_line())?;
    Ok(if trace.failed { 1 } else { 0 })
}

fn eval(args: EvalArgs, config: &FileConfig) -> Result<i32> {
    let dataset = load_dataset_file(&args.dataset)?;
    let graph = load_optional_graph(&args.kg, args.format)?;
    let dictionary = DescriptionDictionary::default();
    let (gateway, clock) = build_gateway(&args.script, config)?;
    let table = args.table.as_deref().map(load_table_file).transpose()?;
    let seeds = if args.seeds.is_empty() {
        config.eval.seeds.clone().unwrap_or_else(|| vec![42])
    } else {
        args.seeds.clone()
    };
    let workers = args.workers.or(config.eval.workers).unwrap_or(1);
    let runner = agent_runner(
        gateway.as_ref(),
        &graph,
        &dictionary,
        clock,
        table.as_ref(),
        RunnerKnobs {
            mode: args.mode,
            k: args.k.or(config.eval.k).unwrap_or(1),
            skip_review: args.skip_review,
            skip_revise: args.skip_revise,
            seed: seeds.first().copied().unwrap_or(42),
            reviewer: args.reviewer,
            threshold: args.threshold,
            offline_match: args.offline_match,
        },
    )?;
    let (report, traces) = evaluate(&runner, &dataset, &seeds, workers)?;
    if let Some(path) = &args.traces_out {
        let flat: Vec<_> = traces.iter().flatten().cloned().collect();
        io::write_jsonl(path, &flat)
            .with_context(|| format!("writing traces {}", path.display()))?;
    }
    let payload = serde_json::to_string_pretty(&report)?;
    emit(&args.out, &payload)?;
    Ok(0)
}

fn perturb_cmd(args: PerturbArgs) -> Result<i32> {
    let dataset = load_dataset_file(&args.dataset)?;
    let scheme = parse_scheme(&args.scheme)?;
    let rewritten = harness::perturb_dataset(&dataset, scheme)?;
    harness::save_dataset(&args.out, &rewritten)
        .with_context(|| format!("writing dataset {}", args.out.display()))?;
    println!(
        "{}",
        serde_json::json!({
            "scheme": scheme.name(),
            "questions": rewritten.len(),
            "out": args.out.display().to_string(),
        })
    );
    Ok(0)
}

fn build_medddx(args: MedddxArgs) -> Result<i32> {
    let cases: Vec<DdxCase> = io::load_cases(&args.cases)
        .with_context(|| format!("reading cases {}", args.cases.display()))?;
    let pool = match (&args.pool, &args.names) {
        (Some(path), _) => {
            io::load_pool(path).with_context(|| format!("reading pool {}", path.display()))?
        }
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading names {}", path.display()))?;
            let embedder = HashEmbedder::default();
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(|name| (name.to_string(), embedder.embed(name)))
                .collect()
        }
        (None, None) => bail!("pass --pool or --names to supply candidates"),
    };
    let items = build_dataset(&cases, &pool, args.seed)?;

    #[derive(serde::Serialize)]
    struct TieredRow<'a> {
        id: &'a str,
        question: &'a str,
        options: &'a BTreeMap<String, String>,
        answer: &'a str,
        tier: &'a kgvet_core::medddx::DifficultyTier,
        spread: f64,
    }
    let rows: Vec<TieredRow> = items
        .iter()
        .map(|item| TieredRow {
            id: &item.question.id,
            question: &item.question.stem,
            options: &item.question.options,
            answer: &item.question.answer,
            tier: &item.tier,
            spread: item.spread,
        })
        .collect();
    io::write_jsonl(&args.out, &rows)?;
    let mut tier_counts: BTreeMap<String, usize> = BTreeMap::new();
    for item in &items {
        *tier_counts
            .entry(format!("{:?}", item.tier).to_lowercase())
            .or_default() += 1;
    }
    println!(
        "{}",
        serde_json::json!({
            "records": items.len(),
            "tiers": tier_counts,
            "out": args.out.display().to_string(),
        })
    );
    Ok(0)
}

fn grad_check(args: GradArgs) -> Result<i32> {
    let cfg = AlignConfig {
        embed_dim: args.embed_dim,
        model_dim: args.model_dim,
        hidden_dim: args.hidden_dim,
        scale_attention: args.scale_attention,
        relu_ffn: args.relu_ffn,
    };
    let report = gradient_check(&cfg, args.tokens, args.trials, args.seed)?;
    let passed = report.passes(args.tolerance);
    println!(
        "{}",
        serde_json::json!({
            "max_rel_err": report.max_rel_err,
            "worst_parameter": report.worst_parameter,
            "checked": report.checked,
            "instances": report.instances,
            "tolerance": args.tolerance,
            "passed": passed,
        })
    );
    Ok(if passed { 0 } else { 1 })
}

fn review_cmd(args: ReviewArgs, config: &FileConfig) -> Result<i32> {
    let graph = load_graph(&args.kg, args.format)?;
    let dictionary = DescriptionDictionary::default();
    let triplet = Triplet::new(args.head.clone(), args.relation.clone(), args.tail.clone());
    let verdict: ReviewVerdict = match args.reviewer {
        ReviewerArg::Transe => {
            let path = args
                .table
                .as_ref()
                .ok_or_else(|| anyhow!("--reviewer transe needs --table"))?;
            let table = load_table_file(path)?;
            let mut judge = kgvet_core::review::TranseJudge::new(&table, args.threshold);
            review_triplet(&triplet, &graph, &dictionary, &mut judge)?
        }
        ReviewerArg::Llm => {
            let (gateway, _) = build_gateway(&args.script, config)?;
            let mut judge = LlmReviewer::new(gateway.as_ref());
            review_triplet(&triplet, &graph, &dictionary, &mut judge)?
        }
    };
    let verdict_name = match verdict.kind {
        VerdictKind::True => "true",
        VerdictKind::False => "false",
        VerdictKind::Incomplete => "incomplete",
    };
    let payload = serde_json::to_string_pretty(&serde_json::json!({
        "triplet": {"head": triplet.head, "relation": triplet.relation, "tail": triplet.tail},
        "verdict": verdict_name,
        "kept": verdict.is_verified(),
        "grounded": verdict.grounded.map(|g| {
            serde_json::json!({"head": g.head, "relation": g.relation, "tail": g.tail})
        }),
        "note": verdict.note,
    }))?;
    emit(&args.out, &payload)?;
    Ok(0)
}
