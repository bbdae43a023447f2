//! Evaluation harness: dataset loading, seeded batch runs with a bounded
//! worker pool, accuracy statistics, concept-count bins, open-ended answer
//! matching, and perturbation plumbing.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use kgvet_core::embed::{cosine, fnv1a_64_hex, HashEmbedder};
use kgvet_core::extract::extract_answer_label;
use kgvet_core::kg::KnowledgeGraph;
use kgvet_core::prompts::{self, template};
use kgvet_core::question::{perturb, to_open_ended, Perturbation, Question, QuestionError};
use kgvet_core::relations::DescriptionDictionary;
use kgvet_core::review::TranseJudge;
use kgvet_core::stats::{mean, population_std};
use kgvet_core::transe::EmbeddingTable;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agent::{Agent, AgentConfig, AgentMode, AgentTrace, LlmReviewer};
use crate::clock::ClockFactory;
use crate::gateway::{Gateway, GatewayError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    File(#[from] std::io::Error),
    #[error("dataset line {line}: {reason}")]
    Dataset { line: usize, reason: String },
    #[error("dataset line {line}: duplicate id '{id}'")]
    DuplicateId { line: usize, id: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("reports cover different datasets ({left} vs {right})")]
    DatasetMismatch { left: String, right: String },
    #[error("no option content to match against")]
    NoOptions,
    #[error("response matched no option after retry: {0:?}")]
    Unmatched(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Question(#[from] QuestionError),
    #[error("worker pool: {0}")]
    Pool(String),
}

// ---------------------------------------------------------------------------
// Datasets

/// One dataset row as stored on disk. Extra fields (tier, spread, source)
/// are tolerated and ignored.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    id: String,
    question: String,
    options: BTreeMap<String, String>,
    answer: String,
}

/// Parse a JSONL dataset: one `{"id", "question", "options", "answer"}`
/// object per line. Malformed lines, duplicate ids, and missing or dangling
/// gold labels are all hard errors naming the line.
pub fn parse_dataset(text: &str) -> Result<Vec<Question>, HarnessError> {
    let mut questions = Vec::new();
    let mut ids = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let row: DatasetRow = serde_json::from_str(raw).map_err(|e| HarnessError::Dataset {
            line,
            reason: e.to_string(),
        })?;
        if row.answer.trim().is_empty() {
            return Err(HarnessError::Dataset {
                line,
                reason: "missing gold answer".to_string(),
            });
        }
        if !ids.insert(row.id.clone()) {
            return Err(HarnessError::DuplicateId { line, id: row.id });
        }
        let question = Question::new(row.id, row.question, row.options, row.answer);
        question.validate().map_err(|e| HarnessError::Dataset {
            line,
            reason: e.to_string(),
        })?;
        questions.push(question);
    }
    Ok(questions)
}

pub fn load_dataset(path: &Path) -> Result<Vec<Question>, HarnessError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}

pub fn save_dataset(path: &Path, questions: &[Question]) -> Result<(), HarnessError> {
    let rows: Vec<DatasetRow> = questions
        .iter()
        .map(|q| DatasetRow {
            id: q.id.clone(),
            question: q.stem.clone(),
            options: q.options.clone(),
            answer: q.answer.clone(),
        })
        .collect();
    crate::io::write_jsonl(path, &rows).map_err(|e| match e {
        crate::io::IoError::File(e) => HarnessError::File(e),
        other => HarnessError::Dataset {
            line: 0,
            reason: other.to_string(),
        },
    })
}

/// Stable identity of a dataset for comparing reports: hash of the question
/// ids in order. Perturbed variants keep their ids, so their reports stay
/// comparable; genuinely different datasets do not.
pub fn dataset_fingerprint(questions: &[Question]) -> String {
    let joined = questions
        .iter()
        .map(|q| q.id.as_str())
        .collect::<Vec<_>>()
        .join("\u{1f}");
    fnv1a_64_hex(joined.as_bytes())
}

/// Apply one perturbation to every question.
pub fn perturb_dataset(
    questions: &[Question],
    kind: Perturbation,
) -> Result<Vec<Question>, QuestionError> {
    questions.iter().map(|q| perturb(q, kind)).collect()
}

// ---------------------------------------------------------------------------
// Batch evaluation

/// Anything that can take a question to a finished trace. Implementations
/// must set `trace.answer` to an option label for scoring (open-ended
/// pipelines match free text to a label before returning).
pub trait QuestionRunner: Send + Sync {
    fn run_question(&self, question: &Question, seed: u64) -> AgentTrace;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub accuracy: f64,
    pub correct: usize,
    /// Aborted traces this seed; each is scored incorrect.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinStats {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// Aggregate results of one evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub dataset_fingerprint: String,
    pub question_count: usize,
    pub seeds: Vec<u64>,
    pub per_seed: Vec<SeedOutcome>,
    pub mean_accuracy: f64,
    /// Population standard deviation over per-seed accuracies.
    pub std_accuracy: f64,
    pub failures: usize,
    /// Accuracy binned by how many concepts were extracted per question;
    /// questions without a parsed concept list land in "unknown". Bins
    /// nobody fell into simply do not appear.
    pub concept_bins: BTreeMap<String, BinStats>,
}

/// Run the whole dataset once per seed and aggregate. Questions within a
/// seed run on a bounded worker pool (`workers` threads); traces come back
/// in dataset order regardless of scheduling.
pub fn evaluate(
    runner: &dyn QuestionRunner,
    dataset: &[Question],
    seeds: &[u64],
    workers: usize,
) -> Result<(RunReport, Vec<Vec<AgentTrace>>), HarnessError> {
    if dataset.is_empty() {
        return Err(HarnessError::EmptyDataset);
    }
    if seeds.is_empty() {
        return Err(HarnessError::NoSeeds);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| HarnessError::Pool(e.to_string()))?;

    let mut per_seed = Vec::with_capacity(seeds.len());
    let mut all_traces = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let traces: Vec<AgentTrace> = pool.install(|| {
            dataset
                .par_iter()
                .map(|q| runner.run_question(q, seed))
                .collect()
        });
        let correct = dataset
            .iter()
            .zip(&traces)
            .filter(|(q, t)| t.answer.as_deref() == Some(q.answer.as_str()))
            .count();
        let failed = traces.iter().filter(|t| t.failed).count();
        per_seed.push(SeedOutcome {
            seed,
            accuracy: correct as f64 / dataset.len() as f64,
            correct,
            failed,
        });
        all_traces.push(traces);
    }

    let accuracies: Vec<f64> = per_seed.iter().map(|s| s.accuracy).collect();
    let report = RunReport {
        schema_version: 1,
        dataset_fingerprint: dataset_fingerprint(dataset),
        question_count: dataset.len(),
        seeds: seeds.to_vec(),
        per_seed,
        mean_accuracy: mean(&accuracies),
        std_accuracy: population_std(&accuracies),
        failures: all_traces.iter().flatten().filter(|t| t.failed).count(),
        concept_bins: bin_by_concepts(dataset, &all_traces),
    };
    Ok((report, all_traces))
}

/// Group question outcomes by extracted-concept count, pooling all seeds.
pub fn bin_by_concepts(
    dataset: &[Question],
    per_seed_traces: &[Vec<AgentTrace>],
) -> BTreeMap<String, BinStats> {
    let mut bins: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for traces in per_seed_traces {
        for (q, t) in dataset.iter().zip(traces) {
            let key = match &t.concepts {
                Some(list) => list.len().to_string(),
                None => "unknown".to_string(),
            };
            let entry = bins.entry(key).or_default();
            entry.0 += 1;
            entry.1 += usize::from(t.answer.as_deref() == Some(q.answer.as_str()));
        }
    }
    bins.into_iter()
        .map(|(key, (total, correct))| {
            (
                key,
                BinStats {
                    total,
                    correct,
                    accuracy: correct as f64 / total as f64,
                },
            )
        })
        .collect()
}

/// Absolute difference in mean accuracy between two runs of the same
/// dataset (by fingerprint). Comparing runs of different datasets is a
/// usage error, not a number.
pub fn delta_accuracy(a: &RunReport, b: &RunReport) -> Result<f64, HarnessError> {
    if a.dataset_fingerprint != b.dataset_fingerprint {
        return Err(HarnessError::DatasetMismatch {
            left: a.dataset_fingerprint.clone(),
            right: b.dataset_fingerprint.clone(),
        });
    }
    Ok((a.mean_accuracy - b.mean_accuracy).abs())
}

// ---------------------------------------------------------------------------
// Open-ended answer matching

/// Map a free-text response to an option label. With a gateway, one
/// matching call decides (retried once on an unparseable reply); without
/// one, the hash embedder picks the most similar option content, breaking
/// exact ties toward the lexicographically smallest label.
pub fn match_open_answer(
    response: &str,
    options: &BTreeMap<String, String>,
    gateway: Option<&dyn Gateway>,
) -> Result<String, HarnessError> {
    if options.is_empty() {
        return Err(HarnessError::NoOptions);
    }
    match gateway {
        Some(gateway) => {
            let labels: Vec<String> = options.keys().cloned().collect();
            let prompt = prompts::match_answer(response, options);
            let reply = gateway.complete(template::MATCH, &prompt)?;
            if let Some(label) = extract_answer_label(&reply, &labels) {
                return Ok(label);
            }
            let reply = gateway.complete(template::MATCH, &prompt)?;
            extract_answer_label(&reply, &labels).ok_or(HarnessError::Unmatched(reply))
        }
        None => {
            let embedder = HashEmbedder::default();
            let target = embedder.embed(response);
            let mut best: Option<(&String, f64)> = None;
            for (label, content) in options {
                let similarity = cosine(&target, &embedder.embed(content));
                // Strictly-greater keeps the first (smallest) label on ties.
                if best.map(|(_, s)| similarity > s).unwrap_or(true) {
                    best = Some((label, similarity));
                }
            }
            Ok(best.expect("non-empty options").0.clone())
        }
    }
}

// ---------------------------------------------------------------------------
// Agent-backed runners

/// Which backend judges triplets during review.
pub enum ReviewerSpec<'a> {
    /// Ask the language model per triplet.
    Llm,
    /// Score against trained embeddings with a distance threshold.
    Transe {
        table: &'a EmbeddingTable,
        threshold: f64,
    },
}

/// How open-ended responses are matched back to option labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchStrategy {
    /// One gateway call per response (retried once).
    Gateway,
    /// Offline hash-embedding similarity.
    Offline,
}

/// `QuestionRunner` wiring the agent loop to a gateway and graph. Built
/// once and shared across worker threads.
pub struct AgentRunner<'a> {
    pub gateway: &'a dyn Gateway,
    pub graph: &'a KnowledgeGraph,
    pub dictionary: &'a DescriptionDictionary,
    pub config: AgentConfig,
    pub reviewer: ReviewerSpec<'a>,
    pub clock: ClockFactory,
    pub matching: MatchStrategy,
}

impl AgentRunner<'_> {
    fn run_inner(&self, question: &Question, seed: u64) -> AgentTrace {
        let mut config = self.config.clone();
        config.seed = seed;
        let agent = Agent::new(self.gateway, self.graph, self.dictionary, config);
        let clock = self.clock.make();
        match &self.reviewer {
            ReviewerSpec::Llm => {
                let mut reviewer = LlmReviewer::new(self.gateway);
                agent.run(question, &mut reviewer, clock.as_ref())
            }
            ReviewerSpec::Transe { table, threshold } => {
                let mut reviewer = TranseJudge::new(table, *threshold);
                agent.run(question, &mut reviewer, clock.as_ref())
            }
        }
    }
}

impl QuestionRunner for AgentRunner<'_> {
    fn run_question(&self, question: &Question, seed: u64) -> AgentTrace {
        match self.config.mode {
            AgentMode::MultiChoice => self.run_inner(question, seed),
            AgentMode::OpenEnded => {
                // Strip the options out of the prompt but keep them for
                // scoring: the free-text answer is matched back to a label.
                let open = match to_open_ended(question) {
                    Ok(open) => open,
                    Err(e) => {
                        return AgentTrace::aborted(
                            &question.id,
                            seed,
                            format!("open-ended conversion: {e}"),
                        );
                    }
                };
                let prompt_question = Question::new(
                    question.id.clone(),
                    open.prompt,
                    question.options.clone(),
                    question.answer.clone(),
                );
                let mut trace = self.run_inner(&prompt_question, seed);
                if trace.failed {
                    return trace;
                }
                let response = trace.answer.take().unwrap_or_default();
                let gateway = match self.matching {
                    MatchStrategy::Gateway => Some(self.gateway),
                    MatchStrategy::Offline => None,
                };
                match match_open_answer(&response, &question.options, gateway) {
                    Ok(label) => trace.answer = Some(label),
                    Err(e) => {
                        trace.answer = None;
                        trace.answer_error = Some(e.to_string());
                    }
                }
                trace
            }
        }
    }
}
