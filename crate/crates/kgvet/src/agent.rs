//! The question-answering loop: extract concepts, generate candidate
//! triplets, review them against the knowledge graph, revise rejected ones
//! for up to `k` rounds, and answer from whatever survived. Every step is
//! recorded in a serializable trace; failures abort the question honestly
//! instead of fabricating an answer.

use std::collections::BTreeSet;

use kgvet_core::extract::{extract_answer_label, extract_string_list, extract_triplets};
use kgvet_core::kg::{fold_surface, KnowledgeGraph, Triplet};
use kgvet_core::prompts::{self, template};
use kgvet_core::question::{classify, Question, QuestionKind};
use kgvet_core::relations::{self, DescriptionDictionary};
use kgvet_core::review::{
    self, review_triplets, ReviewError, ReviewVerdict, ReviewerBackend, VerdictKind,
};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::gateway::Gateway;

pub const TRACE_SCHEMA_VERSION: u32 = 1;

/// Whether the agent answers by option label or in free text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentMode {
    MultiChoice,
    OpenEnded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    /// Maximum revise rounds after the initial review.
    pub k: u32,
    /// Ablation: keep every generated triplet without consulting a reviewer.
    pub skip_review: bool,
    /// Ablation: rejected triplets are dropped instead of revised.
    pub skip_revise: bool,
    pub mode: AgentMode,
    /// Recorded in the trace; the loop itself is deterministic given the
    /// gateway, so this only distinguishes runs.
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            k: 1,
            skip_review: false,
            skip_revise: false,
            mode: AgentMode::MultiChoice,
            seed: 42,
        }
    }
}

/// One generated candidate fact, with where it came from and whether its
/// relation is part of the canonical vocabulary (kept either way).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedTriplet {
    pub triplet: Triplet,
    /// Option label that produced it, or "question" for optionless prompts.
    pub source: String,
    pub canonical_relation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub triplet: Triplet,
    pub verdict: String,
    pub note: Option<String>,
}

impl VerdictRecord {
    fn new(triplet: &Triplet, verdict: &ReviewVerdict) -> Self {
        let name = match verdict.kind {
            VerdictKind::True => "true",
            VerdictKind::False => "false",
            VerdictKind::Incomplete => "incomplete",
        };
        VerdictRecord {
            triplet: triplet.clone(),
            verdict: name.to_string(),
            note: verdict.note.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionRecord {
    pub from: Triplet,
    /// The replacement, when the revision reply parsed.
    pub to: Option<Triplet>,
    pub relation_changed: bool,
    pub error: Option<String>,
}

/// Verdicts and revisions of one review pass. Round 0 is the initial review
/// of everything generated; later rounds review that round's revisions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRound {
    pub round: u32,
    pub revisions: Vec<RevisionRecord>,
    pub verdicts: Vec<VerdictRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CallCounts {
    /// Concept extraction plus triplet generation calls.
    pub generation: u32,
    /// Reviewer backend judgments (not short-circuited incompletes).
    pub review: u32,
    pub revise: u32,
    pub answer: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTiming {
    pub action: String,
    pub started_ms: u64,
    pub ended_ms: u64,
}

/// Full record of one question's journey through the loop. Serializing one
/// trace per line yields the JSONL trace file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrace {
    pub schema_version: u32,
    pub question_id: String,
    /// "choice_aware", "non_choice_aware", or "open_ended".
    pub kind: String,
    pub seed: u64,
    /// Extracted terminology; absent when the extraction reply was
    /// unparseable (generation then proceeds without it).
    pub concepts: Option<Vec<String>>,
    pub generated: Vec<GeneratedTriplet>,
    /// Parse failures isolated during generation, one message each.
    pub generation_errors: Vec<String>,
    pub rounds: Vec<ReviewRound>,
    /// Final verified set, in the order facts were accepted.
    pub verified: Vec<Triplet>,
    /// Still-rejected facts when the loop stopped.
    pub rejected: Vec<Triplet>,
    pub answer: Option<String>,
    /// Set when the answer reply named no valid option even after a retry;
    /// the question is scored incorrect but the trace is not failed.
    pub answer_error: Option<String>,
    /// True when the loop aborted (gateway or reviewer failure); no answer
    /// is ever synthesized for a failed trace.
    pub failed: bool,
    pub error: Option<String>,
    pub calls: CallCounts,
    pub steps: Vec<StepTiming>,
}

impl AgentTrace {
    fn skeleton(question_id: &str, seed: u64) -> Self {
        AgentTrace {
            schema_version: TRACE_SCHEMA_VERSION,
            question_id: question_id.to_string(),
            kind: String::new(),
            seed,
            concepts: None,
            generated: Vec::new(),
            generation_errors: Vec::new(),
            rounds: Vec::new(),
            verified: Vec::new(),
            rejected: Vec::new(),
            answer: None,
            answer_error: None,
            failed: false,
            error: None,
            calls: CallCounts::default(),
            steps: Vec::new(),
        }
    }

    /// A trace for a question that never started, e.g. because converting
    /// it to the requested form failed before the first call.
    pub fn aborted(question_id: &str, seed: u64, error: impl Into<String>) -> Self {
        let mut trace = AgentTrace::skeleton(question_id, seed);
        trace.failed = true;
        trace.error = Some(error.into());
        trace
    }

    /// Revise rounds actually executed (round 0 is the initial review).
    pub fn revise_rounds(&self) -> usize {
        self.rounds.iter().filter(|r| r.round > 0).count()
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("trace serializes")
    }
}

/// Reviewer backend that delegates the True/False judgment to the language
/// model using the triplet-review prompt.
pub struct LlmReviewer<'a> {
    gateway: &'a dyn Gateway,
}

impl<'a> LlmReviewer<'a> {
    pub fn new(gateway: &'a dyn Gateway) -> Self {
        LlmReviewer { gateway }
    }
}

impl ReviewerBackend for LlmReviewer<'_> {
    fn judge(&mut self, triplet: &Triplet, _description: &str) -> Result<bool, ReviewError> {
        let prompt = prompts::review(triplet);
        let reply = self
            .gateway
            .complete(template::REVIEW, &prompt)
            .map_err(|e| ReviewError::Backend(e.to_string()))?;
        parse_review_reply(&reply)
            .ok_or_else(|| ReviewError::Backend(format!("unparseable review verdict: {reply:?}")))
    }
}

/// Read a True/False judgment from a review reply: the first standalone
/// word decides, case-insensitively.
pub fn parse_review_reply(reply: &str) -> Option<bool> {
    for word in reply.split(|c: char| !c.is_ascii_alphanumeric()) {
        if word.is_empty() {
            continue;
        }
        if word.eq_ignore_ascii_case("true") {
            return Some(true);
        }
        if word.eq_ignore_ascii_case("false") {
            return Some(false);
        }
        return None;
    }
    None
}

struct CountingReviewer<'a> {
    inner: &'a mut dyn ReviewerBackend,
    calls: u32,
}

impl ReviewerBackend for CountingReviewer<'_> {
    fn judge(&mut self, triplet: &Triplet, description: &str) -> Result<bool, ReviewError> {
        self.calls += 1;
        self.inner.judge(triplet, description)
    }
}

/// The loop driver. Holds only references, so it is cheap to build per
/// question; the gateway handle carries all shared state.
pub struct Agent<'a> {
    pub gateway: &'a dyn Gateway,
    pub graph: &'a KnowledgeGraph,
    pub dictionary: &'a DescriptionDictionary,
    pub config: AgentConfig,
}

impl<'a> Agent<'a> {
    pub fn new(
        gateway: &'a dyn Gateway,
        graph: &'a KnowledgeGraph,
        dictionary: &'a DescriptionDictionary,
        config: AgentConfig,
    ) -> Self {
        Agent {
            gateway,
            graph,
            dictionary,
            config,
        }
    }

    /// Run one question to completion. Never panics on model misbehavior:
    /// infrastructure failures mark the trace failed, content failures are
    /// recorded and the loop carries on.
    pub fn run(
        &self,
        question: &Question,
        reviewer: &mut dyn ReviewerBackend,
        clock: &dyn Clock,
    ) -> AgentTrace {
        let mut trace = AgentTrace::skeleton(&question.id, self.config.seed);
        let mut counting = CountingReviewer {
            inner: reviewer,
            calls: 0,
        };
        if let Err(reason) = self.drive(question, &mut counting, clock, &mut trace) {
            trace.failed = true;
            trace.error = Some(reason);
            trace.answer = None;
        }
        trace.calls.review = counting.calls;
        trace
    }

    fn drive(
        &self,
        question: &Question,
        reviewer: &mut CountingReviewer<'_>,
        clock: &dyn Clock,
        trace: &mut AgentTrace,
    ) -> Result<(), String> {
        let kind = match self.config.mode {
            AgentMode::OpenEnded => QuestionKind::NonChoiceAware,
            AgentMode::MultiChoice => classify(question),
        };
        trace.kind = match self.config.mode {
            AgentMode::OpenEnded => "open_ended".to_string(),
            AgentMode::MultiChoice => match kind {
                QuestionKind::ChoiceAware => "choice_aware".to_string(),
                QuestionKind::NonChoiceAware => "non_choice_aware".to_string(),
            },
        };

        // Generate: one concept-extraction call, then one triplet call per
        // candidate (or a single optionless call).
        let started = clock.now_ms();
        let reply = self.call(
            template::CONCEPTS,
            &prompts::concepts(&question.stem),
            trace,
            CallKind::Generation,
        )?;
        trace.concepts = match extract_string_list(&reply, prompts::CONCEPTS_KEY) {
            Ok(list) => Some(list),
            Err(e) => {
                trace
                    .generation_errors
                    .push(format!("concept extraction: {e}"));
                None
            }
        };
        let terminology = trace.concepts.clone().unwrap_or_default();

        let candidates: Vec<(String, String)> = match kind {
            QuestionKind::ChoiceAware => question
                .options
                .iter()
                .map(|(label, content)| (label.clone(), content.clone()))
                .collect(),
            QuestionKind::NonChoiceAware => vec![("question".to_string(), String::new())],
        };
        let mut seen = BTreeSet::new();
        for (source, option) in &candidates {
            let prompt = prompts::generate(&question.stem, &terminology, option);
            let reply = self.call(template::GENERATE, &prompt, trace, CallKind::Generation)?;
            match extract_triplets(&reply, prompts::TRIPLETS_KEY) {
                Ok(triplets) => {
                    for t in triplets {
                        let key = (
                            fold_surface(&t.head),
                            fold_surface(&t.relation),
                            fold_surface(&t.tail),
                        );
                        // First occurrence wins; later duplicates vanish.
                        if seen.insert(key) {
                            trace.generated.push(GeneratedTriplet {
                                canonical_relation: relations::is_canonical(&t.relation),
                                triplet: t,
                                source: source.clone(),
                            });
                        }
                    }
                }
                Err(e) => {
                    // One bad candidate costs only its own triplets.
                    trace
                        .generation_errors
                        .push(format!("candidate {source}: {e}"));
                }
            }
        }
        trace.steps.push(StepTiming {
            action: "generate".to_string(),
            started_ms: started,
            ended_ms: clock.now_ms(),
        });

        let generated: Vec<Triplet> = trace.generated.iter().map(|g| g.triplet.clone()).collect();

        // Review, unless ablated away (then everything counts as verified).
        let mut rejected: Vec<Triplet>;
        if self.config.skip_review {
            trace.verified = generated;
            rejected = Vec::new();
        } else {
            let started = clock.now_ms();
            let outcome = review_triplets(&generated, self.graph, self.dictionary, reviewer)
                .map_err(|e| format!("review: {e}"))?;
            trace.rounds.push(ReviewRound {
                round: 0,
                revisions: Vec::new(),
                verdicts: generated
                    .iter()
                    .zip(&outcome.verdicts)
                    .map(|(t, v)| VerdictRecord::new(t, v))
                    .collect(),
            });
            trace.verified = outcome.partition.verified;
            rejected = outcome.partition.rejected;
            trace.steps.push(StepTiming {
                action: "review".to_string(),
                started_ms: started,
                ended_ms: clock.now_ms(),
            });
        }

        // Revise rejected facts for up to k rounds, re-reviewing each
        // round's replacements. Parse failures burn the round but keep the
        // original fact in play.
        let mut round = 0;
        while !rejected.is_empty() && round < self.config.k && !self.config.skip_revise {
            round += 1;
            let started = clock.now_ms();
            let mut revisions: Vec<RevisionRecord> = Vec::with_capacity(rejected.len());
            let mut replacements: Vec<Triplet> = Vec::new();
            for f in &rejected {
                let prompt = prompts::revise(f, &question.stem);
                let reply = self.call(template::REVISE, &prompt, trace, CallKind::Revise)?;
                match extract_triplets(&reply, prompts::REVISED_KEY) {
                    Ok(list) if !list.is_empty() => {
                        let to = list[0].clone();
                        revisions.push(RevisionRecord {
                            relation_changed: fold_surface(&to.relation)
                                != fold_surface(&f.relation),
                            from: f.clone(),
                            to: Some(to.clone()),
                            error: None,
                        });
                        replacements.push(to);
                    }
                    Ok(_) => revisions.push(RevisionRecord {
                        from: f.clone(),
                        to: None,
                        relation_changed: false,
                        error: Some("empty revision list".to_string()),
                    }),
                    Err(e) => revisions.push(RevisionRecord {
                        from: f.clone(),
                        to: None,
                        relation_changed: false,
                        error: Some(e.to_string()),
                    }),
                }
            }

            let outcome = review_triplets(&replacements, self.graph, self.dictionary, reviewer)
                .map_err(|e| format!("re-review: {e}"))?;
            let verdicts: Vec<VerdictRecord> = replacements
                .iter()
                .zip(&outcome.verdicts)
                .map(|(t, v)| VerdictRecord::new(t, v))
                .collect();

            // Rebuild the rejected pile in original order: unparsed
            // revisions keep the old fact, rejected replacements chain on.
            let mut next_rejected = Vec::new();
            let mut vi = 0;
            for rev in &revisions {
                match &rev.to {
                    None => next_rejected.push(rev.from.clone()),
                    Some(t) => {
                        if outcome.verdicts[vi].is_verified() {
                            trace.verified.push(t.clone());
                        } else {
                            next_rejected.push(t.clone());
                        }
                        vi += 1;
                    }
                }
            }
            rejected = next_rejected;
            trace.rounds.push(ReviewRound {
                round,
                revisions,
                verdicts,
            });
            trace.steps.push(StepTiming {
                action: format!("revise_round_{round}"),
                started_ms: started,
                ended_ms: clock.now_ms(),
            });
        }
        trace.rejected = rejected;

        // Answer from the verified facts.
        let started = clock.now_ms();
        let facts: Vec<String> = trace
            .verified
            .iter()
            .map(|t| review::describe(t, self.dictionary))
            .collect();
        match self.config.mode {
            AgentMode::MultiChoice => {
                let labels = question.labels();
                let block = prompts::answer_block(&question.stem, &facts, &question.options);
                let prompt = prompts::answer(&block);
                let mut reply = self.call(template::ANSWER, &prompt, trace, CallKind::Answer)?;
                let mut label = extract_answer_label(&reply, &labels);
                if label.is_none() {
                    // One retry; a model that still names no option is
                    // recorded as unparseable and scored incorrect.
                    reply = self.call(template::ANSWER, &prompt, trace, CallKind::Answer)?;
                    label = extract_answer_label(&reply, &labels);
                }
                match label {
                    Some(l) => trace.answer = Some(l),
                    None => {
                        trace.answer_error =
                            Some(format!("reply names no option label: {reply:?}"));
                    }
                }
            }
            AgentMode::OpenEnded => {
                let empty = std::collections::BTreeMap::new();
                let block = prompts::answer_block(&question.stem, &facts, &empty);
                let prompt = block.trim_end().to_string();
                let reply = self.call(template::ANSWER, &prompt, trace, CallKind::Answer)?;
                trace.answer = Some(reply);
            }
        }
        trace.steps.push(StepTiming {
            action: "answer".to_string(),
            started_ms: started,
            ended_ms: clock.now_ms(),
        });
        Ok(())
    }

    fn call(
        &self,
        template: &str,
        prompt: &str,
        trace: &mut AgentTrace,
        kind: CallKind,
    ) -> Result<String, String> {
        match kind {
            CallKind::Generation => trace.calls.generation += 1,
            CallKind::Revise => trace.calls.revise += 1,
            CallKind::Answer => trace.calls.answer += 1,
        }
        self.gateway
            .complete(template, prompt)
            .map_err(|e| format!("{template}: {e}"))
    }
}

#[derive(Clone, Copy)]
enum CallKind {
    Generation,
    Revise,
    Answer,
}
