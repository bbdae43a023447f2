//! Release acceptance gate: nine end-to-end checks, one test each, covering
//! embedding sanity, alignment math, review semantics, the agent loop,
//! scripted determinism, harness invariance, dataset tiering, seed
//! statistics, and structured-output parsing. Each test prints a single
//! verdict line; all nine must pass for a cut to ship.

use std::collections::BTreeMap;
use std::time::Instant;

use kgvet::agent::{Agent, AgentConfig, AgentTrace, CallCounts, TRACE_SCHEMA_VERSION};
use kgvet::clock::{ClockFactory, StepClock};
use kgvet::gateway::{MockGateway, MockScript};
use kgvet::harness::{
    delta_accuracy, evaluate, perturb_dataset, AgentRunner, MatchStrategy, QuestionRunner,
    ReviewerSpec,
};
use kgvet_core::align::{forward, gradient_check, AlignConfig, AlignParams};
use kgvet_core::extract::{extract_triplets, serialize_string_list, serialize_triplets};
use kgvet_core::kg::{KnowledgeGraph, Triplet};
use kgvet_core::mat::Mat;
use kgvet_core::medddx::{build_item, rank_candidates, tier_for_spread, DdxCase, DifficultyTier};
use kgvet_core::prompts::{self, template};
use kgvet_core::question::{Perturbation, Question};
use kgvet_core::relations::DescriptionDictionary;
use kgvet_core::review::{describe, review_triplet, review_triplets, ReviewError, VerdictKind};
use kgvet_core::stats::population_std;
use kgvet_core::synth::grouped_attribute_graph;
use kgvet_core::transe::{
    evaluate_link_prediction, train_transe_with_log, EmbeddingTable, TransEConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(n: u32, what: &str) {
    println!("acceptance {n}/9 ({what}): pass");
}

fn mc(id: &str, stem: &str, pairs: &[(&str, &str)], answer: &str) -> Question {
    let options: BTreeMap<String, String> = pairs
        .iter()
        .map(|(l, c)| (l.to_string(), c.to_string()))
        .collect();
    Question::new(id, stem, options, answer)
}

/// A finished trace with nothing but an answer, for runners that do not go
/// through the agent loop.
fn bare_trace(question_id: &str, seed: u64, answer: Option<String>) -> AgentTrace {
    AgentTrace {
        schema_version: TRACE_SCHEMA_VERSION,
        question_id: question_id.to_string(),
        kind: "scripted".to_string(),
        seed,
        concepts: Some(Vec::new()),
        generated: Vec::new(),
        generation_errors: Vec::new(),
        rounds: Vec::new(),
        verified: Vec::new(),
        rejected: Vec::new(),
        answer,
        answer_error: None,
        failed: false,
        error: None,
        calls: CallCounts::default(),
        steps: Vec::new(),
    }
}

// ---------------------------------------------------------------------------
// 1. Trained embeddings must crush a random table on held-out links.

#[test]
fn criterion_1_trained_embeddings_beat_random_ranking() {
    let started = Instant::now();
    let graph = grouped_attribute_graph(8, 20, 6);
    assert_eq!(graph.entities().len(), 208);
    assert_eq!(graph.triplet_count(), 960);

    let (train, test) = graph.split(0.8, 42).unwrap();
    let cfg = TransEConfig {
        dim: 32,
        learning_rate: 0.05,
        epochs: 300,
        batch_size: 64,
        seed: 42,
        ..TransEConfig::default()
    };
    let (table, losses) = train_transe_with_log(&train, &cfg).unwrap();
    assert!(losses.last().unwrap() < &losses[0], "loss must drop");

    let trained = evaluate_link_prediction(&table, &test, &graph).unwrap();
    let random =
        evaluate_link_prediction(&EmbeddingTable::random(&train, 32, 7), &test, &graph).unwrap();

    assert!(
        trained.mrr >= 5.0 * random.mrr,
        "trained MRR {} must be at least 5x the random-table MRR {}",
        trained.mrr,
        random.mrr
    );
    assert!(
        trained.hits_at_1 >= 0.9,
        "only {:.3} of true triplets outrank every filtered corruption",
        trained.hits_at_1
    );
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, budget is 60s");
    pass(1, "link prediction sanity");
}

// ---------------------------------------------------------------------------
// 2. Alignment identities and exact gradients at the reference dimensions.

#[test]
fn criterion_2_alignment_identity_rows_and_gradients() {
    let started = Instant::now();
    let cfg = AlignConfig {
        embed_dim: 5,
        model_dim: 7,
        hidden_dim: 4,
        scale_attention: false,
        relu_ffn: false,
    };
    let params = AlignParams::random(&cfg, 11);
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let entities = Mat::from_vec(
        3,
        cfg.embed_dim,
        (0..3 * cfg.embed_dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    );

    // An all-zero token matrix contributes nothing to the readout.
    let zero_tokens = Mat::zeros(6, cfg.model_dim);
    let fwd = forward(&cfg, &params, &entities, &zero_tokens).unwrap();
    for i in 0..fwd.v.rows() {
        for j in 0..fwd.v.cols() {
            assert!((fwd.z_hat.get(i, j) - fwd.v.get(i, j)).abs() <= 1e-12);
        }
    }

    // Attention rows are probability distributions.
    let tokens = Mat::from_vec(
        6,
        cfg.model_dim,
        (0..6 * cfg.model_dim)
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect(),
    );
    let fwd = forward(&cfg, &params, &entities, &tokens).unwrap();
    for i in 0..fwd.attention.rows() {
        let row_sum: f64 = fwd.attention.row(i).iter().sum();
        assert!((row_sum - 1.0).abs() <= 1e-12, "row {i} sums to {row_sum}");
    }

    // Analytic gradients agree with central finite differences.
    let report = gradient_check(&cfg, 6, 10, 42).unwrap();
    assert!(
        report.passes(1e-4),
        "worst parameter {} has relative error {}",
        report.worst_parameter,
        report.max_rel_err
    );
    assert!(report.instances >= 10);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 10, "took {elapsed:?}, budget is 10s");
    pass(2, "alignment math");
}

// ---------------------------------------------------------------------------
// 3. Review verdicts follow the soft-constraint truth table exactly, and
//    batch review always partitions its input.

#[test]
fn criterion_3_review_truth_table_and_partition() {
    let graph = KnowledgeGraph::from_triplets(&[Triplet::new("G1", "linked to", "G2")]);
    let dict = DescriptionDictionary::default();

    // Exhaustive table over (head mapped, tail mapped, backend judgment).
    for head_mapped in [true, false] {
        for tail_mapped in [true, false] {
            for judgment in [true, false] {
                let head = if head_mapped { "G1" } else { "U1" };
                let tail = if tail_mapped { "G2" } else { "U2" };
                let t = Triplet::new(head, "linked to", tail);
                let mut calls = 0usize;
                let mut backend = |_: &Triplet, _: &str| -> Result<bool, ReviewError> {
                    calls += 1;
                    Ok(judgment)
                };
                let v = review_triplet(&t, &graph, &dict, &mut backend).unwrap();
                let expected = match (head_mapped && tail_mapped, judgment) {
                    (true, true) => VerdictKind::True,
                    (true, false) => VerdictKind::False,
                    (false, _) => VerdictKind::Incomplete,
                };
                assert_eq!(
                    v.kind, expected,
                    "({head_mapped}, {tail_mapped}, {judgment})"
                );
                assert_eq!(calls, usize::from(head_mapped && tail_mapped));
                assert_eq!(v.grounded.is_some(), head_mapped && tail_mapped);
                assert_eq!(v.is_verified(), expected != VerdictKind::False);
            }
        }
    }

    // Randomized batches: verified and rejected form an ordered, disjoint,
    // exhaustive split of the input, with verdicts parallel to it.
    let surfaces = ["G1", "G2", "U1", "U2", "g1", "stray"];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut total = 0usize;
    while total < 1000 {
        let batch: Vec<Triplet> = (0..rng.gen_range(1..=8))
            .map(|_| {
                Triplet::new(
                    surfaces[rng.gen_range(0..surfaces.len())],
                    "linked to",
                    surfaces[rng.gen_range(0..surfaces.len())],
                )
            })
            .collect();
        let flip: u64 = rng.gen();
        let mut backend = move |t: &Triplet, _: &str| -> Result<bool, ReviewError> {
            Ok((t.head.len() as u64 ^ flip).is_multiple_of(2))
        };
        let out = review_triplets(&batch, &graph, &dict, &mut backend).unwrap();
        assert_eq!(out.verdicts.len(), batch.len());
        assert_eq!(
            out.partition.verified.len() + out.partition.rejected.len(),
            batch.len()
        );
        let (mut vi, mut ri) = (0usize, 0usize);
        for (t, v) in batch.iter().zip(&out.verdicts) {
            if v.is_verified() {
                assert_eq!(&out.partition.verified[vi], t);
                vi += 1;
            } else {
                assert_eq!(&out.partition.rejected[ri], t);
                ri += 1;
            }
        }
        total += batch.len();
    }
    pass(3, "soft-constraint review rule");
}

// ---------------------------------------------------------------------------
// 4. The loop revises exactly k rounds against a reviewer that never yields,
//    and the ablation switches really switch things off.

fn rejection_fixture() -> (
    Question,
    KnowledgeGraph,
    DescriptionDictionary,
    MockScript,
    Triplet,
) {
    let stem = "Which of these labels comes first in the alphabet?";
    let question = mc(
        "loop-1",
        stem,
        &[
            ("A", "alpha"),
            ("B", "beta"),
            ("C", "gamma"),
            ("D", "delta"),
        ],
        "A",
    );
    let triplet = Triplet::new("AAA", "linked to", "BBB");
    let graph = KnowledgeGraph::from_triplets(std::slice::from_ref(&triplet));
    let dict = DescriptionDictionary::default();

    let mut script = MockScript::new();
    script.insert(
        template::CONCEPTS,
        &prompts::concepts(stem),
        &serialize_string_list(prompts::CONCEPTS_KEY, &["alphabet".to_string()]),
    );
    let triplet_json = serialize_triplets(prompts::TRIPLETS_KEY, std::slice::from_ref(&triplet));
    for content in ["alpha", "beta", "gamma", "delta"] {
        script.insert(
            template::GENERATE,
            &prompts::generate(stem, &["alphabet".to_string()], content),
            &triplet_json,
        );
    }
    // Revision hands the same triplet back, so every round re-renders the
    // same prompt and the single entry below serves arbitrarily many rounds.
    script.insert(
        template::REVISE,
        &prompts::revise(&triplet, stem),
        &serialize_triplets(prompts::REVISED_KEY, std::slice::from_ref(&triplet)),
    );
    // Nothing survives review, so the answer prompt carries no facts...
    let no_facts = prompts::answer_block(stem, &[], &question.options);
    script.insert(template::ANSWER, &prompts::answer(&no_facts), "A");
    // ...except when review is skipped and everything generated survives.
    let all_facts = prompts::answer_block(stem, &[describe(&triplet, &dict)], &question.options);
    script.insert(template::ANSWER, &prompts::answer(&all_facts), "A");

    (question, graph, dict, script, triplet)
}

#[test]
fn criterion_4_revise_rounds_and_ablations() {
    let (question, graph, dict, script, triplet) = rejection_fixture();
    let gateway = MockGateway::new(script);

    for k in [1u32, 2, 3] {
        let agent = Agent::new(
            &gateway,
            &graph,
            &dict,
            AgentConfig {
                k,
                ..AgentConfig::default()
            },
        );
        let mut never = |_: &Triplet, _: &str| -> Result<bool, ReviewError> { Ok(false) };
        let trace = agent.run(&question, &mut never, &StepClock::new(0, 1));

        assert!(!trace.failed, "{:?}", trace.error);
        assert_eq!(trace.revise_rounds(), k as usize, "k = {k}");
        assert_eq!(trace.calls.revise, k, "one rejected fact revised per round");
        assert_eq!(trace.calls.answer, 1);
        assert_eq!(trace.answer.as_deref(), Some("A"));
        assert_eq!(trace.rounds.len(), k as usize + 1);
        assert!(trace.verified.is_empty());
        assert_eq!(trace.rejected, vec![triplet.clone()]);
        assert_eq!(
            trace.calls.review,
            k + 1,
            "initial review plus one per round"
        );
        // The answer step comes after the last revise round.
        let answer_at = trace
            .steps
            .iter()
            .position(|s| s.action == "answer")
            .unwrap();
        let last_revise = trace
            .steps
            .iter()
            .position(|s| s.action == format!("revise_round_{k}"))
            .unwrap();
        assert!(answer_at > last_revise);
    }

    // skip_review: no reviewer calls, everything generated counts verified.
    let agent = Agent::new(
        &gateway,
        &graph,
        &dict,
        AgentConfig {
            k: 3,
            skip_review: true,
            ..AgentConfig::default()
        },
    );
    let mut never = |_: &Triplet, _: &str| -> Result<bool, ReviewError> { Ok(false) };
    let trace = agent.run(&question, &mut never, &StepClock::new(0, 1));
    assert!(!trace.failed, "{:?}", trace.error);
    assert_eq!(trace.calls.review, 0);
    assert_eq!(trace.calls.revise, 0);
    assert_eq!(trace.verified, vec![triplet.clone()]);
    assert!(trace.rounds.is_empty());
    assert_eq!(trace.answer.as_deref(), Some("A"));

    // skip_revise: rejected facts stay rejected without a single revise call.
    let agent = Agent::new(
        &gateway,
        &graph,
        &dict,
        AgentConfig {
            k: 3,
            skip_revise: true,
            ..AgentConfig::default()
        },
    );
    let mut never = |_: &Triplet, _: &str| -> Result<bool, ReviewError> { Ok(false) };
    let trace = agent.run(&question, &mut never, &StepClock::new(0, 1));
    assert!(!trace.failed, "{:?}", trace.error);
    assert_eq!(trace.calls.revise, 0);
    assert_eq!(trace.revise_rounds(), 0);
    assert_eq!(trace.rounds.len(), 1);
    assert_eq!(trace.rejected, vec![triplet]);
    assert_eq!(trace.answer.as_deref(), Some("A"));

    pass(4, "agent loop rounds and ablations");
}

// ---------------------------------------------------------------------------
// 5. The fully scripted worked example lands on its gold answer with
//    byte-identical traces, alone and under concurrency.

fn worked_example() -> (Question, KnowledgeGraph, MockScript) {
    let stem = "Which heat shock protein family member is known to interact with DHDDS?";
    let question = mc(
        "dhdds-interactor",
        stem,
        &[
            ("A", "HSPA4"),
            ("B", "HSPA8"),
            ("C", "HSPA1A"),
            ("D", "HSPA1L"),
        ],
        "B",
    );
    let graph = KnowledgeGraph::from_triplets(&[
        Triplet::new("DHDDS", "protein_protein", "HSPA8"),
        Triplet::new("HSPA1A", "protein_protein", "HSPA1B"),
        Triplet::new("DHDDS", "associated with", "retinitis pigmentosa 59"),
    ]);
    let dict = DescriptionDictionary::default();
    let concepts = vec!["DHDDS".to_string(), "heat shock protein".to_string()];

    let a = Triplet::new("DHDDS", "interacts with", "HSPA4"); // tail unmapped
    let b = Triplet::new("DHDDS", "protein_protein", "HSPA8"); // reviews true
    let c = Triplet::new("HSPA1A", "interactions", "DHDDS"); // reviews false
    let c2 = Triplet::new("HSPA1B", "interactions", "DHDDS"); // revision, true

    let mut script = MockScript::new();
    script.insert(
        template::CONCEPTS,
        &prompts::concepts(stem),
        &serialize_string_list(prompts::CONCEPTS_KEY, &concepts),
    );
    for (content, reply) in [
        (
            "HSPA4",
            serialize_triplets(prompts::TRIPLETS_KEY, std::slice::from_ref(&a)),
        ),
        (
            "HSPA8",
            serialize_triplets(prompts::TRIPLETS_KEY, std::slice::from_ref(&b)),
        ),
        (
            "HSPA1A",
            serialize_triplets(prompts::TRIPLETS_KEY, std::slice::from_ref(&c)),
        ),
        ("HSPA1L", serialize_triplets(prompts::TRIPLETS_KEY, &[])),
    ] {
        script.insert(
            template::GENERATE,
            &prompts::generate(stem, &concepts, content),
            &reply,
        );
    }
    // Reviews run on the grounded triplets; these all ground to themselves.
    script.insert(template::REVIEW, &prompts::review(&b), "True");
    script.insert(template::REVIEW, &prompts::review(&c), "False");
    script.insert(
        template::REVISE,
        &prompts::revise(&c, stem),
        &serialize_triplets(prompts::REVISED_KEY, std::slice::from_ref(&c2)),
    );
    script.insert(template::REVIEW, &prompts::review(&c2), "True");

    // Verified facts in acceptance order: the unmapped-endpoint triplet, the
    // affirmed one, then the accepted revision.
    let facts: Vec<String> = [&a, &b, &c2].iter().map(|t| describe(t, &dict)).collect();
    let block = prompts::answer_block(stem, &facts, &question.options);
    script.insert(
        template::ANSWER,
        &prompts::answer(&block),
        "The answer is B.",
    );

    (question, graph, script)
}

#[test]
fn criterion_5_scripted_run_is_deterministic() {
    let (question, graph, script) = worked_example();
    let gateway = MockGateway::new(script);
    let dict = DescriptionDictionary::default();
    let runner = AgentRunner {
        gateway: &gateway,
        graph: &graph,
        dictionary: &dict,
        config: AgentConfig::default(),
        reviewer: ReviewerSpec::Llm,
        clock: ClockFactory::Step { start: 0, step: 1 },
        matching: MatchStrategy::Gateway,
    };

    let first = runner.run_question(&question, 42);
    assert!(!first.failed, "{:?}", first.error);
    assert_eq!(first.answer.as_deref(), Some("B"), "scripted gold answer");
    assert_eq!(first.revise_rounds(), 1);
    assert_eq!(first.verified.len(), 3);
    assert!(first.rejected.is_empty());

    // Same bytes on a rerun.
    let second = runner.run_question(&question, 42);
    assert_eq!(second.to_json_line(), first.to_json_line());

    // Same bytes from every worker of a 4-way concurrent batch.
    let batch = vec![
        question.clone(),
        question.clone(),
        question.clone(),
        question,
    ];
    let (report, traces) = evaluate(&runner, &batch, &[42], 4).unwrap();
    assert_eq!(report.mean_accuracy, 1.0);
    for trace in &traces[0] {
        assert_eq!(trace.to_json_line(), first.to_json_line());
    }
    pass(5, "scripted end-to-end determinism");
}

// ---------------------------------------------------------------------------
// 6. An agent that keys on option content is immune to relabeling, so the
//    harness must measure identical accuracy across every rewrite scheme.

struct ContentOracle {
    /// Question id to the option content this oracle will always pick.
    targets: BTreeMap<String, String>,
}

impl QuestionRunner for ContentOracle {
    fn run_question(&self, question: &Question, seed: u64) -> AgentTrace {
        let answer = self.targets.get(&question.id).and_then(|content| {
            question
                .options
                .iter()
                .find(|(_, c)| *c == content)
                .map(|(label, _)| label.clone())
        });
        bare_trace(&question.id, seed, answer)
    }
}

/// A dataset over the given labels plus an oracle that answers exactly half
/// of it correctly (even indexes right, odd indexes one option off).
fn oracle_fixture(labels: &[&str], count: usize) -> (Vec<Question>, ContentOracle) {
    let mut questions = Vec::with_capacity(count);
    let mut targets = BTreeMap::new();
    for i in 0..count {
        let id = format!("p{i:02}");
        let pairs: Vec<(String, String)> = labels
            .iter()
            .map(|l| (l.to_string(), format!("finding {i}{l}")))
            .collect();
        let gold_at = i % labels.len();
        let target_at = if i % 2 == 0 {
            gold_at
        } else {
            (gold_at + 1) % labels.len()
        };
        targets.insert(id.clone(), pairs[target_at].1.clone());
        let options: BTreeMap<String, String> = pairs.into_iter().collect();
        questions.push(Question::new(
            id,
            format!("Synthetic case {i}?"),
            options,
            labels[gold_at],
        ));
    }
    (questions, ContentOracle { targets })
}

#[test]
fn criterion_6_accuracy_invariant_under_relabeling() {
    let cases = [
        (vec!["A", "B", "C", "D"], 20, Perturbation::CycleBcad),
        (vec!["A", "B", "C", "D"], 20, Perturbation::RelabelEfgh),
        (vec!["A", "B", "C"], 12, Perturbation::CycleCab),
        (vec!["A", "B"], 10, Perturbation::SwapBa),
    ];
    for (labels, count, scheme) in cases {
        let (dataset, oracle) = oracle_fixture(&labels, count);
        let (before, _) = evaluate(&oracle, &dataset, &[42, 777], 2).unwrap();
        assert_eq!(before.mean_accuracy, 0.5, "oracle is non-degenerate");

        let rewritten = perturb_dataset(&dataset, scheme).unwrap();
        let (after, _) = evaluate(&oracle, &rewritten, &[42, 777], 2).unwrap();

        let delta = delta_accuracy(&before, &after).unwrap();
        assert_eq!(delta, 0.0, "scheme {} moved accuracy", scheme.name());
    }
    pass(6, "relabeling invariance");
}

// ---------------------------------------------------------------------------
// 7. Difficulty tiers at the reference spreads, and ranked distractors that
//    match an independent brute-force selection.

#[test]
fn criterion_7_difficulty_tiers_and_distractors() {
    let reference = [
        (vec![0.9, 0.9, 0.9], DifficultyTier::Expert),
        (vec![0.90, 0.87, 0.84], DifficultyTier::Intermediate),
        (vec![0.9, 0.8, 0.7], DifficultyTier::Basic),
    ];
    for (similarities, tier) in reference {
        let spread = population_std(&similarities);
        assert_eq!(tier_for_spread(spread), tier, "{similarities:?}");
    }

    // Brute force: repeatedly take the most similar remaining candidate,
    // preferring the smaller name on exact ties.
    fn brute_force_top3(correct: &str, pool: &BTreeMap<String, Vec<f64>>) -> Vec<String> {
        let anchor = &pool[correct];
        let mut remaining: Vec<(String, f64)> = pool
            .iter()
            .filter(|(name, _)| name.as_str() != correct)
            .map(|(name, v)| (name.clone(), kgvet_core::embed::cosine(anchor, v)))
            .collect();
        let mut picked = Vec::new();
        for _ in 0..3 {
            let best = remaining
                .iter()
                .enumerate()
                .max_by(|(_, a), (_, b)| a.1.total_cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
                .map(|(i, _)| i)
                .unwrap();
            picked.push(remaining.swap_remove(best).0);
        }
        picked
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..20 {
        let size = rng.gen_range(4..=50);
        let mut pool = BTreeMap::new();
        for i in 0..size {
            let vector: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            pool.insert(format!("disease_{i:02}"), vector);
        }
        let correct = format!("disease_{:02}", rng.gen_range(0..size));
        let expected = brute_force_top3(&correct, &pool);

        let ranked = rank_candidates(&correct, &pool).unwrap();
        let top3: Vec<String> = ranked[..3].iter().map(|(n, _)| n.clone()).collect();
        assert_eq!(top3, expected, "case {case}, pool size {size}");

        let item = build_item(
            &DdxCase {
                id: format!("case-{case}"),
                stem: "A patient presents with nonspecific findings.".to_string(),
                correct: correct.clone(),
            },
            &pool,
            42,
        )
        .unwrap();
        assert_eq!(item.distractors, expected);
        assert_eq!(item.tier, tier_for_spread(item.spread));
        assert_eq!(item.question.gold_content(), Some(correct.as_str()));
    }
    pass(7, "difficulty tiers and distractor selection");
}

// ---------------------------------------------------------------------------
// 8. Per-seed accuracies aggregate to the documented mean and population
//    standard deviation.

struct SeedThresholdRunner;

impl QuestionRunner for SeedThresholdRunner {
    fn run_question(&self, question: &Question, seed: u64) -> AgentTrace {
        let index: usize = question.id[1..].parse().unwrap();
        let cutoff = match seed {
            42 | 777 => 5,
            1234 => 8,
            _ => 0,
        };
        let answer = if index < cutoff {
            question.answer.clone()
        } else {
            "B".to_string()
        };
        bare_trace(&question.id, seed, Some(answer))
    }
}

#[test]
fn criterion_8_seed_statistics() {
    let dataset: Vec<Question> = (0..10)
        .map(|i| {
            mc(
                &format!("q{i:02}"),
                &format!("Case {i}: pick the supported option."),
                &[("A", "supported"), ("B", "unsupported")],
                "A",
            )
        })
        .collect();

    let (report, _) = evaluate(&SeedThresholdRunner, &dataset, &[42, 777, 1234], 2).unwrap();
    let accuracies: Vec<f64> = report.per_seed.iter().map(|s| s.accuracy).collect();
    assert_eq!(accuracies, vec![0.5, 0.5, 0.8]);
    assert!((report.mean_accuracy - 0.6).abs() <= 1e-12);
    assert!((report.std_accuracy - 0.02f64.sqrt()).abs() <= 1e-12);
    assert!((report.std_accuracy - 0.1414).abs() <= 1e-4);
    pass(8, "seed statistics");
}

// ---------------------------------------------------------------------------
// 9. Structured payloads always round-trip, through every decoration seen
//    in real replies, with zero silent misparses.

#[test]
fn criterion_9_extraction_round_trip() {
    const CHARS: &[u8] = b"abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-";

    fn field(rng: &mut ChaCha8Rng) -> String {
        let len = rng.gen_range(1..=12);
        let mut s = String::with_capacity(len);
        for i in 0..len {
            // Spaces only in the interior, so trimming cannot alter fields.
            if i > 0 && i + 1 < len && rng.gen_bool(0.15) {
                s.push(' ');
            } else {
                s.push(CHARS[rng.gen_range(0..CHARS.len())] as char);
            }
        }
        s
    }

    fn decorate(json: &str, style: u8) -> String {
        match style {
            0 => json.to_string(),
            1 => format!("Here is the output:\n```json\n{json}\n```\nLet me know."),
            2 => format!("Sure {{happy to help}}. The result is {json} as requested."),
            _ => {
                let tupled = json
                    .replace('"', "'")
                    .replace("['", "('")
                    .replace("']", "')");
                format!("```\n{tupled}\n```")
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut styles_seen = [0usize; 4];
    for i in 0..1000 {
        let triplets: Vec<Triplet> = (0..rng.gen_range(0..5))
            .map(|_| Triplet::new(field(&mut rng), field(&mut rng), field(&mut rng)))
            .collect();
        let json = serialize_triplets(prompts::TRIPLETS_KEY, &triplets);
        let style = rng.gen_range(0..4u8);
        styles_seen[style as usize] += 1;
        let reply = decorate(&json, style);
        let parsed = extract_triplets(&reply, prompts::TRIPLETS_KEY)
            .unwrap_or_else(|e| panic!("payload {i} (style {style}) failed: {e}\n{reply}"));
        assert_eq!(parsed, triplets, "payload {i} (style {style}) misparsed");
    }
    assert!(styles_seen.iter().all(|&n| n > 100), "{styles_seen:?}");

    // Damaged payloads error out loudly instead of yielding wrong data.
    for bad in [
        "no structure at all",
        "{\"Other\": []}",
        "{\"Triplets\": [[\"head\", \"relation\"]]}",
        "{\"Triplets\": \"oops\"}",
    ] {
        assert!(
            extract_triplets(bad, prompts::TRIPLETS_KEY).is_err(),
            "{bad}"
        );
    }
    pass(9, "structured-output round trip");
}
