//! Label-robustness guarantee: every perturbation moves contents or renames
//! labels while re-pointing the gold answer, so a solver keyed on contents
//! scores exactly the same before and after.

use std::collections::BTreeMap;

use kgvet_core::question::{perturb, Perturbation, Question};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A solver that knows the right content and ignores labels entirely.
fn content_oracle(question: &Question, known_content: &str) -> String {
    question
        .options
        .iter()
        .find(|(_, content)| content.as_str() == known_content)
        .map(|(label, _)| label.clone())
        .expect("gold content present")
}

fn random_question(rng: &mut ChaCha8Rng, labels: &[&str], id: usize) -> Question {
    let mut contents: Vec<String> = (0..labels.len())
        .map(|i| format!("finding-{id}-{i}-{}", rng.gen_range(0..1000)))
        .collect();
    contents.shuffle(rng);
    let mut options = BTreeMap::new();
    for (label, content) in labels.iter().zip(&contents) {
        options.insert(label.to_string(), content.clone());
    }
    let gold = labels[rng.gen_range(0..labels.len())];
    Question::new(format!("q{id}"), "Which finding fits?", options, gold)
}

fn accuracy_is_invariant(labels: &[&str], kind: Perturbation, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut before = 0usize;
    let mut after = 0usize;
    const N: usize = 50;
    for id in 0..N {
        let q = random_question(&mut rng, labels, id);
        let known = q.gold_content().unwrap().to_string();
        let p = perturb(&q, kind).unwrap();

        assert_eq!(p.id, q.id);
        assert_eq!(
            p.gold_content(),
            Some(known.as_str()),
            "gold must track its content"
        );
        let mut sorted_before: Vec<&String> = q.options.values().collect();
        let mut sorted_after: Vec<&String> = p.options.values().collect();
        sorted_before.sort();
        sorted_after.sort();
        assert_eq!(sorted_before, sorted_after, "contents are a permutation");

        before += usize::from(content_oracle(&q, &known) == q.answer);
        after += usize::from(content_oracle(&p, &known) == p.answer);
    }
    assert_eq!(before, N);
    assert_eq!(after, N, "perturbation changed oracle accuracy");
}

#[test]
fn four_option_cycle_preserves_oracle_accuracy() {
    accuracy_is_invariant(&["A", "B", "C", "D"], Perturbation::CycleBcad, 1);
}

#[test]
fn three_option_cycle_preserves_oracle_accuracy() {
    accuracy_is_invariant(&["A", "B", "C"], Perturbation::CycleCab, 2);
}

#[test]
fn two_option_swap_preserves_oracle_accuracy() {
    accuracy_is_invariant(&["A", "B"], Perturbation::SwapBa, 3);
}

#[test]
fn relabeling_preserves_oracle_accuracy() {
    accuracy_is_invariant(&["A", "B", "C", "D"], Perturbation::RelabelEfgh, 4);
}

#[test]
fn worked_example_matches_by_hand_rewrite() {
    let mut options = BTreeMap::new();
    for (label, content) in [("A", "w"), ("B", "x"), ("C", "y"), ("D", "z")] {
        options.insert(label.to_string(), content.to_string());
    }
    let q = Question::new("ex", "stem", options, "A");

    let cycled = perturb(&q, Perturbation::CycleBcad).unwrap();
    let got: Vec<&str> = cycled
        .labels()
        .iter()
        .map(|l| cycled.options[l].as_str())
        .collect();
    assert_eq!(got, vec!["x", "y", "w", "z"]);
    assert_eq!(cycled.answer, "C");

    let renamed = perturb(&q, Perturbation::RelabelEfgh).unwrap();
    assert_eq!(renamed.labels(), vec!["E", "F", "G", "H"]);
    assert_eq!(renamed.answer, "E");
}
