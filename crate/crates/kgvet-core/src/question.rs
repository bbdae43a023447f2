//! Question data model, candidate-awareness classification, label
//! perturbations, and open-ended conversion.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// A multiple-choice question. `options` maps label (e.g. "A") to content;
/// `answer` is the gold label. An empty option map means the question is
/// effectively open-form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub id: String,
    pub stem: String,
    pub options: BTreeMap<String, String>,
    pub answer: String,
}

impl Question {
    pub fn new(
        id: impl Into<String>,
        stem: impl Into<String>,
        options: BTreeMap<String, String>,
        answer: impl Into<String>,
    ) -> Self {
        Question {
            id: id.into(),
            stem: stem.into(),
            options,
            answer: answer.into(),
        }
    }

    /// Structural checks: non-empty id and stem, and (when options exist) a
    /// gold label that names one of them.
    pub fn validate(&self) -> Result<(), QuestionError> {
        if self.id.trim().is_empty() {
            return Err(QuestionError::Invalid {
                id: self.id.clone(),
                reason: "empty id".to_string(),
            });
        }
        if self.stem.trim().is_empty() {
            return Err(QuestionError::Invalid {
                id: self.id.clone(),
                reason: "empty stem".to_string(),
            });
        }
        if !self.options.is_empty() && !self.options.contains_key(&self.answer) {
            return Err(QuestionError::Invalid {
                id: self.id.clone(),
                reason: format!("gold label '{}' is not among the options", self.answer),
            });
        }
        Ok(())
    }

    /// Option labels in sorted order.
    pub fn labels(&self) -> Vec<String> {
        self.options.keys().cloned().collect()
    }

    /// Content of the gold option, when there is one.
    pub fn gold_content(&self) -> Option<&str> {
        self.options.get(&self.answer).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QuestionError {
    #[error("question '{id}': {reason}")]
    Invalid { id: String, reason: String },
    #[error("perturbation needs options labeled exactly A-D, found [{got}]")]
    UnsupportedShape { got: String },
    #[error("swap needs at least two options, found {got}")]
    TooFewOptions { got: usize },
}

/// Whether answer candidates carry real information.
///
/// Options that are all generic verdicts (yes / no / maybe) say nothing
/// about the medical content, so candidate-specific processing is wasted on
/// them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QuestionKind {
    /// At least one option carries content beyond a generic verdict.
    ChoiceAware,
    /// Every option is yes / no / maybe (vacuously true for no options).
    NonChoiceAware,
}

/// Classify by option contents, case-insensitively.
pub fn classify(question: &Question) -> QuestionKind {
    let generic = question.options.values().all(|content| {
        matches!(
            content.trim().to_lowercase().as_str(),
            "yes" | "no" | "maybe"
        )
    });
    if generic {
        QuestionKind::NonChoiceAware
    } else {
        QuestionKind::ChoiceAware
    }
}

/// Label-robustness perturbations. Shuffles move contents across fixed
/// labels and re-point the gold label at its content's new home; the
/// relabeling renames the labels themselves. Each scheme is defined for one
/// option shape, matching the record shapes it is meant to stress.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Perturbation {
    /// 4 options: slots A-D hold the old B, C, A, D contents (3-cycle on
    /// the first three, D fixed). Applying it three times is the identity.
    CycleBcad,
    /// 3 options: slots A-C hold the old C, A, B contents.
    CycleCab,
    /// 2 options: A and B swap contents.
    SwapBa,
    /// 4 options: labels A-D become E-H; contents and their order stay put.
    RelabelEfgh,
}

impl Perturbation {
    pub const ALL: [Perturbation; 4] = [
        Perturbation::CycleBcad,
        Perturbation::CycleCab,
        Perturbation::SwapBa,
        Perturbation::RelabelEfgh,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Perturbation::CycleBcad => "cycle_bcad",
            Perturbation::CycleCab => "cycle_cab",
            Perturbation::SwapBa => "swap_ba",
            Perturbation::RelabelEfgh => "relabel_efgh",
        }
    }
}

/// Apply a perturbation, returning the rewritten question. The gold answer
/// always tracks its content, so a correct solver is unaffected. Questions
/// whose label set does not match the scheme's shape are rejected.
pub fn perturb(question: &Question, kind: Perturbation) -> Result<Question, QuestionError> {
    match kind {
        Perturbation::CycleBcad => permute_contents(question, &["A", "B", "C", "D"], &[1, 2, 0, 3]),
        Perturbation::CycleCab => permute_contents(question, &["A", "B", "C"], &[2, 0, 1]),
        Perturbation::SwapBa => permute_contents(question, &["A", "B"], &[1, 0]),
        Perturbation::RelabelEfgh => relabel(question),
    }
}

/// Contents move across fixed labels: new slot `i` receives the content of
/// old slot `map[i]` (slots are sorted label order).
fn permute_contents(
    question: &Question,
    expected: &[&str],
    map: &[usize],
) -> Result<Question, QuestionError> {
    let labels = require_labels(question, expected)?;
    let contents: Vec<&String> = labels.iter().map(|l| &question.options[l]).collect();
    let mut options = BTreeMap::new();
    for (slot, label) in labels.iter().enumerate() {
        options.insert(label.clone(), contents[map[slot]].clone());
    }
    let gold_old = labels
        .iter()
        .position(|l| *l == question.answer)
        .expect("validated gold label");
    let gold_new = map
        .iter()
        .position(|old| *old == gold_old)
        .expect("map is a permutation");
    Ok(Question {
        id: question.id.clone(),
        stem: question.stem.clone(),
        options,
        answer: labels[gold_new].clone(),
    })
}

fn relabel(question: &Question) -> Result<Question, QuestionError> {
    let labels = require_labels(question, &["A", "B", "C", "D"])?;
    const NEW: [&str; 4] = ["E", "F", "G", "H"];
    let mut options = BTreeMap::new();
    let mut answer = String::new();
    for (i, label) in labels.iter().enumerate() {
        options.insert(NEW[i].to_string(), question.options[label].clone());
        if *label == question.answer {
            answer = NEW[i].to_string();
        }
    }
    Ok(Question {
        id: question.id.clone(),
        stem: question.stem.clone(),
        options,
        answer,
    })
}

fn require_labels(question: &Question, expected: &[&str]) -> Result<Vec<String>, QuestionError> {
    question.validate()?;
    let labels = question.labels();
    if labels != expected {
        return Err(QuestionError::UnsupportedShape {
            got: labels.join(", "),
        });
    }
    Ok(labels)
}

/// A question converted to free-response form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpenEndedQuestion {
    pub id: String,
    /// The rewritten (or passed-through) stem, with options removed.
    pub prompt: String,
    /// Content of the original gold option.
    pub reference: String,
    /// Whether a rewrite rule matched; unmatched stems pass through and are
    /// flagged for manual inspection.
    pub rewritten: bool,
}

/// Stem rewrite rules, applied longest pattern first. Each maps an
/// option-presuming phrase to its free-response equivalent.
const REWRITE_RULES: [(&str, &str); 2] = [
    (
        "Which of the following best describes",
        "What best describes",
    ),
    ("Which of the following viruses", "Which virus"),
];

/// Convert a multiple-choice question to free-response form. The gold
/// option's content becomes the reference answer.
pub fn to_open_ended(question: &Question) -> Result<OpenEndedQuestion, QuestionError> {
    question.validate()?;
    let reference = question
        .gold_content()
        .ok_or_else(|| QuestionError::Invalid {
            id: question.id.clone(),
            reason: "no options to take a reference answer from".to_string(),
        })?
        .to_string();

    let mut rules = REWRITE_RULES;
    rules.sort_by_key(|(pattern, _)| core::cmp::Reverse(pattern.len()));
    for (pattern, replacement) in rules {
        if question.stem.contains(pattern) {
            return Ok(OpenEndedQuestion {
                id: question.id.clone(),
                prompt: question.stem.replace(pattern, replacement),
                reference,
                rewritten: true,
            });
        }
    }
    Ok(OpenEndedQuestion {
        id: question.id.clone(),
        prompt: question.stem.clone(),
        reference,
        rewritten: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn with_labels(labels: &[&str], contents: &[&str], answer: &str) -> Question {
        let mut options = BTreeMap::new();
        for (label, content) in labels.iter().zip(contents) {
            options.insert(label.to_string(), content.to_string());
        }
        Question::new("q1", "Which gene interacts with DHDDS?", options, answer)
    }

    fn mc(contents: [&str; 4], answer: &str) -> Question {
        with_labels(&["A", "B", "C", "D"], &contents, answer)
    }

    #[test]
    fn generic_verdict_options_are_non_choice_aware() {
        let mut options = BTreeMap::new();
        options.insert("A".to_string(), "Yes".to_string());
        options.insert("B".to_string(), "no".to_string());
        options.insert("C".to_string(), " maybe ".to_string());
        let q = Question::new("q", "Is this so?", options, "A");
        assert_eq!(classify(&q), QuestionKind::NonChoiceAware);
    }

    #[test]
    fn informative_options_are_choice_aware() {
        let q = mc(["HSPA4", "HSPA8", "HSPA1B", "HSPA1A"], "B");
        assert_eq!(classify(&q), QuestionKind::ChoiceAware);
    }

    #[test]
    fn no_options_is_vacuously_non_choice_aware() {
        let q = Question::new("q", "What is the diagnosis?", BTreeMap::new(), "");
        assert_eq!(classify(&q), QuestionKind::NonChoiceAware);
    }

    #[test]
    fn cycle_bcad_moves_contents_and_gold() {
        let q = mc(["w", "x", "y", "z"], "A");
        let p = perturb(&q, Perturbation::CycleBcad).unwrap();
        assert_eq!(p.options["A"], "x");
        assert_eq!(p.options["B"], "y");
        assert_eq!(p.options["C"], "w");
        assert_eq!(p.options["D"], "z");
        assert_eq!(p.answer, "C");
        assert_eq!(p.gold_content(), q.gold_content());
    }

    #[test]
    fn cycle_bcad_three_times_is_identity() {
        let mut p = mc(["w", "x", "y", "z"], "C");
        for _ in 0..3 {
            p = perturb(&p, Perturbation::CycleBcad).unwrap();
        }
        assert_eq!(p, mc(["w", "x", "y", "z"], "C"));
    }

    #[test]
    fn cycle_cab_moves_contents_and_gold() {
        let q = with_labels(&["A", "B", "C"], &["yes", "no", "maybe"], "A");
        let p = perturb(&q, Perturbation::CycleCab).unwrap();
        assert_eq!(p.options["A"], "maybe");
        assert_eq!(p.options["B"], "yes");
        assert_eq!(p.options["C"], "no");
        assert_eq!(p.answer, "B");
        assert_eq!(p.gold_content(), q.gold_content());
    }

    #[test]
    fn swap_ba_swaps_both_contents_and_gold() {
        let q = with_labels(&["A", "B"], &["yes", "no"], "B");
        let p = perturb(&q, Perturbation::SwapBa).unwrap();
        assert_eq!(p.options["A"], "no");
        assert_eq!(p.options["B"], "yes");
        assert_eq!(p.answer, "A");
    }

    #[test]
    fn relabel_renames_labels_in_place() {
        let q = mc(["w", "x", "y", "z"], "B");
        let p = perturb(&q, Perturbation::RelabelEfgh).unwrap();
        assert_eq!(p.labels(), vec!["E", "F", "G", "H"]);
        assert_eq!(p.options["E"], "w");
        assert_eq!(p.options["F"], "x");
        assert_eq!(p.answer, "F");
    }

    #[test]
    fn perturbations_reject_mismatched_shapes() {
        let two = with_labels(&["A", "B"], &["w", "x"], "A");
        assert!(matches!(
            perturb(&two, Perturbation::CycleBcad),
            Err(QuestionError::UnsupportedShape { .. })
        ));
        assert!(matches!(
            perturb(&two, Perturbation::CycleCab),
            Err(QuestionError::UnsupportedShape { .. })
        ));
        let four = mc(["w", "x", "y", "z"], "A");
        assert!(matches!(
            perturb(&four, Perturbation::SwapBa),
            Err(QuestionError::UnsupportedShape { .. })
        ));
        assert!(perturb(&two, Perturbation::SwapBa).is_ok());
    }

    #[test]
    fn open_ended_rewrites_known_phrases() {
        let mut q = mc(["w", "x", "y", "z"], "A");
        q.stem = "Which of the following best describes the lesion?".to_string();
        let o = to_open_ended(&q).unwrap();
        assert_eq!(o.prompt, "What best describes the lesion?");
        assert!(o.rewritten);
        assert_eq!(o.reference, "w");

        q.stem = "Which of the following viruses causes this?".to_string();
        let o = to_open_ended(&q).unwrap();
        assert_eq!(o.prompt, "Which virus causes this?");
        assert!(o.rewritten);
    }

    #[test]
    fn open_ended_passes_through_unmatched_stems() {
        let q = mc(["w", "x", "y", "z"], "B");
        let o = to_open_ended(&q).unwrap();
        assert_eq!(o.prompt, q.stem);
        assert!(!o.rewritten);
        assert_eq!(o.reference, "x");
    }

    #[test]
    fn invalid_gold_label_is_rejected() {
        let q = mc(["w", "x", "y", "z"], "E");
        assert!(q.validate().is_err());
    }
}
