//! Triplet review: grounding against a knowledge graph plus a factuality
//! backend, under a soft-constraint rule.
//!
//! A triplet is judged in two stages. First both endpoints are looked up in
//! the graph; if either one cannot be resolved (unknown or ambiguous
//! surface), the triplet is *Incomplete*: the graph has no standing to
//! reject it, so it is kept. Only when both endpoints resolve does the
//! factuality backend get a vote, and only a backend rejection produces
//! *False*. This deliberately errs toward keeping triplets the graph cannot
//! see, rather than discarding everything outside its coverage.
//!
//! Partitioning therefore sends True and Incomplete verdicts to the
//! verified pile and False verdicts to the rejected pile; the two piles are
//! disjoint, cover the input, and preserve input order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::kg::{KgError, KnowledgeGraph, Triplet};
use crate::relations::DescriptionDictionary;
use crate::transe::{score_triplet, EmbeddingTable};

/// Final judgment for one triplet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    /// Both endpoints resolved and the backend affirmed the fact.
    True,
    /// Both endpoints resolved and the backend rejected the fact.
    False,
    /// At least one endpoint could not be resolved; kept without judgment.
    Incomplete,
}

/// A verdict plus enough context to explain it in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewVerdict {
    pub kind: VerdictKind,
    /// The endpoint-canonicalized triplet, present when both endpoints
    /// resolved.
    pub grounded: Option<Triplet>,
    /// Short human-readable explanation (which endpoint failed, what the
    /// backend saw).
    pub note: Option<String>,
}

impl ReviewVerdict {
    /// True and Incomplete triplets survive review.
    pub fn is_verified(&self) -> bool {
        !matches!(self.kind, VerdictKind::False)
    }
}

/// Errors surfaced during review. Endpoint resolution failures are verdicts,
/// not errors; this covers backend failures only.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReviewError {
    #[error("review backend failure: {0}")]
    Backend(String),
}

/// Judges a grounded triplet as factual or not.
///
/// Implementations receive the endpoint-canonicalized triplet and a rendered
/// natural-language description of it.
pub trait ReviewerBackend {
    fn judge(&mut self, triplet: &Triplet, description: &str) -> Result<bool, ReviewError>;
}

impl<F> ReviewerBackend for F
where
    F: FnMut(&Triplet, &str) -> Result<bool, ReviewError>,
{
    fn judge(&mut self, triplet: &Triplet, description: &str) -> Result<bool, ReviewError> {
        self(triplet, description)
    }
}

/// Structural judge: a grounded triplet is affirmed when the better of its
/// two orientations scores at or below a calibrated threshold.
///
/// A relation (or endpoint) absent from the embedding table cannot be
/// scored and is rejected outright.
pub struct TranseJudge<'a> {
    table: &'a EmbeddingTable,
    threshold: f64,
}

impl<'a> TranseJudge<'a> {
    pub fn new(table: &'a EmbeddingTable, threshold: f64) -> Self {
        TranseJudge { table, threshold }
    }
}

impl ReviewerBackend for TranseJudge<'_> {
    fn judge(&mut self, triplet: &Triplet, _description: &str) -> Result<bool, ReviewError> {
        if self.table.relation(&triplet.relation).is_none()
            || self.table.entity(&triplet.head).is_none()
            || self.table.entity(&triplet.tail).is_none()
        {
            return Ok(false);
        }
        let forward =
            score_triplet(self.table, triplet).map_err(|e| ReviewError::Backend(e.to_string()))?;
        let flipped = Triplet::new(
            triplet.tail.clone(),
            triplet.relation.clone(),
            triplet.head.clone(),
        );
        let backward =
            score_triplet(self.table, &flipped).map_err(|e| ReviewError::Backend(e.to_string()))?;
        Ok(forward.min(backward) <= self.threshold)
    }
}

/// Review a single triplet under the soft-constraint rule.
pub fn review_triplet(
    triplet: &Triplet,
    graph: &KnowledgeGraph,
    dictionary: &DescriptionDictionary,
    backend: &mut dyn ReviewerBackend,
) -> Result<ReviewVerdict, ReviewError> {
    let head = match resolve(graph, &triplet.head) {
        Resolution::Found(id) => id,
        Resolution::Missing(note) => {
            return Ok(ReviewVerdict {
                kind: VerdictKind::Incomplete,
                grounded: None,
                note: Some(note),
            })
        }
    };
    let tail = match resolve(graph, &triplet.tail) {
        Resolution::Found(id) => id,
        Resolution::Missing(note) => {
            return Ok(ReviewVerdict {
                kind: VerdictKind::Incomplete,
                grounded: None,
                note: Some(note),
            })
        }
    };

    let grounded = Triplet::new(head, triplet.relation.clone(), tail);
    let description = describe(&grounded, dictionary);
    let factual = backend.judge(&grounded, &description)?;
    Ok(ReviewVerdict {
        kind: if factual {
            VerdictKind::True
        } else {
            VerdictKind::False
        },
        grounded: Some(grounded),
        note: None,
    })
}

enum Resolution {
    Found(String),
    Missing(String),
}

fn resolve(graph: &KnowledgeGraph, surface: &str) -> Resolution {
    match graph.normalize_entity(surface) {
        Ok(Some(entity)) => Resolution::Found(entity.id.clone()),
        Ok(None) => Resolution::Missing(format!("endpoint '{surface}' is not in the graph")),
        // An ambiguous surface cannot be committed to one entity, which is
        // the same position as not finding it at all.
        Err(KgError::AmbiguousEntity {
            surface,
            candidates,
        }) => Resolution::Missing(format!(
            "endpoint '{surface}' is ambiguous between: {}",
            candidates.join(", ")
        )),
        Err(other) => Resolution::Missing(other.to_string()),
    }
}

/// Natural-language rendering of a grounded triplet: the dictionary template
/// when the relation has one, a generic sentence otherwise.
pub fn describe(triplet: &Triplet, dictionary: &DescriptionDictionary) -> String {
    match dictionary.render(triplet) {
        Ok(text) => text,
        Err(_) => format!(
            "{} is related to {} through '{}'.",
            triplet.head, triplet.tail, triplet.relation
        ),
    }
}

/// The reviewed split of a triplet batch.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifiedTripletSet {
    /// True and Incomplete triplets, in input order.
    pub verified: Vec<Triplet>,
    /// False triplets, in input order.
    pub rejected: Vec<Triplet>,
}

/// Verdicts for a batch, parallel to the input, plus the resulting split.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewOutcome {
    pub verdicts: Vec<ReviewVerdict>,
    pub partition: VerifiedTripletSet,
}

/// Review a batch in order and split it into verified and rejected piles.
pub fn review_triplets(
    triplets: &[Triplet],
    graph: &KnowledgeGraph,
    dictionary: &DescriptionDictionary,
    backend: &mut dyn ReviewerBackend,
) -> Result<ReviewOutcome, ReviewError> {
    let mut verdicts = Vec::with_capacity(triplets.len());
    let mut verified = Vec::new();
    let mut rejected = Vec::new();
    for t in triplets {
        let verdict = review_triplet(t, graph, dictionary, backend)?;
        if verdict.is_verified() {
            verified.push(t.clone());
        } else {
            rejected.push(t.clone());
        }
        verdicts.push(verdict);
    }
    Ok(ReviewOutcome {
        verdicts,
        partition: VerifiedTripletSet { verified, rejected },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::{KgFormat, ParseOptions};
    use crate::transe::TransEConfig;
    use alloc::vec;

    fn graph() -> KnowledgeGraph {
        KnowledgeGraph::parse(
            "PHYHIP\tprotein_protein\tKIF15\nDHDDS\tinteracts with\tHSPA8\n",
            ParseOptions::new(KgFormat::Tsv),
        )
        .unwrap()
    }

    fn always(verdict: bool) -> impl FnMut(&Triplet, &str) -> Result<bool, ReviewError> {
        move |_, _| Ok(verdict)
    }

    #[test]
    fn unmapped_endpoint_is_incomplete_and_kept() {
        let g = graph();
        let dict = DescriptionDictionary::default();
        let t = Triplet::new("PHYHIP", "protein_protein", "UNSEEN_GENE");
        let mut backend = |_: &Triplet, _: &str| -> Result<bool, ReviewError> {
            panic!("backend must not run for incomplete triplets")
        };
        let v = review_triplet(&t, &g, &dict, &mut backend).unwrap();
        assert_eq!(v.kind, VerdictKind::Incomplete);
        assert!(v.is_verified());
        assert!(v.note.unwrap().contains("UNSEEN_GENE"));
    }

    #[test]
    fn backend_rejection_is_false() {
        let g = graph();
        let dict = DescriptionDictionary::default();
        let t = Triplet::new("PHYHIP", "protein_protein", "KIF15");
        let v = review_triplet(&t, &g, &dict, &mut always(false)).unwrap();
        assert_eq!(v.kind, VerdictKind::False);
        assert!(!v.is_verified());
        assert_eq!(
            v.grounded,
            Some(Triplet::new("PHYHIP", "protein_protein", "KIF15"))
        );
    }

    #[test]
    fn backend_sees_rendered_description() {
        let g = graph();
        let dict = DescriptionDictionary::default();
        let t = Triplet::new("phyhip", "protein_protein", "kif15");
        let mut seen = String::new();
        let mut backend = |_: &Triplet, d: &str| {
            seen = d.to_string();
            Ok(true)
        };
        let v = review_triplet(&t, &g, &dict, &mut backend).unwrap();
        assert_eq!(v.kind, VerdictKind::True);
        // Endpoints are canonicalized before rendering.
        assert!(seen.contains("PHYHIP"));
        assert!(seen.contains("KIF15"));
    }

    #[test]
    fn non_canonical_relation_gets_generic_description() {
        let g = graph();
        let dict = DescriptionDictionary::default();
        let t = Triplet::new("PHYHIP", "made_up_relation", "KIF15");
        let mut seen = String::new();
        let mut backend = |_: &Triplet, d: &str| {
            seen = d.to_string();
            Ok(true)
        };
        review_triplet(&t, &g, &dict, &mut backend).unwrap();
        assert!(seen.contains("made_up_relation"));
    }

    #[test]
    fn partition_is_ordered_disjoint_and_exhaustive() {
        let g = graph();
        let dict = DescriptionDictionary::default();
        let input = vec![
            Triplet::new("PHYHIP", "protein_protein", "KIF15"), // judged false
            Triplet::new("NOVEL", "linked to", "KIF15"),        // incomplete
            Triplet::new("DHDDS", "interacts with", "HSPA8"),   // judged true
        ];
        let mut calls = 0usize;
        let mut backend = |t: &Triplet, _: &str| {
            calls += 1;
            Ok(t.head == "DHDDS")
        };
        let out = review_triplets(&input, &g, &dict, &mut backend).unwrap();
        assert_eq!(calls, 2, "incomplete triplets never reach the backend");
        assert_eq!(
            out.partition.verified,
            vec![input[1].clone(), input[2].clone()]
        );
        assert_eq!(out.partition.rejected, vec![input[0].clone()]);
        assert_eq!(
            out.partition.verified.len() + out.partition.rejected.len(),
            input.len()
        );
        assert_eq!(out.verdicts[0].kind, VerdictKind::False);
        assert_eq!(out.verdicts[1].kind, VerdictKind::Incomplete);
        assert_eq!(out.verdicts[2].kind, VerdictKind::True);
    }

    #[test]
    fn backend_error_propagates() {
        let g = graph();
        let dict = DescriptionDictionary::default();
        let t = Triplet::new("PHYHIP", "protein_protein", "KIF15");
        let mut backend = |_: &Triplet, _: &str| Err(ReviewError::Backend("boom".to_string()));
        assert!(review_triplet(&t, &g, &dict, &mut backend).is_err());
    }

    #[test]
    fn transe_judge_is_monotone_in_threshold() {
        let g = graph();
        let table = crate::transe::train_transe(
            &g,
            &TransEConfig {
                dim: 8,
                epochs: 20,
                seed: 4,
                ..TransEConfig::default()
            },
        )
        .unwrap();
        let t = Triplet::new("PHYHIP", "protein_protein", "KIF15");
        let d = "";
        let mut last = false;
        for theta in [0.0, 0.5, 1.0, 2.0, 4.0] {
            let verdict = TranseJudge::new(&table, theta).judge(&t, d).unwrap();
            // Once true, raising the threshold keeps it true.
            assert!(verdict || !last);
            last = verdict;
        }
        assert!(last, "a generous threshold accepts everything scorable");
    }

    #[test]
    fn transe_judge_rejects_unknown_relation() {
        let g = graph();
        let table = crate::transe::train_transe(
            &g,
            &TransEConfig {
                dim: 4,
                epochs: 5,
                seed: 4,
                ..TransEConfig::default()
            },
        )
        .unwrap();
        let t = Triplet::new("PHYHIP", "no_such_relation", "KIF15");
        assert!(!TranseJudge::new(&table, 1e9).judge(&t, "").unwrap());
    }

    #[test]
    fn transe_judge_uses_better_orientation() {
        // Table where only the flipped orientation is a perfect translation.
        let mut entities = alloc::collections::BTreeMap::new();
        entities.insert("A".to_string(), vec![0.0, 0.0]);
        entities.insert("B".to_string(), vec![0.0, 1.0]);
        let mut relations = alloc::collections::BTreeMap::new();
        relations.insert("r".to_string(), vec![0.0, 1.0]);
        let table = EmbeddingTable::new(2, entities, relations).unwrap();
        // score(B, r, A) = 2, score(A, r, B) = 0.
        let t = Triplet::new("B", "r", "A");
        assert!(TranseJudge::new(&table, 0.1).judge(&t, "").unwrap());
    }
}
