//! Differential-diagnosis dataset construction.
//!
//! Each case pairs a clinical stem with its correct diagnosis. The builder
//! mines the three most similar diseases (by embedding cosine) as
//! distractors, grades the case difficulty by how tightly those
//! similarities cluster, and emits a shuffled four-option question.
//!
//! Difficulty runs opposite to similarity spread: when the distractors are
//! nearly interchangeable with each other (tiny spread), telling them apart
//! is hardest, so the case lands in the Expert tier.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embed::{cosine, fnv1a_64};
use crate::question::Question;
use crate::stats::population_std;

/// One raw differential-diagnosis case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DdxCase {
    pub id: String,
    /// Clinical vignette the question asks about.
    pub stem: String,
    /// Name of the correct diagnosis; must appear in the embedding pool.
    pub correct: String,
}

/// Difficulty grade derived from distractor similarity spread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DifficultyTier {
    Basic,
    Intermediate,
    Expert,
}

/// Spread thresholds are closed on the left: `[0, 0.02)` is Expert,
/// `[0.02, 0.04)` Intermediate, `[0.04, ∞)` Basic.
pub fn tier_for_spread(spread: f64) -> DifficultyTier {
    if spread < 0.02 {
        DifficultyTier::Expert
    } else if spread < 0.04 {
        DifficultyTier::Intermediate
    } else {
        DifficultyTier::Basic
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MedDdxError {
    #[error("diagnosis '{0}' is not in the embedding pool")]
    UnknownDisease(String),
    #[error("need at least 3 distractor candidates, found {available}")]
    PoolTooSmall { available: usize },
    #[error("embedding for '{name}' has length {got}, expected {expected}")]
    DimensionMismatch {
        name: String,
        got: usize,
        expected: usize,
    },
}

/// A finished item: the mined distractors, their similarity diagnostics,
/// the difficulty grade, and the shuffled four-option question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedDdxItem {
    pub id: String,
    pub correct: String,
    /// The three most similar diseases, most similar first.
    pub distractors: Vec<String>,
    /// Cosine similarity of each distractor to the correct diagnosis.
    pub similarities: Vec<f64>,
    /// Population standard deviation of the three similarities.
    pub spread: f64,
    pub tier: DifficultyTier,
    pub question: Question,
}

/// Every pool disease except the correct one, scored by cosine similarity
/// to it and sorted most-similar-first; equal similarities order by name.
pub fn rank_candidates(
    correct: &str,
    pool: &BTreeMap<String, Vec<f64>>,
) -> Result<Vec<(String, f64)>, MedDdxError> {
    let anchor = pool
        .get(correct)
        .ok_or_else(|| MedDdxError::UnknownDisease(correct.to_string()))?;
    let mut scored = Vec::with_capacity(pool.len().saturating_sub(1));
    for (name, vector) in pool {
        if name == correct {
            continue;
        }
        if vector.len() != anchor.len() {
            return Err(MedDdxError::DimensionMismatch {
                name: name.clone(),
                got: vector.len(),
                expected: anchor.len(),
            });
        }
        scored.push((name.clone(), cosine(anchor, vector)));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(scored)
}

/// Build one item: top-3 distractors, spread, tier, and the shuffled
/// question. The option order is seeded per item, so rebuilding a dataset
/// never reorders existing items.
pub fn build_item(
    case: &DdxCase,
    pool: &BTreeMap<String, Vec<f64>>,
    seed: u64,
) -> Result<MedDdxItem, MedDdxError> {
    let ranked = rank_candidates(&case.correct, pool)?;
    if ranked.len() < 3 {
        return Err(MedDdxError::PoolTooSmall {
            available: ranked.len(),
        });
    }
    let distractors: Vec<String> = ranked[..3].iter().map(|(n, _)| n.clone()).collect();
    let similarities: Vec<f64> = ranked[..3].iter().map(|(_, s)| *s).collect();
    let spread = population_std(&similarities);
    let tier = tier_for_spread(spread);

    let mut contents: Vec<&str> = Vec::with_capacity(4);
    contents.push(&case.correct);
    contents.extend(distractors.iter().map(String::as_str));
    let mut order: Vec<usize> = (0..4).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a_64(case.id.as_bytes()));
    order.shuffle(&mut rng);

    const LABELS: [&str; 4] = ["A", "B", "C", "D"];
    let mut options = BTreeMap::new();
    let mut answer = String::new();
    for (slot, &content_idx) in order.iter().enumerate() {
        options.insert(LABELS[slot].to_string(), contents[content_idx].to_string());
        if content_idx == 0 {
            answer = LABELS[slot].to_string();
        }
    }

    Ok(MedDdxItem {
        id: case.id.clone(),
        correct: case.correct.clone(),
        distractors,
        similarities,
        spread,
        tier,
        question: Question::new(case.id.clone(), case.stem.clone(), options, answer),
    })
}

/// Build the whole dataset in case order.
pub fn build_dataset(
    cases: &[DdxCase],
    pool: &BTreeMap<String, Vec<f64>>,
    seed: u64,
) -> Result<Vec<MedDdxItem>, MedDdxError> {
    cases.iter().map(|c| build_item(c, pool, seed)).collect()
}
