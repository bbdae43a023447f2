//! TransE structural embeddings: training, scoring, link prediction.
//!
//! TransE models a true fact (h, r, t) as a translation `e_h + e_r ≈ e_t`;
//! the score of a triplet is the residual norm `‖e_h + e_r − e_t‖` (lower is
//! better). Training minimizes the margin ranking loss
//! `max(0, γ + d(pos) − d(neg))` with uniform head-or-tail corruption and
//! SGD, renormalizing entity vectors to the unit sphere after every epoch.
//!
//! Training is single-threaded and deterministic for a fixed seed; the
//! resulting table is immutable and freely shareable.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::kg::{KnowledgeGraph, Triplet};
use crate::num;

/// Distance used by the ranking loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distance {
    L2,
    L1,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransEConfig {
    /// Embedding dimension d.
    pub dim: usize,
    /// Ranking margin γ.
    pub margin: f64,
    /// SGD learning rate.
    pub learning_rate: f64,
    /// Training epochs; 0 returns the seeded, normalized random
    /// initialization untouched.
    pub epochs: usize,
    /// Minibatch size (gradients accumulate over a batch, then apply).
    pub batch_size: usize,
    /// Corrupted samples drawn per positive.
    pub negatives_per_positive: usize,
    pub seed: u64,
    pub distance: Distance,
}

impl Default for TransEConfig {
    fn default() -> Self {
        TransEConfig {
            dim: 128,
            margin: 1.0,
            learning_rate: 0.01,
            epochs: 500,
            batch_size: 128,
            negatives_per_positive: 1,
            seed: 42,
            distance: Distance::L2,
        }
    }
}

impl TransEConfig {
    pub fn validate(&self) -> Result<(), TransEError> {
        if self.dim == 0 {
            return Err(TransEError::BadConfig("dim must be positive".to_string()));
        }
        if self.margin.is_nan() || self.margin <= 0.0 {
            return Err(TransEError::BadConfig(
                "margin must be positive".to_string(),
            ));
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(TransEError::BadConfig(
                "learning_rate must be positive".to_string(),
            ));
        }
        if self.batch_size == 0 {
            return Err(TransEError::BadConfig(
                "batch_size must be positive".to_string(),
            ));
        }
        if self.negatives_per_positive == 0 {
            return Err(TransEError::BadConfig(
                "negatives_per_positive must be positive".to_string(),
            ));
        }
        Ok(())
    }
}

/// Errors from training, scoring, and evaluation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TransEError {
    #[error("invalid config: {0}")]
    BadConfig(String),
    #[error("cannot train on an empty graph")]
    EmptyGraph,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("no filtered corruption exists for triplet {0}")]
    NoCorruption(String),
    #[error("'{0}' is missing from the embedding table")]
    MissingSymbol(String),
    #[error("link prediction needs a non-empty test set")]
    EmptyTestSet,
}

/// Frozen per-entity and per-relation vectors of one dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingTable {
    dim: usize,
    entity_vectors: BTreeMap<String, Vec<f64>>,
    relation_vectors: BTreeMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    /// Assemble a table from parts; all vectors must have length `dim`.
    pub fn new(
        dim: usize,
        entity_vectors: BTreeMap<String, Vec<f64>>,
        relation_vectors: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self, TransEError> {
        for (id, v) in entity_vectors.iter().chain(relation_vectors.iter()) {
            if v.len() != dim {
                return Err(TransEError::BadConfig(format!(
                    "vector for '{id}' has length {}, expected {dim}",
                    v.len()
                )));
            }
        }
        Ok(EmbeddingTable {
            dim,
            entity_vectors,
            relation_vectors,
        })
    }

    /// Seeded random table over a graph's entities and relations: the same
    /// initialization training starts from (entities on the unit sphere),
    /// useful as a chance baseline.
    pub fn random(graph: &KnowledgeGraph, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 6.0 / num::sqrt(dim as f64);
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..dim).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        let mut entity_vectors = BTreeMap::new();
        for e in graph.entities() {
            let mut v = sample(&mut rng);
            normalize(&mut v);
            entity_vectors.insert(e.id.clone(), v);
        }
        let mut relation_vectors = BTreeMap::new();
        for r in graph.relations() {
            let mut v = sample(&mut rng);
            normalize(&mut v);
            relation_vectors.insert(r.name.clone(), v);
        }
        EmbeddingTable {
            dim,
            entity_vectors,
            relation_vectors,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity(&self, id: &str) -> Option<&[f64]> {
        self.entity_vectors.get(id).map(Vec::as_slice)
    }

    pub fn relation(&self, name: &str) -> Option<&[f64]> {
        self.relation_vectors.get(name).map(Vec::as_slice)
    }

    pub fn entity_count(&self) -> usize {
        self.entity_vectors.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_vectors.len()
    }

    /// Entity ids in deterministic (sorted) order.
    pub fn entity_ids(&self) -> impl Iterator<Item = &str> {
        self.entity_vectors.keys().map(String::as_str)
    }

    pub fn relation_names(&self) -> impl Iterator<Item = &str> {
        self.relation_vectors.keys().map(String::as_str)
    }

    pub fn entity_entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entity_vectors
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn relation_entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.relation_vectors
            .iter()
            .map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    /// Largest entity-vector norm; bounded by 1 + 1e-6 after training.
    pub fn max_entity_norm(&self) -> f64 {
        self.entity_vectors
            .values()
            .map(|v| num::l2_norm(v))
            .fold(0.0, f64::max)
    }
}

/// Triplet score `‖e_h + e_r − e_t‖₂`: 0 exactly when the translation is
/// exact, growing with the residual.
pub fn score_triplet(table: &EmbeddingTable, t: &Triplet) -> Result<f64, TransEError> {
    score_triplet_with(table, t, Distance::L2)
}

/// Triplet score under a chosen distance.
pub fn score_triplet_with(
    table: &EmbeddingTable,
    t: &Triplet,
    distance: Distance,
) -> Result<f64, TransEError> {
    let h = table
        .entity(&t.head)
        .ok_or_else(|| TransEError::MissingSymbol(t.head.clone()))?;
    let r = table
        .relation(&t.relation)
        .ok_or_else(|| TransEError::MissingSymbol(t.relation.clone()))?;
    let tl = table
        .entity(&t.tail)
        .ok_or_else(|| TransEError::MissingSymbol(t.tail.clone()))?;
    Ok(residual_norm(h, r, tl, distance))
}

fn residual_norm(h: &[f64], r: &[f64], t: &[f64], distance: Distance) -> f64 {
    match distance {
        Distance::L2 => {
            let mut acc = 0.0;
            for i in 0..h.len() {
                let u = h[i] + r[i] - t[i];
                acc += u * u;
            }
            num::sqrt(acc)
        }
        Distance::L1 => {
            let mut acc = 0.0;
            for i in 0..h.len() {
                acc += num::abs(h[i] + r[i] - t[i]);
            }
            acc
        }
    }
}

/// Train TransE on a graph. Deterministic for a fixed config and graph.
pub fn train_transe(
    train: &KnowledgeGraph,
    cfg: &TransEConfig,
) -> Result<EmbeddingTable, TransEError> {
    train_transe_with_log(train, cfg).map(|(table, _)| table)
}

/// Train and return per-epoch mean losses alongside the table.
pub fn train_transe_with_log(
    train: &KnowledgeGraph,
    cfg: &TransEConfig,
) -> Result<(EmbeddingTable, Vec<f64>), TransEError> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(TransEError::EmptyGraph);
    }

    let n_entities = train.entities().len();
    let triplets: Vec<(u32, u32, u32)> = train.id_triplets().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 6.0 / num::sqrt(cfg.dim as f64);

    let mut entity_emb: Vec<Vec<f64>> = (0..n_entities)
        .map(|_| {
            let mut v: Vec<f64> = (0..cfg.dim).map(|_| rng.gen_range(-bound..bound)).collect();
            normalize(&mut v);
            v
        })
        .collect();
    let mut relation_emb: Vec<Vec<f64>> = (0..train.relations().len())
        .map(|_| {
            let mut v: Vec<f64> = (0..cfg.dim).map(|_| rng.gen_range(-bound..bound)).collect();
            normalize(&mut v);
            v
        })
        .collect();

    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let report_every = (cfg.epochs / 10).max(1);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut pairs = 0usize;

        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            // Sparse gradient accumulators for this minibatch.
            let mut entity_grads: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            let mut relation_grads: BTreeMap<u32, Vec<f64>> = BTreeMap::new();

            for &i in batch {
                let (h, r, t) = triplets[i];
                for _ in 0..cfg.negatives_per_positive {
                    let (ch, ct) = corrupt(train, h, r, t, n_entities, &mut rng)?;
                    let d_pos = residual_norm(
                        &entity_emb[h as usize],
                        &relation_emb[r as usize],
                        &entity_emb[t as usize],
                        cfg.distance,
                    );
                    let d_neg = residual_norm(
                        &entity_emb[ch as usize],
                        &relation_emb[r as usize],
                        &entity_emb[ct as usize],
                        cfg.distance,
                    );
                    let loss = cfg.margin + d_pos - d_neg;
                    if !loss.is_finite() {
                        return Err(TransEError::NonFiniteLoss {
                            epoch,
                            batch: batch_no,
                        });
                    }
                    if loss <= 0.0 {
                        pairs += 1;
                        continue;
                    }
                    epoch_loss += loss;
                    pairs += 1;

                    // d(pos) pulls the positive residual down, d(neg) pushes
                    // the corrupted residual up.
                    accumulate_pair(
                        &entity_emb,
                        &relation_emb,
                        (h, r, t),
                        1.0,
                        cfg.distance,
                        &mut entity_grads,
                        &mut relation_grads,
                        cfg.dim,
                    );
                    accumulate_pair(
                        &entity_emb,
                        &relation_emb,
                        (ch, r, ct),
                        -1.0,
                        cfg.distance,
                        &mut entity_grads,
                        &mut relation_grads,
                        cfg.dim,
                    );
                }
            }

            for (e, g) in entity_grads {
                let v = &mut entity_emb[e as usize];
                for i in 0..cfg.dim {
                    v[i] -= cfg.learning_rate * g[i];
                }
            }
            for (r, g) in relation_grads {
                let v = &mut relation_emb[r as usize];
                for i in 0..cfg.dim {
                    v[i] -= cfg.learning_rate * g[i];
                }
            }
        }

        // Project entities back onto the unit ball.
        for v in &mut entity_emb {
            normalize(v);
        }

        let mean_loss = if pairs == 0 {
            0.0
        } else {
            epoch_loss / pairs as f64
        };
        epoch_losses.push(mean_loss);
        #[cfg(feature = "std")]
        if (epoch + 1) % report_every == 0 || epoch + 1 == cfg.epochs {
            std::eprintln!(
                "transe epoch {}/{}: mean margin loss {:.6}",
                epoch + 1,
                cfg.epochs,
                mean_loss
            );
        }
        #[cfg(not(feature = "std"))]
        let _ = report_every;
    }

    let entity_vectors = train
        .entities()
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.clone(), entity_emb[i].clone()))
        .collect();
    let relation_vectors = train
        .relations()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.name.clone(), relation_emb[i].clone()))
        .collect();
    Ok((
        EmbeddingTable {
            dim: cfg.dim,
            entity_vectors,
            relation_vectors,
        },
        epoch_losses,
    ))
}

/// Uniformly corrupt head or tail, filtered against known facts. Falls back
/// to exhaustive search when rejection sampling keeps hitting true facts.
fn corrupt(
    graph: &KnowledgeGraph,
    h: u32,
    r: u32,
    t: u32,
    n_entities: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(u32, u32), TransEError> {
    const TRIES: usize = 64;
    for _ in 0..TRIES {
        let candidate = rng.gen_range(0..n_entities) as u32;
        if rng.gen_bool(0.5) {
            if candidate != h && !graph.contains_ids(candidate, r, t) {
                return Ok((candidate, t));
            }
        } else if candidate != t && !graph.contains_ids(h, r, candidate) {
            return Ok((h, candidate));
        }
    }
    for candidate in 0..n_entities as u32 {
        if candidate != h && !graph.contains_ids(candidate, r, t) {
            return Ok((candidate, t));
        }
        if candidate != t && !graph.contains_ids(h, r, candidate) {
            return Ok((h, candidate));
        }
    }
    Err(TransEError::NoCorruption(format!(
        "({}, {}, {})",
        graph.entity_id(h),
        graph.relation_name(r),
        graph.entity_id(t)
    )))
}

#[allow(clippy::too_many_arguments)]
fn accumulate_pair(
    entity_emb: &[Vec<f64>],
    relation_emb: &[Vec<f64>],
    (h, r, t): (u32, u32, u32),
    sign: f64,
    distance: Distance,
    entity_grads: &mut BTreeMap<u32, Vec<f64>>,
    relation_grads: &mut BTreeMap<u32, Vec<f64>>,
    dim: usize,
) {
    let hv = &entity_emb[h as usize];
    let rv = &relation_emb[r as usize];
    let tv = &entity_emb[t as usize];
    // Gradient of the distance w.r.t. the residual u = e_h + e_r - e_t.
    let mut du = vec![0.0; dim];
    match distance {
        Distance::L2 => {
            let mut norm = 0.0;
            for i in 0..dim {
                let u = hv[i] + rv[i] - tv[i];
                du[i] = u;
                norm += u * u;
            }
            let norm = num::sqrt(norm);
            if norm > 0.0 {
                for g in &mut du {
                    *g /= norm;
                }
            }
        }
        Distance::L1 => {
            for i in 0..dim {
                let u = hv[i] + rv[i] - tv[i];
                du[i] = if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
        }
    }
    let hg = entity_grads.entry(h).or_insert_with(|| vec![0.0; dim]);
    for i in 0..dim {
        hg[i] += sign * du[i];
    }
    let tg = entity_grads.entry(t).or_insert_with(|| vec![0.0; dim]);
    for i in 0..dim {
        tg[i] -= sign * du[i];
    }
    let rg = relation_grads.entry(r).or_insert_with(|| vec![0.0; dim]);
    for i in 0..dim {
        rg[i] += sign * du[i];
    }
}

fn normalize(v: &mut [f64]) {
    let n = num::l2_norm(v);
    if n > 0.0 {
        for x in v {
            *x /= n;
        }
    }
}

/// Filtered ranking metrics over a held-out set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkPredictionMetrics {
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_3: f64,
    pub hits_at_10: f64,
    /// Ranks contributing to the averages (2 per test triplet).
    pub rank_count: usize,
}

/// Rank every test triplet against head and tail corruptions, filtering
/// candidates that are themselves known facts in `full`.
///
/// Ties use the realistic mid-rank rule (`1 + #better + #ties/2`), so a
/// degenerate constant table cannot score a perfect MRR.
pub fn evaluate_link_prediction(
    table: &EmbeddingTable,
    test: &KnowledgeGraph,
    full: &KnowledgeGraph,
) -> Result<LinkPredictionMetrics, TransEError> {
    if test.is_empty() {
        return Err(TransEError::EmptyTestSet);
    }
    let entities: Vec<(&str, &[f64])> = table.entity_entries().collect();
    let mut mrr = 0.0;
    let mut hits = [0.0f64; 3];
    let mut count = 0usize;

    for t in test.triplets() {
        let hv = table
            .entity(&t.head)
            .ok_or_else(|| TransEError::MissingSymbol(t.head.clone()))?;
        let rv = table
            .relation(&t.relation)
            .ok_or_else(|| TransEError::MissingSymbol(t.relation.clone()))?;
        let tv = table
            .entity(&t.tail)
            .ok_or_else(|| TransEError::MissingSymbol(t.tail.clone()))?;

        for replace_tail in [true, false] {
            let true_score = residual_norm(hv, rv, tv, Distance::L2);
            let mut better = 0usize;
            let mut ties = 0usize;
            for &(cand_id, cand_v) in &entities {
                let is_true_slot = if replace_tail {
                    cand_id == t.tail
                } else {
                    cand_id == t.head
                };
                if is_true_slot {
                    continue;
                }
                let candidate = if replace_tail {
                    Triplet::new(t.head.clone(), t.relation.clone(), cand_id)
                } else {
                    Triplet::new(cand_id, t.relation.clone(), t.tail.clone())
                };
                // Filtered protocol: other known-true completions are not
                // counted as competitors.
                if full.contains_triplet(&candidate) {
                    continue;
                }
                let score = if replace_tail {
                    residual_norm(hv, rv, cand_v, Distance::L2)
                } else {
                    residual_norm(cand_v, rv, tv, Distance::L2)
                };
                if score < true_score {
                    better += 1;
                } else if score == true_score {
                    ties += 1;
                }
            }
            let rank = 1.0 + better as f64 + ties as f64 / 2.0;
            mrr += 1.0 / rank;
            for (i, k) in [1.0, 3.0, 10.0].iter().enumerate() {
                if rank <= *k {
                    hits[i] += 1.0;
                }
            }
            count += 1;
        }
    }

    let n = count as f64;
    Ok(LinkPredictionMetrics {
        mrr: mrr / n,
        hits_at_1: hits[0] / n,
        hits_at_3: hits[1] / n,
        hits_at_10: hits[2] / n,
        rank_count: count,
    })
}

/// A threshold choice and the balanced accuracy it achieves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    pub threshold: f64,
    pub balanced_accuracy: f64,
}

/// Sweep a decision threshold over positive and negative scores (a score is
/// judged true when `score <= threshold`) and return the threshold with the
/// best balanced accuracy. Ties prefer the smallest threshold.
pub fn calibrate_threshold(positives: &[f64], negatives: &[f64]) -> ThresholdCalibration {
    let mut candidates: Vec<f64> = Vec::with_capacity(positives.len() + negatives.len() + 2);
    candidates.extend_from_slice(positives);
    candidates.extend_from_slice(negatives);
    candidates.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));
    candidates.dedup();

    let mut sweep: Vec<f64> = Vec::with_capacity(candidates.len() + 1);
    if let Some(first) = candidates.first() {
        sweep.push(first - 1.0);
    } else {
        sweep.push(0.0);
    }
    for w in candidates.windows(2) {
        sweep.push((w[0] + w[1]) / 2.0);
    }
    // Each exact score is also a candidate: the rule is inclusive.
    sweep.extend_from_slice(&candidates);
    sweep.sort_by(|a, b| a.partial_cmp(b).expect("finite scores"));

    let mut best = ThresholdCalibration {
        threshold: sweep[0],
        balanced_accuracy: -1.0,
    };
    for theta in sweep {
        let tpr = rate(positives, |s| s <= theta);
        let tnr = rate(negatives, |s| s > theta);
        let ba = (tpr + tnr) / 2.0;
        if ba > best.balanced_accuracy {
            best = ThresholdCalibration {
                threshold: theta,
                balanced_accuracy: ba,
            };
        }
    }
    best
}

fn rate(scores: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    if scores.is_empty() {
        return 0.0;
    }
    scores.iter().filter(|s| pred(**s)).count() as f64 / scores.len() as f64
}
