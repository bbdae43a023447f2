//! Immutable knowledge-graph store.
//!
//! A graph is a set of (head, relation, tail) facts plus entity metadata:
//! canonical names, surface-form aliases, and optional external concept
//! codes. Construction happens once (from text or from a triplet list) and
//! everything afterwards is read-only, so a graph can be shared freely
//! across threads.
//!
//! Two conventions matter throughout:
//!
//! - Membership is undirected: `(A, r, B)` and `(B, r, A)` are the same
//!   fact. Embedding training and scoring still use the stored orientation.
//! - Entity lookup is by case-folded, punctuation-stripped surface form over
//!   canonical names, aliases, and external codes. A surface matching more
//!   than one entity is an explicit error, never a silent pick.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::relations;

/// One (head, relation, tail) fact, as plain surface text.
///
/// Fields hold canonical entity ids when the triplet came out of a graph,
/// and raw model-generated text otherwise.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triplet {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl Triplet {
    pub fn new(
        head: impl Into<String>,
        relation: impl Into<String>,
        tail: impl Into<String>,
    ) -> Self {
        Triplet {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }

    /// All three fields non-empty after trimming.
    pub fn is_complete(&self) -> bool {
        !self.head.trim().is_empty()
            && !self.relation.trim().is_empty()
            && !self.tail.trim().is_empty()
    }

    /// Orientation-insensitive, case-folded identity key. Two triplets with
    /// swapped endpoints (or different casing/punctuation) share a key.
    pub fn undirected_key(&self) -> (String, String, String) {
        let h = fold_surface(&self.head);
        let r = fold_surface(&self.relation);
        let t = fold_surface(&self.tail);
        if h <= t {
            (r, h, t)
        } else {
            (r, t, h)
        }
    }
}

impl core::fmt::Display for Triplet {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({}, {}, {})", self.head, self.relation, self.tail)
    }
}

/// A graph entity with its lookup surface forms.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Entity {
    /// Unique identifier within the graph (the first surface form seen).
    pub id: String,
    /// Human-readable canonical name.
    pub canonical_name: String,
    /// Case-folded surface forms that resolve to this entity; always
    /// contains the folded canonical name.
    pub aliases: BTreeSet<String>,
    /// Optional external concept code (UMLS-style).
    pub external_code: Option<String>,
}

/// A relation name plus its description template, when one exists.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Relation {
    pub name: String,
    /// Template with `{A}` / `{B}` placeholders; present for every relation
    /// in the canonical vocabulary.
    pub description_template: Option<String>,
}

/// Input format for graph text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KgFormat {
    /// Tab-separated `head\trelation\ttail[\talias1|alias2][\tcode]`.
    Tsv,
    /// Comma-separated with optional double-quoted fields, same columns.
    Csv,
}

/// Options controlling graph parsing.
#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub format: KgFormat,
    /// When set, a relation outside the canonical vocabulary is a parse
    /// error instead of an open-vocabulary extension.
    pub strict_vocabulary: bool,
}

impl ParseOptions {
    pub fn new(format: KgFormat) -> Self {
        ParseOptions {
            format,
            strict_vocabulary: false,
        }
    }
}

/// Errors from graph construction and queries.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KgError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: relation '{name}' is outside the canonical vocabulary")]
    UnknownRelation { line: usize, name: String },
    #[error("surface '{surface}' is ambiguous; candidates: {}", candidates.join(", "))]
    AmbiguousEntity {
        surface: String,
        candidates: Vec<String>,
    },
    #[error("triplet {0} is not in the graph")]
    NotInGraph(String),
    #[error("cannot resolve '{0}' to a graph entity")]
    UnresolvedEntity(String),
    #[error("cannot resolve relation '{0}'")]
    UnresolvedRelation(String),
    #[error("split ratio {0} is outside (0, 1)")]
    BadRatio(f64),
    #[error("graph too small: {0}")]
    GraphTooSmall(String),
    #[error("only {available} filtered negatives exist, {requested} requested")]
    NegativesExhausted { available: usize, requested: usize },
}

/// Case-fold a surface form for lookup and identity: lowercase, map
/// punctuation to spaces, collapse runs of whitespace.
pub fn fold_surface(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut pending_space = false;
    for ch in s.chars() {
        if ch.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for lc in ch.to_lowercase() {
                out.push(lc);
            }
        } else {
            pending_space = true;
        }
    }
    out
}

/// Immutable entity/relation/triplet store with alias lookup, undirected
/// membership, deterministic splitting, and filtered negative sampling.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vec<Entity>,
    relations: Vec<Relation>,
    /// Stored orientation, as (head, relation, tail) table indexes.
    triplets: Vec<(u32, u32, u32)>,
    entity_index: BTreeMap<String, u32>,
    relation_index: BTreeMap<String, u32>,
    /// Folded surface -> entity indexes (more than one = ambiguous).
    alias_index: BTreeMap<String, Vec<u32>>,
    /// Canonicalized undirected membership keys (relation, min, max).
    membership: BTreeSet<(u32, u32, u32)>,
    /// head -> (relation, tail) and tail -> (relation, head).
    adjacency_out: BTreeMap<u32, Vec<(u32, u32)>>,
    adjacency_in: BTreeMap<u32, Vec<(u32, u32)>>,
}

impl KnowledgeGraph {
    /// Parse graph text. Duplicate facts (including endpoint-swapped
    /// duplicates) are dropped, keeping the first stored orientation.
    pub fn parse(text: &str, opts: ParseOptions) -> Result<Self, KgError> {
        let mut builder = Builder::default();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields = match opts.format {
                KgFormat::Tsv => trimmed.split('\t').map(|f| f.trim().to_owned()).collect(),
                KgFormat::Csv => split_csv(trimmed),
            };
            if fields.len() < 3 {
                return Err(KgError::MalformedRow {
                    line,
                    reason: format!("expected at least 3 columns, found {}", fields.len()),
                });
            }
            let (head, relation, tail) = (&fields[0], &fields[1], &fields[2]);
            if head.is_empty() || relation.is_empty() || tail.is_empty() {
                return Err(KgError::MalformedRow {
                    line,
                    reason: "empty head, relation, or tail".to_string(),
                });
            }
            if opts.strict_vocabulary && !relations::is_canonical(relation) {
                return Err(KgError::UnknownRelation {
                    line,
                    name: relation.clone(),
                });
            }
            let aliases: Vec<&str> = fields
                .get(3)
                .map(|f| {
                    f.split('|')
                        .map(str::trim)
                        .filter(|a| !a.is_empty())
                        .collect()
                })
                .unwrap_or_default();
            let code = fields.get(4).filter(|c| !c.is_empty());
            let h = builder.entity(head);
            // Inline alias/code columns annotate the row's head entity; the
            // separate alias-map file covers arbitrary entities.
            for alias in aliases {
                builder.add_alias(h, alias);
            }
            if let Some(code) = code {
                builder.set_code(h, code, line)?;
            }
            let t = builder.entity(tail);
            let r = builder.relation(relation);
            builder.add_triplet(h, r, t);
        }
        Ok(builder.finish())
    }

    /// Parse graph text plus a two-column alias map: `surface\tentity_id`
    /// per line. Alias rows referring to unknown entity ids are errors.
    pub fn parse_with_aliases(
        text: &str,
        opts: ParseOptions,
        alias_map: &str,
    ) -> Result<Self, KgError> {
        let mut graph = Self::parse(text, opts)?;
        for (idx, raw_line) in alias_map.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut parts = trimmed.splitn(2, '\t');
            let surface = parts.next().unwrap_or("").trim();
            let id = parts.next().unwrap_or("").trim();
            if surface.is_empty() || id.is_empty() {
                return Err(KgError::MalformedRow {
                    line,
                    reason: "alias rows need `surface<TAB>entity_id`".to_string(),
                });
            }
            let e = *graph
                .entity_index
                .get(id)
                .ok_or_else(|| KgError::UnresolvedEntity(id.to_string()))?;
            let folded = fold_surface(surface);
            graph.entities[e as usize].aliases.insert(folded.clone());
            let slot = graph.alias_index.entry(folded).or_default();
            if !slot.contains(&e) {
                slot.push(e);
            }
        }
        Ok(graph)
    }

    /// Build a graph directly from triplets (entity ids become the surface
    /// forms as given). Convenient for synthetic fixtures.
    pub fn from_triplets<'a>(triplets: impl IntoIterator<Item = &'a Triplet>) -> Self {
        let mut builder = Builder::default();
        for t in triplets {
            let h = builder.entity(&t.head);
            let tl = builder.entity(&t.tail);
            let r = builder.relation(&t.relation);
            builder.add_triplet(h, r, tl);
        }
        builder.finish()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn triplet_count(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Stored triplets in load order, with canonical entity ids.
    pub fn triplets(&self) -> impl Iterator<Item = Triplet> + '_ {
        self.triplets.iter().map(move |&(h, r, t)| Triplet {
            head: self.entities[h as usize].id.clone(),
            relation: self.relations[r as usize].name.clone(),
            tail: self.entities[t as usize].id.clone(),
        })
    }

    /// Outgoing edges of an entity id: (relation name, tail id).
    pub fn outgoing(&self, entity_id: &str) -> Vec<(String, String)> {
        self.adjacency_edges(&self.adjacency_out, entity_id)
    }

    /// Incoming edges of an entity id: (relation name, head id).
    pub fn incoming(&self, entity_id: &str) -> Vec<(String, String)> {
        self.adjacency_edges(&self.adjacency_in, entity_id)
    }

    fn adjacency_edges(
        &self,
        adj: &BTreeMap<u32, Vec<(u32, u32)>>,
        entity_id: &str,
    ) -> Vec<(String, String)> {
        let Some(&e) = self.entity_index.get(entity_id) else {
            return Vec::new();
        };
        adj.get(&e)
            .map(|edges| {
                edges
                    .iter()
                    .map(|&(r, other)| {
                        (
                            self.relations[r as usize].name.clone(),
                            self.entities[other as usize].id.clone(),
                        )
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Resolve a surface form to its unique entity, if any.
    ///
    /// Returns `Ok(None)` when nothing matches and an error listing the
    /// candidate ids when the surface is ambiguous.
    pub fn normalize_entity(&self, surface: &str) -> Result<Option<&Entity>, KgError> {
        let folded = fold_surface(surface);
        if folded.is_empty() {
            return Ok(None);
        }
        match self.alias_index.get(&folded) {
            None => Ok(None),
            Some(hits) if hits.len() == 1 => Ok(Some(&self.entities[hits[0] as usize])),
            Some(hits) => Err(KgError::AmbiguousEntity {
                surface: surface.to_string(),
                candidates: hits
                    .iter()
                    .map(|&e| self.entities[e as usize].id.clone())
                    .collect(),
            }),
        }
    }

    pub fn relation_by_name(&self, name: &str) -> Option<&Relation> {
        self.relation_index
            .get(name)
            .map(|&r| &self.relations[r as usize])
    }

    /// Undirected membership test. Unresolvable endpoints or relations give
    /// `false`, never an error.
    pub fn contains_triplet(&self, t: &Triplet) -> bool {
        let (Ok(Some(h)), Ok(Some(tl))) = (
            self.normalize_entity(&t.head),
            self.normalize_entity(&t.tail),
        ) else {
            return false;
        };
        let Some(&r) = self.relation_index.get(&t.relation) else {
            return false;
        };
        let (&h, &tl) = (
            self.entity_index.get(&h.id).expect("indexed entity"),
            self.entity_index.get(&tl.id).expect("indexed entity"),
        );
        self.membership.contains(&membership_key(h, r, tl))
    }

    /// Split the fact set into disjoint train/test graphs.
    ///
    /// Deterministic for a fixed seed. Train sizes land within 1 of
    /// `ratio * |triplets|`, and every entity and relation of the graph is
    /// guaranteed to appear in at least one train triplet, so nothing in
    /// test is unseen at embedding-training time.
    pub fn split(
        &self,
        ratio: f64,
        seed: u64,
    ) -> Result<(KnowledgeGraph, KnowledgeGraph), KgError> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(KgError::BadRatio(ratio));
        }
        let n = self.triplets.len();
        if n < 2 {
            return Err(KgError::GraphTooSmall(
                "need at least 2 triplets to split".to_string(),
            ));
        }
        let target_train = (crate::num::round(ratio * n as f64) as usize).clamp(1, n - 1);

        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);

        // First pass: force coverage. Any triplet introducing an entity or
        // relation not yet seen in train goes to train.
        let mut seen_entities = BTreeSet::new();
        let mut seen_relations = BTreeSet::new();
        let mut train_idx = Vec::with_capacity(target_train);
        let mut deferred = Vec::new();
        for &i in &order {
            let (h, r, t) = self.triplets[i];
            if seen_entities.contains(&h)
                && seen_entities.contains(&t)
                && seen_relations.contains(&r)
            {
                deferred.push(i);
            } else {
                seen_entities.insert(h);
                seen_entities.insert(t);
                seen_relations.insert(r);
                train_idx.push(i);
            }
        }
        if train_idx.len() > target_train {
            return Err(KgError::GraphTooSmall(format!(
                "coverage needs {} train triplets but the ratio allows only {}",
                train_idx.len(),
                target_train
            )));
        }
        let still_needed = target_train - train_idx.len();
        train_idx.extend(deferred.iter().take(still_needed).copied());
        let test_idx: Vec<usize> = deferred.into_iter().skip(still_needed).collect();

        Ok((self.subgraph(&train_idx), self.subgraph(&test_idx)))
    }

    /// New graph over the same entity/relation tables with a subset of
    /// triplets. Keeping the full tables preserves alias/code metadata.
    fn subgraph(&self, idx: &[usize]) -> KnowledgeGraph {
        let mut sorted: Vec<usize> = idx.to_vec();
        sorted.sort_unstable();
        let mut g = KnowledgeGraph {
            entities: self.entities.clone(),
            relations: self.relations.clone(),
            triplets: Vec::with_capacity(sorted.len()),
            entity_index: self.entity_index.clone(),
            relation_index: self.relation_index.clone(),
            alias_index: self.alias_index.clone(),
            membership: BTreeSet::new(),
            adjacency_out: BTreeMap::new(),
            adjacency_in: BTreeMap::new(),
        };
        for i in sorted {
            let (h, r, t) = self.triplets[i];
            g.push_triplet(h, r, t);
        }
        g
    }

    fn push_triplet(&mut self, h: u32, r: u32, t: u32) {
        self.triplets.push((h, r, t));
        self.membership.insert(membership_key(h, r, t));
        self.adjacency_out.entry(h).or_default().push((r, t));
        self.adjacency_in.entry(t).or_default().push((r, h));
    }

    /// Sample `n` distinct filtered negatives for a graph triplet: each
    /// differs from `t` in exactly the head or the tail, and none is a known
    /// fact (under undirected membership).
    ///
    /// Candidates are enumerated exhaustively and sampled by seeded shuffle,
    /// so results are deterministic and exhaustion is exact.
    pub fn sample_negatives(
        &self,
        t: &Triplet,
        n: usize,
        seed: u64,
    ) -> Result<Vec<Triplet>, KgError> {
        if !self.contains_triplet(t) {
            return Err(KgError::NotInGraph(t.to_string()));
        }
        let h = self.resolve_entity(&t.head)?;
        let tl = self.resolve_entity(&t.tail)?;
        let r = *self
            .relation_index
            .get(&t.relation)
            .ok_or_else(|| KgError::UnresolvedRelation(t.relation.clone()))?;

        let mut candidates = Vec::new();
        for e in 0..self.entities.len() as u32 {
            if e != h && !self.membership.contains(&membership_key(e, r, tl)) {
                candidates.push((e, r, tl));
            }
            if e != tl && !self.membership.contains(&membership_key(h, r, e)) {
                candidates.push((h, r, e));
            }
        }
        // The two passes cannot produce duplicates: one varies the head with
        // the tail fixed, the other the tail with the head fixed, and the
        // (h, tl) original is excluded from both.
        if candidates.len() < n {
            return Err(KgError::NegativesExhausted {
                available: candidates.len(),
                requested: n,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        candidates.shuffle(&mut rng);
        Ok(candidates
            .into_iter()
            .take(n)
            .map(|(h, r, t)| Triplet {
                head: self.entities[h as usize].id.clone(),
                relation: self.relations[r as usize].name.clone(),
                tail: self.entities[t as usize].id.clone(),
            })
            .collect())
    }

    fn resolve_entity(&self, surface: &str) -> Result<u32, KgError> {
        let entity = self
            .normalize_entity(surface)?
            .ok_or_else(|| KgError::UnresolvedEntity(surface.to_string()))?;
        Ok(*self.entity_index.get(&entity.id).expect("indexed entity"))
    }

    /// Internal id triplets for the embedding trainer.
    pub(crate) fn id_triplets(&self) -> &[(u32, u32, u32)] {
        &self.triplets
    }

    pub(crate) fn contains_ids(&self, h: u32, r: u32, t: u32) -> bool {
        self.membership.contains(&membership_key(h, r, t))
    }

    pub(crate) fn entity_id(&self, idx: u32) -> &str {
        &self.entities[idx as usize].id
    }

    pub(crate) fn relation_name(&self, idx: u32) -> &str {
        &self.relations[idx as usize].name
    }
}

fn membership_key(h: u32, r: u32, t: u32) -> (u32, u32, u32) {
    if h <= t {
        (r, h, t)
    } else {
        (r, t, h)
    }
}

/// Split a CSV line honoring double-quoted fields (`""` escapes a quote).
fn split_csv(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut field = String::new();
    let mut chars = line.chars().peekable();
    let mut in_quotes = false;
    while let Some(ch) = chars.next() {
        match ch {
            '"' if in_quotes => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    field.push('"');
                } else {
                    in_quotes = false;
                }
            }
            '"' => in_quotes = true,
            ',' if !in_quotes => {
                fields.push(field.trim().to_owned());
                field = String::new();
            }
            _ => field.push(ch),
        }
    }
    fields.push(field.trim().to_owned());
    fields
}

#[derive(Default)]
struct Builder {
    entities: Vec<Entity>,
    relations: Vec<Relation>,
    entity_index: BTreeMap<String, u32>,
    relation_index: BTreeMap<String, u32>,
    alias_index: BTreeMap<String, Vec<u32>>,
    triplets: Vec<(u32, u32, u32)>,
    membership: BTreeSet<(u32, u32, u32)>,
}

impl Builder {
    fn entity(&mut self, surface: &str) -> u32 {
        if let Some(&e) = self.entity_index.get(surface) {
            return e;
        }
        let idx = self.entities.len() as u32;
        let folded = fold_surface(surface);
        let mut aliases = BTreeSet::new();
        aliases.insert(folded.clone());
        self.entities.push(Entity {
            id: surface.to_string(),
            canonical_name: surface.to_string(),
            aliases,
            external_code: None,
        });
        self.entity_index.insert(surface.to_string(), idx);
        self.alias_index.entry(folded).or_default().push(idx);
        idx
    }

    fn add_alias(&mut self, e: u32, alias: &str) {
        let folded = fold_surface(alias);
        if folded.is_empty() {
            return;
        }
        self.entities[e as usize].aliases.insert(folded.clone());
        let slot = self.alias_index.entry(folded).or_default();
        if !slot.contains(&e) {
            slot.push(e);
        }
    }

    fn set_code(&mut self, e: u32, code: &str, line: usize) -> Result<(), KgError> {
        let entity = &mut self.entities[e as usize];
        match &entity.external_code {
            Some(existing) if existing != code => Err(KgError::MalformedRow {
                line,
                reason: format!(
                    "entity '{}' already has code '{}', row says '{}'",
                    entity.id, existing, code
                ),
            }),
            _ => {
                entity.external_code = Some(code.to_string());
                let folded = fold_surface(code);
                if !folded.is_empty() {
                    entity.aliases.insert(folded.clone());
                    let slot = self.alias_index.entry(folded).or_default();
                    if !slot.contains(&e) {
                        slot.push(e);
                    }
                }
                Ok(())
            }
        }
    }

    fn relation(&mut self, name: &str) -> u32 {
        if let Some(&r) = self.relation_index.get(name) {
            return r;
        }
        let idx = self.relations.len() as u32;
        self.relations.push(Relation {
            name: name.to_string(),
            description_template: relations::template_for(name).map(|t| t.to_string()),
        });
        self.relation_index.insert(name.to_string(), idx);
        idx
    }

    fn add_triplet(&mut self, h: u32, r: u32, t: u32) {
        let key = membership_key(h, r, t);
        if self.membership.insert(key) {
            self.triplets.push((h, r, t));
        }
    }

    fn finish(self) -> KnowledgeGraph {
        let mut g = KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            triplets: Vec::with_capacity(self.triplets.len()),
            entity_index: self.entity_index,
            relation_index: self.relation_index,
            alias_index: self.alias_index,
            membership: BTreeSet::new(),
            adjacency_out: BTreeMap::new(),
            adjacency_in: BTreeMap::new(),
        };
        for (h, r, t) in self.triplets {
            g.push_triplet(h, r, t);
        }
        g
    }
}
