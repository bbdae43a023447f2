//! Core algorithms for knowledge-graph-grounded answer verification.
//!
//! This crate contains everything that is pure computation over in-memory
//! data, so it builds without the standard library (`--no-default-features`,
//! alloc required):
//!
//! - [`kg`]: immutable knowledge-graph store with alias-based entity
//!   normalization, undirected membership, deterministic splits, and
//!   filtered negative sampling.
//! - [`transe`]: TransE embedding training (margin ranking loss, SGD),
//!   triplet scoring, and filtered link-prediction metrics.
//! - [`align`]: the attention + feed-forward alignment block that fuses
//!   structural triplet embeddings with a relation-description token matrix,
//!   with exact reverse-mode gradients.
//! - [`relations`]: the 18-relation canonical vocabulary and its description
//!   templates.
//! - [`review`]: the verdict rule that separates factually wrong triplets
//!   from incomplete knowledge, the V/F partition, and the embedding-based
//!   judge backend.
//! - [`extract`]: tolerant extraction of structured payloads (triplet lists,
//!   string lists) from free-form model replies.
//! - [`question`]: question records, choice-aware classification, answer
//!   order/index perturbations, and multi-choice to open-ended conversion.
//! - [`medddx`]: distractor selection by embedding similarity and difficulty
//!   tiering from the similarity spread.
//! - [`embed`]: a deterministic hashing text embedder for offline runs.
//! - [`prompts`]: the agent's prompt templates with placeholder rendering.
//!
//! All randomized operations take explicit seeds and are deterministic in
//! single-threaded use.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod align;
pub mod embed;
pub mod extract;
pub mod kg;
pub mod mat;
pub mod medddx;
pub mod num;
pub mod prompts;
pub mod question;
pub mod relations;
pub mod review;
pub mod stats;
pub mod synth;
pub mod transe;

pub use kg::{Entity, KnowledgeGraph, Relation, Triplet};
pub use review::{ReviewVerdict, ReviewerBackend, VerdictKind, VerifiedTripletSet};
