//! Deterministic text embeddings via feature hashing.
//!
//! The embedder folds the text, hashes every character n-gram (n = 1..=3)
//! with FNV-1a, and scatters a signed count into a fixed-width vector, which
//! is then L2 normalized. It needs no model files, runs identically on every
//! platform, and gives related strings correlated vectors, which is all the
//! offline similarity machinery (distractor mining, open-answer matching)
//! requires of it.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::kg::fold_surface;
use crate::num;

pub const DEFAULT_EMBED_DIM: usize = 256;

/// 64-bit FNV-1a. Stable across platforms and runs; also used to key mock
/// transcripts.
pub fn fnv1a_64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// FNV-1a rendered as fixed-width lowercase hex.
pub fn fnv1a_64_hex(bytes: &[u8]) -> String {
    use core::fmt::Write;
    let mut out = String::with_capacity(16);
    let _ = write!(out, "{:016x}", fnv1a_64(bytes));
    out
}

/// Hashing text embedder with a fixed output width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashEmbedder {
    dim: usize,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dim: DEFAULT_EMBED_DIM,
        }
    }
}

impl HashEmbedder {
    /// Panics on a zero dimension.
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0, "embedder dimension must be positive");
        HashEmbedder { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Embed one text. The result is unit length; an empty (or
    /// punctuation-only) text maps to the first basis vector so downstream
    /// cosines stay well-defined.
    pub fn embed(&self, text: &str) -> Vec<f64> {
        let folded = fold_surface(text);
        let chars: Vec<char> = folded.chars().collect();
        let mut v = vec![0.0; self.dim];
        let mut buf = String::new();
        for n in 1..=3usize {
            if chars.len() < n {
                break;
            }
            for window in chars.windows(n) {
                buf.clear();
                buf.extend(window.iter());
                let h = fnv1a_64(buf.as_bytes());
                let bucket = (h % self.dim as u64) as usize;
                let sign = if (h >> 63) & 1 == 1 { -1.0 } else { 1.0 };
                v[bucket] += sign;
            }
        }
        let norm = num::l2_norm(&v);
        if norm == 0.0 {
            v[0] = 1.0;
            return v;
        }
        for x in &mut v {
            *x /= norm;
        }
        v
    }

    pub fn embed_batch(&self, texts: &[String]) -> Vec<Vec<f64>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "cosine needs equal-length vectors");
    let na = num::l2_norm(a);
    let nb = num::l2_norm(b);
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    num::dot(a, b) / (na * nb)
}
