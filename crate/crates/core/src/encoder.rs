//! Deterministic feature-hashing encoder: the reference implementation
//! behind the encoder port. Text tokens hash into the first half of the
//! vector, code tokens into the second, unigrams and bigrams both, and each
//! half is L2-normalized. A neural encoder can replace it behind the same
//! trait without touching training or ranking.

use std::collections::BTreeMap;

use crate::features::FeatureBundle;
use crate::scalar::Scalar;

/// Default encoder dimensionality (two 2048-wide halves).
pub const DEFAULT_DIM: usize = 4096;

/// Sparse vector with entries sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec<S: Scalar> {
    dim: usize,
    entries: Vec<(u32, S)>,
}

impl<S: Scalar> SparseVec<S> {
    /// Build from `(index, value)` pairs; indices must be sorted, unique,
    /// and within `dim`.
    pub fn from_entries(dim: usize, entries: Vec<(u32, S)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        debug_assert!(entries.iter().all(|(i, _)| (*i as usize) < dim));
        SparseVec { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[(u32, S)] {
        &self.entries
    }

    pub fn to_dense(&self) -> Vec<S> {
        let mut dense = vec![S::zero(); self.dim];
        for &(i, v) in &self.entries {
            dense[i as usize] = v;
        }
        dense
    }
}

/// Maps feature bundles to fixed-length vectors.
pub trait Encoder<S: Scalar> {
    fn dim(&self) -> usize;
    fn encode(&self, bundle: &FeatureBundle) -> SparseVec<S>;
}

/// The hashing encoder. `dim` must be even; half goes to text, half to code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEncoder {
    dim: usize,
}

impl Default for HashingEncoder {
    fn default() -> Self {
        HashingEncoder::new(DEFAULT_DIM)
    }
}

impl HashingEncoder {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 2 && dim.is_multiple_of(2), "encoder dim must be even and >= 2");
        HashingEncoder { dim }
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Lowercased alphanumeric-plus-underscore tokens.
fn tokenize(field: &str) -> Vec<String> {
    field
        .split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Accumulate unigram and bigram counts of one field into `counts`,
/// restricted to `[offset, offset + half)`.
fn hash_field(field: &str, offset: usize, half: usize, counts: &mut BTreeMap<u32, u32>) {
    let tokens = tokenize(field);
    for t in &tokens {
        let idx = offset + (fnv1a(t.as_bytes()) % half as u64) as usize;
        *counts.entry(idx as u32).or_insert(0) += 1;
    }
    for pair in tokens.windows(2) {
        let joined = format!("{}\u{1f}{}", pair[0], pair[1]);
        let idx = offset + (fnv1a(joined.as_bytes()) % half as u64) as usize;
        *counts.entry(idx as u32).or_insert(0) += 1;
    }
}

fn normalize_half<S: Scalar>(entries: &mut [(u32, S)], lo: u32, hi: u32) {
    let norm_sq: S = entries
        .iter()
        .filter(|(i, _)| lo <= *i && *i < hi)
        .fold(S::zero(), |acc, (_, v)| acc + *v * *v);
    if norm_sq > S::zero() {
        let norm = norm_sq.sqrt();
        for (i, v) in entries.iter_mut() {
            if lo <= *i && *i < hi {
                *v /= norm;
            }
        }
    }
}

impl<S: Scalar> Encoder<S> for HashingEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn encode(&self, bundle: &FeatureBundle) -> SparseVec<S> {
        let half = self.dim / 2;
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();

        for field in [
            &bundle.text.bug_type,
            &bundle.text.qualifier,
            &bundle.text.procedure,
            &bundle.text.filename,
        ] {
            hash_field(field, 0, half, &mut counts);
        }
        hash_field(&bundle.code.statement, half, half, &mut counts);
        hash_field(&bundle.code.parent, half, half, &mut counts);
        for header in &bundle.code.flow {
            hash_field(header, half, half, &mut counts);
        }

        let mut entries: Vec<(u32, S)> = counts
            .into_iter()
            .map(|(i, c)| (i, S::from_u32(c).expect("count fits scalar")))
            .collect();
        normalize_half(&mut entries, 0, half as u32);
        normalize_half(&mut entries, half as u32, self.dim as u32);
        SparseVec { dim: self.dim, entries }
    }
}
