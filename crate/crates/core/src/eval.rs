//! Test-sample construction and ranking metrics: nDCG@K, MRR, and
//! Recall@Top-K%.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::fmt::Write as _;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

/// One shuffled evaluation sample: warning ids with ground-truth AWHB flags,
/// in presentation order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalSample {
    pub members: Vec<(u64, bool)>,
    pub seed: u64,
}

impl EvalSample {
    pub fn awhb_count(&self) -> usize {
        self.members.iter().filter(|(_, a)| *a).count()
    }
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha8Rng) {
    for i in (1..items.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        items.swap(i, j);
    }
}

/// Draw `n` samples of `size` warnings each from the pool, topping each up
/// to at least `min_awhb` AWHBs by targeted resampling, then shuffling.
/// Fully reproducible from `seed`.
pub fn build_samples(
    pool: &[(u64, bool)],
    n: usize,
    size: usize,
    min_awhb: usize,
    seed: u64,
) -> Result<Vec<EvalSample>, EvalError> {
    let total_awhb = pool.iter().filter(|(_, a)| *a).count();
    if pool.len() < size {
        return Err(EvalError::InsufficientData(format!(
            "pool has {} warnings, need {size}",
            pool.len()
        )));
    }
    if total_awhb < min_awhb {
        return Err(EvalError::InsufficientData(format!(
            "pool has {total_awhb} AWHBs, need {min_awhb}"
        )));
    }
    if min_awhb > size {
        return Err(EvalError::InsufficientData(format!(
            "cannot fit {min_awhb} AWHBs in samples of {size}"
        )));
    }
    let awhb_indices: Vec<usize> = pool
        .iter()
        .enumerate()
        .filter(|(_, (_, a))| *a)
        .map(|(i, _)| i)
        .collect();

    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let mut scratch: Vec<usize> = (0..pool.len()).collect();
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let sample_seed = master.next_u64();
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        // Partial Fisher-Yates: the first `size` entries are a uniform draw
        // without replacement.
        for i in 0..size {
            let j = i + (rng.next_u64() % (pool.len() - i) as u64) as usize;
            scratch.swap(i, j);
        }
        let mut chosen: Vec<usize> = scratch[..size].to_vec();
        let mut in_sample: HashSet<usize> = chosen.iter().copied().collect();
        let mut have = chosen.iter().filter(|&&i| pool[i].1).count();
        while have < min_awhb {
            let candidate = awhb_indices[(rng.next_u64() % awhb_indices.len() as u64) as usize];
            if in_sample.contains(&candidate) {
                continue;
            }
            // Replace a random non-AWHB member.
            let victim_pos = loop {
                let pos = (rng.next_u64() % size as u64) as usize;
                if !pool[chosen[pos]].1 {
                    break pos;
                }
            };
            in_sample.remove(&chosen[victim_pos]);
            in_sample.insert(candidate);
            chosen[victim_pos] = candidate;
            have += 1;
        }
        let mut members: Vec<(u64, bool)> = chosen.iter().map(|&i| pool[i]).collect();
        shuffle(&mut members, &mut rng);
        samples.push(EvalSample { members, seed: sample_seed });
    }
    Ok(samples)
}

/// Discounted cumulative gain at `k` of gains in rank order.
fn dcg_at_k<S: Scalar>(gains: &[S], k: usize) -> S {
    gains
        .iter()
        .take(k)
        .enumerate()
        .fold(S::zero(), |acc, (i, &g)| {
            acc + g / S::from_f64_lit(((i + 2) as f64).log2())
        })
}

/// Normalized DCG at `k`: DCG over the ideal (descending-gain) ordering's
/// DCG; 0 when there is nothing relevant.
pub fn ndcg_at_k<S: Scalar>(gains: &[S], k: usize) -> S {
    assert!(k >= 1, "k must be >= 1");
    let mut ideal = gains.to_vec();
    ideal.sort_by(|a, b| b.partial_cmp(a).expect("gains are finite"));
    let idcg = dcg_at_k(&ideal, k);
    if idcg <= S::zero() {
        return S::zero();
    }
    dcg_at_k(gains, k) / idcg
}

/// Reciprocal rank of the first relevant item; 0 when none.
pub fn reciprocal_rank<S: Scalar>(relevant: &[bool]) -> S {
    relevant
        .iter()
        .position(|&r| r)
        .map(|i| S::one() / S::from_f64_lit((i + 1) as f64))
        .unwrap_or_else(S::zero)
}

/// Mean reciprocal rank over per-sample relevance lists.
pub fn mrr<S: Scalar>(lists: &[Vec<bool>]) -> S {
    if lists.is_empty() {
        return S::zero();
    }
    let total = lists
        .iter()
        .fold(S::zero(), |acc, l| acc + reciprocal_rank(l));
    total / S::from_f64_lit(lists.len() as f64)
}

/// Fraction of all relevant items that appear within the top
/// `ceil(k_percent% of N)` positions. An empty truth set counts as fully
/// covered.
pub fn recall_at_percent<S: Scalar>(relevant: &[bool], k_percent: u32) -> S {
    assert!((1..=100).contains(&k_percent), "k_percent must be 1..=100");
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 {
        return S::one();
    }
    let cutoff = ((k_percent as f64 / 100.0) * relevant.len() as f64).ceil() as usize;
    let hit = relevant.iter().take(cutoff).filter(|&&r| r).count();
    S::from_f64_lit(hit as f64) / S::from_f64_lit(total as f64)
}

/// Aggregated metrics over a batch of evaluation samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// Mean nDCG@K per cutoff.
    pub ndcg: BTreeMap<u32, f64>,
    pub mrr: f64,
    /// Mean Recall@Top-K% per percentage.
    pub recall_at_percent: BTreeMap<u32, f64>,
}

impl MetricsReport {
    /// Mean metrics over per-sample relevance lists (rank order, binary
    /// gains unless `gains` supplies graded ones).
    pub fn from_samples(
        relevance: &[Vec<bool>],
        gains: Option<&[Vec<f64>]>,
        ndcg_ks: &[u32],
        recall_percents: &[u32],
    ) -> MetricsReport {
        let n = relevance.len().max(1) as f64;
        let mut ndcg = BTreeMap::new();
        for &k in ndcg_ks {
            let sum: f64 = relevance
                .iter()
                .enumerate()
                .map(|(i, rel)| {
                    let gain_vec: Vec<f64> = match gains {
                        Some(g) => g[i].clone(),
                        None => rel.iter().map(|&r| if r { 1.0 } else { 0.0 }).collect(),
                    };
                    ndcg_at_k(&gain_vec, k as usize)
                })
                .sum();
            ndcg.insert(k, sum / n);
        }
        let mut recall = BTreeMap::new();
        for &p in recall_percents {
            let sum: f64 = relevance
                .iter()
                .map(|rel| recall_at_percent::<f64>(rel, p))
                .sum();
            recall.insert(p, sum / n);
        }
        MetricsReport { ndcg, mrr: mrr(relevance), recall_at_percent: recall }
    }

    /// Aligned plain-text rendering.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<16} {:>8}", "metric", "value");
        for (k, v) in &self.ndcg {
            let _ = writeln!(out, "{:<16} {:>8.4}", format!("nDCG@{k}"), v);
        }
        let _ = writeln!(out, "{:<16} {:>8.4}", "MRR", self.mrr);
        for (p, v) in &self.recall_at_percent {
            let _ = writeln!(out, "{:<16} {:>8.4}", format!("Recall@Top-{p}%"), v);
        }
        out
    }
}
