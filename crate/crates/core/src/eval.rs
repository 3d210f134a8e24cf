//! Filtered ranking evaluation: mean reciprocal rank and Hits@k.
//!
//! For each query the model scores every entity as a candidate answer. In
//! filtered mode, candidates that are *other* known answers of the same query
//! slot (anywhere in train/valid/test) are dropped before ranking, so a model
//! is never punished for preferring a different true answer. Ties resolve to
//! the average rank of the tied block, rounded half up — a model cannot buy
//! rank-1 results by scoring everything equal.

use rayon::prelude::*;
use serde::Serialize;

use crate::data::{FilterIndex, Query};
use crate::scoring::{score_all, ModelParams};

/// Whether known answers are removed from the candidate pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RankingMode {
    Raw,
    Filtered,
}

/// Rank of `answer` within `scores`, skipping `excluded` candidates.
///
/// `excluded` must be sorted; the answer itself is never excluded. The rank
/// is `1 + (# strictly better) + round_half_up((# tied others) / 2)`.
pub fn rank_from_scores(scores: &[f64], answer: usize, excluded: &[usize]) -> u32 {
    let target = scores[answer];
    let mut greater = 0u32;
    let mut equal = 0u32;
    for (y, &s) in scores.iter().enumerate() {
        if y == answer || excluded.binary_search(&y).is_ok() {
            continue;
        }
        if s > target {
            greater += 1;
        } else if s == target {
            equal += 1;
        }
    }
    1 + greater + equal.div_ceil(2)
}

/// Rank the true answer of one query under the given mode.
pub fn rank_answer(
    params: &ModelParams,
    query: &Query,
    filter: &FilterIndex,
    mode: RankingMode,
) -> u32 {
    let scores = score_all(params, query);
    let excluded: &[usize] = match mode {
        RankingMode::Raw => &[],
        RankingMode::Filtered => filter.known_answers(query),
    };
    rank_from_scores(&scores, query.answer, excluded)
}

/// Aggregated ranking metrics over a query set.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub mrr: f64,
    pub hits1: f64,
    pub hits3: f64,
    pub hits10: f64,
    pub n_queries: usize,
    /// Per-query ranks, aligned with the input order. Not serialized.
    #[serde(skip)]
    pub ranks: Vec<u32>,
}

impl EvalReport {
    /// Summarize a rank vector.
    ///
    /// The mean reciprocal rank is accumulated over a rank histogram in
    /// ascending rank order, so the result is independent of query order.
    pub fn from_ranks(ranks: Vec<u32>) -> EvalReport {
        assert!(!ranks.is_empty(), "no queries to evaluate");
        let n = ranks.len() as f64;
        let max_rank = *ranks.iter().max().unwrap() as usize;
        let mut hist = vec![0u64; max_rank + 1];
        for &r in &ranks {
            hist[r as usize] += 1;
        }
        let mut mrr = 0.0;
        let mut hits = [0u64; 3]; // thresholds 1, 3, 10
        for (r, &count) in hist.iter().enumerate().skip(1) {
            if count == 0 {
                continue;
            }
            mrr += count as f64 / r as f64;
            if r <= 1 {
                hits[0] += count;
            }
            if r <= 3 {
                hits[1] += count;
            }
            if r <= 10 {
                hits[2] += count;
            }
        }
        EvalReport {
            mrr: mrr / n,
            hits1: hits[0] as f64 / n,
            hits3: hits[1] as f64 / n,
            hits10: hits[2] as f64 / n,
            n_queries: ranks.len(),
            ranks,
        }
    }

    pub const TSV_HEADER: &'static str = "mrr\thits@1\thits@3\thits@10";

    /// Metrics scaled by 100, matching the usual reporting convention.
    pub fn tsv_row(&self) -> String {
        format!(
            "{:.2}\t{:.2}\t{:.2}\t{:.2}",
            self.mrr * 100.0,
            self.hits1 * 100.0,
            self.hits3 * 100.0,
            self.hits10 * 100.0
        )
    }
}

/// Rank every query and summarize. Deterministic and order-independent in
/// the metric values; the rank vector follows the input order.
pub fn evaluate(
    params: &ModelParams,
    queries: &[Query],
    filter: &FilterIndex,
    mode: RankingMode,
) -> EvalReport {
    let ranks: Vec<u32> = queries
        .par_iter()
        .map(|q| rank_answer(params, q, filter, mode))
        .collect();
    EvalReport::from_ranks(ranks)
}
