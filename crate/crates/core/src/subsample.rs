//! Frequency-based instance weighting ("subsampling").
//!
//! Frequent training observations get discounted through per-instance
//! weights: `A` multiplies the positive term of the loss and `B` the
//! negative term. Three schemes, all built on inverse square-root counts:
//!
//! * `base` — `A = B` proportional to `1/sqrt(pair_freq)`, where a triple's
//!   pair frequency is its head-relation count plus its relation-tail count;
//! * `freq` — `A` proportional to `1/sqrt(pair_freq)`, `B` proportional to
//!   `1/sqrt(query_freq)` of the instance's known side;
//! * `uniq` — `A = B` proportional to `1/sqrt(query_freq)`.
//!
//! Proportional means normalized to sum to 1 over the training triples —
//! pair-based weights over the triple set, query-based weights over the
//! triple set within each prediction direction (the two directions of one
//! triple are distinct instances with generally different known-side
//! counts). On top of the normalization, weights are rescaled by the number
//! of training triples so that a uniform corpus yields all-ones weights and
//! turning a scheme on does not implicitly shrink the learning rate; the
//! rescaling can be disabled.

use crate::data::{FrequencyTable, Query, Triple};
use crate::loss::SubsamplingMethod;

/// Precomputed normalizers for one training split.
#[derive(Debug, Clone)]
pub struct SubsampleTable {
    method: SubsamplingMethod,
    /// Sum over triples of `1/sqrt(pair_freq)`.
    pair_normalizer: f64,
    /// Sum over triples of `1/sqrt(query_freq)`, one per direction.
    query_normalizer: [f64; 2],
    n_triples: usize,
}

fn inv_sqrt(count: u64) -> f64 {
    assert!(count > 0, "zero frequency for a counted training instance");
    1.0 / (count as f64).sqrt()
}

impl SubsampleTable {
    pub fn build(
        method: SubsamplingMethod,
        train: &[Triple],
        freq: &FrequencyTable,
    ) -> SubsampleTable {
        assert!(!train.is_empty());
        let mut pair_normalizer = 0.0;
        let mut query_normalizer = [0.0; 2];
        for t in train {
            pair_normalizer += inv_sqrt(freq.pair_freq(t));
            query_normalizer[0] += inv_sqrt(freq.count_head_rel(t.head, t.relation));
            query_normalizer[1] += inv_sqrt(freq.count_rel_tail(t.relation, t.tail));
        }
        SubsampleTable {
            method,
            pair_normalizer,
            query_normalizer,
            n_triples: train.len(),
        }
    }

    pub fn method(&self) -> SubsamplingMethod {
        self.method
    }

    pub fn n_triples(&self) -> usize {
        self.n_triples
    }

    /// Normalized `(A, B)` for one training instance, summing to 1 over the
    /// split (per direction for the query-based parts).
    pub fn weights(&self, q: &Query, freq: &FrequencyTable) -> (f64, f64) {
        if self.method == SubsamplingMethod::None {
            return (1.0, 1.0);
        }
        let triple = q.triple();
        let pair = inv_sqrt(freq.pair_freq(&triple)) / self.pair_normalizer;
        let query = inv_sqrt(freq.query_freq(q)) / self.query_normalizer[q.direction.index()];
        match self.method {
            SubsamplingMethod::None => unreachable!(),
            SubsamplingMethod::Base => (pair, pair),
            SubsamplingMethod::Freq => (pair, query),
            SubsamplingMethod::Uniq => (query, query),
        }
    }

    /// `(A, B)` scaled by the split size, the form the trainer applies.
    pub fn weights_rescaled(&self, q: &Query, freq: &FrequencyTable) -> (f64, f64) {
        let (a, b) = self.weights(q, freq);
        if self.method == SubsamplingMethod::None {
            (a, b)
        } else {
            let n = self.n_triples as f64;
            (a * n, b * n)
        }
    }
}

/// One-call convenience over [`SubsampleTable`].
pub fn subsample_weights(
    method: SubsamplingMethod,
    train: &[Triple],
    freq: &FrequencyTable,
    q: &Query,
) -> (f64, f64) {
    SubsampleTable::build(method, train, freq).weights(q, freq)
}
