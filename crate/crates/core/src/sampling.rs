//! Negative sampling.
//!
//! Negatives corrupt the answer slot of a query with entities drawn
//! uniformly (with replacement) from the full entity set. No filtering
//! against known answers happens here: an occasional false negative is part
//! of the noise-distribution contract, and rejecting them would change the
//! distribution the losses assume.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::data::Query;

/// The sampled corruption set for one positive instance.
#[derive(Debug, Clone)]
pub struct NegativeBatch {
    /// Entity ids substituted into the answer slot, length `nu`.
    pub entities: Vec<usize>,
    /// Per-negative loss weights; filled by the self-adversarial loss path,
    /// `None` for weight-free families.
    pub weights: Option<Vec<f64>>,
}

/// Draw `nu` uniform corruptions for `query`.
pub fn sample_negatives(
    _query: &Query,
    nu: usize,
    n_entities: usize,
    rng: &mut ChaCha8Rng,
) -> NegativeBatch {
    assert!(nu >= 1, "need at least one negative sample");
    assert!(n_entities >= 1);
    let entities = (0..nu).map(|_| rng.gen_range(0..n_entities)).collect();
    NegativeBatch {
        entities,
        weights: None,
    }
}
