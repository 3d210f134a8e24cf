//! Batch objective evaluation: scores, loss and parameter gradients.
//!
//! One batch instance is a query plus its sampled corruptions. The batch
//! loss is the mean over instances of
//!
//! ```text
//! A * -log sigmoid(s_pos + gamma)  +  B * sum_i w_i * -log sigmoid(-s_i - gamma)
//! ```
//!
//! where `(A, B)` are the instance's subsampling weights (1 when disabled)
//! and `w_i` the family's negative coefficients. Gradients flow through the
//! scores into the touched parameter rows; self-adversarial coefficients are
//! constants under differentiation (stop-gradient).
//!
//! Instances are evaluated in parallel over fixed-size chunks and the chunk
//! results merged in chunk order, so the result is a pure function of the
//! batch — independent of thread count and scheduling.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::data::{FrequencyTable, Query};
use crate::loss::{dpos, log_sigmoid, negative_weights, sigmoid, LossSpec, SubsamplingMethod};
use crate::sampling::NegativeBatch;
use crate::scoring::{score, score_grad, ModelParams, Slot};
use crate::subsample::SubsampleTable;

/// Chunk width for deterministic parallel reduction.
const CHUNK: usize = 32;

/// One positive instance with its corruptions.
#[derive(Debug, Clone)]
pub struct BatchInstance {
    pub query: Query,
    pub negatives: NegativeBatch,
}

/// Subsampling context handed to the batch evaluator.
#[derive(Clone, Copy)]
pub struct WeightContext<'a> {
    pub table: &'a SubsampleTable,
    pub freq: &'a FrequencyTable,
    /// Apply the split-size rescaling (the trainer default).
    pub rescaled: bool,
}

impl WeightContext<'_> {
    fn weights(&self, q: &Query) -> (f64, f64) {
        if self.rescaled {
            self.table.weights_rescaled(q, self.freq)
        } else {
            self.table.weights(q, self.freq)
        }
    }
}

/// Sparse batch gradient: dense blocks per touched row plus the scalar.
#[derive(Debug, Clone, Default)]
pub struct GradAccumulator {
    pub entity: HashMap<usize, Vec<f64>>,
    pub relation: HashMap<usize, Vec<f64>>,
    pub lambda: f64,
    pub lambda_touched: bool,
}

impl GradAccumulator {
    pub fn add_scaled(&mut self, grad: &crate::scoring::ScoreGradient, scale: f64) {
        for (slot, block) in &grad.entries {
            match slot {
                Slot::Entity(id) => {
                    let row = self
                        .entity
                        .entry(*id)
                        .or_insert_with(|| vec![0.0; block.len()]);
                    for (r, b) in row.iter_mut().zip(block) {
                        *r += scale * b;
                    }
                }
                Slot::Relation(id) => {
                    let row = self
                        .relation
                        .entry(*id)
                        .or_insert_with(|| vec![0.0; block.len()]);
                    for (r, b) in row.iter_mut().zip(block) {
                        *r += scale * b;
                    }
                }
                Slot::Lambda => {
                    self.lambda += scale * block[0];
                    self.lambda_touched = true;
                }
            }
        }
    }

    fn merge(&mut self, other: GradAccumulator) {
        for (id, block) in other.entity {
            match self.entity.entry(id) {
                std::collections::hash_map::Entry::Occupied(mut e) => {
                    for (r, b) in e.get_mut().iter_mut().zip(&block) {
                        *r += b;
                    }
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(block);
                }
            }
        }
        for (id, block) in other.relation {
            match self.relation.entry(id) {
                std::collections::hash_map::Entry::Occupied(mut e) => {
                    for (r, b) in e.get_mut().iter_mut().zip(&block) {
                        *r += b;
                    }
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(block);
                }
            }
        }
        self.lambda += other.lambda;
        self.lambda_touched |= other.lambda_touched;
    }

    pub fn scale(&mut self, f: f64) {
        for block in self.entity.values_mut().chain(self.relation.values_mut()) {
            for v in block {
                *v *= f;
            }
        }
        self.lambda *= f;
    }

    pub fn is_empty(&self) -> bool {
        self.entity.is_empty() && self.relation.is_empty() && !self.lambda_touched
    }
}

fn instance_weights(spec: &LossSpec, wctx: Option<&WeightContext<'_>>, q: &Query) -> (f64, f64) {
    match wctx {
        Some(ctx) if spec.subsampling != SubsamplingMethod::None => ctx.weights(q),
        _ => (1.0, 1.0),
    }
}

/// The coefficients applied to an instance's negative terms.
///
/// Pre-attached weights on the corruption set take precedence for the
/// self-adversarial family; this is how a finite-difference probe holds the
/// softmax coefficients fixed while scores move.
fn negative_coefficients(spec: &LossSpec, inst: &BatchInstance, neg_scores: &[f64]) -> Vec<f64> {
    match (&inst.negatives.weights, spec.family) {
        (Some(w), crate::loss::LossFamily::Sans) => w.clone(),
        _ => negative_weights(spec, neg_scores),
    }
}

/// Batch-mean loss without gradients (two score passes cheaper).
pub fn batch_loss(
    params: &ModelParams,
    batch: &[BatchInstance],
    spec: &LossSpec,
    wctx: Option<&WeightContext<'_>>,
) -> f64 {
    assert!(!batch.is_empty());
    let total: f64 = batch
        .iter()
        .map(|inst| {
            let s_pos = score(params, &inst.query, inst.query.answer);
            let s_neg: Vec<f64> = inst
                .negatives
                .entities
                .iter()
                .map(|&y| score(params, &inst.query, y))
                .collect();
            let coeff = negative_coefficients(spec, inst, &s_neg);
            let (a, b) = instance_weights(spec, wctx, &inst.query);
            let pos_term = -log_sigmoid(s_pos + spec.gamma);
            let neg_term: f64 = s_neg
                .iter()
                .zip(&coeff)
                .map(|(&s, &w)| -w * log_sigmoid(-s - spec.gamma))
                .sum();
            a * pos_term + b * neg_term
        })
        .sum();
    total / batch.len() as f64
}

/// Batch-mean loss and its gradient over every touched parameter row.
pub fn batch_loss_and_grad(
    params: &ModelParams,
    batch: &[BatchInstance],
    spec: &LossSpec,
    wctx: Option<&WeightContext<'_>>,
) -> (f64, GradAccumulator) {
    assert!(!batch.is_empty());
    let chunks: Vec<(f64, GradAccumulator)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut loss_sum = 0.0;
            let mut acc = GradAccumulator::default();
            for inst in chunk {
                let q = &inst.query;
                let (s_pos, g_pos) = score_grad(params, q, q.answer);
                let nu = inst.negatives.entities.len();
                let mut s_neg = Vec::with_capacity(nu);
                let mut g_neg = Vec::with_capacity(nu);
                for &y in &inst.negatives.entities {
                    let (s, g) = score_grad(params, q, y);
                    s_neg.push(s);
                    g_neg.push(g);
                }
                let coeff = negative_coefficients(spec, inst, &s_neg);
                let (a, b) = instance_weights(spec, wctx, q);

                let pos_term = -log_sigmoid(s_pos + spec.gamma);
                let neg_term: f64 = s_neg
                    .iter()
                    .zip(&coeff)
                    .map(|(&s, &w)| -w * log_sigmoid(-s - spec.gamma))
                    .sum();
                loss_sum += a * pos_term + b * neg_term;

                acc.add_scaled(&g_pos, a * dpos(s_pos, spec.gamma));
                for ((s, g), w) in s_neg.iter().zip(&g_neg).zip(&coeff) {
                    acc.add_scaled(g, b * w * sigmoid(s + spec.gamma));
                }
            }
            (loss_sum, acc)
        })
        .collect();

    let inv = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut acc = GradAccumulator::default();
    for (chunk_loss, chunk_acc) in chunks {
        loss += chunk_loss;
        acc.merge(chunk_acc);
    }
    acc.scale(inv);
    (loss * inv, acc)
}
