//! Sparse Adam optimizer over the embedding tables.
//!
//! Moment buffers cover the full parameter vectors, but a step only touches
//! the rows present in the gradient, so untouched rows keep their exact bit
//! patterns. The bias correction uses one global step counter shared by all
//! rows — standard for embedding training, where per-row step counts would
//! make the effective learning rate depend on sampling history.

use std::collections::BTreeMap;

use crate::batch::GradAccumulator;
use crate::scoring::ModelParams;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// First/second moment estimates plus the shared step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_entities: Vec<f64>,
    v_entities: Vec<f64>,
    m_relations: Vec<f64>,
    v_relations: Vec<f64>,
    m_lambda: f64,
    v_lambda: f64,
    /// Number of completed steps (used for bias correction).
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> Self {
        AdamState {
            m_entities: vec![0.0; params.entities.len()],
            v_entities: vec![0.0; params.entities.len()],
            m_relations: vec![0.0; params.relations.len()],
            v_relations: vec![0.0; params.relations.len()],
            m_lambda: 0.0,
            v_lambda: 0.0,
            t: 0,
        }
    }

    /// Apply one update with the given learning rate.
    ///
    /// Only parameter rows present in `grad` move. The scalar weight moves
    /// only when the gradient actually touched it.
    pub fn step(&mut self, params: &mut ModelParams, grad: &GradAccumulator, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - BETA1.powi(self.t as i32);
        let bc2 = 1.0 - BETA2.powi(self.t as i32);

        // Deterministic row order (HashMap iteration order is randomized).
        let entity_rows: BTreeMap<_, _> = grad.entity.iter().collect();
        let relation_rows: BTreeMap<_, _> = grad.relation.iter().collect();

        let e_stride = params.kind.entity_stride(params.dim);
        for (&row, block) in entity_rows {
            let base = row * e_stride;
            update_block(
                &mut params.entities[base..base + e_stride],
                &mut self.m_entities[base..base + e_stride],
                &mut self.v_entities[base..base + e_stride],
                block,
                lr,
                bc1,
                bc2,
            );
        }
        let r_stride = params.kind.relation_stride(params.dim);
        for (&row, block) in relation_rows {
            let base = row * r_stride;
            update_block(
                &mut params.relations[base..base + r_stride],
                &mut self.m_relations[base..base + r_stride],
                &mut self.v_relations[base..base + r_stride],
                block,
                lr,
                bc1,
                bc2,
            );
        }
        if grad.lambda_touched {
            let g = grad.lambda;
            self.m_lambda = BETA1 * self.m_lambda + (1.0 - BETA1) * g;
            self.v_lambda = BETA2 * self.v_lambda + (1.0 - BETA2) * g * g;
            let m_hat = self.m_lambda / bc1;
            let v_hat = self.v_lambda / bc2;
            params.lambda -= lr * m_hat / (v_hat.sqrt() + EPS);
        }
    }
}

fn update_block(
    theta: &mut [f64],
    m: &mut [f64],
    v: &mut [f64],
    grad: &[f64],
    lr: f64,
    bc1: f64,
    bc2: f64,
) {
    for i in 0..theta.len() {
        let g = grad[i];
        m[i] = BETA1 * m[i] + (1.0 - BETA1) * g;
        v[i] = BETA2 * v[i] + (1.0 - BETA2) * g * g;
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (v_hat.sqrt() + EPS);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{ModelKind, ScoreGradient, Slot};

    fn grad_for(row: usize, block: Vec<f64>) -> GradAccumulator {
        let mut acc = GradAccumulator::default();
        let sg = ScoreGradient {
            entries: vec![(Slot::Entity(row), block)],
        };
        acc.add_scaled(&sg, 1.0);
        acc
    }

    #[test]
    fn first_step_moves_by_lr_regardless_of_gradient_scale() {
        // With zero-initialized moments, m_hat/(sqrt(v_hat)+eps) is
        // g/(|g|+eps), so the first update is lr in magnitude up to a
        // relative eps/|g| shave from the denominator.
        for &g in &[1e-4, 1.0, 1e4] {
            let mut params = ModelParams::init(ModelKind::DistMult, 2, 3, 1, 6.0, 5);
            let before = params.entities[2]; // row 1, coord 0
            let mut adam = AdamState::new(&params);
            adam.step(&mut params, &grad_for(1, vec![g, 0.0]), 0.01);
            let delta = params.entities[2] - before;
            let want = -0.01 * g / (g + EPS);
            assert!(
                (delta - want).abs() < 1e-15,
                "g={g}: delta {delta} vs {want}"
            );
            assert!((delta + 0.01).abs() < 0.01 * 2.0 * EPS / g);
        }
    }

    #[test]
    fn untouched_rows_are_bitwise_unchanged() {
        let mut params = ModelParams::init(ModelKind::TransE, 4, 5, 2, 6.0, 7);
        let snapshot = params.clone();
        let mut adam = AdamState::new(&params);
        adam.step(&mut params, &grad_for(2, vec![0.5; 4]), 0.1);
        let stride = params.kind.entity_stride(params.dim);
        for row in 0..params.n_entities {
            for i in 0..stride {
                let a = params.entities[row * stride + i];
                let b = snapshot.entities[row * stride + i];
                if row == 2 {
                    assert_ne!(a.to_bits(), b.to_bits());
                } else {
                    assert_eq!(a.to_bits(), b.to_bits(), "row {row} moved");
                }
            }
        }
        for (a, b) in params.relations.iter().zip(&snapshot.relations) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn matches_textbook_scalar_trace() {
        // Hand-rolled reference on one coordinate with a fixed gradient
        // sequence; the optimizer must reproduce it exactly.
        let grads = [0.3, -0.7, 0.05, 1.2, -0.4];
        let lr = 0.05;
        let mut theta_ref = 0.25;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for (t, &g) in grads.iter().enumerate() {
            let t = (t + 1) as i32;
            m = BETA1 * m + (1.0 - BETA1) * g;
            v = BETA2 * v + (1.0 - BETA2) * g * g;
            let m_hat = m / (1.0 - BETA1.powi(t));
            let v_hat = v / (1.0 - BETA2.powi(t));
            theta_ref -= lr * m_hat / (v_hat.sqrt() + EPS);
        }

        let mut params = ModelParams::init(ModelKind::DistMult, 1, 2, 1, 6.0, 1);
        params.entities[0] = 0.25;
        let mut adam = AdamState::new(&params);
        for &g in &grads {
            adam.step(&mut params, &grad_for(0, vec![g]), lr);
        }
        assert_eq!(params.entities[0].to_bits(), theta_ref.to_bits());
        assert_eq!(adam.t, grads.len() as u64);
    }

    #[test]
    fn skipped_rows_resume_with_stale_moments() {
        // A row absent from one step keeps its moments; when it reappears
        // the correction uses the global counter, not a per-row one.
        let mut params = ModelParams::init(ModelKind::DistMult, 1, 2, 1, 6.0, 2);
        params.entities[0] = 0.0;
        params.entities[1] = 0.0;
        let mut adam = AdamState::new(&params);
        adam.step(&mut params, &grad_for(0, vec![1.0]), 0.1);
        adam.step(&mut params, &grad_for(1, vec![1.0]), 0.1); // row 0 idle
        adam.step(&mut params, &grad_for(0, vec![1.0]), 0.1);

        // Reference for row 0: gradient sequence (1, skip, 1) with global t.
        let (mut m, mut v, mut theta) = (0.0f64, 0.0f64, 0.0f64);
        for t in [1i32, 3] {
            m = BETA1 * m + (1.0 - BETA1) * 1.0;
            v = BETA2 * v + (1.0 - BETA2) * 1.0;
            let m_hat = m / (1.0 - BETA1.powi(t));
            let v_hat = v / (1.0 - BETA2.powi(t));
            theta -= 0.1 * m_hat / (v_hat.sqrt() + EPS);
        }
        assert_eq!(params.entities[0].to_bits(), theta.to_bits());
    }

    #[test]
    fn lambda_updates_only_when_touched() {
        let mut params = ModelParams::init(ModelKind::Hake, 2, 3, 1, 6.0, 4);
        let lam0 = params.lambda;
        let mut adam = AdamState::new(&params);

        adam.step(&mut params, &grad_for(0, vec![1.0; 4]), 0.1);
        assert_eq!(params.lambda.to_bits(), lam0.to_bits());

        let mut acc = GradAccumulator::default();
        let sg = ScoreGradient {
            entries: vec![(Slot::Lambda, vec![2.0])],
        };
        acc.add_scaled(&sg, 1.0);
        adam.step(&mut params, &acc, 0.1);
        // The scalar's first touch happens at global step 2, so the bias
        // correction is the t=2 one, not a per-parameter t=1.
        let m = BETA1 * 0.0 + (1.0 - BETA1) * 2.0;
        let v = BETA2 * 0.0 + (1.0 - BETA2) * 4.0;
        let m_hat = m / (1.0 - BETA1.powi(2));
        let v_hat = v / (1.0 - BETA2.powi(2));
        let want = lam0 - 0.1 * m_hat / (v_hat.sqrt() + EPS);
        assert_eq!(params.lambda.to_bits(), want.to_bits());
    }
}
