//! Negative-sampling loss families over raw scores.
//!
//! All three families share the same shape: a positive term
//! `-log sigmoid(s_pos + gamma)` and a sum of negative terms
//! `-log sigmoid(-s_neg - gamma)`, differing only in how the negative sum is
//! weighted:
//!
//! * [`LossFamily::NsOriginal`] — each negative counts with weight 1, so the
//!   negative side grows linearly with the number of samples;
//! * [`LossFamily::NsKge`] — each negative counts with weight `1/nu`, making
//!   the loss scale-free in the sample count;
//! * [`LossFamily::Sans`] — self-adversarial weights: a temperature-scaled
//!   softmax of the negative scores themselves, treated as constants during
//!   differentiation (stop-gradient).
//!
//! The margin `gamma` shifts both sigmoids and is accepted by every family.

use serde::{Deserialize, Serialize};

/// Which weighting of the negative sum a run uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossFamily {
    /// Unit weight per negative sample.
    NsOriginal,
    /// `1/nu` weight per negative sample.
    NsKge,
    /// Softmax-of-scores weight per negative sample (stop-gradient).
    Sans,
}

/// How per-instance weights discount frequent training observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubsamplingMethod {
    /// No discounting: every instance weighs 1.
    None,
    /// Positive and negative terms both discounted by pair frequency.
    Base,
    /// Positive term by pair frequency, negative term by query frequency.
    Freq,
    /// Positive and negative terms both discounted by query frequency.
    Uniq,
}

/// Full description of the training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossSpec {
    pub family: LossFamily,
    /// Margin added inside both sigmoids. Non-negative.
    pub gamma: f64,
    /// Number of negative samples per positive instance. At least 1.
    pub num_negatives: usize,
    /// Self-adversarial temperature; ignored unless `family` is `Sans`.
    pub alpha: f64,
    pub subsampling: SubsamplingMethod,
}

impl LossSpec {
    pub fn validate(&self) -> Result<(), String> {
        // NaN must fail these checks, hence the explicit is_nan arms.
        if self.gamma.is_nan() || self.gamma < 0.0 {
            return Err(format!("margin must be non-negative, got {}", self.gamma));
        }
        if self.num_negatives == 0 {
            return Err("need at least one negative sample".into());
        }
        if self.family == LossFamily::Sans && (self.alpha.is_nan() || self.alpha < 0.0) {
            return Err(format!(
                "self-adversarial temperature must be non-negative, got {}",
                self.alpha
            ));
        }
        Ok(())
    }
}

/// `log(sigmoid(x))`, computed without overflow for |x| up to ~1e308.
///
/// Uses `log sigmoid(x) = -softplus(-x)` with the usual two-branch softplus.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Logistic function, the derivative companion of [`log_sigmoid`].
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Self-adversarial weights: `softmax(alpha * s)` over one instance's
/// negative scores. Stable under large scores via max-subtraction.
pub fn sans_weights(neg_scores: &[f64], alpha: f64) -> Vec<f64> {
    assert!(!neg_scores.is_empty());
    let m = neg_scores
        .iter()
        .fold(f64::NEG_INFINITY, |a, &b| a.max(alpha * b));
    let mut w: Vec<f64> = neg_scores.iter().map(|&s| (alpha * s - m).exp()).collect();
    let z: f64 = w.iter().sum();
    for v in &mut w {
        *v /= z;
    }
    w
}

/// Per-instance loss with unit negative weights.
pub fn instance_loss_original(s_pos: f64, s_neg: &[f64], gamma: f64) -> f64 {
    let neg: f64 = s_neg.iter().map(|&s| -log_sigmoid(-s - gamma)).sum();
    -log_sigmoid(s_pos + gamma) + neg
}

/// Per-instance loss with `1/nu` negative weights.
pub fn instance_loss_kge(s_pos: f64, s_neg: &[f64], gamma: f64) -> f64 {
    let nu = s_neg.len() as f64;
    let neg: f64 = s_neg.iter().map(|&s| -log_sigmoid(-s - gamma)).sum();
    -log_sigmoid(s_pos + gamma) + neg / nu
}

/// Per-instance loss with explicit negative weights (the self-adversarial
/// path once weights are computed, and the hook the finite-difference oracle
/// uses to probe the stop-gradient semantics).
pub fn instance_loss_weighted(s_pos: f64, s_neg: &[f64], weights: &[f64], gamma: f64) -> f64 {
    assert_eq!(s_neg.len(), weights.len());
    let neg: f64 = s_neg
        .iter()
        .zip(weights)
        .map(|(&s, &w)| -w * log_sigmoid(-s - gamma))
        .sum();
    -log_sigmoid(s_pos + gamma) + neg
}

/// Per-instance self-adversarial loss; weights derived from `s_neg` itself.
pub fn instance_loss_sans(s_pos: f64, s_neg: &[f64], gamma: f64, alpha: f64) -> f64 {
    let w = sans_weights(s_neg, alpha);
    instance_loss_weighted(s_pos, s_neg, &w, gamma)
}

/// Batch-mean loss with unit negative weights.
pub fn loss_original(pos: &[f64], neg: &[Vec<f64>], gamma: f64) -> f64 {
    batch_mean(pos, neg, |p, n| instance_loss_original(p, n, gamma))
}

/// Batch-mean loss with `1/nu` negative weights.
pub fn loss_kge(pos: &[f64], neg: &[Vec<f64>], gamma: f64) -> f64 {
    batch_mean(pos, neg, |p, n| instance_loss_kge(p, n, gamma))
}

/// Batch-mean self-adversarial loss.
pub fn loss_sans(pos: &[f64], neg: &[Vec<f64>], gamma: f64, alpha: f64) -> f64 {
    batch_mean(pos, neg, |p, n| instance_loss_sans(p, n, gamma, alpha))
}

fn batch_mean(pos: &[f64], neg: &[Vec<f64>], f: impl Fn(f64, &[f64]) -> f64) -> f64 {
    assert_eq!(pos.len(), neg.len());
    assert!(!pos.is_empty());
    let total: f64 = pos.iter().zip(neg).map(|(&p, n)| f(p, n)).sum();
    total / pos.len() as f64
}

/// Derivative of one instance's loss with respect to its positive score.
pub fn dpos(s_pos: f64, gamma: f64) -> f64 {
    sigmoid(s_pos + gamma) - 1.0
}

/// Derivatives of one instance's loss with respect to each negative score.
///
/// `weights` carries the per-negative coefficients: all ones for the unit
/// weighting, `1/nu` for the scale-free weighting, softmax weights for the
/// self-adversarial family (held constant — the stop-gradient convention).
pub fn dneg(s_neg: &[f64], weights: &[f64], gamma: f64) -> Vec<f64> {
    s_neg
        .iter()
        .zip(weights)
        .map(|(&s, &w)| w * sigmoid(s + gamma))
        .collect()
}

/// The negative-term coefficients for an instance under `spec`.
pub fn negative_weights(spec: &LossSpec, neg_scores: &[f64]) -> Vec<f64> {
    match spec.family {
        LossFamily::NsOriginal => vec![1.0; neg_scores.len()],
        LossFamily::NsKge => vec![1.0 / neg_scores.len() as f64; neg_scores.len()],
        LossFamily::Sans => sans_weights(neg_scores, spec.alpha),
    }
}

/// One instance's loss under `spec`.
pub fn instance_loss(spec: &LossSpec, s_pos: f64, s_neg: &[f64]) -> f64 {
    match spec.family {
        LossFamily::NsOriginal => instance_loss_original(s_pos, s_neg, spec.gamma),
        LossFamily::NsKge => instance_loss_kge(s_pos, s_neg, spec.gamma),
        LossFamily::Sans => instance_loss_sans(s_pos, s_neg, spec.gamma, spec.alpha),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn zero_scores_single_negative() {
        // -log s(0) twice = 2 ln 2.
        let l = loss_original(&[0.0], &[vec![0.0]], 0.0);
        assert!(close(l, 2.0 * LN_2, 1e-12), "{l}");
    }

    #[test]
    fn zero_scores_four_negatives_unit_weights() {
        // One positive + four negatives, all at ln 2 apiece.
        let l = loss_original(&[0.0], &[vec![0.0; 4]], 0.0);
        assert!(close(l, 5.0 * LN_2, 1e-12), "{l}");
    }

    #[test]
    fn zero_scores_four_negatives_scale_free() {
        let l = loss_kge(&[0.0], &[vec![0.0; 4]], 0.0);
        assert!(close(l, 2.0 * LN_2, 1e-12), "{l}");
    }

    #[test]
    fn scale_free_with_one_negative_matches_unit_weighting() {
        for (p, n, g) in [(0.3, -0.7, 0.0), (-2.0, 1.5, 3.0), (10.0, -10.0, 6.0)] {
            let a = loss_original(&[p], &[vec![n]], g);
            let b = loss_kge(&[p], &[vec![n]], g);
            assert!(close(a, b, 1e-12));
        }
    }

    #[test]
    fn saturated_margin_drives_loss_to_zero() {
        // Large positive score and very negative negatives: both sigmoids
        // saturate at 1 and the loss vanishes.
        let l = loss_original(&[50.0], &[vec![-50.0; 3]], 0.0);
        assert!(l < 1e-20, "{l}");
    }

    #[test]
    fn margin_changes_the_loss() {
        let l0 = loss_kge(&[0.5], &[vec![0.1, -0.4]], 0.0);
        let l6 = loss_kge(&[0.5], &[vec![0.1, -0.4]], 6.0);
        assert!((l0 - l6).abs() > 1e-6);
    }

    #[test]
    fn log_sigmoid_stays_finite_at_extremes() {
        for x in [-1e3, -100.0, 0.0, 100.0, 1e3] {
            assert!(log_sigmoid(x).is_finite(), "{x}");
        }
        // Reference points: log s(0) = -ln 2; log s(x) ~ x for very negative x.
        assert!(close(log_sigmoid(0.0), -LN_2, 1e-15));
        assert!(close(log_sigmoid(-1e3), -1e3, 1e-9));
    }

    #[test]
    fn sans_weights_match_hand_softmax() {
        // scores (1, 0), alpha 1: softmax = (e/(e+1), 1/(e+1)).
        let w = sans_weights(&[1.0, 0.0], 1.0);
        let e = 1f64.exp();
        assert!(close(w[0], e / (e + 1.0), 1e-12));
        assert!(close(w[1], 1.0 / (e + 1.0), 1e-12));
        assert!(close(w[0], 0.7311, 5e-5));
        assert!(close(w[1], 0.2689, 5e-5));
    }

    #[test]
    fn sans_zero_temperature_is_uniform() {
        let w = sans_weights(&[3.0, -1.0, 0.5, 2.0], 0.0);
        for v in &w {
            assert!(close(*v, 0.25, 1e-12));
        }
        // And the loss then coincides with the scale-free family.
        let (p, n) = (0.4, vec![3.0, -1.0, 0.5, 2.0]);
        let a = loss_sans(&[p], std::slice::from_ref(&n), 2.0, 0.0);
        let b = loss_kge(&[p], &[n], 2.0);
        assert!(close(a, b, 1e-12));
    }

    #[test]
    fn sans_with_equal_scores_is_uniform_at_any_temperature() {
        let (p, n) = (0.1, vec![0.7; 8]);
        let a = loss_sans(&[p], std::slice::from_ref(&n), 1.0, 2.5);
        let b = loss_kge(&[p], &[n], 1.0);
        assert!(close(a, b, 1e-12));
    }

    #[test]
    fn negative_score_derivatives_match_closed_form() {
        let s = [0.3, -1.2];
        let w = [1.0, 1.0];
        let d = dneg(&s, &w, 0.5);
        assert!(close(d[0], sigmoid(0.8), 1e-15));
        assert!(close(d[1], sigmoid(-0.7), 1e-15));
        assert!(close(dpos(0.3, 0.5), sigmoid(0.8) - 1.0, 1e-15));
    }

    proptest! {
        #[test]
        fn log_sigmoid_is_negative_and_monotone(x in -1e3f64..1e3, y in -1e3f64..1e3) {
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            prop_assert!(log_sigmoid(lo) <= log_sigmoid(hi) + 1e-12);
            prop_assert!(log_sigmoid(x) <= 0.0);
            prop_assert!(log_sigmoid(x).is_finite());
        }

        #[test]
        fn sans_weights_form_a_distribution(
            scores in proptest::collection::vec(-50f64..50.0, 1..32),
            alpha in 0f64..4.0,
        ) {
            let w = sans_weights(&scores, alpha);
            let sum: f64 = w.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9);
            prop_assert!(w.iter().all(|v| *v >= 0.0));
        }

        #[test]
        fn losses_are_nonnegative(
            p in -30f64..30.0,
            n in proptest::collection::vec(-30f64..30.0, 1..16),
            gamma in 0f64..10.0,
        ) {
            prop_assert!(loss_original(&[p], std::slice::from_ref(&n), gamma) >= 0.0);
            prop_assert!(loss_kge(&[p], std::slice::from_ref(&n), gamma) >= 0.0);
            prop_assert!(loss_sans(&[p], &[n], gamma, 1.0) >= 0.0);
        }
    }
}
