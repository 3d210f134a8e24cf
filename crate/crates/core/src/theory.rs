//! Desk-scale verification lab for the loss-geometry claims behind the
//! trainer: closed-form optima, reachability under range-restricted scores,
//! margin lower bounds, exact expected losses with per-cell floors, and
//! Monte-Carlo probes for the sampling-dependent statements.
//!
//! Everything here works on small categorical instances — an explicit data
//! distribution and noise distribution over a finite label set per query —
//! so optima and expectations are computable exactly and the training loop's
//! behaviour can be checked against them without stochastic noise.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::loss::{log_sigmoid, sigmoid, LossFamily};
use crate::seed::{derive_seed, rng_from};

/// An explicit conditional-probability setup: one data row and one noise
/// row per query over a shared finite label set.
#[derive(Debug, Clone)]
pub struct CategoricalInstance {
    p_d: Vec<Vec<f64>>,
    p_n: Vec<Vec<f64>>,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl CategoricalInstance {
    /// Validated constructor: rows are distributions (sum 1 within 1e-12),
    /// the noise rows are strictly positive, and shapes agree.
    pub fn new(p_d: Vec<Vec<f64>>, p_n: Vec<Vec<f64>>) -> Result<Self, String> {
        if p_d.is_empty() || p_d.len() != p_n.len() {
            return Err("need matching, nonempty data and noise rows".into());
        }
        let n_labels = p_d[0].len();
        if n_labels == 0 {
            return Err("need at least one label".into());
        }
        for (x, (d, n)) in p_d.iter().zip(&p_n).enumerate() {
            if d.len() != n_labels || n.len() != n_labels {
                return Err(format!("row {x}: inconsistent label count"));
            }
            // NaN must fail these checks, hence the explicit is_nan arms.
            for &v in d {
                if v.is_nan() || v < 0.0 {
                    return Err(format!("row {x}: negative data mass {v}"));
                }
            }
            for &v in n {
                if v.is_nan() || v <= 0.0 {
                    return Err(format!("row {x}: noise mass must be positive, got {v}"));
                }
            }
            let ds: f64 = d.iter().sum();
            let ns: f64 = n.iter().sum();
            if (ds - 1.0).abs() > ROW_SUM_TOL {
                return Err(format!("row {x}: data masses sum to {ds}, not 1"));
            }
            if (ns - 1.0).abs() > ROW_SUM_TOL {
                return Err(format!("row {x}: noise masses sum to {ns}, not 1"));
            }
        }
        Ok(CategoricalInstance { p_d, p_n })
    }

    /// Seeded random instance with every cell's mass at least
    /// `floor / n_labels` of its row, keeping density ratios bounded so the
    /// closed-form optima stay finite.
    pub fn random(n_queries: usize, n_labels: usize, floor: f64, seed: u64) -> Self {
        assert!(n_queries >= 1 && n_labels >= 1);
        assert!((0.0..1.0).contains(&floor));
        let mut rng = rng_from(seed);
        let draw_row = |rng: &mut ChaCha8Rng| {
            let raw: Vec<f64> = (0..n_labels).map(|_| rng.gen_range(floor..1.0)).collect();
            let sum: f64 = raw.iter().sum();
            raw.into_iter().map(|v| v / sum).collect::<Vec<f64>>()
        };
        let p_d = (0..n_queries).map(|_| draw_row(&mut rng)).collect();
        let p_n = (0..n_queries).map(|_| draw_row(&mut rng)).collect();
        CategoricalInstance { p_d, p_n }
    }

    /// Same data rows, uniform noise.
    pub fn with_uniform_noise(p_d: Vec<Vec<f64>>) -> Result<Self, String> {
        let n_labels = p_d.first().map(|r| r.len()).unwrap_or(0);
        let uniform = vec![vec![1.0 / n_labels as f64; n_labels]; p_d.len()];
        CategoricalInstance::new(p_d, uniform)
    }

    pub fn n_queries(&self) -> usize {
        self.p_d.len()
    }

    pub fn n_labels(&self) -> usize {
        self.p_d[0].len()
    }

    pub fn data_row(&self, x: usize) -> &[f64] {
        &self.p_d[x]
    }

    pub fn noise_row(&self, x: usize) -> &[f64] {
        &self.p_n[x]
    }
}

/// Value-range constraint on the free score table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreRange {
    /// Inner-product-style scores: any real value.
    Unbounded,
    /// Distance-style scores: clamped to (-inf, 0].
    Nonpositive,
}

/// A free score per (query, label) cell — the degenerate "model" whose
/// parameters are the scores themselves.
#[derive(Debug, Clone)]
pub struct TabularScoreModel {
    pub scores: Vec<Vec<f64>>,
    pub range: ScoreRange,
}

impl TabularScoreModel {
    pub fn zeros(n_queries: usize, n_labels: usize, range: ScoreRange) -> Self {
        TabularScoreModel {
            scores: vec![vec![0.0; n_labels]; n_queries],
            range,
        }
    }

    pub fn random(n_queries: usize, n_labels: usize, range: ScoreRange, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut m = TabularScoreModel {
            scores: (0..n_queries)
                .map(|_| (0..n_labels).map(|_| rng.gen_range(-3.0..3.0)).collect())
                .collect(),
            range,
        };
        m.clamp();
        m
    }

    /// Project the table back into its admissible range.
    pub fn clamp(&mut self) {
        if self.range == ScoreRange::Nonpositive {
            for row in &mut self.scores {
                for s in row {
                    if *s > 0.0 {
                        *s = 0.0;
                    }
                }
            }
        }
    }

    /// Row-wise softmax of the scores (the distribution the table encodes).
    pub fn softmax(&self) -> Vec<Vec<f64>> {
        self.scores.iter().map(|row| softmax_row(row)).collect()
    }
}

fn softmax_row(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Per-query distribution that minimizing either fixed-noise loss drives
/// the row-softmax of the scores toward: the data-to-noise density ratio,
/// renormalized.
pub fn objective_distribution(inst: &CategoricalInstance) -> Vec<Vec<f64>> {
    (0..inst.n_queries())
        .map(|x| {
            let ratios: Vec<f64> = inst.p_d[x]
                .iter()
                .zip(&inst.p_n[x])
                .map(|(&d, &n)| d / n)
                .collect();
            let sum: f64 = ratios.iter().sum();
            ratios.into_iter().map(|r| r / sum).collect()
        })
        .collect()
}

/// The coefficient multiplying the expected negative term: the unit-weight
/// family accumulates all draws, the normalized family averages them.
fn negative_mass(family: LossFamily, nu: usize) -> f64 {
    match family {
        LossFamily::NsOriginal => nu as f64,
        LossFamily::NsKge => 1.0,
        LossFamily::Sans => {
            panic!("self-adversarial noise is model-coupled; use the equivalence probe")
        }
    }
}

/// Closed-form unconstrained optimum per cell.
///
/// The per-cell objective is `-a log sig(s + gamma) - b log sig(-s - gamma)`
/// with `a` the data mass and `b` the effective noise mass; its minimum sits
/// at `ln(a/b) - gamma`. Zero data mass sends the optimum to -inf.
pub fn optimal_scores(
    inst: &CategoricalInstance,
    family: LossFamily,
    gamma: f64,
    nu: usize,
) -> Vec<Vec<f64>> {
    let c = negative_mass(family, nu);
    (0..inst.n_queries())
        .map(|x| {
            inst.p_d[x]
                .iter()
                .zip(&inst.p_n[x])
                .map(|(&a, &n)| (a / (c * n)).ln() - gamma)
                .collect()
        })
        .collect()
}

/// Whether each cell's unconstrained optimum lies inside the nonpositive
/// range — i.e. whether a distance-style score can attain it.
pub fn reachability(
    inst: &CategoricalInstance,
    family: LossFamily,
    gamma: f64,
    nu: usize,
) -> Vec<Vec<bool>> {
    let c = negative_mass(family, nu);
    (0..inst.n_queries())
        .map(|x| {
            inst.p_d[x]
                .iter()
                .zip(&inst.p_n[x])
                .map(|(&a, &n)| a <= gamma.exp() * c * n)
                .collect()
        })
        .collect()
}

/// Smallest margin that keeps every cell reachable under uniform noise in
/// the worst case (all data mass on one label): the log of the label count.
pub fn minimal_margin(n_labels: usize) -> f64 {
    assert!(n_labels >= 1);
    (n_labels as f64).ln()
}

/// Exact expected loss of the score table for a fixed-noise family, with a
/// uniform marginal over queries: per cell,
/// `-p_d log sig(s + gamma) - c p_n log sig(-s - gamma)` where c is
/// the family's negative mass.
pub fn exact_loss(
    inst: &CategoricalInstance,
    model: &TabularScoreModel,
    family: LossFamily,
    gamma: f64,
    nu: usize,
) -> f64 {
    let c = negative_mass(family, nu);
    let total: f64 = (0..inst.n_queries())
        .map(|x| {
            inst.p_d[x]
                .iter()
                .zip(&inst.p_n[x])
                .zip(&model.scores[x])
                .map(|((&a, &n), &s)| -a * log_sigmoid(s + gamma) - c * n * log_sigmoid(-s - gamma))
                .sum::<f64>()
        })
        .sum();
    total / inst.n_queries() as f64
}

/// Gradient of `exact_loss` with respect to every score cell.
pub fn exact_loss_grad(
    inst: &CategoricalInstance,
    model: &TabularScoreModel,
    family: LossFamily,
    gamma: f64,
    nu: usize,
) -> Vec<Vec<f64>> {
    let c = negative_mass(family, nu);
    let inv = 1.0 / inst.n_queries() as f64;
    (0..inst.n_queries())
        .map(|x| {
            inst.p_d[x]
                .iter()
                .zip(&inst.p_n[x])
                .zip(&model.scores[x])
                .map(|((&a, &n), &s)| {
                    let p = sigmoid(s + gamma);
                    inv * (a * (p - 1.0) + c * n * p)
                })
                .collect()
        })
        .collect()
}

/// One cell's floor: the minimum of `-a log sig(s+gamma) - b log sig(-s-gamma)`
/// over the admissible range, with its (possibly projected) minimizer.
///
/// With no data mass the infimum is 0, approached as the score falls to
/// -inf; the reported minimizer is -inf in that case.
pub fn cell_floor(a: f64, b: f64, gamma: f64, range: ScoreRange) -> (f64, f64) {
    assert!(b > 0.0, "noise mass must be positive");
    if a == 0.0 {
        return (f64::NEG_INFINITY, 0.0);
    }
    let mut s = (a / b).ln() - gamma;
    if range == ScoreRange::Nonpositive && s > 0.0 {
        s = 0.0;
    }
    let value = -a * log_sigmoid(s + gamma) - b * log_sigmoid(-s - gamma);
    (s, value)
}

/// Exact expected loss at the given scores together with the smallest loss
/// any table of the same range could achieve.
pub fn exact_loss_and_floor(
    inst: &CategoricalInstance,
    model: &TabularScoreModel,
    family: LossFamily,
    gamma: f64,
    nu: usize,
) -> (f64, f64) {
    let c = negative_mass(family, nu);
    let loss = exact_loss(inst, model, family, gamma, nu);
    let floor: f64 = (0..inst.n_queries())
        .map(|x| {
            inst.p_d[x]
                .iter()
                .zip(&inst.p_n[x])
                .map(|(&a, &n)| cell_floor(a, c * n, gamma, model.range).1)
                .sum::<f64>()
        })
        .sum::<f64>()
        / inst.n_queries() as f64;
    (loss, floor)
}

/// Result of running full-expectation gradient descent on the table.
#[derive(Debug, Clone, Copy)]
pub struct DescentOutcome {
    pub iterations: u64,
    /// Largest row-wise L1 distance between the table's softmax and the
    /// objective distribution when descent stopped.
    pub l1_gap: f64,
}

/// Minimize the exact expected loss by (projected) gradient descent on the
/// score table, stopping once the softmax is within `tol` of the objective
/// distribution in max-row L1, or after `max_iters`.
///
/// The step for each cell is scaled by that cell's curvature bound, so
/// `lr = 1.0` is a safe default for any instance.
#[allow(clippy::too_many_arguments)]
pub fn descend(
    inst: &CategoricalInstance,
    model: &mut TabularScoreModel,
    family: LossFamily,
    gamma: f64,
    nu: usize,
    lr: f64,
    max_iters: u64,
    tol: f64,
) -> DescentOutcome {
    let c = negative_mass(family, nu);
    let objective = objective_distribution(inst);
    let l1_to_objective = |m: &TabularScoreModel| -> f64 {
        m.softmax()
            .iter()
            .zip(&objective)
            .map(|(got, want)| {
                got.iter()
                    .zip(want)
                    .map(|(g, w)| (g - w).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    };

    let mut gap = l1_to_objective(model);
    let mut iterations = 0;
    while gap > tol && iterations < max_iters {
        for x in 0..inst.n_queries() {
            for y in 0..inst.n_labels() {
                let a = inst.p_d[x][y];
                let b = c * inst.p_n[x][y];
                let p = sigmoid(model.scores[x][y] + gamma);
                let g = a * (p - 1.0) + b * p;
                // 2/(a+b) stays well under the 8/(a+b) stability limit of
                // this cell's logistic objective.
                model.scores[x][y] -= lr * (2.0 / (a + b)) * g;
            }
        }
        model.clamp();
        iterations += 1;
        if iterations % 16 == 0 || iterations == max_iters {
            gap = l1_to_objective(model);
        }
    }
    gap = l1_to_objective(model);
    DescentOutcome {
        iterations,
        l1_gap: gap,
    }
}

/// Cumulative-mass categorical sampler over one probability row.
pub struct CategoricalSampler {
    cum: Vec<f64>,
}

impl CategoricalSampler {
    pub fn new(probs: &[f64]) -> CategoricalSampler {
        assert!(!probs.is_empty());
        let mut cum = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for &p in probs {
            assert!(p >= 0.0);
            acc += p;
            cum.push(acc);
        }
        let total = *cum.last().unwrap();
        assert!(total > 0.0);
        for v in &mut cum {
            *v /= total;
        }
        CategoricalSampler { cum }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen_range(0.0..1.0);
        self.cum
            .partition_point(|&c| c <= u)
            .min(self.cum.len() - 1)
    }
}

/// One row of the gradient-scaling table.
#[derive(Debug, Clone, Copy)]
pub struct GradientProbeRow {
    pub nu: usize,
    pub mean_norm: f64,
}

/// Monte-Carlo estimate of how the negative term's score-gradient grows
/// with the sample count.
#[derive(Debug, Clone)]
pub struct GradientProbe {
    pub rows: Vec<GradientProbeRow>,
    /// Mean norm for the normalized family at margins 0 and 6 on the same
    /// draws — a witness that the margin enters the gradient.
    pub gamma_low: f64,
    pub gamma_high: f64,
}

/// For each sample count, estimate the expected L1 norm of the negative
/// term's gradient with respect to the scores, at freshly drawn random
/// score tables and noise draws.
///
/// Every term of that gradient is nonnegative, so the L1 norm is the plain
/// sum of per-draw slopes and its expectation is exactly linear in the
/// sample count for the unit-weight family and constant for the normalized
/// one — the property the probe measures.
pub fn gradient_scaling_probe(
    inst: &CategoricalInstance,
    family: LossFamily,
    gamma: f64,
    nu_list: &[usize],
    trials: usize,
    seed: u64,
) -> GradientProbe {
    assert!(trials >= 1);
    assert!(!nu_list.is_empty());
    let samplers: Vec<CategoricalSampler> = (0..inst.n_queries())
        .map(|x| CategoricalSampler::new(&inst.p_n[x]))
        .collect();

    let norm_for = |nu: usize, family: LossFamily, gamma: f64, label: &str| -> f64 {
        let mut rng = rng_from(derive_seed(seed, label));
        let mut total = 0.0;
        for t in 0..trials {
            let x = t % inst.n_queries();
            let scores: Vec<f64> = (0..inst.n_labels())
                .map(|_| rng.gen_range(-3.0..3.0))
                .collect();
            let w = match family {
                LossFamily::NsOriginal => 1.0,
                LossFamily::NsKge => 1.0 / nu as f64,
                LossFamily::Sans => unreachable!(),
            };
            let mut norm = 0.0;
            for _ in 0..nu {
                let y = samplers[x].sample(&mut rng);
                norm += w * sigmoid(scores[y] + gamma);
            }
            total += norm;
        }
        total / trials as f64
    };

    let rows = nu_list
        .iter()
        .map(|&nu| GradientProbeRow {
            nu,
            mean_norm: norm_for(nu, family, gamma, &format!("grad-probe-{nu}")),
        })
        .collect();
    // Same seed label for both margins: identical scores and draws, so any
    // difference comes from the margin alone.
    let nu0 = nu_list[0];
    let gamma_low = norm_for(nu0, LossFamily::NsKge, 0.0, "gamma-row");
    let gamma_high = norm_for(nu0, LossFamily::NsKge, 6.0, "gamma-row");

    GradientProbe {
        rows,
        gamma_low,
        gamma_high,
    }
}

/// One row of the self-adversarial equivalence table.
#[derive(Debug, Clone, Copy)]
pub struct SansProbeRow {
    pub nu: usize,
    pub mean_gap: f64,
}

/// Monte-Carlo comparison between the sampled self-adversarial negative
/// term and its exact population counterpart.
#[derive(Debug, Clone)]
pub struct SansProbe {
    pub rows: Vec<SansProbeRow>,
    /// Gap when the "sample" enumerates every label exactly once — zero up
    /// to floating point, because the softmax weights then equal the
    /// population distribution.
    pub exhaustive_gap: f64,
}

/// Negative term of the self-adversarial loss over a drawn multiset of
/// labels: softmax-over-the-draw weights (computed max-subtracted), each
/// multiplied by its label's clamp-side log-sigmoid.
pub fn sans_negative_term(scores: &[f64], drawn: &[usize], gamma: f64) -> f64 {
    let max = drawn
        .iter()
        .map(|&y| scores[y])
        .fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = drawn.iter().map(|&y| (scores[y] - max).exp()).sum();
    drawn
        .iter()
        .map(|&y| {
            let w = (scores[y] - max).exp() / z;
            -w * log_sigmoid(-scores[y] - gamma)
        })
        .sum()
}

/// Exact negative term when the noise distribution is the model's own
/// softmax over all labels — the population form the drawn-sample version
/// approaches as the sample count grows.
pub fn exact_model_noise_term(scores: &[f64], gamma: f64) -> f64 {
    let p = softmax_row(scores);
    scores
        .iter()
        .zip(&p)
        .map(|(&s, &w)| -w * log_sigmoid(-s - gamma))
        .sum()
}

/// For each sample count, the mean absolute difference between the
/// self-adversarial negative term over uniform draws and the exact
/// expectation under the model's own softmax as the noise distribution.
pub fn sans_equivalence_probe(
    inst: &CategoricalInstance,
    gamma: f64,
    nu_list: &[usize],
    trials: usize,
    seed: u64,
) -> SansProbe {
    assert!(trials >= 1);
    let n = inst.n_labels();

    let rows = nu_list
        .iter()
        .map(|&nu| {
            let mut rng = rng_from(derive_seed(seed, &format!("sans-probe-{nu}")));
            let mut total = 0.0;
            for _ in 0..trials {
                let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let drawn: Vec<usize> = (0..nu).map(|_| rng.gen_range(0..n)).collect();
                let sampled = sans_negative_term(&scores, &drawn, gamma);
                let exact = exact_model_noise_term(&scores, gamma);
                total += (sampled - exact).abs();
            }
            SansProbeRow {
                nu,
                mean_gap: total / trials as f64,
            }
        })
        .collect();

    // Exhaustive pass: one copy of every label.
    let mut rng = rng_from(derive_seed(seed, "sans-exhaustive"));
    let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let all: Vec<usize> = (0..n).collect();
    let exhaustive_gap =
        (sans_negative_term(&scores, &all, gamma) - exact_model_noise_term(&scores, gamma)).abs();

    SansProbe {
        rows,
        exhaustive_gap,
    }
}
