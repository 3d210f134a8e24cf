//! Triple scoring functions and their analytic gradients.
//!
//! Six model families over dense 64-bit embeddings:
//!
//! | kind       | entity row          | relation row          | score                                             |
//! |------------|---------------------|-----------------------|---------------------------------------------------|
//! | `rescal`   | `d`                 | `d*d` (row-major)     | `h' M t`                                          |
//! | `distmult` | `d`                 | `d`                   | `sum h r t`                                       |
//! | `complex`  | `2d` (re, im)       | `2d` (re, im)         | `Re(sum h r conj(t))`                             |
//! | `transe`   | `d`                 | `d`                   | `-|h + r - t|_p`                                  |
//! | `rotate`   | `2d` (re, im)       | `d` (phases)          | `-|h o r - t|_p`, `r = exp(i theta)`              |
//! | `hake`     | `2d` (mod, phase)   | `2d` (mod, phase)     | `-|h o abs(r) - t|_p - lambda * L1(sin(dphi/2))`  |
//!
//! Scores for the distance models are non-positive whenever the phase-mixing
//! weight `lambda` is non-negative; the bilinear models are unbounded both
//! ways.
//!
//! Every query is evaluated through a direction-specific prepared form that
//! hoists candidate-independent work. [`score`], [`score_grad`] and
//! [`score_all`] all run the exact same floating-point operations per
//! candidate, so `score_all(p, x)[y]` equals `score(p, x, y)` bitwise.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Direction, Query};
use crate::seed::rng_from;

/// The model family of a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Rescal,
    DistMult,
    ComplEx,
    TransE,
    RotatE,
    Hake,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Rescal,
        ModelKind::DistMult,
        ModelKind::ComplEx,
        ModelKind::TransE,
        ModelKind::RotatE,
        ModelKind::Hake,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Rescal => "rescal",
            ModelKind::DistMult => "distmult",
            ModelKind::ComplEx => "complex",
            ModelKind::TransE => "transe",
            ModelKind::RotatE => "rotate",
            ModelKind::Hake => "hake",
        }
    }

    /// Floats per entity row.
    pub fn entity_stride(self, dim: usize) -> usize {
        match self {
            ModelKind::Rescal | ModelKind::DistMult | ModelKind::TransE => dim,
            ModelKind::ComplEx | ModelKind::RotatE | ModelKind::Hake => 2 * dim,
        }
    }

    /// Floats per relation row.
    pub fn relation_stride(self, dim: usize) -> usize {
        match self {
            ModelKind::Rescal => dim * dim,
            ModelKind::DistMult | ModelKind::TransE | ModelKind::RotatE => dim,
            ModelKind::ComplEx | ModelKind::Hake => 2 * dim,
        }
    }

    /// Whether the model carries the scalar phase-mixing weight.
    pub fn has_lambda(self) -> bool {
        matches!(self, ModelKind::Hake)
    }

    /// Residual-norm exponent used unless overridden: L1 for the
    /// translation/rotation models, L2 for the modulus part of `hake`.
    pub fn default_p_norm(self) -> u32 {
        match self {
            ModelKind::Hake => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rescal" => Ok(ModelKind::Rescal),
            "distmult" => Ok(ModelKind::DistMult),
            "complex" => Ok(ModelKind::ComplEx),
            "transe" => Ok(ModelKind::TransE),
            "rotate" => Ok(ModelKind::RotatE),
            "hake" => Ok(ModelKind::Hake),
            other => Err(format!(
                "unknown model {other:?} (expected one of rescal, distmult, complex, transe, rotate, hake)"
            )),
        }
    }
}

/// One addressable parameter row (or the lone scalar).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Slot {
    Entity(usize),
    Relation(usize),
    Lambda,
}

/// Sparse gradient of a single score: dense blocks for the touched rows.
///
/// At most three rows are touched per score (two entities and a relation;
/// one fewer when the candidate coincides with the anchor) plus the scalar.
/// Duplicate slots are merged on insert, so each slot appears once.
#[derive(Debug, Clone, Default)]
pub struct ScoreGradient {
    pub entries: Vec<(Slot, Vec<f64>)>,
}

impl ScoreGradient {
    fn push(&mut self, slot: Slot, block: Vec<f64>) {
        for (s, existing) in &mut self.entries {
            if *s == slot {
                for (e, b) in existing.iter_mut().zip(&block) {
                    *e += b;
                }
                return;
            }
        }
        self.entries.push((slot, block));
    }

    pub fn get(&self, slot: Slot) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(s, _)| *s == slot)
            .map(|(_, b)| b.as_slice())
    }
}

/// A full embedding table set for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: ModelKind,
    pub dim: usize,
    /// Residual-norm exponent for the distance models, 1 or 2.
    pub p_norm: u32,
    pub n_entities: usize,
    pub n_relations: usize,
    /// `n_entities * kind.entity_stride(dim)` floats, row-major.
    pub entities: Vec<f64>,
    /// `n_relations * kind.relation_stride(dim)` floats, row-major.
    pub relations: Vec<f64>,
    /// Phase-mixing weight; meaningful for `hake` only, 0 elsewhere.
    pub lambda: f64,
}

impl ModelParams {
    /// Draw fresh parameters, every table uniform on `[-(gamma+2)/d, (gamma+2)/d]`
    /// except angular coordinates (rotation relations, `hake` phase halves),
    /// which are uniform on `[0, 2pi)`, and the `hake` scalar, which starts
    /// near zero in `[-0.01, 0.01]`. Deterministic in `seed`.
    pub fn init(
        kind: ModelKind,
        dim: usize,
        n_entities: usize,
        n_relations: usize,
        gamma: f64,
        seed: u64,
    ) -> ModelParams {
        assert!(dim >= 1, "embedding dimension must be at least 1");
        assert!(n_entities >= 1 && n_relations >= 1);
        assert!(gamma >= 0.0);
        let scale = (gamma + 2.0) / dim as f64;
        let mut rng = rng_from(seed);
        let mut uniform = |lo: f64, hi: f64| lo + (hi - lo) * rng.gen::<f64>();

        let ent_stride = kind.entity_stride(dim);
        let mut entities = Vec::with_capacity(n_entities * ent_stride);
        for _ in 0..n_entities {
            for i in 0..ent_stride {
                let angular = kind == ModelKind::Hake && i >= dim;
                entities.push(if angular {
                    uniform(0.0, TAU)
                } else {
                    uniform(-scale, scale)
                });
            }
        }

        let rel_stride = kind.relation_stride(dim);
        let mut relations = Vec::with_capacity(n_relations * rel_stride);
        for _ in 0..n_relations {
            for i in 0..rel_stride {
                let angular = match kind {
                    ModelKind::RotatE => true,
                    ModelKind::Hake => i >= dim,
                    _ => false,
                };
                relations.push(if angular {
                    uniform(0.0, TAU)
                } else {
                    uniform(-scale, scale)
                });
            }
        }

        let lambda = if kind.has_lambda() {
            uniform(-0.01, 0.01)
        } else {
            0.0
        };

        ModelParams {
            kind,
            dim,
            p_norm: kind.default_p_norm(),
            n_entities,
            n_relations,
            entities,
            relations,
            lambda,
        }
    }

    pub fn entity(&self, id: usize) -> &[f64] {
        let s = self.kind.entity_stride(self.dim);
        &self.entities[id * s..(id + 1) * s]
    }

    pub fn relation(&self, id: usize) -> &[f64] {
        let s = self.kind.relation_stride(self.dim);
        &self.relations[id * s..(id + 1) * s]
    }

    /// Angular coordinates of a relation row, wrapped into `[0, 2pi)`.
    ///
    /// Stored phases are unconstrained (the score is invariant under full
    /// turns); wrapping happens only here, at read time.
    pub fn canonical_relation_phases(&self, id: usize) -> Vec<f64> {
        let row = self.relation(id);
        match self.kind {
            ModelKind::RotatE => row.iter().map(|p| p.rem_euclid(TAU)).collect(),
            ModelKind::Hake => row[self.dim..].iter().map(|p| p.rem_euclid(TAU)).collect(),
            _ => Vec::new(),
        }
    }
}

/// Candidate-independent part of a query evaluation.
///
/// `score`, `score_grad` and `score_all` all evaluate candidates through
/// this, which is what makes their per-candidate arithmetic identical.
struct Prepared<'a> {
    params: &'a ModelParams,
    query: Query,
    /// Model-specific hoisted vectors; see `prepare` for each layout.
    buf: Vec<f64>,
}

fn prepare<'a>(params: &'a ModelParams, query: &Query) -> Prepared<'a> {
    let d = params.dim;
    let anchor = params.entity(query.anchor);
    let rel = params.relation(query.relation);
    let tail_side = query.direction == Direction::TailPrediction;
    let buf = match params.kind {
        // buf = h'M (tail side) or M t (head side).
        ModelKind::Rescal => {
            let mut u = vec![0.0; d];
            if tail_side {
                for i in 0..d {
                    let hi = anchor[i];
                    let row = &rel[i * d..(i + 1) * d];
                    for j in 0..d {
                        u[j] += hi * row[j];
                    }
                }
            } else {
                for i in 0..d {
                    let row = &rel[i * d..(i + 1) * d];
                    let mut acc = 0.0;
                    for j in 0..d {
                        acc += row[j] * anchor[j];
                    }
                    u[i] = acc;
                }
            }
            u
        }
        // buf = h o r (tail side) or r o t (head side).
        ModelKind::DistMult => (0..d).map(|i| anchor[i] * rel[i]).collect(),
        // buf = complex h o r (tail side) or r o conj(t) (head side),
        // stored (re..., im...).
        ModelKind::ComplEx => {
            let (ar, ai) = (&anchor[..d], &anchor[d..]);
            let (cr, ci) = (&rel[..d], &rel[d..]);
            let mut buf = vec![0.0; 2 * d];
            if tail_side {
                for i in 0..d {
                    buf[i] = ar[i] * cr[i] - ai[i] * ci[i];
                    buf[d + i] = ar[i] * ci[i] + ai[i] * cr[i];
                }
            } else {
                for i in 0..d {
                    buf[i] = cr[i] * ar[i] + ci[i] * ai[i];
                    buf[d + i] = ci[i] * ar[i] - cr[i] * ai[i];
                }
            }
            buf
        }
        // buf = h + r (tail side) or r - t (head side).
        ModelKind::TransE => {
            if tail_side {
                (0..d).map(|i| anchor[i] + rel[i]).collect()
            } else {
                (0..d).map(|i| rel[i] - anchor[i]).collect()
            }
        }
        // buf = (cos..., sin...) of the relation phases, then the rotated
        // anchor (tail side) or the raw anchor tail (head side), (re, im).
        ModelKind::RotatE => {
            let mut buf = vec![0.0; 4 * d];
            for i in 0..d {
                buf[i] = rel[i].cos();
                buf[d + i] = rel[i].sin();
            }
            let (ar, ai) = (&anchor[..d], &anchor[d..]);
            for i in 0..d {
                if tail_side {
                    buf[2 * d + i] = ar[i] * buf[i] - ai[i] * buf[d + i];
                    buf[3 * d + i] = ar[i] * buf[d + i] + ai[i] * buf[i];
                } else {
                    buf[2 * d + i] = ar[i];
                    buf[3 * d + i] = ai[i];
                }
            }
            buf
        }
        // buf = (abs(r_mod)..., anchor-combined modulus..., phase offset...).
        ModelKind::Hake => {
            let (am, ap) = (&anchor[..d], &anchor[d..]);
            let (rm, rp) = (&rel[..d], &rel[d..]);
            let mut buf = vec![0.0; 3 * d];
            for i in 0..d {
                buf[i] = rm[i].abs();
            }
            if tail_side {
                for i in 0..d {
                    buf[d + i] = am[i] * buf[i]; // h_mod * |r_mod|
                    buf[2 * d + i] = ap[i] + rp[i]; // h_phase + r_phase
                }
            } else {
                for i in 0..d {
                    buf[d + i] = am[i]; // t_mod, subtracted per candidate
                    buf[2 * d + i] = rp[i] - ap[i]; // r_phase - t_phase
                }
            }
            buf
        }
    };
    Prepared {
        params,
        query: *query,
        buf,
    }
}

/// `-|v|_p` from the residual accumulators produced per candidate.
fn neg_norm(p: u32, abs_sum: f64, sq_sum: f64) -> f64 {
    match p {
        1 => -abs_sum,
        2 => -sq_sum.sqrt(),
        _ => unreachable!("p-norm restricted to 1 or 2"),
    }
}

fn score_prepared(prep: &Prepared<'_>, candidate: usize) -> f64 {
    let params = prep.params;
    let d = params.dim;
    let cand = params.entity(candidate);
    let tail_side = prep.query.direction == Direction::TailPrediction;
    let buf = &prep.buf;
    match params.kind {
        ModelKind::Rescal | ModelKind::DistMult => {
            let mut acc = 0.0;
            for i in 0..d {
                acc += buf[i] * cand[i];
            }
            acc
        }
        ModelKind::ComplEx => {
            let (br, bi) = (&buf[..d], &buf[d..]);
            let (er, ei) = (&cand[..d], &cand[d..]);
            let mut acc = 0.0;
            if tail_side {
                // Re((h o r) conj(t))
                for i in 0..d {
                    acc += br[i] * er[i] + bi[i] * ei[i];
                }
            } else {
                // Re(h (r o conj(t)))
                for i in 0..d {
                    acc += er[i] * br[i] - ei[i] * bi[i];
                }
            }
            acc
        }
        ModelKind::TransE => {
            let mut abs_sum = 0.0;
            let mut sq_sum = 0.0;
            for i in 0..d {
                let v = if tail_side {
                    buf[i] - cand[i]
                } else {
                    cand[i] + buf[i]
                };
                abs_sum += v.abs();
                sq_sum += v * v;
            }
            neg_norm(params.p_norm, abs_sum, sq_sum)
        }
        ModelKind::RotatE => {
            let mut abs_sum = 0.0;
            let mut sq_sum = 0.0;
            let (er, ei) = (&cand[..d], &cand[d..]);
            for i in 0..d {
                let (vr, vi) = if tail_side {
                    (buf[2 * d + i] - er[i], buf[3 * d + i] - ei[i])
                } else {
                    (
                        er[i] * buf[i] - ei[i] * buf[d + i] - buf[2 * d + i],
                        er[i] * buf[d + i] + ei[i] * buf[i] - buf[3 * d + i],
                    )
                };
                let m = (vr * vr + vi * vi).sqrt();
                abs_sum += m;
                sq_sum += vr * vr + vi * vi;
            }
            neg_norm(params.p_norm, abs_sum, sq_sum)
        }
        ModelKind::Hake => {
            let (cm, cp) = (&cand[..d], &cand[d..]);
            let mut abs_sum = 0.0;
            let mut sq_sum = 0.0;
            let mut phase_l1 = 0.0;
            for i in 0..d {
                let v = if tail_side {
                    buf[d + i] - cm[i]
                } else {
                    cm[i] * buf[i] - buf[d + i]
                };
                abs_sum += v.abs();
                sq_sum += v * v;
                let w = if tail_side {
                    buf[2 * d + i] - cp[i]
                } else {
                    cp[i] + buf[2 * d + i]
                };
                phase_l1 += (w / 2.0).sin().abs();
            }
            neg_norm(params.p_norm, abs_sum, sq_sum) - params.lambda * phase_l1
        }
    }
}

/// Score one candidate for a query.
pub fn score(params: &ModelParams, query: &Query, candidate: usize) -> f64 {
    score_prepared(&prepare(params, query), candidate)
}

/// Score every entity as the candidate for a query.
///
/// Element `y` equals `score(params, query, y)` exactly: both run the same
/// prepared evaluation.
pub fn score_all(params: &ModelParams, query: &Query) -> Vec<f64> {
    let prep = prepare(params, query);
    (0..params.n_entities)
        .map(|y| score_prepared(&prep, y))
        .collect()
}

/// Derivative of `-|v|_p` with respect to one residual coordinate.
///
/// At a kink (zero coordinate for p=1, zero residual for p=2) the returned
/// subgradient is 0.
fn dnorm(p: u32, v: f64, norm: f64) -> f64 {
    match p {
        1 => {
            if v > 0.0 {
                -1.0
            } else if v < 0.0 {
                1.0
            } else {
                0.0
            }
        }
        2 => {
            if norm > 0.0 {
                -v / norm
            } else {
                0.0
            }
        }
        _ => unreachable!(),
    }
}

/// Score one candidate and differentiate with respect to every touched row.
///
/// Returns the score (identical to [`score`]) and a sparse gradient over the
/// anchor entity, the candidate entity, the relation, and (for `hake`) the
/// scalar. When anchor and candidate are the same entity the two
/// contributions are merged into a single slot entry.
pub fn score_grad(params: &ModelParams, query: &Query, candidate: usize) -> (f64, ScoreGradient) {
    let prep = prepare(params, query);
    let value = score_prepared(&prep, candidate);
    let d = params.dim;
    let tail_side = query.direction == Direction::TailPrediction;
    // Resolve roles: h is the head entity, t the tail entity.
    let (h_id, t_id) = if tail_side {
        (query.anchor, candidate)
    } else {
        (candidate, query.anchor)
    };
    let h = params.entity(h_id);
    let t = params.entity(t_id);
    let rel = params.relation(query.relation);

    let mut dh = vec![0.0; h.len()];
    let mut dt = vec![0.0; t.len()];
    let mut dr = vec![0.0; rel.len()];
    let mut dlambda = 0.0;

    match params.kind {
        ModelKind::Rescal => {
            // s = sum_ij h_i M_ij t_j
            for i in 0..d {
                let row = &rel[i * d..(i + 1) * d];
                let drow = &mut dr[i * d..(i + 1) * d];
                let mut acc = 0.0;
                for j in 0..d {
                    acc += row[j] * t[j];
                    drow[j] = h[i] * t[j];
                    dt[j] += h[i] * row[j];
                }
                dh[i] = acc;
            }
        }
        ModelKind::DistMult => {
            for i in 0..d {
                dh[i] = rel[i] * t[i];
                dr[i] = h[i] * t[i];
                dt[i] = h[i] * rel[i];
            }
        }
        ModelKind::ComplEx => {
            let (a, b) = (&h[..d], &h[d..]);
            let (c, dd_) = (&rel[..d], &rel[d..]);
            let (e, f) = (&t[..d], &t[d..]);
            for i in 0..d {
                // s_i = e(ac - bd) + f(ad + bc)
                dh[i] = c[i] * e[i] + dd_[i] * f[i];
                dh[d + i] = -dd_[i] * e[i] + c[i] * f[i];
                dr[i] = a[i] * e[i] + b[i] * f[i];
                dr[d + i] = -b[i] * e[i] + a[i] * f[i];
                dt[i] = a[i] * c[i] - b[i] * dd_[i];
                dt[d + i] = a[i] * dd_[i] + b[i] * c[i];
            }
        }
        ModelKind::TransE => {
            let norm = -value;
            for i in 0..d {
                let v = h[i] + rel[i] - t[i];
                let g = dnorm(params.p_norm, v, norm);
                dh[i] = g;
                dr[i] = g;
                dt[i] = -g;
            }
        }
        ModelKind::RotatE => {
            let (hr, hi) = (&h[..d], &h[d..]);
            let (tr, ti) = (&t[..d], &t[d..]);
            let norm = -value;
            for i in 0..d {
                let (c, s) = (rel[i].cos(), rel[i].sin());
                let vr = hr[i] * c - hi[i] * s - tr[i];
                let vi = hr[i] * s + hi[i] * c - ti[i];
                let m = (vr * vr + vi * vi).sqrt();
                // d(-|v|_p)/d(vr, vi)
                let (gr, gi) = match params.p_norm {
                    1 => {
                        if m > 0.0 {
                            (-vr / m, -vi / m)
                        } else {
                            (0.0, 0.0)
                        }
                    }
                    2 => {
                        if norm > 0.0 {
                            (-vr / norm, -vi / norm)
                        } else {
                            (0.0, 0.0)
                        }
                    }
                    _ => unreachable!(),
                };
                dh[i] = gr * c + gi * s;
                dh[d + i] = -gr * s + gi * c;
                dr[i] = gr * (-hr[i] * s - hi[i] * c) + gi * (hr[i] * c - hi[i] * s);
                dt[i] = -gr;
                dt[d + i] = -gi;
            }
        }
        ModelKind::Hake => {
            let (hm, hp) = (&h[..d], &h[d..]);
            let (rm, rp) = (&rel[..d], &rel[d..]);
            let (tm, tp) = (&t[..d], &t[d..]);
            // Score splits into the modulus norm and the phase sum; recover
            // the modulus norm to direct the p=2 gradient.
            let mut sq_sum = 0.0;
            for i in 0..d {
                let v = hm[i] * rm[i].abs() - tm[i];
                sq_sum += v * v;
            }
            let norm = sq_sum.sqrt();
            for i in 0..d {
                let arm = rm[i].abs();
                let v = hm[i] * arm - tm[i];
                let g = dnorm(params.p_norm, v, norm);
                let dabs = if rm[i] > 0.0 {
                    1.0
                } else if rm[i] < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                dh[i] = g * arm;
                dr[i] = g * hm[i] * dabs;
                dt[i] = -g;

                let w = hp[i] + rp[i] - tp[i];
                let half = w / 2.0;
                let sin_half = half.sin();
                let abs_sin = sin_half.abs();
                dlambda -= abs_sin;
                let dphase = if sin_half == 0.0 {
                    0.0
                } else {
                    -params.lambda * sin_half.signum() * half.cos() * 0.5
                };
                dh[d + i] = dphase;
                dr[d + i] = dphase;
                dt[d + i] = -dphase;
            }
        }
    }

    let mut grad = ScoreGradient::default();
    grad.push(Slot::Entity(h_id), dh);
    grad.push(Slot::Entity(t_id), dt);
    grad.push(Slot::Relation(query.relation), dr);
    if params.kind.has_lambda() {
        grad.push(Slot::Lambda, vec![dlambda]);
    }
    (value, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Direction, Query};

    fn query_tail(anchor: usize, relation: usize, answer: usize) -> Query {
        Query {
            direction: Direction::TailPrediction,
            anchor,
            relation,
            answer,
        }
    }

    fn query_head(anchor: usize, relation: usize, answer: usize) -> Query {
        Query {
            direction: Direction::HeadPrediction,
            anchor,
            relation,
            answer,
        }
    }

    fn params_with(kind: ModelKind, dim: usize, n_e: usize, n_r: usize) -> ModelParams {
        ModelParams::init(kind, dim, n_e, n_r, 6.0, 13)
    }

    #[test]
    fn init_is_deterministic_and_seed_sensitive() {
        let a = ModelParams::init(ModelKind::RotatE, 8, 5, 2, 6.0, 42);
        let b = ModelParams::init(ModelKind::RotatE, 8, 5, 2, 6.0, 42);
        let c = ModelParams::init(ModelKind::RotatE, 8, 5, 2, 6.0, 43);
        assert_eq!(a.entities, b.entities);
        assert_eq!(a.relations, b.relations);
        assert_ne!(a.entities, c.entities);
    }

    #[test]
    fn init_respects_scale_bound() {
        // gamma = 9, d = 1000: every non-angular entry within 0.011.
        let p = ModelParams::init(ModelKind::DistMult, 1000, 3, 2, 9.0, 7);
        let bound = 11.0 / 1000.0;
        assert!(p
            .entities
            .iter()
            .chain(&p.relations)
            .all(|v| v.abs() <= bound));
    }

    #[test]
    fn init_draws_angles_in_one_turn() {
        let p = ModelParams::init(ModelKind::RotatE, 16, 4, 3, 6.0, 11);
        assert!(p.relations.iter().all(|v| (0.0..TAU).contains(v)));
        let h = ModelParams::init(ModelKind::Hake, 16, 4, 3, 6.0, 11);
        for r in 0..3 {
            let row = h.relation(r);
            assert!(row[16..].iter().all(|v| (0.0..TAU).contains(v)));
        }
        for e in 0..4 {
            let row = h.entity(e);
            assert!(row[16..].iter().all(|v| (0.0..TAU).contains(v)));
        }
        assert!(h.lambda.abs() <= 0.01);
    }

    #[test]
    fn transe_exact_translation_scores_zero() {
        let mut p = params_with(ModelKind::TransE, 2, 2, 1);
        p.entities = vec![0.0, 0.0, 1.0, 1.0]; // h = (0,0), t = (1,1)
        p.relations = vec![1.0, 1.0];
        assert_eq!(score(&p, &query_tail(0, 0, 1), 1), 0.0);
    }

    #[test]
    fn distmult_all_ones_counts_dimensions() {
        let mut p = params_with(ModelKind::DistMult, 4, 2, 1);
        p.entities = vec![1.0; 8];
        p.relations = vec![1.0; 4];
        assert_eq!(score(&p, &query_tail(0, 0, 1), 1), 4.0);
    }

    #[test]
    fn rescal_identity_matrix_reduces_to_dot_product() {
        let mut p = params_with(ModelKind::Rescal, 3, 2, 1);
        p.entities = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let mut m = vec![0.0; 9];
        m[0] = 1.0;
        m[4] = 1.0;
        m[8] = 1.0;
        p.relations = m;
        // h . t = 4 + 10 + 18
        assert_eq!(score(&p, &query_tail(0, 0, 1), 1), 32.0);
    }

    #[test]
    fn complex_with_zero_imaginary_parts_matches_distmult() {
        let dim = 5;
        let dm = params_with(ModelKind::DistMult, dim, 4, 2);
        let mut cx = params_with(ModelKind::ComplEx, dim, 4, 2);
        for e in 0..4 {
            let row = dm.entity(e).to_vec();
            cx.entities[e * 2 * dim..e * 2 * dim + dim].copy_from_slice(&row);
            cx.entities[e * 2 * dim + dim..(e + 1) * 2 * dim].fill(0.0);
        }
        for r in 0..2 {
            let row = dm.relation(r).to_vec();
            cx.relations[r * 2 * dim..r * 2 * dim + dim].copy_from_slice(&row);
            cx.relations[r * 2 * dim + dim..(r + 1) * 2 * dim].fill(0.0);
        }
        for q in [query_tail(0, 1, 3), query_head(2, 0, 1)] {
            for y in 0..4 {
                let a = score(&dm, &q, y);
                let b = score(&cx, &q, y);
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn rotate_half_turn_maps_onto_negation() {
        // d=1: h = 1+0i, phase pi, t = -1+0i; the rotated head equals t.
        let mut p = params_with(ModelKind::RotatE, 1, 2, 1);
        p.entities = vec![1.0, 0.0, -1.0, 0.0];
        p.relations = vec![std::f64::consts::PI];
        let s = score(&p, &query_tail(0, 0, 1), 1);
        assert!(s.abs() < 1e-15, "{s}");
    }

    #[test]
    fn rotate_score_is_invariant_under_full_turns() {
        let p = params_with(ModelKind::RotatE, 6, 5, 2);
        let mut shifted = p.clone();
        for v in &mut shifted.relations {
            *v += TAU * 3.0;
        }
        for q in [query_tail(0, 1, 2), query_head(3, 0, 4)] {
            for y in 0..5 {
                let a = score(&p, &q, y);
                let b = score(&shifted, &q, y);
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn hake_with_zero_lambda_is_the_modulus_term_alone() {
        let mut p = params_with(ModelKind::Hake, 4, 3, 1);
        p.lambda = 0.0;
        let q = query_tail(0, 0, 1);
        let full = score(&p, &q, 1);
        // Recompute the modulus part by hand.
        let d = 4;
        let h = p.entity(0);
        let r = p.relation(0);
        let t = p.entity(1);
        let mut sq = 0.0;
        for i in 0..d {
            let v = h[i] * r[i].abs() - t[i];
            sq += v * v;
        }
        assert!((full + sq.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn hake_phase_term_is_bounded_by_lambda_times_dim() {
        let mut p = params_with(ModelKind::Hake, 8, 3, 2);
        p.lambda = 0.5;
        let q = query_tail(0, 1, 2);
        let with_phase = score(&p, &q, 2);
        let mut modulus_only = p.clone();
        modulus_only.lambda = 0.0;
        let base = score(&modulus_only, &q, 2);
        let phase = with_phase - base;
        assert!((-0.5 * 8.0..=0.0).contains(&phase), "{phase}");
    }

    #[test]
    fn distance_scores_are_nonpositive_with_nonnegative_lambda() {
        for kind in [ModelKind::TransE, ModelKind::RotatE, ModelKind::Hake] {
            let mut p = params_with(kind, 6, 5, 2);
            p.lambda = p.lambda.abs();
            for q in [query_tail(0, 0, 1), query_head(2, 1, 3)] {
                for y in 0..5 {
                    assert!(score(&p, &q, y) <= 0.0);
                }
            }
        }
    }

    #[test]
    fn translation_models_ignore_coordinate_permutations() {
        // Applying one permutation to every row leaves scores unchanged.
        let perm = [3usize, 0, 4, 1, 2];
        for kind in [ModelKind::TransE, ModelKind::RotatE] {
            let p = params_with(kind, 5, 4, 2);
            let mut permuted = p.clone();
            let es = kind.entity_stride(5);
            for e in 0..4 {
                let row = p.entity(e).to_vec();
                let dst = &mut permuted.entities[e * es..(e + 1) * es];
                for (i, &src) in perm.iter().enumerate() {
                    dst[i] = row[src];
                    if es == 10 {
                        dst[5 + i] = row[5 + src];
                    }
                }
            }
            let rs = kind.relation_stride(5);
            for r in 0..2 {
                let row = p.relation(r).to_vec();
                let dst = &mut permuted.relations[r * rs..(r + 1) * rs];
                for (i, &src) in perm.iter().enumerate() {
                    dst[i] = row[src];
                    if rs == 10 {
                        dst[5 + i] = row[5 + src];
                    }
                }
            }
            for q in [query_tail(0, 0, 1), query_head(3, 1, 2)] {
                for y in 0..4 {
                    let a = score(&p, &q, y);
                    let b = score(&permuted, &q, y);
                    assert!((a - b).abs() < 1e-12, "{kind} {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn score_all_agrees_with_score_bitwise() {
        for kind in ModelKind::ALL {
            let p = params_with(kind, 5, 7, 3);
            for q in [query_tail(2, 1, 4), query_head(5, 2, 0)] {
                let all = score_all(&p, &q);
                assert_eq!(all.len(), 7);
                for (y, batched) in all.iter().enumerate() {
                    let single = score(&p, &q, y);
                    assert_eq!(batched.to_bits(), single.to_bits(), "{kind} candidate {y}");
                }
            }
        }
    }

    #[test]
    fn score_grad_reports_value_identical_to_score() {
        for kind in ModelKind::ALL {
            let p = params_with(kind, 4, 5, 2);
            for q in [query_tail(0, 1, 2), query_head(3, 0, 1)] {
                for y in 0..5 {
                    let (v, _) = score_grad(&p, &q, y);
                    assert_eq!(v.to_bits(), score(&p, &q, y).to_bits());
                }
            }
        }
    }

    /// Central finite difference of the score with respect to one coordinate.
    fn fd_coord(params: &ModelParams, q: &Query, y: usize, slot: Slot, idx: usize) -> f64 {
        let h = 1e-6;
        let mut lo = params.clone();
        let mut hi = params.clone();
        match slot {
            Slot::Entity(e) => {
                let s = params.kind.entity_stride(params.dim);
                lo.entities[e * s + idx] -= h;
                hi.entities[e * s + idx] += h;
            }
            Slot::Relation(r) => {
                let s = params.kind.relation_stride(params.dim);
                lo.relations[r * s + idx] -= h;
                hi.relations[r * s + idx] += h;
            }
            Slot::Lambda => {
                lo.lambda -= h;
                hi.lambda += h;
            }
        }
        (score(&hi, q, y) - score(&lo, q, y)) / (2.0 * h)
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for kind in ModelKind::ALL {
            let p = params_with(kind, 4, 5, 2);
            for q in [query_tail(0, 1, 2), query_head(3, 0, 1)] {
                for y in [2usize, 4] {
                    let (_, grad) = score_grad(&p, &q, y);
                    for (slot, block) in &grad.entries {
                        for (idx, &g) in block.iter().enumerate() {
                            let fd = fd_coord(&p, &q, y, *slot, idx);
                            let denom = g.abs().max(fd.abs()).max(1e-3);
                            assert!(
                                ((g - fd) / denom).abs() < 1e-5,
                                "{kind} {slot:?}[{idx}]: analytic {g} vs fd {fd}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn self_loop_candidate_merges_entity_slots() {
        // Anchor == candidate: the gradient must carry one merged entity row.
        let p = params_with(ModelKind::DistMult, 4, 3, 1);
        let q = query_tail(1, 0, 1);
        let (_, grad) = score_grad(&p, &q, 1);
        let ent_entries = grad
            .entries
            .iter()
            .filter(|(s, _)| matches!(s, Slot::Entity(_)))
            .count();
        assert_eq!(ent_entries, 1);
        let block = grad.get(Slot::Entity(1)).unwrap();
        let fd: Vec<f64> = (0..4)
            .map(|i| fd_coord(&p, &q, 1, Slot::Entity(1), i))
            .collect();
        for (g, f) in block.iter().zip(&fd) {
            assert!((g - f).abs() < 1e-5, "{g} vs {f}");
        }
    }

    #[test]
    fn canonical_phases_wrap_into_one_turn() {
        let mut p = params_with(ModelKind::RotatE, 4, 3, 2);
        for v in &mut p.relations {
            *v += 5.0 * TAU;
        }
        for r in 0..2 {
            let w = p.canonical_relation_phases(r);
            assert_eq!(w.len(), 4);
            assert!(w.iter().all(|v| (0.0..TAU).contains(v)));
        }
    }
}
