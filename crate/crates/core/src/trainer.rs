//! Minibatch training loop with Adam, deterministic seeding and named
//! hyperparameter presets.
//!
//! Every stochastic decision in a run — initialization, batch composition,
//! corruption draws — is derived from the root seed, so two runs with the
//! same configuration and dataset produce bitwise-identical parameters and
//! metric logs regardless of thread count.

use std::path::PathBuf;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adam::AdamState;
use crate::batch::{batch_loss_and_grad, BatchInstance, WeightContext};
use crate::data::{make_queries, Dataset, FilterIndex, FrequencyTable};
use crate::error::{Error, Result};
use crate::eval::{evaluate, RankingMode};
use crate::loss::{LossFamily, LossSpec, SubsamplingMethod};
use crate::sampling::sample_negatives;
use crate::scoring::{ModelKind, ModelParams};
use crate::seed::{derive_seed, rng_from, step_seed};
use crate::subsample::SubsampleTable;

/// Learning-rate schedule over the run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LrSchedule {
    /// Fixed rate for the whole run (the default).
    #[default]
    Constant,
    /// Halve the rate once, after the given fraction of max steps.
    HalveAtFraction { fraction: f64 },
}

/// Learning rate in effect at a 1-based step.
pub fn effective_lr(schedule: LrSchedule, base: f64, step: u64, max_steps: u64) -> f64 {
    match schedule {
        LrSchedule::Constant => base,
        LrSchedule::HalveAtFraction { fraction } => {
            let cut = (max_steps as f64 * fraction).ceil() as u64;
            if step > cut {
                base * 0.5
            } else {
                base
            }
        }
    }
}

/// Full description of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub dim: usize,
    pub batch_size: usize,
    pub max_steps: u64,
    pub lr: f64,
    #[serde(default)]
    pub lr_schedule: LrSchedule,
    pub seed: u64,
    /// Validation-MRR cadence in steps; 0 disables mid-run evaluation.
    #[serde(default)]
    pub eval_every: u64,
    pub loss: LossSpec,
    /// Distance norm override; `None` picks the model's default.
    #[serde(default)]
    pub p_norm: Option<u32>,
    /// Multiply subsampling weights by the split size so they average 1.
    #[serde(default = "default_true")]
    pub subsampling_rescale: bool,
    /// Directory holding train/valid/test files (recorded for provenance;
    /// the loop itself receives the loaded dataset).
    #[serde(default)]
    pub dataset: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "lr must be positive and finite, got {}",
                self.lr
            )));
        }
        if let LrSchedule::HalveAtFraction { fraction } = self.lr_schedule {
            if !(0.0..=1.0).contains(&fraction) {
                return Err(Error::InvalidConfig(format!(
                    "schedule fraction must lie in [0, 1], got {fraction}"
                )));
            }
        }
        if let Some(p) = self.p_norm {
            if p != 1 && p != 2 {
                return Err(Error::InvalidConfig(format!(
                    "p_norm must be 1 or 2, got {p}"
                )));
            }
        }
        self.loss.validate().map_err(Error::InvalidConfig)
    }
}

/// One line of the metric log.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LogRecord {
    pub step: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mrr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hits10: Option<f64>,
}

impl LogRecord {
    fn loss(step: u64, loss: f64) -> LogRecord {
        LogRecord {
            step,
            loss: Some(loss),
            split: None,
            mrr: None,
            hits1: None,
            hits3: None,
            hits10: None,
        }
    }
}

/// Final parameters plus everything that was logged along the way.
#[derive(Debug)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub log: Vec<LogRecord>,
}

/// Cadence of train-loss log lines.
const LOSS_LOG_EVERY: u64 = 100;

/// Run the full loop. `on_record` sees each log line as it is produced
/// (the CLI streams these to disk); the returned outcome carries the same
/// lines plus the final parameters.
pub fn train(
    cfg: &TrainConfig,
    data: &Dataset,
    mut on_record: impl FnMut(&LogRecord),
) -> Result<TrainOutcome> {
    cfg.validate()?;

    let mut params = ModelParams::init(
        cfg.model,
        cfg.dim,
        data.n_entities(),
        data.n_relations(),
        cfg.loss.gamma,
        derive_seed(cfg.seed, "init"),
    );
    if let Some(p) = cfg.p_norm {
        params.p_norm = p;
    }

    let queries = make_queries(&data.train);
    let freq = FrequencyTable::count_frequencies(&data.train);
    let table = SubsampleTable::build(cfg.loss.subsampling, &data.train, &freq);
    let wctx = WeightContext {
        table: &table,
        freq: &freq,
        rescaled: cfg.subsampling_rescale,
    };
    let filter = FilterIndex::build(&[&data.train, &data.valid, &data.test]);
    let valid_queries = make_queries(&data.valid);

    let mut adam = AdamState::new(&params);
    let mut log = Vec::new();
    let record = |log: &mut Vec<LogRecord>, rec: LogRecord, cb: &mut dyn FnMut(&LogRecord)| {
        cb(&rec);
        log.push(rec);
    };

    for step in 1..=cfg.max_steps {
        let sseed = step_seed(cfg.seed, step);
        let mut rng = rng_from(sseed);
        let batch: Vec<BatchInstance> = (0..cfg.batch_size)
            .map(|_| {
                let query = queries[rng.gen_range(0..queries.len())];
                let negatives =
                    sample_negatives(&query, cfg.loss.num_negatives, data.n_entities(), &mut rng);
                BatchInstance { query, negatives }
            })
            .collect();

        let (loss, grad) = batch_loss_and_grad(&params, &batch, &cfg.loss, Some(&wctx));
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step,
                step_seed: sseed,
            });
        }
        let lr = effective_lr(cfg.lr_schedule, cfg.lr, step, cfg.max_steps);
        adam.step(&mut params, &grad, lr);

        if step == 1 || step % LOSS_LOG_EVERY == 0 || step == cfg.max_steps {
            record(&mut log, LogRecord::loss(step, loss), &mut on_record);
        }
        if cfg.eval_every > 0 && step % cfg.eval_every == 0 && !valid_queries.is_empty() {
            let report = evaluate(&params, &valid_queries, &filter, RankingMode::Filtered);
            record(
                &mut log,
                LogRecord {
                    step,
                    loss: None,
                    split: Some("valid".to_string()),
                    mrr: Some(report.mrr),
                    hits1: Some(report.hits1),
                    hits3: Some(report.hits3),
                    hits10: Some(report.hits10),
                },
                &mut on_record,
            );
        }
    }

    Ok(TrainOutcome { params, log })
}

/// Named hyperparameter bundles, one per benchmark (dataset, model) cell.
/// The bilinear-model rows use a large margin with a moderate rate; the
/// distance-based rows use small rates with geometry-scaled margins.
pub fn preset(name: &str) -> Option<TrainConfig> {
    // (name, model, batch, dim, alpha, steps, nu, gamma, lr)
    type PresetRow = (
        &'static str,
        ModelKind,
        usize,
        usize,
        f64,
        u64,
        usize,
        f64,
        f64,
    );
    #[rustfmt::skip]
    const TABLE: &[PresetRow] = &[
        ("fb15k237-rescal",   ModelKind::Rescal,   1024,  500, 1.0, 100_000,  256, 200.0, 1e-3),
        ("fb15k237-complex",  ModelKind::ComplEx,  1024, 1000, 1.0, 100_000,  256, 200.0, 1e-3),
        ("fb15k237-distmult", ModelKind::DistMult, 1024, 2000, 1.0, 100_000,  256, 200.0, 1e-3),
        ("fb15k237-transe",   ModelKind::TransE,   1024, 1000, 1.0, 100_000,  256,   9.0, 5e-5),
        ("fb15k237-rotate",   ModelKind::RotatE,   1024, 1000, 1.0, 100_000,  256,   9.0, 5e-5),
        ("fb15k237-hake",     ModelKind::Hake,     1024, 1000, 1.0, 100_000,  256,   9.0, 5e-5),
        ("wn18rr-rescal",     ModelKind::Rescal,    512,  500, 1.0,  80_000, 1024, 200.0, 2e-3),
        ("wn18rr-complex",    ModelKind::ComplEx,   512,  500, 1.0,  80_000, 1024, 200.0, 2e-3),
        ("wn18rr-distmult",   ModelKind::DistMult,  512, 1000, 1.0,  80_000, 1024, 200.0, 2e-3),
        ("wn18rr-transe",     ModelKind::TransE,    512,  500, 0.5,  80_000, 1024,   6.0, 5e-5),
        ("wn18rr-rotate",     ModelKind::RotatE,    512,  500, 0.5,  80_000, 1024,   6.0, 5e-5),
        ("wn18rr-hake",       ModelKind::Hake,      512,  500, 0.5,  80_000, 1024,   6.0, 5e-5),
        ("yago310-transe",    ModelKind::TransE,   1024,  500, 1.0, 200_000,  400,  24.0, 2e-4),
        ("yago310-rotate",    ModelKind::RotatE,   1024,  500, 1.0, 200_000,  400,  24.0, 2e-4),
        ("yago310-hake",      ModelKind::Hake,     1024,  500, 1.0, 200_000,  500,  24.0, 2e-4),
    ];
    let &(_, model, batch, dim, alpha, steps, nu, gamma, lr) =
        TABLE.iter().find(|row| row.0 == name)?;
    Some(TrainConfig {
        model,
        dim,
        batch_size: batch,
        max_steps: steps,
        lr,
        lr_schedule: LrSchedule::Constant,
        seed: 0,
        eval_every: 0,
        loss: LossSpec {
            family: LossFamily::Sans,
            gamma,
            num_negatives: nu,
            alpha,
            subsampling: SubsamplingMethod::None,
        },
        p_norm: None,
        subsampling_rescale: true,
        dataset: None,
    })
}

/// Every preset name, in table order.
pub fn preset_names() -> Vec<&'static str> {
    vec![
        "fb15k237-rescal",
        "fb15k237-complex",
        "fb15k237-distmult",
        "fb15k237-transe",
        "fb15k237-rotate",
        "fb15k237-hake",
        "wn18rr-rescal",
        "wn18rr-complex",
        "wn18rr-distmult",
        "wn18rr-transe",
        "wn18rr-rotate",
        "wn18rr-hake",
        "yago310-transe",
        "yago310-rotate",
        "yago310-hake",
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Triple, Vocab};

    /// A small dense synthetic graph: entities 0..n form chains under two
    /// relations, with enough repetition for frequency statistics to vary.
    fn toy_dataset(n: usize) -> Dataset {
        let mut vocab = Vocab::default();
        for i in 0..n {
            vocab.intern_entity(&format!("e{i}"));
        }
        vocab.intern_relation("r0");
        vocab.intern_relation("r1");
        let mut train = Vec::new();
        for i in 0..n {
            train.push(Triple {
                head: i,
                relation: 0,
                tail: (i + 1) % n,
            });
            if i % 2 == 0 {
                train.push(Triple {
                    head: i,
                    relation: 1,
                    tail: (i + 2) % n,
                });
            }
        }
        let valid = vec![
            Triple {
                head: 0,
                relation: 1,
                tail: n - 1,
            },
            Triple {
                head: 1,
                relation: 0,
                tail: n - 2,
            },
        ];
        let test = vec![Triple {
            head: 2,
            relation: 1,
            tail: 0,
        }];
        Dataset {
            vocab,
            train,
            valid,
            test,
        }
    }

    fn quick_config(model: ModelKind, family: LossFamily, steps: u64) -> TrainConfig {
        TrainConfig {
            model,
            dim: 8,
            batch_size: 16,
            max_steps: steps,
            lr: 0.01,
            lr_schedule: LrSchedule::Constant,
            seed: 42,
            eval_every: 0,
            loss: LossSpec {
                family,
                gamma: 2.0,
                num_negatives: 4,
                alpha: 1.0,
                subsampling: SubsamplingMethod::None,
            },
            p_norm: None,
            subsampling_rescale: true,
            dataset: None,
        }
    }

    #[test]
    fn loss_decreases_for_every_family() {
        let data = toy_dataset(12);
        for family in [LossFamily::NsOriginal, LossFamily::NsKge, LossFamily::Sans] {
            let cfg = quick_config(ModelKind::DistMult, family, 2000);
            let out = train(&cfg, &data, |_| {}).unwrap();
            let losses: Vec<f64> = out.log.iter().filter_map(|r| r.loss).collect();
            assert!(losses.len() >= 3);
            // Exponential smoothing damps minibatch noise before comparing
            // the endpoints.
            let ema = |xs: &[f64]| {
                let mut e = xs[0];
                for &x in xs {
                    e = 0.7 * e + 0.3 * x;
                }
                e
            };
            let head = losses[0];
            let tail = ema(&losses[losses.len() - 5..]);
            assert!(
                tail < head,
                "{family:?}: loss went {head} -> {tail} over training"
            );
        }
    }

    #[test]
    fn identical_runs_are_bitwise_identical() {
        let data = toy_dataset(10);
        let cfg = quick_config(ModelKind::RotatE, LossFamily::Sans, 60);
        let a = train(&cfg, &data, |_| {}).unwrap();
        let b = train(&cfg, &data, |_| {}).unwrap();
        assert_eq!(a.params.entities.len(), b.params.entities.len());
        for (x, y) in a.params.entities.iter().zip(&b.params.entities) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        for (x, y) in a.params.relations.iter().zip(&b.params.relations) {
            assert_eq!(x.to_bits(), y.to_bits());
        }
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn different_seeds_diverge() {
        let data = toy_dataset(10);
        let mut cfg = quick_config(ModelKind::DistMult, LossFamily::NsKge, 30);
        let a = train(&cfg, &data, |_| {}).unwrap();
        cfg.seed = 43;
        let b = train(&cfg, &data, |_| {}).unwrap();
        assert!(a
            .params
            .entities
            .iter()
            .zip(&b.params.entities)
            .any(|(x, y)| x != y));
    }

    #[test]
    fn untouched_rows_stay_at_initialization() {
        // Replay the exact batch stream to find which entities and
        // relations were ever touched; everything else must be bit-frozen.
        let data = toy_dataset(40);
        let mut cfg = quick_config(ModelKind::TransE, LossFamily::NsOriginal, 6);
        cfg.batch_size = 2;
        cfg.loss.num_negatives = 2;
        let out = train(&cfg, &data, |_| {}).unwrap();

        let queries = make_queries(&data.train);
        let mut touched_e = std::collections::HashSet::new();
        let mut touched_r = std::collections::HashSet::new();
        for step in 1..=cfg.max_steps {
            let mut rng = rng_from(step_seed(cfg.seed, step));
            for _ in 0..cfg.batch_size {
                let q = queries[rng.gen_range(0..queries.len())];
                let negs =
                    sample_negatives(&q, cfg.loss.num_negatives, data.n_entities(), &mut rng);
                touched_e.insert(q.anchor);
                touched_e.insert(q.answer);
                touched_r.insert(q.relation);
                touched_e.extend(negs.entities);
            }
        }

        let init = ModelParams::init(
            cfg.model,
            cfg.dim,
            data.n_entities(),
            data.n_relations(),
            cfg.loss.gamma,
            derive_seed(cfg.seed, "init"),
        );
        let stride = cfg.model.entity_stride(cfg.dim);
        let mut froze = 0;
        for e in 0..data.n_entities() {
            if touched_e.contains(&e) {
                continue;
            }
            froze += 1;
            for i in 0..stride {
                assert_eq!(
                    out.params.entities[e * stride + i].to_bits(),
                    init.entities[e * stride + i].to_bits(),
                    "entity {e} moved without ever being sampled"
                );
            }
        }
        assert!(froze > 0, "test graph too small: every entity was touched");
    }

    #[test]
    fn non_finite_loss_aborts_with_step_context() {
        let data = toy_dataset(8);
        let mut cfg = quick_config(ModelKind::DistMult, LossFamily::NsOriginal, 50);
        // One step at this rate pushes the embeddings to ~1e300, so the
        // next batch's trilinear products overflow and the loss leaves the
        // finite range.
        cfg.lr = 1e300;
        match train(&cfg, &data, |_| {}) {
            Err(Error::NonFiniteLoss { step, .. }) => assert!(step > 1 && step < 10),
            other => panic!("expected a non-finite-loss abort, got {other:?}"),
        }
    }

    #[test]
    fn schedule_halves_after_the_cut() {
        let s = LrSchedule::HalveAtFraction { fraction: 0.5 };
        assert_eq!(effective_lr(s, 1.0, 1, 100), 1.0);
        assert_eq!(effective_lr(s, 1.0, 50, 100), 1.0);
        assert_eq!(effective_lr(s, 1.0, 51, 100), 0.5);
        assert_eq!(effective_lr(s, 1.0, 100, 100), 0.5);
        assert_eq!(effective_lr(LrSchedule::Constant, 0.3, 99, 100), 0.3);
    }

    #[test]
    fn eval_records_appear_at_the_requested_cadence() {
        let data = toy_dataset(10);
        let mut cfg = quick_config(ModelKind::DistMult, LossFamily::NsKge, 40);
        cfg.eval_every = 20;
        let out = train(&cfg, &data, |_| {}).unwrap();
        let evals: Vec<u64> = out
            .log
            .iter()
            .filter(|r| r.split.is_some())
            .map(|r| r.step)
            .collect();
        assert_eq!(evals, vec![20, 40]);
        let rec = out.log.iter().find(|r| r.split.is_some()).unwrap();
        assert!(rec.mrr.unwrap() > 0.0 && rec.mrr.unwrap() <= 1.0);
    }

    #[test]
    fn presets_cover_the_benchmark_grid() {
        assert_eq!(preset_names().len(), 15);
        for name in preset_names() {
            let cfg = preset(name).unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.loss.family, LossFamily::Sans);
        }
        let t = preset("fb15k237-transe").unwrap();
        assert_eq!(t.model, ModelKind::TransE);
        assert_eq!(t.loss.gamma, 9.0);
        assert_eq!(t.loss.num_negatives, 256);
        assert_eq!(t.lr, 5e-5);
        assert_eq!(t.batch_size, 1024);
        assert_eq!(t.dim, 1000);
        assert_eq!(t.max_steps, 100_000);

        let r = preset("wn18rr-rotate").unwrap();
        assert_eq!(r.model, ModelKind::RotatE);
        assert_eq!(r.loss.gamma, 6.0);
        assert_eq!(r.loss.num_negatives, 1024);
        assert_eq!(r.lr, 5e-5);
        assert_eq!(r.batch_size, 512);
        assert_eq!(r.dim, 500);
        assert_eq!(r.loss.alpha, 0.5);
        assert_eq!(r.max_steps, 80_000);

        let h = preset("yago310-hake").unwrap();
        assert_eq!(h.loss.num_negatives, 500);
        assert_eq!(h.loss.gamma, 24.0);
        assert_eq!(h.lr, 2e-4);
        assert_eq!(h.max_steps, 200_000);

        assert!(preset("fb15k237-typo").is_none());
        assert!(preset("yago310-rescal").is_none());
    }

    #[test]
    fn config_validation_rejects_degenerate_values() {
        let mut cfg = quick_config(ModelKind::DistMult, LossFamily::NsKge, 10);
        cfg.batch_size = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = quick_config(ModelKind::DistMult, LossFamily::NsKge, 10);
        cfg.lr = -1.0;
        assert!(cfg.validate().is_err());
        let mut cfg = quick_config(ModelKind::DistMult, LossFamily::NsKge, 10);
        cfg.p_norm = Some(3);
        assert!(cfg.validate().is_err());
        let mut cfg = quick_config(ModelKind::DistMult, LossFamily::NsKge, 10);
        cfg.lr_schedule = LrSchedule::HalveAtFraction { fraction: 1.5 };
        assert!(cfg.validate().is_err());
    }
}
