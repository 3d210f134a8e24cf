//! Training laboratory for knowledge-graph embedding models.
//!
//! The crate covers the full loop: loading triple files into an interned
//! vocabulary, scoring with six relational models, negative-sampling loss
//! variants with frequency-based instance weighting, sparse Adam training,
//! filtered ranking evaluation, and a set of tabular probes that check the
//! optimizer's fixed points against closed forms on small synthetic
//! distributions.
//!
//! Determinism is a design constraint throughout: every stochastic choice
//! derives from one root seed, parallel reductions are chunked and merged in
//! a fixed order, and repeated runs produce bitwise-identical parameters.

pub mod adam;
pub mod batch;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod eval;
pub mod loss;
pub mod sampling;
pub mod scoring;
pub mod seed;
pub mod subsample;
pub mod theory;
pub mod trainer;

pub use adam::AdamState;
pub use batch::{batch_loss, batch_loss_and_grad, BatchInstance, GradAccumulator, WeightContext};
pub use checkpoint::{load as load_checkpoint, save as save_checkpoint, CheckpointHeader};
pub use data::{Dataset, Direction, FilterIndex, FrequencyTable, Query, Triple, Vocab};
pub use error::{Error, Result};
pub use eval::{evaluate, rank_answer, rank_from_scores, EvalReport, RankingMode};
pub use loss::{LossFamily, LossSpec, SubsamplingMethod};
pub use sampling::{sample_negatives, NegativeBatch};
pub use scoring::{score, score_all, score_grad, ModelKind, ModelParams, ScoreGradient, Slot};
pub use seed::{derive_seed, rng_from, step_seed};
pub use subsample::{subsample_weights, SubsampleTable};
pub use theory::{
    cell_floor, descend, exact_loss, exact_loss_and_floor, exact_loss_grad, exact_model_noise_term,
    gradient_scaling_probe, minimal_margin, objective_distribution, optimal_scores, reachability,
    sans_equivalence_probe, sans_negative_term, CategoricalInstance, CategoricalSampler,
    DescentOutcome, GradientProbe, SansProbe, ScoreRange, TabularScoreModel,
};
pub use trainer::{
    effective_lr, preset, preset_names, train, LogRecord, LrSchedule, TrainConfig, TrainOutcome,
};
