//! A self-contained knowledge-graph embedding engine: an in-memory KG data
//! structure, seven embedding models behind one scoring interface, negative
//! sampling, gradient-based training with a sparse Adam optimizer, and a
//! batched link-prediction evaluator that is validated against (and timed
//! against) a naive per-triple loop.

pub mod error;
pub mod evaluation;
pub mod kg;
pub mod mat;
pub mod models;
pub mod sampling;
pub mod training;

pub use error::{Error, Result};
pub use evaluation::{
    bench_compare, bench_eval, classify, fit_thresholds, link_prediction, rank_of, BenchReport,
    EvalMode, LPMetrics, RankMode, RankSet, SideMetrics, ThresholdTable,
};
pub use kg::{
    build_filter, CorruptionStats, Dictionary, FilterSet, KnowledgeGraph, RedundancyReport,
    SplitOutcome, Triple,
};
pub use models::{Gradients, Model, ModelKind, PreparedCandidates, Side, TensorSlot};
pub use sampling::{Sampler, SamplerKind};
pub use training::{
    adam_step, margin_loss, sigmoid_loss, AdamState, LossKind, TrainConfig, Trainer,
};
