//! Optimizer: sparsity propagation, equality saturation with cost-based
//! extraction, storage-format composition and multiplication normalization.

pub mod cost;
pub mod egraph;
pub mod normalize;
pub mod pipeline;
pub mod extract;
pub mod rules;
pub mod saturate;
pub mod simplify;
pub mod sparsity;
pub mod storage;

pub use cost::{CostModel, SparseCost};
pub use saturate::{saturate, term_cost, SaturationConfig, Saturated};
pub use sparsity::propagate_sparsity;
pub use storage::{compose_storage, Composed, Format, StorageError, StorageSpec};
pub use normalize::{normalize_mult, only_scalar_mults};
pub use pipeline::{optimize_pipeline, Optimized, PipelineConfig, PipelineError, SaturationStats, Stage, STAGES};
