//! Retrieval-loss evaluation and the experiments built on it.

mod benchmark;
mod embedding;
mod retrieval;
mod table;

pub use benchmark::{
    alpha_grid, alpha_sweep, compare_optimizers, evaluate_split, run_benchmark, AlphaPoint,
    AlphaSweep, BenchmarkPlan, BenchmarkReport, CellConfig, CellReport, DatasetInfo,
    OptimizerComparison, OptimizerCurve, SplitOutcome,
};
pub use embedding::{export_embeddings, pca_project, silhouette, EmbeddingExport, Projection};
pub use retrieval::{nearest, retrieval_loss, retrieval_loss_from_scores};
pub use table::render_table;
