//! Accuracy grids, confusion matrices, hard-example ratios, gradient
//! similarity and pseudo-label drift.

mod drift;
mod export;
mod grid;
mod log;
mod metrics;

pub use drift::{mid_ranks, pseudo_label_drift, spearman, PseudoLabelDrift};
pub use export::{curves_csv, matrix_csv, table_csv};
pub use grid::{evaluate_grid, evaluate_split, feature_gradient, predict_dataset};
pub use log::{write_atomically, MetricLog, MetricRecord, MetricValue, RunSummary};
pub use metrics::{
    accuracy, confusion, grad_cosine, hard_mask, hard_ratio, mean_class_accuracy, per_class_accuracy, ConfusionAxis,
    ConfusionMatrix,
};
