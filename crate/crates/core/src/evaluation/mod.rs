//! ROC/AUC, latent-space analysis, and contamination/ablation sweeps.

mod latent;
pub mod report;
mod roc;
mod sweep;

pub use latent::{latent_analysis, latent_analysis_from, EncodedSample, Histogram, LabelSummary, LatentAnalysis, NormStats, Pca};
pub use roc::{auc, compute_roc, trapezoid_area, RocPoint, RocResult};
pub use sweep::{
    evaluate_model, median, run_sweep, train_cell, EvaluationReport, RunLatentStats, SweepCell, SweepGrid, SweepResult,
    SweepSpec,
};
