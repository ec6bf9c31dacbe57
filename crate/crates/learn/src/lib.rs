//! Regressors, feature selection, cross-validation and Shapley attributions.

pub mod data;
pub mod error;
pub mod mlp;
pub mod pipeline;
pub mod select;
pub mod shap;
pub mod svr;

pub use data::{LabelNormalizer, Standardizer};
pub use error::{LearnError, Result};
pub use mlp::{train_mlp, MlpConfig, MlpModel};
pub use pipeline::{
    fit_pipeline, kfold_evaluate, Augmenter, EvalConfig, EvalReport, FoldResult, Model, ModelSpec,
    PrecomputedAugmenter, TrainedPipeline,
};
pub use select::select_top_k;
pub use shap::{kernel_shap, shap_summary, FeatureImportance, ShapExplanation, ShapSummary};
pub use svr::{train_svr, Kernel, SvrConfig, SvrModel};
