//! Evaluation: ranking metrics, stance classification, splits, baselines,
//! the annotation-effort curve and synthetic data.

pub mod baselines;
pub mod metrics;
pub mod protocol;
pub mod split;
pub mod stance;
pub mod synth;

pub use baselines::{null_model, Variant};
pub use metrics::{ndcg_at_k, ranking_metrics, recall_at_k, relevant_sets, top_k, RankingScores};
pub use protocol::{
    annotation_curve, build_channels, evaluate_fold, prepare_split, run_experiment, run_on_split, train_fold,
    write_curve, ChannelConfig, EvalConfig, EvalReport, Experiment, ExperimentConfig, FoldReport, FoldRun,
    PreparedSplit,
};
pub use split::{holdout_split, kfold_split, Fold, HoldoutSplit};
pub use stance::{
    classify_stance, ground_truth_stance, stance_metrics, AnnotationIndex, StanceAnnotation, StanceClass,
};
pub use synth::{synth_generate, SynthConfig, SynthDataset};
