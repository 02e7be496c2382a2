//! Holdout + k-fold protocol: split, train each fold, score edges and users.

use std::collections::HashSet;
use std::io::Write;

use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{
    build_adjacency, build_interaction_graph, build_social_graph, normalize_user_graph, pathsim_from_relations,
    sparsify, BipartiteGraph, MetaPathSpec, SocialWeights,
};
use crate::ingest::InteractionCounts;
use crate::model::{init_embeddings, Channels, EmbeddingState, FinalEmbeddings, ModelConfig, PretrainedEmbeddings};
use crate::seed::{derive_seed, Stage};
use crate::sparse::CsrMatrix;
use crate::train::{train, TrainConfig, TrainOutcome};

use super::baselines::Variant;
use super::metrics::{ranking_metrics, relevant_sets};
use super::split::{holdout_split, kfold_split, Fold, HoldoutSplit};
use super::stance::{classify_stance, ground_truth_stance, stance_metrics, AnnotationIndex, StanceAnnotation, StanceClass};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub holdout_fraction: f64,
    pub folds: usize,
    /// How many of the folds to train; 0 means all.
    pub runs: usize,
    pub k: usize,
    /// Drop NEUTRAL from user-level stance.
    pub binary_only: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            holdout_fraction: 0.05,
            folds: 5,
            runs: 0,
            k: 20,
            binary_only: false,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction <= 1.0) {
            return Err(Error::Config("holdout_fraction must lie in (0, 1]".into()));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be >= 2".into()));
        }
        if self.runs > self.folds {
            return Err(Error::Config(format!("runs = {} exceeds folds = {}", self.runs, self.folds)));
        }
        if self.k == 0 {
            return Err(Error::Config("k must be >= 1".into()));
        }
        Ok(())
    }

    pub fn n_runs(&self) -> usize {
        if self.runs == 0 {
            self.folds
        } else {
            self.runs
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    pub social: SocialWeights,
    pub metapath: MetaPathSpec,
    pub pathsim_min_weight: f64,
    pub pathsim_top_k: Option<usize>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            social: SocialWeights::default(),
            metapath: MetaPathSpec::default(),
            pathsim_min_weight: 0.0,
            pathsim_top_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    pub channels: ChannelConfig,
    pub variant: Variant,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct PreparedSplit {
    pub holdout: HoldoutSplit,
    pub folds: Vec<Fold>,
}

impl PreparedSplit {
    /// Training graph of fold `i`, rows renormalized.
    pub fn fold_graph(&self, i: usize) -> Result<BipartiteGraph> {
        let g = &self.holdout.train_graph;
        BipartiteGraph::from_edges(g.n_users(), g.n_hashtags(), &self.folds[i].train)
    }
}

pub fn prepare_split(counts: &InteractionCounts, index: &AnnotationIndex, cfg: &EvalConfig, seed: u64) -> Result<PreparedSplit> {
    cfg.validate()?;
    let graph = build_interaction_graph(counts)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stage::Holdout, 0));
    let holdout = holdout_split(&graph, index, cfg.holdout_fraction, &mut rng)?;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, Stage::Folds, 0));
    let folds = kfold_split(&holdout.train_graph.edges(), cfg.folds, &mut rng)?;
    info!(
        "holdout: {} users, {} hidden edges; {} folds over {} edges",
        holdout.holdout_users.len(),
        holdout.hidden.len(),
        folds.len(),
        holdout.train_graph.n_edges()
    );
    Ok(PreparedSplit { holdout, folds })
}

/// Keeps only the entries of `relation` that are edges of `support`.
fn restrict(relation: &CsrMatrix, support: &BipartiteGraph) -> CsrMatrix {
    relation.map_values(|u, j, v| if support.weight(u, j) > 0.0 { v } else { 0.0 })
}

/// Propagation operators for one training graph. Meta-path similarities are
/// computed from the interactions present in `support` only, so held-out
/// edges never reach the user-user channel.
pub fn build_channels(
    counts: &InteractionCounts,
    graph: &BipartiteGraph,
    support: &BipartiteGraph,
    model: &ModelConfig,
    ch: &ChannelConfig,
) -> Result<Channels> {
    let social = if model.social {
        Some(normalize_user_graph(&build_social_graph(counts, ch.social)?))
    } else {
        None
    };
    let pathsim = if model.pathsim {
        let left = restrict(counts.relation(ch.metapath.left), support);
        let right = restrict(counts.relation(ch.metapath.right), support);
        let g = sparsify(&pathsim_from_relations(&left, &right)?, ch.pathsim_min_weight, ch.pathsim_top_k)?;
        Some(normalize_user_graph(&g))
    } else {
        None
    };
    Ok(Channels {
        bipartite: build_adjacency(graph),
        social,
        pathsim,
    })
}

#[derive(Debug, Clone)]
pub struct FoldRun {
    pub fold: usize,
    /// Real training edges of the fold (the exclusion set at ranking time).
    pub train_graph: BipartiteGraph,
    pub initial: EmbeddingState,
    pub outcome: TrainOutcome,
    pub embeddings: FinalEmbeddings,
}

pub fn train_fold(
    counts: &InteractionCounts,
    split: &PreparedSplit,
    fold: usize,
    cfg: &ExperimentConfig,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<FoldRun> {
    let real = split.fold_graph(fold)?;
    let model = cfg.variant.model_config(&cfg.model);
    let mut null_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, Stage::Null, fold as u64));
    let graph = cfg.variant.graph(&real, counts.total.sum().round() as usize, &mut null_rng)?;
    let channels = build_channels(counts, &graph, &real, &model, &cfg.channels)?;
    let pre = if model.use_pretrained { pretrained } else { None };
    let initial = init_embeddings(
        &model,
        counts.n_users(),
        &counts.hashtags,
        derive_seed(cfg.seed, Stage::Init, fold as u64),
        pre,
    )?;
    // the null graph may contain validation pairs by chance
    let validation: Vec<(usize, usize)> = split.folds[fold]
        .validation_pairs()
        .into_iter()
        .filter(|&(u, j)| graph.weight(u, j) == 0.0)
        .collect();
    let mut train_cfg = cfg.train.clone();
    train_cfg.seed = derive_seed(cfg.seed, Stage::Train, fold as u64);
    train_cfg.eval_k = cfg.eval.k;
    let outcome = train(&graph, &channels, &model, &train_cfg, initial.clone(), &validation)?;
    let embeddings = FinalEmbeddings::compute(&channels, &outcome.state, &model)?;
    info!(
        "fold {fold}: {} epochs, best epoch {}",
        outcome.history.len(),
        outcome.best_epoch
    );
    Ok(FoldRun {
        fold,
        train_graph: real,
        initial,
        outcome,
        embeddings,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldReport {
    pub fold: usize,
    pub recall: f64,
    pub ndcg: f64,
    pub holdout_recall: f64,
    pub holdout_ndcg: f64,
    pub accuracy: f64,
    pub rmse: f64,
    pub users: usize,
    pub cold_users: usize,
    pub cold_accuracy: Option<f64>,
}

/// Predicted and observed stance for each evaluable holdout user.
pub struct UserStances {
    pub users: Vec<usize>,
    pub predicted: Vec<StanceClass>,
    pub truth: Vec<StanceClass>,
}

pub fn user_stances(
    emb: &FinalEmbeddings,
    holdout: &HoldoutSplit,
    truth_index: &AnnotationIndex,
    predict_index: &AnnotationIndex,
) -> Result<UserStances> {
    let mut out = UserStances {
        users: Vec::new(),
        predicted: Vec::new(),
        truth: Vec::new(),
    };
    for &u in &holdout.holdout_users {
        let truth = ground_truth_stance(&holdout.hidden_of(u), truth_index);
        let predicted = classify_stance(&emb.score_all(u)?, predict_index);
        match (truth, predicted) {
            (Some(t), Some(p)) => {
                out.users.push(u);
                out.truth.push(t);
                out.predicted.push(p);
            }
            _ => warn!("user {u} has no stance under the current annotations"),
        }
    }
    Ok(out)
}

pub fn evaluate_fold(
    emb: &FinalEmbeddings,
    fold: usize,
    train_graph: &BipartiteGraph,
    validation: &[(usize, usize)],
    holdout: &HoldoutSplit,
    index: &AnnotationIndex,
    cfg: &EvalConfig,
) -> Result<FoldReport> {
    let valid = ranking_metrics(emb, train_graph, &relevant_sets(validation.iter().copied()), cfg.k)?;
    let hidden = relevant_sets(holdout.hidden.iter().map(|e| (e.0, e.1)));
    let held = ranking_metrics(emb, train_graph, &hidden, cfg.k)?;

    let index = if cfg.binary_only { index.binary() } else { index.clone() };
    let stances = user_stances(emb, holdout, &index, &index)?;
    let (accuracy, rmse) = stance_metrics(&stances.predicted, &stances.truth)?;
    let cold: Vec<usize> = (0..stances.users.len())
        .filter(|&i| train_graph.is_isolated(stances.users[i]))
        .collect();
    let cold_accuracy = if cold.is_empty() {
        None
    } else {
        Some(cold.iter().filter(|&&i| stances.predicted[i] == stances.truth[i]).count() as f64 / cold.len() as f64)
    };
    Ok(FoldReport {
        fold,
        recall: valid.recall,
        ndcg: valid.ndcg,
        holdout_recall: held.recall,
        holdout_ndcg: held.ndcg,
        accuracy,
        rmse,
        users: stances.users.len(),
        cold_users: cold.len(),
        cold_accuracy,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub variant: Variant,
    pub k: usize,
    pub folds: Vec<FoldReport>,
}

impl EvalReport {
    fn mean(&self, f: impl Fn(&FoldReport) -> f64) -> f64 {
        self.folds.iter().map(f).sum::<f64>() / self.folds.len() as f64
    }

    pub fn recall(&self) -> f64 {
        self.mean(|f| f.recall)
    }

    pub fn ndcg(&self) -> f64 {
        self.mean(|f| f.ndcg)
    }

    pub fn holdout_recall(&self) -> f64 {
        self.mean(|f| f.holdout_recall)
    }

    pub fn holdout_ndcg(&self) -> f64 {
        self.mean(|f| f.holdout_ndcg)
    }

    pub fn accuracy(&self) -> f64 {
        self.mean(|f| f.accuracy)
    }

    pub fn rmse(&self) -> f64 {
        self.mean(|f| f.rmse)
    }

    pub fn cold_accuracy(&self) -> Option<f64> {
        let vals: Vec<f64> = self.folds.iter().filter_map(|f| f.cold_accuracy).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// `key=value` lines.
    pub fn write_summary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let k = self.k;
        writeln!(w, "variant={}", self.variant)?;
        writeln!(w, "folds={}", self.folds.len())?;
        writeln!(w, "k={k}")?;
        writeln!(w, "recall@{k}={:.6}", self.recall())?;
        writeln!(w, "ndcg@{k}={:.6}", self.ndcg())?;
        writeln!(w, "holdout_recall@{k}={:.6}", self.holdout_recall())?;
        writeln!(w, "holdout_ndcg@{k}={:.6}", self.holdout_ndcg())?;
        writeln!(w, "accuracy={:.6}", self.accuracy())?;
        writeln!(w, "rmse={:.6}", self.rmse())?;
        writeln!(w, "holdout_users={}", self.folds.first().map_or(0, |f| f.users))?;
        writeln!(w, "cold_users={}", self.folds.first().map_or(0, |f| f.cold_users))?;
        match self.cold_accuracy() {
            Some(a) => writeln!(w, "cold_accuracy={a:.6}"),
            None => writeln!(w, "cold_accuracy=NA"),
        }
    }

    pub fn write_folds<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let k = self.k;
        writeln!(
            w,
            "fold,recall@{k},ndcg@{k},holdout_recall@{k},holdout_ndcg@{k},accuracy,rmse,users,cold_users,cold_accuracy"
        )?;
        for f in &self.folds {
            writeln!(
                w,
                "{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{},{},{}",
                f.fold,
                f.recall,
                f.ndcg,
                f.holdout_recall,
                f.holdout_ndcg,
                f.accuracy,
                f.rmse,
                f.users,
                f.cold_users,
                f.cold_accuracy.map_or("NA".to_string(), |a| format!("{a:.6}"))
            )?;
        }
        Ok(())
    }

    pub fn summary_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_summary(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii report")
    }
}

/// Two-class accuracy on the holdout when predictions may only use the `x`
/// most used POS and NEG hashtags, for `x = 1..=x_max`, averaged over the
/// given models. Ground truth always uses the full POS/NEG lists.
pub fn annotation_curve(
    models: &[&FinalEmbeddings],
    holdout: &HoldoutSplit,
    index: &AnnotationIndex,
    x_max: usize,
) -> Result<Vec<(usize, f64)>> {
    if models.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let limit = index.members(StanceClass::Pos).len().min(index.members(StanceClass::Neg).len());
    if x_max == 0 || x_max > limit {
        return Err(Error::Bounds(format!("x_max = {x_max} outside 1..={limit}")));
    }
    let truth_index = index.binary();
    let mut curve = Vec::with_capacity(x_max);
    for x in 1..=x_max {
        let restricted = index.top_x(x)?;
        let mut total = 0.0;
        for emb in models {
            let s = user_stances(emb, holdout, &truth_index, &restricted)?;
            total += stance_metrics(&s.predicted, &s.truth)?.0;
        }
        curve.push((x, total / models.len() as f64));
    }
    Ok(curve)
}

pub fn write_curve<W: Write>(mut w: W, curve: &[(usize, f64)]) -> std::io::Result<()> {
    writeln!(w, "x,accuracy")?;
    for (x, a) in curve {
        writeln!(w, "{x},{a:.6}")?;
    }
    Ok(())
}

/// Everything produced by a full protocol run.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub index: AnnotationIndex,
    pub split: PreparedSplit,
    pub runs: Vec<FoldRun>,
    pub report: EvalReport,
}

pub fn run_experiment(
    counts: &InteractionCounts,
    annotations: &StanceAnnotation,
    cfg: &ExperimentConfig,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<Experiment> {
    let mut annotations = annotations.clone();
    annotations.set_usage(counts);
    let index = annotations.resolve(&counts.hashtags);
    if index.is_empty() {
        return Err(Error::Config("no annotated hashtag occurs in the corpus".into()));
    }
    let split = prepare_split(counts, &index, &cfg.eval, cfg.seed)?;
    run_on_split(counts, index, split, cfg, pretrained)
}

/// Same as [`run_experiment`] on an existing split, so variants can be
/// compared on identical data.
pub fn run_on_split(
    counts: &InteractionCounts,
    index: AnnotationIndex,
    split: PreparedSplit,
    cfg: &ExperimentConfig,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<Experiment> {
    let mut runs = Vec::new();
    let mut folds = Vec::new();
    for fold in 0..cfg.eval.n_runs() {
        let run = train_fold(counts, &split, fold, cfg, pretrained)?;
        folds.push(evaluate_fold(
            &run.embeddings,
            fold,
            &run.train_graph,
            &split.folds[fold].validation_pairs(),
            &split.holdout,
            &index,
            &cfg.eval,
        )?);
        runs.push(run);
    }
    Ok(Experiment {
        index,
        split,
        runs,
        report: EvalReport {
            variant: cfg.variant,
            k: cfg.eval.k,
            folds,
        },
    })
}

/// Holdout pairs as a set, for checks.
pub fn hidden_pairs(split: &PreparedSplit) -> HashSet<(usize, usize)> {
    split.holdout.hidden_pairs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::synth::{synth_generate, SynthConfig};

    fn small_experiment(variant: Variant, seed: u64) -> Experiment {
        let data = synth_generate(
            &SynthConfig {
                n_users: 40,
                n_hashtags: 12,
                n_neutral: 2,
                interactions_per_user: 8,
                ..SynthConfig::default()
            },
            &mut ChaCha8Rng::seed_from_u64(seed),
        )
        .unwrap();
        let cfg = ExperimentConfig {
            model: ModelConfig {
                dim: 4,
                layers: 2,
                ..ModelConfig::default()
            },
            train: TrainConfig {
                max_epochs: 5,
                learning_rate: 0.01,
                ..TrainConfig::default()
            },
            eval: EvalConfig {
                holdout_fraction: 0.1,
                runs: 2,
                k: 5,
                ..EvalConfig::default()
            },
            variant,
            seed,
            ..ExperimentConfig::default()
        };
        run_experiment(&data.counts, &data.annotations, &cfg, None).unwrap()
    }

    #[test]
    fn report_ranges_and_layout() {
        let exp = small_experiment(Variant::Wlgcn, 3);
        assert_eq!(exp.report.folds.len(), 2);
        for f in &exp.report.folds {
            for v in [f.recall, f.ndcg, f.holdout_recall, f.holdout_ndcg, f.accuracy] {
                assert!((0.0..=1.0).contains(&v));
            }
            assert!(f.rmse >= 0.0);
            assert_eq!(f.users, exp.split.holdout.holdout_users.len());
        }
        let text = exp.report.summary_string();
        assert!(text.starts_with("variant=wlgcn\nfolds=2\nk=5\nrecall@5="));
        let mut csv = Vec::new();
        exp.report.write_folds(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), 3);
    }

    #[test]
    fn hidden_edges_stay_out_of_training() {
        let exp = small_experiment(Variant::Wlgcn, 5);
        let hidden = hidden_pairs(&exp.split);
        for run in &exp.runs {
            for (u, j, _) in run.train_graph.edges() {
                assert!(!hidden.contains(&(u, j)));
            }
        }
    }

    #[test]
    fn seeded_runs_repeat() {
        let a = small_experiment(Variant::Wlgcn, 8);
        let b = small_experiment(Variant::Wlgcn, 8);
        assert_eq!(a.report.summary_string(), b.report.summary_string());
        let n = small_experiment(Variant::Null, 8);
        assert_eq!(a.split.holdout.holdout_users, n.split.holdout.holdout_users);
    }

    #[test]
    fn full_curve_matches_two_class_evaluation() {
        let exp = small_experiment(Variant::Mf, 2);
        let limit = exp.index.members(StanceClass::Pos).len().min(exp.index.members(StanceClass::Neg).len());
        let models: Vec<&FinalEmbeddings> = exp.runs.iter().map(|r| &r.embeddings).collect();
        let curve = annotation_curve(&models, &exp.split.holdout, &exp.index, limit).unwrap();
        assert_eq!(curve.len(), limit);
        assert!(matches!(
            annotation_curve(&models, &exp.split.holdout, &exp.index, limit + 1),
            Err(Error::Bounds(_))
        ));

        // with equal class sizes, x = limit is the complete two-class index
        let binary = exp.index.binary();
        if binary.members(StanceClass::Pos).len() == binary.members(StanceClass::Neg).len() {
            let direct: f64 = models
                .iter()
                .map(|e| {
                    let s = user_stances(e, &exp.split.holdout, &binary, &binary).unwrap();
                    stance_metrics(&s.predicted, &s.truth).unwrap().0
                })
                .sum::<f64>()
                / models.len() as f64;
            assert!((curve[limit - 1].1 - direct).abs() < 1e-12);
        }
        let x1 = exp.index.top_x(1).unwrap();
        assert_eq!(
            x1.members(StanceClass::Pos).len() + x1.members(StanceClass::Neg).len() + x1.members(StanceClass::Neutral).len(),
            2
        );
    }
}
