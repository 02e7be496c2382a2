//! Subcommand bodies. Each stage reads and writes plain files so runs can be
//! inspected and resumed.
//!
//! Run directory written by `train`:
//!
//! ```text
//! config.txt            resolved configuration
//! holdout.tsv           user<TAB>hashtag of every hidden edge
//! folds.tsv             fold<TAB>user<TAB>hashtag of every validation edge
//! fold_<i>/init.bin     layer-0 embeddings before training
//! fold_<i>/checkpoint.bin  best layer-0 embeddings
//! fold_<i>/final.bin    propagated embeddings used for scoring
//! fold_<i>/history.csv
//! fold_<i>/index.tsv
//! ```

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{
    annotation_curve, evaluate_fold, prepare_split, synth::write_planted, synth_generate, train_fold, write_curve,
    EvalReport, Fold, HoldoutSplit, PreparedSplit, StanceAnnotation,
};
use crate::graph::{build_interaction_graph, build_social_graph, compute_pathsim, sparsify, BipartiteGraph};
use crate::ingest::{apply_filters, extract_interactions, parse_corpus, read_outlets, InteractionCounts, ParseOptions};
use crate::model::{load_checkpoint, save_checkpoint, save_embeddings, write_index, FinalEmbeddings, PretrainedEmbeddings};
use crate::seed::{derive_seed, Stage};
use crate::sparse::CsrMatrix;
use crate::train::write_history;

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn mkdir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Runs `body` against a buffered file and flushes it.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let mut w = create(path)?;
    body(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_annotations(path: &Path) -> Result<StanceAnnotation> {
    StanceAnnotation::read(open(path)?)
}

fn read_pretrained(cfg: &RunConfig) -> Result<Option<PretrainedEmbeddings>> {
    match (&cfg.pretrained, cfg.experiment.model.use_pretrained) {
        (Some(p), true) => Ok(Some(PretrainedEmbeddings::read(open(p)?)?)),
        _ => Ok(None),
    }
}

pub struct IngestInputs<'a> {
    pub tweets: &'a Path,
    pub follows: Option<&'a Path>,
    pub outlets: Option<&'a Path>,
    pub strict: bool,
}

pub fn cmd_ingest(inputs: &IngestInputs<'_>, out: &Path, cfg: &RunConfig) -> Result<InteractionCounts> {
    let follows = inputs.follows.map(open).transpose()?;
    let corpus = parse_corpus(open(inputs.tweets)?, follows, ParseOptions { strict: inputs.strict })?;
    let outlets = match inputs.outlets {
        Some(p) => read_outlets(open(p)?)?,
        None => HashSet::new(),
    };
    let kept = apply_filters(&corpus, &cfg.filter, &outlets)?;
    let counts = extract_interactions(&kept)?;
    info!(
        "{} tweets -> {} users, {} hashtags",
        corpus.tweets.len(),
        counts.n_users(),
        counts.n_hashtags()
    );
    counts.write_dir(out)?;
    Ok(counts)
}

/// Writes `bipartite.coo` (row-normalized weights) and, when enabled,
/// `social.coo` and `pathsim.coo`.
pub fn cmd_build(counts_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let counts = InteractionCounts::read_dir(counts_dir)?;
    mkdir(out)?;
    let graph = build_interaction_graph(&counts)?;
    let write = |name: &str, m: &CsrMatrix| write_file(&out.join(name), |w| m.write_coo(w));
    write("bipartite.coo", graph.weights())?;
    let model = &cfg.experiment.model;
    let ch = &cfg.experiment.channels;
    if model.social {
        write("social.coo", build_social_graph(&counts, ch.social)?.weights())?;
    }
    if model.pathsim {
        let g = sparsify(&compute_pathsim(&counts, ch.metapath)?, ch.pathsim_min_weight, ch.pathsim_top_k)?;
        write("pathsim.coo", g.weights())?;
    }
    write_file(&out.join("index.tsv"), |w| write_index(w, &counts.users, &counts.hashtags))
}

fn write_split(dir: &Path, counts: &InteractionCounts, split: &PreparedSplit) -> Result<()> {
    let (users, tags) = (&counts.users, &counts.hashtags);
    write_file(&dir.join("holdout.tsv"), |w| {
        for (u, j, _) in &split.holdout.hidden {
            writeln!(w, "{}\t{}", users[*u], tags[*j])?;
        }
        Ok(())
    })?;
    write_file(&dir.join("folds.tsv"), |w| {
        for (i, f) in split.folds.iter().enumerate() {
            for (u, j) in f.validation_pairs() {
                writeln!(w, "{i}\t{}\t{}", users[u], tags[j])?;
            }
        }
        Ok(())
    })
}

fn read_pairs(path: &Path, with_fold: bool, counts: &InteractionCounts) -> Result<Vec<(usize, usize, usize)>> {
    let users: HashMap<&str, usize> = counts.users.iter().enumerate().map(|(i, u)| (u.as_str(), i)).collect();
    let tags = counts.hashtag_index();
    let context = path.display().to_string();
    let mut out = Vec::new();
    for (n, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let bad = |m: &str| Error::parse(context.clone(), format!("line {}: {m}", n + 1));
        let fields: Vec<&str> = line.split('\t').collect();
        let (fold, rest) = if with_fold {
            let f = fields.first().and_then(|f| f.parse().ok()).ok_or_else(|| bad("bad fold"))?;
            (f, &fields[1..])
        } else {
            (0, &fields[..])
        };
        if rest.len() != 2 {
            return Err(bad("expected user<TAB>hashtag"));
        }
        let u = *users.get(rest[0]).ok_or_else(|| bad("unknown user"))?;
        let j = *tags.get(rest[1]).ok_or_else(|| bad("unknown hashtag"))?;
        out.push((fold, u, j));
    }
    Ok(out)
}

/// Rebuilds the holdout and folds saved by `train`.
pub fn read_split(dir: &Path, counts: &InteractionCounts) -> Result<PreparedSplit> {
    let full = build_interaction_graph(counts)?;
    let hidden_pairs: HashSet<(usize, usize)> = read_pairs(&dir.join("holdout.tsv"), false, counts)?
        .into_iter()
        .map(|(_, u, j)| (u, j))
        .collect();
    let mut hidden = Vec::new();
    let mut kept = Vec::new();
    for (u, j, w) in full.edges() {
        if hidden_pairs.contains(&(u, j)) {
            hidden.push((u, j, w));
        } else {
            kept.push((u, j, w));
        }
    }
    if hidden.len() != hidden_pairs.len() {
        return Err(Error::parse("holdout.tsv", "hidden edge missing from the counts"));
    }
    let holdout_users: Vec<usize> = hidden.iter().map(|e| e.0).collect::<BTreeSet<_>>().into_iter().collect();
    let train_graph = BipartiteGraph::from_edges(full.n_users(), full.n_hashtags(), &kept)?;

    let validation = read_pairs(&dir.join("folds.tsv"), true, counts)?;
    let n_folds = validation.iter().map(|v| v.0 + 1).max().unwrap_or(0);
    let mut folds = Vec::with_capacity(n_folds);
    for i in 0..n_folds {
        let pairs: HashSet<(usize, usize)> = validation.iter().filter(|v| v.0 == i).map(|v| (v.1, v.2)).collect();
        let (mut valid, mut train) = (Vec::new(), Vec::new());
        for e in train_graph.edges() {
            if pairs.contains(&(e.0, e.1)) {
                valid.push(e);
            } else {
                train.push(e);
            }
        }
        if valid.len() != pairs.len() {
            return Err(Error::parse("folds.tsv", format!("fold {i} lists edges outside the training graph")));
        }
        folds.push(Fold { train, validation: valid });
    }
    Ok(PreparedSplit {
        holdout: HoldoutSplit {
            train_graph,
            hidden,
            holdout_users,
        },
        folds,
    })
}

/// `run/fold_<i>`.
pub fn fold_dir(run: &Path, fold: usize) -> PathBuf {
    run.join(format!("fold_{fold}"))
}

pub fn cmd_train(counts_dir: &Path, annotations: &Path, out: &Path, cfg: &RunConfig) -> Result<()> {
    let mut annotations = read_annotations(annotations)?;
    let counts = InteractionCounts::read_dir(counts_dir)?;
    let pretrained = read_pretrained(cfg)?;
    let exp = &cfg.experiment;
    annotations.set_usage(&counts);
    let index = annotations.resolve(&counts.hashtags);
    let split = prepare_split(&counts, &index, &exp.eval, exp.seed)?;
    mkdir(out)?;
    write_file(&out.join("config.txt"), |w| w.write_all(cfg.to_text().as_bytes()))?;
    write_split(out, &counts, &split)?;
    for fold in 0..exp.eval.n_runs() {
        let run = train_fold(&counts, &split, fold, exp, pretrained.as_ref())?;
        let dir = fold_dir(out, fold);
        mkdir(&dir)?;
        save_checkpoint(&dir.join("init.bin"), &run.initial)?;
        save_checkpoint(&dir.join("checkpoint.bin"), &run.outcome.state)?;
        save_embeddings(
            &dir.join("final.bin"),
            run.embeddings.users.view(),
            run.embeddings.hashtags.view(),
            run.outcome.state.seed,
        )?;
        write_file(&dir.join("history.csv"), |w| write_history(w, &run.outcome.history, exp.eval.k))?;
        write_file(&dir.join("index.tsv"), |w| write_index(w, &counts.users, &counts.hashtags))?;
    }
    Ok(())
}

/// Final embeddings of every trained fold in a run directory.
fn load_runs(run: &Path, counts: &InteractionCounts, n_folds: usize) -> Result<Vec<(usize, FinalEmbeddings)>> {
    let mut out = Vec::new();
    for fold in 0..n_folds {
        let path = fold_dir(run, fold).join("final.bin");
        if !path.exists() {
            continue;
        }
        let state = load_checkpoint(&path)?;
        if state.n_users() != counts.n_users() || state.n_hashtags() != counts.n_hashtags() {
            return Err(Error::Shape(format!("{} does not match the counts", path.display())));
        }
        out.push((
            fold,
            FinalEmbeddings {
                users: state.users,
                hashtags: state.hashtags,
            },
        ));
    }
    if out.is_empty() {
        return Err(Error::io(
            fold_dir(run, 0).join("final.bin"),
            std::io::Error::new(std::io::ErrorKind::NotFound, "no trained folds"),
        ));
    }
    Ok(out)
}

struct Loaded {
    counts: InteractionCounts,
    annotations: StanceAnnotation,
    split: PreparedSplit,
    runs: Vec<(usize, FinalEmbeddings)>,
}

fn load_run(run: &Path, counts_dir: &Path, annotations: &Path) -> Result<Loaded> {
    let mut annotations = read_annotations(annotations)?;
    let counts = InteractionCounts::read_dir(counts_dir)?;
    annotations.set_usage(&counts);
    let split = read_split(run, &counts)?;
    let runs = load_runs(run, &counts, split.folds.len())?;
    Ok(Loaded {
        counts,
        annotations,
        split,
        runs,
    })
}

/// Writes `report.txt` and `folds.csv` into `out`.
pub fn cmd_eval(run: &Path, counts_dir: &Path, annotations: &Path, out: &Path, cfg: &RunConfig) -> Result<EvalReport> {
    let loaded = load_run(run, counts_dir, annotations)?;
    let index = loaded.annotations.resolve(&loaded.counts.hashtags);
    let eval = &cfg.experiment.eval;
    let mut folds = Vec::new();
    for (fold, emb) in &loaded.runs {
        let train_graph = loaded.split.fold_graph(*fold)?;
        folds.push(evaluate_fold(
            emb,
            *fold,
            &train_graph,
            &loaded.split.folds[*fold].validation_pairs(),
            &loaded.split.holdout,
            &index,
            eval,
        )?);
    }
    let report = EvalReport {
        variant: cfg.experiment.variant,
        k: eval.k,
        folds,
    };
    mkdir(out)?;
    write_file(&out.join("report.txt"), |w| report.write_summary(w))?;
    write_file(&out.join("folds.csv"), |w| report.write_folds(w))?;
    Ok(report)
}

pub fn cmd_curve(
    run: &Path,
    counts_dir: &Path,
    annotations: &Path,
    x_max: usize,
    out: &Path,
) -> Result<Vec<(usize, f64)>> {
    let loaded = load_run(run, counts_dir, annotations)?;
    let index = loaded.annotations.resolve(&loaded.counts.hashtags);
    let models: Vec<&FinalEmbeddings> = loaded.runs.iter().map(|(_, e)| e).collect();
    let curve = annotation_curve(&models, &loaded.split.holdout, &index, x_max)?;
    write_file(out, |w| write_curve(w, &curve))?;
    Ok(curve)
}

/// Counts files plus `annotations.tsv` and `planted.tsv`.
pub fn cmd_synth(out: &Path, cfg: &RunConfig) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.experiment.seed, Stage::Synth, 0));
    let data = synth_generate(&cfg.synth, &mut rng)?;
    data.counts.write_dir(out)?;
    write_file(&out.join("annotations.tsv"), |w| data.annotations.write(w))?;
    write_file(&out.join("planted.tsv"), |w| write_planted(w, &data.counts.users, &data.planted))
}
