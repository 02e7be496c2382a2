//! BPR training of the layer-0 embeddings with Adam.
//!
//! Final embeddings are `P·E⁰` for a symmetric operator `P` (layer average
//! of powers of `Â`, averaged over channels for the user block), so the
//! gradient with respect to `E⁰` is `P·G + 2λE⁰`, where `G` is the gradient
//! with respect to the final embeddings.

use std::collections::HashSet;
use std::io::Write;
use std::time::Instant;

use log::{info, warn};
use ndarray::{concatenate, s, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval::metrics::{ranking_metrics, relevant_sets};
use crate::graph::BipartiteGraph;
use crate::model::{apply_layer_operator, Channels, EmbeddingState, FinalEmbeddings, ModelConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// L2 coefficient on the full `E⁰`.
    pub lambda_reg: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub eval_every: usize,
    /// Batches between forward-pass refreshes.
    pub refresh_every: usize,
    /// Cut-off for the validation recall used in early stopping.
    pub eval_k: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            lambda_reg: 1e-4,
            batch_size: 1024,
            max_epochs: 1000,
            patience: 50,
            eval_every: 1,
            refresh_every: 1,
            eval_k: 20,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and >= 0");
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return bad("lambda_reg must be finite and >= 0");
        }
        if self.batch_size == 0 || self.patience == 0 || self.eval_every == 0 || self.refresh_every == 0 || self.eval_k == 0 {
            return bad("batch_size, patience, eval_every, refresh_every and eval_k must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BprTriple {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

/// One triple per observed edge in shuffled order, negatives drawn
/// uniformly from the hashtags the user never used.
pub fn sample_epoch<R: Rng>(graph: &BipartiteGraph, rng: &mut R) -> Vec<BprTriple> {
    let m = graph.n_hashtags();
    let mut edges: Vec<(usize, usize)> = graph.weights().iter().map(|(u, i, _)| (u, i)).collect();
    edges.shuffle(rng);
    let mut saturated = HashSet::new();
    let mut out = Vec::with_capacity(edges.len());
    for (user, pos) in edges {
        let used = graph.neighbors(user);
        if used.len() >= m {
            if saturated.insert(user) {
                warn!("user {user} used every hashtag; skipping its triples");
            }
            continue;
        }
        let neg = loop {
            let j = rng.gen_range(0..m);
            if used.binary_search(&j).is_err() {
                break j;
            }
        };
        out.push(BprTriple { user, pos, neg });
    }
    out
}

/// `ln σ(x)` without overflow.
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-Σ ln σ(ŷ(u,i) - ŷ(u,j))` over the batch.
pub fn bpr_data_term(batch: &[BprTriple], emb: &FinalEmbeddings) -> f64 {
    batch
        .iter()
        .map(|t| -log_sigmoid(emb.score(t.user, t.pos) - emb.score(t.user, t.neg)))
        .sum()
}

/// Batch BPR loss plus `λ‖E⁰‖²`.
pub fn bpr_loss(batch: &[BprTriple], emb: &FinalEmbeddings, e0: &EmbeddingState, lambda: f64) -> f64 {
    bpr_data_term(batch, emb) + lambda * e0.squared_norm()
}

/// Gradient with respect to `E⁰`, laid out like [`EmbeddingState`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub users: Array2<f64>,
    pub hashtags: Array2<f64>,
}

impl Gradient {
    pub fn is_finite(&self) -> bool {
        self.users.iter().chain(self.hashtags.iter()).all(|v| v.is_finite())
    }
}

pub fn grad_e0(
    batch: &[BprTriple],
    channels: &Channels,
    emb: &FinalEmbeddings,
    state: &EmbeddingState,
    cfg: &ModelConfig,
    lambda: f64,
) -> Result<Gradient> {
    let n = state.n_users();
    let mut g_users = Array2::<f64>::zeros(emb.users.raw_dim());
    let mut g_tags = Array2::<f64>::zeros(emb.hashtags.raw_dim());
    for t in batch {
        let e_u = emb.users.row(t.user);
        let e_i = emb.hashtags.row(t.pos);
        let e_j = emb.hashtags.row(t.neg);
        let s = sigmoid(e_u.dot(&e_j) - e_u.dot(&e_i));
        let diff = &e_i - &e_j;
        g_users.row_mut(t.user).scaled_add(-s, &diff);
        g_tags.row_mut(t.pos).scaled_add(-s, &e_u);
        g_tags.row_mut(t.neg).scaled_add(s, &e_u);
    }

    // each user channel sees 1/n_channels of the user cotangent
    g_users /= channels.n_user_channels() as f64;
    let stacked = concatenate![Axis(0), g_users, g_tags];
    let mut grad = apply_layer_operator(&channels.bipartite, stacked.view(), cfg.layers, cfg.include_layer0)?;
    for adj in channels.user_graphs() {
        let pulled = apply_layer_operator(adj, g_users.view(), cfg.layers, cfg.include_layer0)?;
        let mut block = grad.slice_mut(s![..n, ..]);
        block += &pulled;
    }

    let mut users = grad.slice(s![..n, ..]).to_owned();
    let mut hashtags = grad.slice(s![n.., ..]).to_owned();
    users.scaled_add(2.0 * lambda, &state.users);
    hashtags.scaled_add(2.0 * lambda, &state.hashtags);
    Ok(Gradient { users, hashtags })
}

/// Adam moments for every entry of `E⁰`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn for_state(state: &EmbeddingState) -> Self {
        Self::new(state.users.len() + state.hashtags.len())
    }

    /// One bias-corrected update of a flat parameter vector.
    pub fn step_slice(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        if params.len() != self.m.len() || grad.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam state has {} entries, got params {} and grad {}",
                self.m.len(),
                params.len(),
                grad.len()
            )));
        }
        if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
            return Err(Error::Numerics(format!("gradient entry {bad}")));
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    pub fn step(&mut self, state: &mut EmbeddingState, grad: &Gradient, lr: f64) -> Result<()> {
        if grad.users.dim() != state.users.dim() || grad.hashtags.dim() != state.hashtags.dim() {
            return Err(Error::Shape("gradient shape differs from embeddings".into()));
        }
        let split = state.users.len();
        let mut params: Vec<f64> = state.users.iter().chain(state.hashtags.iter()).copied().collect();
        let flat: Vec<f64> = grad.users.iter().chain(grad.hashtags.iter()).copied().collect();
        self.step_slice(&mut params, &flat, lr)?;
        for (dst, src) in state.users.iter_mut().zip(&params[..split]) {
            *dst = *src;
        }
        for (dst, src) in state.hashtags.iter_mut().zip(&params[split..]) {
            *dst = *src;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub recall: Option<f64>,
    pub ndcg: Option<f64>,
    pub elapsed_ms: u128,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best state by validation recall (or the last state without validation).
    pub state: EmbeddingState,
    pub best_epoch: usize,
    pub best_recall: Option<f64>,
    pub history: Vec<EpochRecord>,
}

pub fn write_history<W: Write>(mut w: W, history: &[EpochRecord], k: usize) -> std::io::Result<()> {
    writeln!(w, "epoch,loss,recall@{k},ndcg@{k},elapsed_ms")?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
    for r in history {
        writeln!(w, "{},{:.6},{},{},{}", r.epoch, r.loss, opt(r.recall), opt(r.ndcg), r.elapsed_ms)?;
    }
    Ok(())
}

/// Mini-batch BPR with early stopping on validation recall@k.
///
/// `graph` holds only training edges and must match `channels.bipartite`.
/// Loss per epoch is the data term summed over that epoch's triples (scores
/// taken before each batch's update) plus `λ‖E⁰‖²` after the epoch.
pub fn train(
    graph: &BipartiteGraph,
    channels: &Channels,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    init: EmbeddingState,
    validation: &[(usize, usize)],
) -> Result<TrainOutcome> {
    cfg.validate()?;
    model_cfg.validate()?;
    if init.n_users() != graph.n_users() || init.n_hashtags() != graph.n_hashtags() {
        return Err(Error::Shape("initial embeddings do not match the graph".into()));
    }
    if let Some((u, j)) = validation.iter().find(|(u, j)| graph.weight(*u, *j) > 0.0) {
        return Err(Error::Config(format!("validation edge ({u}, {j}) is also a training edge")));
    }
    let relevant = relevant_sets(validation.iter().copied());

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = init;
    let mut adam = AdamState::for_state(&state);
    let mut best = state.clone();
    let mut best_epoch = 0;
    let mut best_recall: Option<f64> = None;
    let mut stale = 0usize;
    let mut history = Vec::new();
    let started = Instant::now();

    for epoch in 1..=cfg.max_epochs {
        let triples = sample_epoch(graph, &mut rng);
        let mut data = 0.0;
        let mut emb: Option<FinalEmbeddings> = None;
        for (b, batch) in triples.chunks(cfg.batch_size).enumerate() {
            if emb.is_none() || b % cfg.refresh_every == 0 {
                emb = Some(FinalEmbeddings::compute(channels, &state, model_cfg)?);
            }
            let current = emb.as_ref().unwrap();
            data += bpr_data_term(batch, current);
            let grad = grad_e0(batch, channels, current, &state, model_cfg, cfg.lambda_reg)?;
            adam.step(&mut state, &grad, cfg.learning_rate)?;
        }
        let loss = data + cfg.lambda_reg * state.squared_norm();
        if !loss.is_finite() {
            return Err(Error::Numerics(format!("loss became {loss} at epoch {epoch}")));
        }

        let mut record = EpochRecord {
            epoch,
            loss,
            recall: None,
            ndcg: None,
            elapsed_ms: started.elapsed().as_millis(),
        };
        let mut stop = false;
        if !relevant.is_empty() && epoch % cfg.eval_every == 0 {
            let emb = FinalEmbeddings::compute(channels, &state, model_cfg)?;
            let scores = ranking_metrics(&emb, graph, &relevant, cfg.eval_k)?;
            record.recall = Some(scores.recall);
            record.ndcg = Some(scores.ndcg);
            if best_recall.is_none_or(|b| scores.recall > b) {
                best_recall = Some(scores.recall);
                best = state.clone();
                best_epoch = epoch;
                stale = 0;
            } else {
                stale += 1;
                stop = stale >= cfg.patience;
            }
        }
        info!(
            "epoch {epoch} loss {loss:.4} recall@{} {}",
            cfg.eval_k,
            record.recall.map_or("-".to_string(), |r| format!("{r:.4}"))
        );
        history.push(record);
        if stop {
            info!("early stop at epoch {epoch}, best epoch {best_epoch}");
            break;
        }
    }

    if best_recall.is_none() {
        best = state;
        best_epoch = history.len();
    }
    Ok(TrainOutcome {
        state: best,
        best_epoch,
        best_recall,
        history,
    })
}
