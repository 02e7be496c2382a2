//! Ranking and classification metrics.

use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::model::FinalEmbeddings;

/// Indices of the `k` highest scores, skipping `exclude`. Ties go to the
/// lower index.
pub fn top_k(scores: &[f64], k: usize, exclude: &[usize]) -> Vec<usize> {
    let excluded: HashSet<usize> = exclude.iter().copied().collect();
    let mut candidates: Vec<usize> = (0..scores.len()).filter(|j| !excluded.contains(j)).collect();
    candidates.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    candidates.truncate(k);
    candidates
}

/// `|top-K ∩ relevant| / |relevant|`; `None` when nothing is relevant.
pub fn recall_at_k(ranked: &[usize], relevant: &HashSet<usize>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let hits = ranked.iter().filter(|j| relevant.contains(j)).count();
    Some(hits as f64 / relevant.len() as f64)
}

/// Binary-relevance NDCG with `1/log2(rank+1)` discounts, ranks from 1.
pub fn ndcg_at_k(ranked: &[usize], relevant: &HashSet<usize>) -> Option<f64> {
    if relevant.is_empty() {
        return None;
    }
    let dcg: f64 = ranked
        .iter()
        .enumerate()
        .filter(|(_, j)| relevant.contains(j))
        .map(|(p, _)| 1.0 / ((p + 2) as f64).log2())
        .sum();
    let ideal_hits = ranked.len().min(relevant.len());
    let idcg: f64 = (0..ideal_hits).map(|p| 1.0 / ((p + 2) as f64).log2()).sum();
    Some(if idcg > 0.0 { dcg / idcg } else { 0.0 })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingScores {
    pub recall: f64,
    pub ndcg: f64,
    pub users: usize,
}

/// Mean recall@k and NDCG@k over users with a nonempty relevant set.
/// Training positives of each user are removed from the candidates.
pub fn ranking_metrics(
    emb: &FinalEmbeddings,
    train_graph: &BipartiteGraph,
    relevant: &HashMap<usize, HashSet<usize>>,
    k: usize,
) -> Result<RankingScores> {
    let mut users: Vec<usize> = relevant
        .iter()
        .filter(|(_, r)| !r.is_empty())
        .map(|(u, _)| *u)
        .collect();
    users.sort_unstable();
    let per_user: Vec<(f64, f64)> = users
        .par_iter()
        .map(|&u| {
            let scores = emb.score_all(u)?;
            let exclude = if u < train_graph.n_users() { train_graph.neighbors(u) } else { &[] };
            let ranked = top_k(&scores, k, exclude);
            let rel = &relevant[&u];
            Ok((recall_at_k(&ranked, rel).unwrap(), ndcg_at_k(&ranked, rel).unwrap()))
        })
        .collect::<Result<_>>()?;
    if per_user.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let n = per_user.len() as f64;
    Ok(RankingScores {
        recall: per_user.iter().map(|p| p.0).sum::<f64>() / n,
        ndcg: per_user.iter().map(|p| p.1).sum::<f64>() / n,
        users: per_user.len(),
    })
}

/// Groups `(user, hashtag)` pairs into per-user relevant sets.
pub fn relevant_sets(edges: impl IntoIterator<Item = (usize, usize)>) -> HashMap<usize, HashSet<usize>> {
    let mut out: HashMap<usize, HashSet<usize>> = HashMap::new();
    for (u, j) in edges {
        out.entry(u).or_default().insert(j);
    }
    out
}
