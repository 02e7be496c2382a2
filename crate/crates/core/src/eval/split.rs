//! Holdout users and k-fold edge partitions.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;

use super::stance::AnnotationIndex;

/// Weighted edge `(user, hashtag, weight)`.
pub type Edge = (usize, usize, f64);

#[derive(Debug, Clone)]
pub struct HoldoutSplit {
    pub train_graph: BipartiteGraph,
    /// Removed annotated edges with their full-graph weights.
    pub hidden: Vec<Edge>,
    /// Sorted.
    pub holdout_users: Vec<usize>,
}

impl HoldoutSplit {
    /// Hidden `(hashtag, weight)` pairs of one user.
    pub fn hidden_of(&self, user: usize) -> Vec<(usize, f64)> {
        self.hidden.iter().filter(|e| e.0 == user).map(|e| (e.1, e.2)).collect()
    }

    pub fn hidden_pairs(&self) -> HashSet<(usize, usize)> {
        self.hidden.iter().map(|e| (e.0, e.1)).collect()
    }
}

/// Picks `⌈fraction · eligible⌉` users among those with an annotated edge
/// and hides all of their annotated edges. Remaining rows are renormalized.
pub fn holdout_split<R: Rng>(
    graph: &BipartiteGraph,
    annotations: &AnnotationIndex,
    fraction: f64,
    rng: &mut R,
) -> Result<HoldoutSplit> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Config(format!("holdout fraction {fraction} not in (0, 1]")));
    }
    let eligible: Vec<usize> = (0..graph.n_users())
        .filter(|&u| graph.neighbors(u).iter().any(|&j| annotations.contains(j)))
        .collect();
    if eligible.is_empty() {
        return Err(Error::EmptyEligibleSet);
    }
    let take = ((fraction * eligible.len() as f64).ceil() as usize).min(eligible.len());
    let mut holdout_users: Vec<usize> = eligible.choose_multiple(rng, take).copied().collect();
    holdout_users.sort_unstable();
    let chosen: HashSet<usize> = holdout_users.iter().copied().collect();

    let mut hidden = Vec::new();
    let mut kept = Vec::new();
    for (u, j, w) in graph.edges() {
        if chosen.contains(&u) && annotations.contains(j) {
            hidden.push((u, j, w));
        } else {
            kept.push((u, j, w));
        }
    }
    Ok(HoldoutSplit {
        train_graph: BipartiteGraph::from_edges(graph.n_users(), graph.n_hashtags(), &kept)?,
        hidden,
        holdout_users,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fold {
    pub train: Vec<Edge>,
    pub validation: Vec<Edge>,
}

impl Fold {
    pub fn validation_pairs(&self) -> Vec<(usize, usize)> {
        self.validation.iter().map(|e| (e.0, e.1)).collect()
    }
}

/// Shuffles `edges` and deals them round-robin into `folds` parts; fold `i`
/// validates on part `i` and trains on the rest.
pub fn kfold_split<R: Rng>(edges: &[Edge], folds: usize, rng: &mut R) -> Result<Vec<Fold>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    if edges.len() < folds {
        return Err(Error::Config(format!("{} edges cannot fill {folds} folds", edges.len())));
    }
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    let mut parts: Vec<Vec<Edge>> = vec![Vec::new(); folds];
    for (pos, &e) in order.iter().enumerate() {
        parts[pos % folds].push(edges[e]);
    }
    for p in &mut parts {
        p.sort_by_key(|a| (a.0, a.1));
    }
    Ok((0..folds)
        .map(|i| Fold {
            validation: parts[i].clone(),
            train: parts
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != i)
                .flat_map(|(_, p)| p.iter().copied())
                .collect(),
        })
        .collect())
}
