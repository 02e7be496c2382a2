//! Null model and the MF / LightGCN reductions of the weighted model.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::model::ModelConfig;
use crate::sparse::CsrMatrix;

/// `n_interactions` uniform `(user, hashtag)` draws with replacement,
/// accumulated and row-normalized.
pub fn null_model<R: Rng>(n_users: usize, n_hashtags: usize, n_interactions: usize, rng: &mut R) -> Result<BipartiteGraph> {
    if n_users == 0 || n_hashtags == 0 {
        return Err(Error::Config("null model needs at least one user and one hashtag".into()));
    }
    let draws: Vec<(usize, usize, f64)> = (0..n_interactions)
        .map(|_| (rng.gen_range(0..n_users), rng.gen_range(0..n_hashtags), 1.0))
        .collect();
    BipartiteGraph::from_counts(&CsrMatrix::from_triplets(n_users, n_hashtags, draws)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Variant {
    /// Weighted graph plus whichever user channels the config enables.
    #[default]
    Wlgcn,
    /// No propagation, bipartite only.
    Mf,
    /// Binarized interactions, bipartite only.
    LightGcn,
    /// Uniformly random interactions of the same volume, bipartite only.
    Null,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Wlgcn => "wlgcn",
            Variant::Mf => "mf",
            Variant::LightGcn => "lightgcn",
            Variant::Null => "null",
        }
    }

    pub fn model_config(self, cfg: &ModelConfig) -> ModelConfig {
        let mut out = cfg.clone();
        match self {
            Variant::Wlgcn => {}
            Variant::Mf => {
                out.layers = 0;
                out.social = false;
                out.pathsim = false;
            }
            Variant::LightGcn | Variant::Null => {
                out.social = false;
                out.pathsim = false;
            }
        }
        out
    }

    /// Training graph seen by this variant. The null model ignores `graph`
    /// apart from its shape.
    pub fn graph<R: Rng>(self, graph: &BipartiteGraph, n_interactions: usize, rng: &mut R) -> Result<BipartiteGraph> {
        match self {
            Variant::Wlgcn | Variant::Mf => Ok(graph.clone()),
            Variant::LightGcn => Ok(graph.binarized()),
            Variant::Null => null_model(graph.n_users(), graph.n_hashtags(), n_interactions, rng),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wlgcn" => Ok(Variant::Wlgcn),
            "mf" => Ok(Variant::Mf),
            "lightgcn" => Ok(Variant::LightGcn),
            "null" => Ok(Variant::Null),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_adjacency;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn null_model_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(null_model(3, 4, 0, &mut rng).unwrap().n_edges(), 0);
        let g = null_model(1, 1, 5, &mut rng).unwrap();
        assert_eq!(g.edges(), vec![(0, 0, 1.0)]);
    }

    #[test]
    fn null_model_cell_counts_are_uniform() {
        // raw counts are recovered from row weights times the row total
        let (n, m, draws, seeds) = (3usize, 4usize, 60usize, 100u64);
        let mut per_cell = vec![Vec::new(); n * m];
        for seed in 0..seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut counts = vec![0.0; n * m];
            for _ in 0..draws {
                let (u, j) = (rng.gen_range(0..n), rng.gen_range(0..m));
                counts[u * m + j] += 1.0;
            }
            let g = null_model(n, m, draws, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            for u in 0..n {
                let total: f64 = (0..m).map(|j| counts[u * m + j]).sum();
                for j in 0..m {
                    assert!((g.weight(u, j) * total - counts[u * m + j]).abs() < 1e-9);
                }
            }
            for (c, v) in counts.into_iter().enumerate() {
                per_cell[c].push(v);
            }
        }
        let expected = draws as f64 / (n * m) as f64;
        for samples in per_cell {
            let mean = samples.iter().sum::<f64>() / seeds as f64;
            let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (seeds - 1) as f64;
            let se = (var / seeds as f64).sqrt();
            assert!((mean - expected).abs() <= 3.0 * se + 1e-12, "mean {mean} vs {expected} (se {se})");
        }
    }

    #[test]
    fn mf_drops_layers_and_channels() {
        let cfg = ModelConfig {
            social: true,
            pathsim: true,
            ..ModelConfig::default()
        };
        let mf = Variant::Mf.model_config(&cfg);
        assert_eq!((mf.layers, mf.social, mf.pathsim), (0, false, false));
        let lg = Variant::LightGcn.model_config(&cfg);
        assert_eq!((lg.layers, lg.social, lg.pathsim), (cfg.layers, false, false));
    }

    #[test]
    fn uniform_rows_match_lightgcn() {
        // equal degrees make the weighted matrix a scalar multiple of the binary one
        let g = BipartiteGraph::from_edges(2, 3, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 4.0), (1, 2, 4.0)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lg = Variant::LightGcn.graph(&g, 0, &mut rng).unwrap();
        let a = build_adjacency(&g).matrix().to_dense();
        let b = build_adjacency(&lg).matrix().to_dense();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(lg.binarized(), lg);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [Variant::Wlgcn, Variant::Mf, Variant::LightGcn, Variant::Null] {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("gcn".parse::<Variant>().is_err());
    }
}
