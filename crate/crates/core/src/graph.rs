//! Interaction graph, symmetric normalization and the user-user channels.

use std::collections::BTreeSet;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::ingest::{InteractionCounts, Relation};
use crate::sparse::CsrMatrix;

/// Row-normalized user-hashtag weights. Row `u` sums to one unless the user
/// has no interactions, in which case it is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteGraph {
    weights: CsrMatrix,
}

impl BipartiteGraph {
    /// Normalizes each row of a nonnegative count (or weight) matrix.
    pub fn from_counts(counts: &CsrMatrix) -> Result<Self> {
        if counts.iter().any(|(_, _, v)| v < 0.0 || !v.is_finite()) {
            return Err(Error::Numerics("interaction counts must be finite and >= 0".into()));
        }
        let sums = counts.row_sums();
        let weights = counts.map_values(|r, _, v| v / sums[r]);
        Ok(BipartiteGraph { weights })
    }

    /// Builds from `(user, hashtag, weight)` edges; rows are renormalized.
    pub fn from_edges(n_users: usize, n_hashtags: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let m = CsrMatrix::from_triplets(n_users, n_hashtags, edges.iter().copied())?;
        Self::from_counts(&m)
    }

    pub fn n_users(&self) -> usize {
        self.weights.rows()
    }

    pub fn n_hashtags(&self) -> usize {
        self.weights.cols()
    }

    pub fn n_edges(&self) -> usize {
        self.weights.nnz()
    }

    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    pub fn weight(&self, user: usize, hashtag: usize) -> f64 {
        self.weights.get(user, hashtag)
    }

    /// Hashtags user `u` interacted with, sorted.
    pub fn neighbors(&self, user: usize) -> &[usize] {
        self.weights.row_indices(user)
    }

    pub fn is_isolated(&self, user: usize) -> bool {
        self.neighbors(user).is_empty()
    }

    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.weights.iter().collect()
    }

    /// Every observed edge set to weight one (no row normalization).
    pub fn binarized(&self) -> BipartiteGraph {
        BipartiteGraph {
            weights: self.weights.map_values(|_, _, _| 1.0),
        }
    }
}

pub fn build_interaction_graph(counts: &InteractionCounts) -> Result<BipartiteGraph> {
    BipartiteGraph::from_counts(&counts.total)
}

/// `D^{-1/2} A D^{-1/2}` for a symmetric nonnegative `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedAdjacency {
    matrix: CsrMatrix,
}

impl NormalizedAdjacency {
    /// Normalizes a symmetric matrix. Zero-degree nodes keep all-zero rows.
    pub fn from_symmetric(a: &CsrMatrix) -> Result<Self> {
        if a.rows() != a.cols() {
            return Err(Error::Shape(format!("adjacency must be square, got {}x{}", a.rows(), a.cols())));
        }
        let inv_sqrt: Vec<f64> = a
            .row_sums()
            .into_iter()
            .map(|d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();
        let matrix = a.map_values(|r, c, v| inv_sqrt[r] * v * inv_sqrt[c]);
        Ok(NormalizedAdjacency { matrix })
    }

    pub fn zeros(size: usize) -> Self {
        NormalizedAdjacency {
            matrix: CsrMatrix::zeros(size, size),
        }
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// One propagation step, `Â·H`.
    pub fn propagate_once(&self, h: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.matrix.mul_dense(h)
    }
}

/// The `(N+M)`-node block matrix `[[0, R], [Rᵀ, 0]]`, normalized.
pub fn build_adjacency(g: &BipartiteGraph) -> NormalizedAdjacency {
    let n = g.n_users();
    let size = n + g.n_hashtags();
    let triplets = g
        .weights
        .iter()
        .flat_map(|(u, h, w)| [(u, n + h, w), (n + h, u, w)]);
    let a = CsrMatrix::from_triplets(size, size, triplets).expect("block indices in range");
    NormalizedAdjacency::from_symmetric(&a).expect("square by construction")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserGraphKind {
    Social,
    PathSim,
}

/// Symmetric nonnegative user-user weights with an empty diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGraph {
    pub kind: UserGraphKind,
    weights: CsrMatrix,
}

impl UserGraph {
    /// Symmetrizes `(X + Xᵀ)/2` and clears the diagonal.
    pub fn new(kind: UserGraphKind, raw: &CsrMatrix) -> Result<Self> {
        if raw.rows() != raw.cols() {
            return Err(Error::Shape("user graph must be square".into()));
        }
        let sym = raw.add(&raw.transpose())?;
        let weights = sym.map_values(|r, c, v| if r == c { 0.0 } else { v / 2.0 });
        Ok(UserGraph { kind, weights })
    }

    pub fn n_users(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &CsrMatrix {
        &self.weights
    }

    pub fn n_edges(&self) -> usize {
        self.weights.nnz() / 2
    }
}

/// Per-relation coefficients of the social graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SocialWeights {
    pub follow: f64,
    pub mention: f64,
    pub reply: f64,
}

impl Default for SocialWeights {
    fn default() -> Self {
        SocialWeights {
            follow: 1.0,
            mention: 1.0,
            reply: 1.0,
        }
    }
}

pub fn build_social_graph(counts: &InteractionCounts, w: SocialWeights) -> Result<UserGraph> {
    if [w.follow, w.mention, w.reply].iter().any(|c| *c < 0.0 || !c.is_finite()) {
        return Err(Error::Config("social coefficients must be finite and >= 0".into()));
    }
    if w.follow == 0.0 && w.mention == 0.0 && w.reply == 0.0 {
        return Err(Error::EmptyChannel);
    }
    let mentions = counts.mentions.add(&counts.mentions.transpose())?;
    let replies = counts.replies.add(&counts.replies.transpose())?;
    let combined = counts
        .mutual_follows
        .scale(w.follow)
        .add(&mentions.scale(w.mention))?
        .add(&replies.scale(w.reply))?;
    UserGraph::new(UserGraphKind::Social, &combined)
}

/// A user-hashtag-user meta-path through two relations, e.g.
/// retweet then tweet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MetaPathSpec {
    pub left: Relation,
    pub right: Relation,
}

impl Default for MetaPathSpec {
    fn default() -> Self {
        MetaPathSpec {
            left: Relation::Retweet,
            right: Relation::Tweet,
        }
    }
}

impl MetaPathSpec {
    pub fn is_symmetric(&self) -> bool {
        self.left == self.right
    }
}

/// Path-count similarity `2·C[i,j] / (C[i,i] + C[j,j])` with
/// `C = M_left·M_rightᵀ`, averaged with its transpose.
pub fn compute_pathsim(counts: &InteractionCounts, spec: MetaPathSpec) -> Result<UserGraph> {
    let left = counts.relation(spec.left);
    let right = counts.relation(spec.right);
    pathsim_from_relations(left, right)
}

pub fn pathsim_from_relations(left: &CsrMatrix, right: &CsrMatrix) -> Result<UserGraph> {
    if left.rows() != right.rows() || left.cols() != right.cols() {
        return Err(Error::Shape("meta-path relations must share a shape".into()));
    }
    if left.iter().chain(right.iter()).any(|(_, _, v)| v < 0.0) {
        return Err(Error::Numerics("relation counts must be >= 0".into()));
    }
    let paths = left.matmul(&right.transpose())?;
    let self_paths: Vec<f64> = (0..paths.rows()).map(|i| paths.get(i, i)).collect();
    // W[i,j] = (s(i,j) + s(j,i)) / 2, with s(i,j) = 2 C[i,j] / (C[i,i] + C[j,j])
    let sim = paths.map_values(|i, j, c| {
        let denom = self_paths[i] + self_paths[j];
        if i == j || denom <= 0.0 {
            0.0
        } else {
            2.0 * c / denom
        }
    });
    UserGraph::new(UserGraphKind::PathSim, &sim)
}

/// Drops edges lighter than `min_weight`; with `top_k`, an edge survives if
/// it is among the `top_k` heaviest of either endpoint.
pub fn sparsify(g: &UserGraph, min_weight: f64, top_k: Option<usize>) -> Result<UserGraph> {
    if !(min_weight >= 0.0) {
        return Err(Error::Config("min_weight must be >= 0".into()));
    }
    let w = &g.weights;
    let mut keep: BTreeSet<(usize, usize)> = BTreeSet::new();
    for r in 0..w.rows() {
        let mut row: Vec<(usize, f64)> = w.row(r).filter(|(_, v)| *v >= min_weight).collect();
        if let Some(k) = top_k {
            row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            row.truncate(k);
        }
        for (c, _) in row {
            keep.insert((r.min(c), r.max(c)));
        }
    }
    let triplets = keep
        .into_iter()
        .flat_map(|(a, b)| {
            let v = w.get(a, b);
            [(a, b, v), (b, a, v)]
        });
    let weights = CsrMatrix::from_triplets(w.rows(), w.cols(), triplets)?;
    Ok(UserGraph { kind: g.kind, weights })
}

pub fn normalize_user_graph(g: &UserGraph) -> NormalizedAdjacency {
    NormalizedAdjacency::from_symmetric(&g.weights).expect("user graphs are square")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;

    fn counts_from(total: &CsrMatrix) -> InteractionCounts {
        let n = total.rows();
        let m = total.cols();
        InteractionCounts {
            users: (0..n).map(|i| format!("u{i}")).collect(),
            hashtags: (0..m).map(|i| format!("h{i}")).collect(),
            total: total.clone(),
            tweet: total.clone(),
            retweet: total.clone(),
            reply: CsrMatrix::zeros(n, m),
            mentions: CsrMatrix::zeros(n, n),
            replies: CsrMatrix::zeros(n, n),
            mutual_follows: CsrMatrix::zeros(n, n),
        }
    }

    #[test]
    fn row_normalization() {
        let t = CsrMatrix::from_dense(array![[2.0, 1.0, 1.0], [7.0, 0.0, 0.0], [0.0, 0.0, 0.0]].view());
        let g = build_interaction_graph(&counts_from(&t)).unwrap();
        assert_eq!(g.weights().row_values(0), &[0.5, 0.25, 0.25]);
        assert_eq!(g.weights().row_values(1), &[1.0]);
        assert!(g.is_isolated(2));
        assert_eq!(g.n_users(), 3);
    }

    #[test]
    fn adjacency_examples() {
        let g = BipartiteGraph::from_edges(1, 1, &[(0, 0, 1.0)]).unwrap();
        assert_eq!(build_adjacency(&g).matrix().to_dense(), array![[0.0, 1.0], [1.0, 0.0]]);

        // two users sharing one hashtag: D_user = 1, D_ht = 2
        let g = BipartiteGraph::from_edges(2, 1, &[(0, 0, 1.0), (1, 0, 1.0)]).unwrap();
        let a = build_adjacency(&g).matrix().to_dense();
        assert_abs_diff_eq!(a[[0, 2]], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(a[[2, 1]], 1.0 / 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(a[[0, 1]], 0.0);

        let g = BipartiteGraph::from_edges(2, 1, &[(0, 0, 1.0)]).unwrap();
        let a = build_adjacency(&g).matrix().to_dense();
        assert!(a.row(1).iter().all(|v| *v == 0.0));
        assert!(a.column(1).iter().all(|v| *v == 0.0));
    }

    fn social_counts(n: usize) -> InteractionCounts {
        counts_from(&CsrMatrix::zeros(n, 1))
    }

    #[test]
    fn social_graph_examples() {
        let mut c = social_counts(2);
        c.mutual_follows = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 1.0), (1, 0, 1.0)]).unwrap();
        let only_follow = SocialWeights { follow: 1.0, mention: 0.0, reply: 0.0 };
        let g = build_social_graph(&c, only_follow).unwrap();
        assert_eq!(g.weights().get(0, 1), 1.0);
        assert_eq!(g.weights().get(1, 0), 1.0);

        let mut c = social_counts(2);
        c.mentions = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 3.0)]).unwrap();
        let only_mention = SocialWeights { follow: 0.0, mention: 1.0, reply: 0.0 };
        let g = build_social_graph(&c, only_mention).unwrap();
        // brute force over the 2-node graph: X = mention + mentionᵀ, W = (X + Xᵀ)/2
        let x = [[0.0, 3.0], [3.0, 0.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(g.weights().get(i, j), (x[i][j] + x[j][i]) / 2.0);
            }
        }

        let mut c = social_counts(2);
        c.replies = CsrMatrix::from_triplets(2, 2, vec![(0, 0, 5.0)]).unwrap();
        let g = build_social_graph(&c, SocialWeights::default()).unwrap();
        assert_eq!(g.weights().nnz(), 0);
    }

    #[test]
    fn all_zero_coefficients_is_empty_channel() {
        let w = SocialWeights { follow: 0.0, mention: 0.0, reply: 0.0 };
        assert!(matches!(build_social_graph(&social_counts(2), w), Err(Error::EmptyChannel)));
    }

    #[test]
    fn pathsim_examples() {
        // identical rows: C[i,i] = C[j,j] = C[i,j]
        let m = CsrMatrix::from_dense(array![[1.0, 1.0], [1.0, 1.0]].view());
        let g = pathsim_from_relations(&m, &m).unwrap();
        assert_eq!(g.weights().get(0, 1), 1.0);
        assert_eq!(g.weights().get(0, 0), 0.0);

        // C[i,j] > 0 with zero self-path counts
        let left = CsrMatrix::from_dense(array![[1.0], [0.0]].view());
        let right = CsrMatrix::from_dense(array![[0.0], [1.0]].view());
        let g = pathsim_from_relations(&left, &right).unwrap();
        assert_eq!(g.weights().nnz(), 0);

        let m = CsrMatrix::from_dense(array![[1.0, 0.0], [1.0, 1.0], [0.0, 1.0]].view());
        let g = pathsim_from_relations(&m, &m).unwrap();
        assert_abs_diff_eq!(g.weights().get(0, 1), 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(g.weights().get(0, 2), 0.0);
    }

    #[test]
    fn compute_pathsim_selects_relations() {
        let mut c = counts_from(&CsrMatrix::from_dense(array![[1.0, 0.0], [0.0, 1.0]].view()));
        c.retweet = CsrMatrix::from_dense(array![[0.0, 1.0], [0.0, 0.0]].view());
        let spec = MetaPathSpec::default();
        assert!(!spec.is_symmetric());
        let g = compute_pathsim(&c, spec).unwrap();
        // C = RT·Tᵀ = [[0,1],[0,0]], C[0,0] = 0, C[1,1] = 0 -> zero
        assert_eq!(g.weights().nnz(), 0);
    }

    #[test]
    fn sparsify_examples() {
        let raw = CsrMatrix::from_triplets(4, 4, vec![(0, 1, 0.9), (0, 2, 0.5), (0, 3, 0.1)]).unwrap();
        let star = UserGraph::new(UserGraphKind::PathSim, &raw.add(&raw.transpose()).unwrap()).unwrap();
        assert_eq!(sparsify(&star, 0.0, None).unwrap(), star);
        assert_eq!(sparsify(&star, 1.0, None).unwrap().weights().nnz(), 0);

        // The hub keeps 0.9 only; each leaf's single edge is its own top-1,
        // so the union retains all three.
        let s = sparsify(&star, 0.0, Some(1)).unwrap();
        let mut oracle = BTreeSet::new();
        for node in 0..4 {
            let best = star
                .weights()
                .row(node)
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(c, _)| c);
            if let Some(c) = best {
                oracle.insert((node.min(c), node.max(c)));
            }
        }
        let got: BTreeSet<_> = s.weights().iter().filter(|(r, c, _)| r < c).map(|(r, c, _)| (r, c)).collect();
        assert_eq!(got, oracle);
        assert_eq!(got.len(), 3);
        assert_eq!(s.weights().asymmetry(), 0.0);

        assert_eq!(sparsify(&star, 0.3, Some(1)).unwrap().n_edges(), 2);
    }

    #[test]
    fn user_graph_normalization_examples() {
        let raw = CsrMatrix::from_triplets(2, 2, vec![(0, 1, 0.37), (1, 0, 0.37)]).unwrap();
        let g = UserGraph::new(UserGraphKind::Social, &raw).unwrap();
        assert_abs_diff_eq!(normalize_user_graph(&g).matrix().get(0, 1), 1.0, epsilon = 1e-15);

        let empty = UserGraph::new(UserGraphKind::Social, &CsrMatrix::zeros(3, 3)).unwrap();
        assert_eq!(normalize_user_graph(&empty).matrix().nnz(), 0);

        let tri = CsrMatrix::from_dense(array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]].view());
        let g = UserGraph::new(UserGraphKind::Social, &tri).unwrap();
        let a = normalize_user_graph(&g).matrix().to_dense();
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(a[[i, j]], if i == j { 0.0 } else { 0.5 }, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn propagate_once_examples() {
        let g = BipartiteGraph::from_edges(1, 1, &[(0, 0, 1.0)]).unwrap();
        let adj = build_adjacency(&g);
        let h = array![[2.5], [-1.0]];
        assert_eq!(adj.propagate_once(h.view()).unwrap(), array![[-1.0], [2.5]]);
        assert_eq!(NormalizedAdjacency::zeros(2).propagate_once(h.view()).unwrap(), Array2::<f64>::zeros((2, 1)));
        assert!(matches!(adj.propagate_once(array![[1.0]].view()), Err(Error::Shape(_))));
    }

    fn arb_counts(max_n: usize, max_m: usize) -> impl Strategy<Value = Array2<f64>> {
        (1..=max_n, 1..=max_m).prop_flat_map(|(n, m)| {
            proptest::collection::vec(prop_oneof![3 => Just(0.0), 2 => (1u32..4).prop_map(f64::from)], n * m)
                .prop_map(move |v| Array2::from_shape_vec((n, m), v).unwrap())
        })
    }

    proptest! {
        #[test]
        fn adjacency_is_symmetric_and_rows_stochastic(t in arb_counts(6, 6)) {
            let g = BipartiteGraph::from_counts(&CsrMatrix::from_dense(t.view())).unwrap();
            for (u, s) in g.weights().row_sums().into_iter().enumerate() {
                if !g.is_isolated(u) {
                    prop_assert!((s - 1.0).abs() <= 1e-9);
                }
            }
            prop_assert!(g.weights().iter().all(|(_, _, w)| w > 0.0 && w <= 1.0));
            let adj = build_adjacency(&g);
            prop_assert!(adj.matrix().asymmetry() <= 1e-12);
            prop_assert!(adj.matrix().iter().all(|(_, _, v)| v >= 0.0));
        }

        #[test]
        fn symmetric_pathsim_is_bounded(t in arb_counts(8, 6)) {
            let m = CsrMatrix::from_dense(t.view());
            let g = pathsim_from_relations(&m, &m).unwrap();
            prop_assert!(g.weights().asymmetry() == 0.0);
            prop_assert!(g.weights().iter().all(|(r, c, w)| r != c && (0.0..=1.0 + 1e-15).contains(&w)));
        }

        #[test]
        fn propagation_is_linear(t in arb_counts(5, 5), alpha in -3.0f64..3.0, beta in -3.0f64..3.0, seed in 0u64..1000) {
            use rand::{Rng, SeedableRng};
            let g = BipartiteGraph::from_counts(&CsrMatrix::from_dense(t.view())).unwrap();
            let adj = build_adjacency(&g);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let size = adj.size();
            let x = Array2::from_shape_fn((size, 2), |_| rng.gen_range(-1.0..1.0));
            let y = Array2::from_shape_fn((size, 2), |_| rng.gen_range(-1.0..1.0));
            let lhs = adj.propagate_once((&x * alpha + &y * beta).view()).unwrap();
            let rhs = adj.propagate_once(x.view()).unwrap() * alpha + adj.propagate_once(y.view()).unwrap() * beta;
            prop_assert!((lhs - rhs).iter().all(|d| d.abs() <= 1e-10));
        }
    }
}
