//! Embedding state, K-layer propagation per channel, channel averaging and
//! affinity scoring.
//!
//! Every step from layer-0 embeddings to final embeddings is linear, so the
//! whole forward pass is a fixed symmetric operator applied to `E⁰`. The
//! trainer relies on that to pull gradients back with the same code path.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{concatenate, s, Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::NormalizedAdjacency;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub dim: usize,
    /// Number of propagation layers, K.
    pub layers: usize,
    pub social: bool,
    pub pathsim: bool,
    pub use_pretrained: bool,
    /// Average over layers 0..=K (default) or 1..=K, both divided by K+1.
    pub include_layer0: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            layers: 3,
            social: false,
            pathsim: false,
            use_pretrained: false,
            include_layer0: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        Ok(())
    }
}

/// Trainable layer-0 embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingState {
    pub users: Array2<f64>,
    pub hashtags: Array2<f64>,
    pub seed: u64,
}

impl EmbeddingState {
    pub fn n_users(&self) -> usize {
        self.users.nrows()
    }

    pub fn n_hashtags(&self) -> usize {
        self.hashtags.nrows()
    }

    pub fn dim(&self) -> usize {
        self.users.ncols()
    }

    /// Users stacked above hashtags, the layout of the bipartite operator.
    pub fn stacked(&self) -> Array2<f64> {
        concatenate![Axis(0), self.users, self.hashtags]
    }

    pub fn squared_norm(&self) -> f64 {
        self.users.iter().chain(self.hashtags.iter()).map(|v| v * v).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.users.iter().chain(self.hashtags.iter()).all(|v| v.is_finite())
    }
}

/// Hashtag vectors trained elsewhere, keyed by normalized hashtag.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PretrainedEmbeddings {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl PretrainedEmbeddings {
    /// Reads whitespace-separated `token v1 .. vd` lines. A leading
    /// `count dim` header line, as written by word2vec-style tools, is skipped.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut dim = 0;
        let mut vectors = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse("pretrained embeddings", e.to_string()))?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values: Vec<f64> = parts
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::parse("pretrained embeddings", format!("line {}: {e}", i + 1)))?;
            if i == 0 && values.len() == 1 && token.parse::<usize>().is_ok() {
                continue;
            }
            if dim == 0 {
                dim = values.len();
            } else if values.len() != dim {
                return Err(Error::Shape(format!(
                    "pretrained vector for {token:?} has {} entries, expected {dim}",
                    values.len()
                )));
            }
            let key = crate::ingest::normalize_hashtag(token)?;
            vectors.insert(key, values);
        }
        Ok(PretrainedEmbeddings { dim, vectors })
    }
}

fn xavier(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let bound = (6.0 / (rows + dim) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound);
    Array2::from_shape_simple_fn((rows, dim), || dist.sample(rng))
}

/// Xavier-uniform users; hashtags copied from `pretrained` where available.
pub fn init_embeddings(
    cfg: &ModelConfig,
    n_users: usize,
    hashtags: &[String],
    seed: u64,
    pretrained: Option<&PretrainedEmbeddings>,
) -> Result<EmbeddingState> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users = xavier(n_users, cfg.dim, &mut rng);
    let mut hashtag_rows = xavier(hashtags.len(), cfg.dim, &mut rng);
    if let Some(pre) = pretrained {
        if !pre.vectors.is_empty() && pre.dim != cfg.dim {
            return Err(Error::Shape(format!(
                "pretrained dimension {} != model dimension {}",
                pre.dim, cfg.dim
            )));
        }
        for (j, h) in hashtags.iter().enumerate() {
            if let Some(v) = pre.vectors.get(h) {
                hashtag_rows.row_mut(j).assign(&ArrayView1::from(v.as_slice()));
            }
        }
    }
    Ok(EmbeddingState {
        users,
        hashtags: hashtag_rows,
        seed,
    })
}

#[derive(Debug, Clone)]
pub struct LayerStack {
    /// `H⁰ ..= H^K`.
    pub layers: Vec<Array2<f64>>,
    pub combined: Array2<f64>,
}

/// `H⁰ = E⁰`, `H^k = Â H^{k-1}`, combined as `1/(K+1) Σ H^k`.
pub fn propagate(
    adj: &NormalizedAdjacency,
    e0: ArrayView2<f64>,
    layers: usize,
    include_layer0: bool,
) -> Result<LayerStack> {
    if e0.nrows() != adj.size() {
        return Err(Error::Shape(format!(
            "embedding has {} rows, operator has size {}",
            e0.nrows(),
            adj.size()
        )));
    }
    let mut stack = Vec::with_capacity(layers + 1);
    stack.push(e0.to_owned());
    for k in 1..=layers {
        let next = adj.propagate_once(stack[k - 1].view())?;
        stack.push(next);
    }
    let start = if include_layer0 { 0 } else { 1 };
    let mut combined = Array2::<f64>::zeros(e0.raw_dim());
    for h in &stack[start..] {
        combined += h;
    }
    combined /= (layers + 1) as f64;
    Ok(LayerStack {
        layers: stack,
        combined,
    })
}

/// The layer-combined operator applied to `x`, without keeping the layers.
pub fn apply_layer_operator(
    adj: &NormalizedAdjacency,
    x: ArrayView2<f64>,
    layers: usize,
    include_layer0: bool,
) -> Result<Array2<f64>> {
    if x.nrows() != adj.size() {
        return Err(Error::Shape(format!(
            "input has {} rows, operator has size {}",
            x.nrows(),
            adj.size()
        )));
    }
    let mut acc = if include_layer0 {
        x.to_owned()
    } else {
        Array2::zeros(x.raw_dim())
    };
    let mut h = x.to_owned();
    for _ in 0..layers {
        h = adj.propagate_once(h.view())?;
        acc += &h;
    }
    acc /= (layers + 1) as f64;
    Ok(acc)
}

/// Propagation operators for each enabled channel.
#[derive(Debug, Clone)]
pub struct Channels {
    pub bipartite: NormalizedAdjacency,
    pub social: Option<NormalizedAdjacency>,
    pub pathsim: Option<NormalizedAdjacency>,
}

impl Channels {
    pub fn bipartite_only(bipartite: NormalizedAdjacency) -> Self {
        Channels {
            bipartite,
            social: None,
            pathsim: None,
        }
    }

    pub fn user_graphs(&self) -> impl Iterator<Item = &NormalizedAdjacency> {
        self.social.iter().chain(self.pathsim.iter())
    }

    /// Channels contributing to user embeddings, bipartite included.
    pub fn n_user_channels(&self) -> usize {
        1 + self.user_graphs().count()
    }
}

#[derive(Debug, Clone)]
pub struct PropagationOutput {
    pub bipartite: LayerStack,
    pub social: Option<LayerStack>,
    pub pathsim: Option<LayerStack>,
    pub users: Array2<f64>,
    pub hashtags: Array2<f64>,
}

/// Final user rows are the mean of the bipartite user block and every user
/// channel; final hashtag rows come from the bipartite channel alone.
pub fn combine_channels<'a>(
    bipartite: ArrayView2<'a, f64>,
    n_users: usize,
    social: Option<ArrayView2<'a, f64>>,
    pathsim: Option<ArrayView2<'a, f64>>,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let mut users = bipartite.slice(s![..n_users, ..]).to_owned();
    let hashtags = bipartite.slice(s![n_users.., ..]).to_owned();
    let mut count = 1.0;
    for extra in [social, pathsim].into_iter().flatten() {
        if extra.dim() != users.dim() {
            return Err(Error::Shape(format!(
                "channel output {:?} does not match user block {:?}",
                extra.dim(),
                users.dim()
            )));
        }
        users += &extra;
        count += 1.0;
    }
    users /= count;
    Ok((users, hashtags))
}

pub fn forward(channels: &Channels, state: &EmbeddingState, cfg: &ModelConfig) -> Result<PropagationOutput> {
    let n = state.n_users();
    let bip = propagate(&channels.bipartite, state.stacked().view(), cfg.layers, cfg.include_layer0)?;
    let user_channel = |adj: &Option<NormalizedAdjacency>| -> Result<Option<LayerStack>> {
        adj.as_ref()
            .map(|a| propagate(a, state.users.view(), cfg.layers, cfg.include_layer0))
            .transpose()
    };
    let social = user_channel(&channels.social)?;
    let pathsim = user_channel(&channels.pathsim)?;
    let (users, hashtags) = combine_channels(
        bip.combined.view(),
        n,
        social.as_ref().map(|l| l.combined.view()),
        pathsim.as_ref().map(|l| l.combined.view()),
    )?;
    Ok(PropagationOutput {
        bipartite: bip,
        social,
        pathsim,
        users,
        hashtags,
    })
}

/// Final embeddings only.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalEmbeddings {
    pub users: Array2<f64>,
    pub hashtags: Array2<f64>,
}

impl FinalEmbeddings {
    pub fn compute(channels: &Channels, state: &EmbeddingState, cfg: &ModelConfig) -> Result<Self> {
        let out = forward(channels, state, cfg)?;
        Ok(FinalEmbeddings {
            users: out.users,
            hashtags: out.hashtags,
        })
    }

    pub fn score(&self, user: usize, hashtag: usize) -> f64 {
        affinity(self.users.row(user), self.hashtags.row(hashtag))
    }

    pub fn score_all(&self, user: usize) -> Result<Vec<f64>> {
        score_all_rows(self.users.view(), self.hashtags.view(), user)
    }
}

impl From<PropagationOutput> for FinalEmbeddings {
    fn from(out: PropagationOutput) -> Self {
        FinalEmbeddings {
            users: out.users,
            hashtags: out.hashtags,
        }
    }
}

pub fn affinity(user: ArrayView1<f64>, hashtag: ArrayView1<f64>) -> f64 {
    user.dot(&hashtag)
}

pub fn score_all(out: &PropagationOutput, user: usize) -> Result<Vec<f64>> {
    score_all_rows(out.users.view(), out.hashtags.view(), user)
}

fn score_all_rows(users: ArrayView2<f64>, hashtags: ArrayView2<f64>, user: usize) -> Result<Vec<f64>> {
    if user >= users.nrows() {
        return Err(Error::Index {
            index: user,
            len: users.nrows(),
        });
    }
    Ok(hashtags.dot(&users.row(user)).to_vec())
}

const MAGIC: &[u8; 8] = b"STGCNEMB";
const VERSION: u32 = 1;

/// Binary checkpoint: magic, version, then `N M d seed` as little-endian
/// u64, then users and hashtags as row-major little-endian f64.
pub fn write_checkpoint<W: Write>(mut w: W, users: ArrayView2<f64>, hashtags: ArrayView2<f64>, seed: u64) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for v in [users.nrows(), hashtags.nrows(), users.ncols()] {
        w.write_all(&(v as u64).to_le_bytes())?;
    }
    w.write_all(&seed.to_le_bytes())?;
    for v in users.iter().chain(hashtags.iter()) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<EmbeddingState> {
    let err = |m: &str| Error::parse("checkpoint", m.to_string());
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| err("truncated header"))?;
    if &magic != MAGIC {
        return Err(err("bad magic"));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4).map_err(|_| err("truncated header"))?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(err(&format!("unsupported version {version}")));
    }
    let mut b8 = [0u8; 8];
    let mut next_u64 = |r: &mut R| -> Result<u64> {
        r.read_exact(&mut b8).map_err(|_| err("truncated header"))?;
        Ok(u64::from_le_bytes(b8))
    };
    let n = next_u64(&mut r)? as usize;
    let m = next_u64(&mut r)? as usize;
    let d = next_u64(&mut r)? as usize;
    let seed = next_u64(&mut r)?;
    let total = (n + m)
        .checked_mul(d)
        .ok_or_else(|| err("dimensions overflow"))?;
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|_| err("truncated body"))?;
    if bytes.len() != total * 8 {
        return Err(err(&format!("expected {} body bytes, found {}", total * 8, bytes.len())));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let users = Array2::from_shape_vec((n, d), values[..n * d].to_vec()).unwrap();
    let hashtags = Array2::from_shape_vec((m, d), values[n * d..].to_vec()).unwrap();
    Ok(EmbeddingState { users, hashtags, seed })
}

pub fn save_checkpoint(path: &Path, state: &EmbeddingState) -> Result<()> {
    save_embeddings(path, state.users.view(), state.hashtags.view(), state.seed)
}

pub fn save_embeddings(path: &Path, users: ArrayView2<f64>, hashtags: ArrayView2<f64>, seed: u64) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(&mut w, users, hashtags, seed).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<EmbeddingState> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(BufReader::new(f))
}

/// Row index: `user<TAB>row<TAB>id` and `hashtag<TAB>row<TAB>name` lines.
pub fn write_index<W: Write>(mut w: W, users: &[String], hashtags: &[String]) -> std::io::Result<()> {
    for (i, u) in users.iter().enumerate() {
        writeln!(w, "user\t{i}\t{u}")?;
    }
    for (j, h) in hashtags.iter().enumerate() {
        writeln!(w, "hashtag\t{j}\t{h}")?;
    }
    Ok(())
}

pub fn read_index<R: BufRead>(r: R) -> Result<(Vec<String>, Vec<String>)> {
    let mut users = Vec::new();
    let mut hashtags = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::parse("index", e.to_string()))?;
        if line.is_empty() {
            continue;
        }
        let bad = || Error::parse("index", format!("line {}: {line:?}", i + 1));
        let mut parts = line.splitn(3, '\t');
        let kind = parts.next().ok_or_else(bad)?;
        let row: usize = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
        let name = parts.next().ok_or_else(bad)?.to_string();
        let target = match kind {
            "user" => &mut users,
            "hashtag" => &mut hashtags,
            _ => return Err(bad()),
        };
        if row != target.len() {
            return Err(bad());
        }
        target.push(name);
    }
    Ok((users, hashtags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_adjacency, BipartiteGraph};
    use crate::sparse::CsrMatrix;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn swap_operator() -> NormalizedAdjacency {
        build_adjacency(&BipartiteGraph::from_edges(1, 1, &[(0, 0, 1.0)]).unwrap())
    }

    #[test]
    fn init_is_deterministic_and_bounded() {
        let cfg = ModelConfig { dim: 4, ..Default::default() };
        let tags: Vec<String> = vec!["a".into(), "b".into(), "c".into()];
        let a = init_embeddings(&cfg, 2, &tags, 17, None).unwrap();
        let b = init_embeddings(&cfg, 2, &tags, 17, None).unwrap();
        assert_eq!(a, b);
        assert!(a.users.iter().all(|v| v.abs() <= 1.0));
        let c = init_embeddings(&cfg, 2, &tags, 18, None).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pretrained_rows_are_copied() {
        let cfg = ModelConfig { dim: 3, ..Default::default() };
        let text = "2 3\n#Apruebo 0.5 -1 2\nrechazo 1 1 1\n";
        let pre = PretrainedEmbeddings::read(text.as_bytes()).unwrap();
        let tags: Vec<String> = vec!["apruebo".into(), "otro".into()];
        let s = init_embeddings(&cfg, 2, &tags, 1, Some(&pre)).unwrap();
        assert_eq!(s.hashtags.row(0).to_vec(), vec![0.5, -1.0, 2.0]);
        let plain = init_embeddings(&cfg, 2, &tags, 1, None).unwrap();
        assert_eq!(s.hashtags.row(1), plain.hashtags.row(1));
        assert_eq!(s.users, plain.users);

        let wrong = ModelConfig { dim: 4, ..Default::default() };
        assert!(matches!(init_embeddings(&wrong, 2, &tags, 1, Some(&pre)), Err(Error::Shape(_))));
    }

    #[test]
    fn propagate_examples() {
        let adj = swap_operator();
        let e0 = array![[3.0], [5.0]];
        assert_eq!(propagate(&adj, e0.view(), 0, true).unwrap().combined, e0);
        let one = propagate(&adj, e0.view(), 1, true).unwrap();
        assert_eq!(one.layers[1], array![[5.0], [3.0]]);
        assert_eq!(one.combined, array![[4.0], [4.0]]);
        let zero = NormalizedAdjacency::zeros(2);
        for k in 0..4 {
            let out = propagate(&zero, e0.view(), k, true).unwrap();
            assert_eq!(out.combined, &e0 / (k + 1) as f64);
        }
        assert!(matches!(propagate(&adj, array![[1.0]].view(), 1, true), Err(Error::Shape(_))));
    }

    #[test]
    fn literal_layer_average_skips_layer0() {
        let adj = swap_operator();
        let e0 = array![[3.0], [5.0]];
        let out = propagate(&adj, e0.view(), 1, false).unwrap();
        assert_eq!(out.combined, array![[2.5], [1.5]]);
        let direct = apply_layer_operator(&adj, e0.view(), 1, false).unwrap();
        assert_eq!(direct, out.combined);
    }

    #[test]
    fn combine_channel_examples() {
        let bip = array![[1.0, 1.0], [9.0, 9.0]];
        let (u, h) = combine_channels(bip.view(), 1, None, None).unwrap();
        assert_eq!(u, array![[1.0, 1.0]]);
        assert_eq!(h, array![[9.0, 9.0]]);
        let social = array![[3.0, 3.0]];
        let (u, _) = combine_channels(bip.view(), 1, Some(social.view()), None).unwrap();
        assert_eq!(u, array![[2.0, 2.0]]);
        let path = array![[5.0, -1.0]];
        let (u, _) = combine_channels(bip.view(), 1, Some(social.view()), Some(path.view())).unwrap();
        assert_eq!(u, array![[3.0, 1.0]]);
        let (u2, _) = combine_channels(bip.view(), 1, Some(path.view()), Some(social.view())).unwrap();
        assert_eq!(u, u2);
        assert!(combine_channels(bip.view(), 1, Some(array![[1.0]].view()), None).is_err());
    }

    #[test]
    fn affinity_examples() {
        assert_eq!(affinity(array![1.0, 0.0].view(), array![0.0, 1.0].view()), 0.0);
        assert_eq!(affinity(array![1.0, 2.0].view(), array![3.0, 4.0].view()), 11.0);
        let e = array![0.3, -1.2, 2.0];
        assert_abs_diff_eq!(affinity(e.view(), e.view()), e.dot(&e), epsilon = 0.0);
    }

    #[test]
    fn score_all_examples() {
        let fe = FinalEmbeddings {
            users: array![[2.0], [0.0]],
            hashtags: array![[1.0], [-1.0], [0.0]],
        };
        assert_eq!(fe.score_all(0).unwrap(), vec![2.0, -2.0, 0.0]);
        assert_eq!(fe.score_all(1).unwrap(), vec![0.0, 0.0, 0.0]);
        assert!(matches!(fe.score_all(2), Err(Error::Index { index: 2, len: 2 })));
    }

    #[test]
    fn score_all_matches_pairwise_loop() {
        let cfg = ModelConfig { dim: 5, ..Default::default() };
        let tags: Vec<String> = (0..7).map(|i| i.to_string()).collect();
        let s = init_embeddings(&cfg, 4, &tags, 3, None).unwrap();
        let fe = FinalEmbeddings { users: s.users, hashtags: s.hashtags };
        for u in 0..4 {
            let all = fe.score_all(u).unwrap();
            for (j, v) in all.iter().enumerate() {
                assert!((v - affinity(fe.users.row(u), fe.hashtags.row(j))).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn forward_is_homogeneous() {
        let g = BipartiteGraph::from_edges(3, 2, &[(0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0), (2, 1, 1.0)]).unwrap();
        let social = CsrMatrix::from_triplets(3, 3, vec![(0, 2, 1.0), (2, 0, 1.0)]).unwrap();
        let channels = Channels {
            bipartite: build_adjacency(&g),
            social: Some(NormalizedAdjacency::from_symmetric(&social).unwrap()),
            pathsim: None,
        };
        let cfg = ModelConfig { dim: 3, layers: 3, ..Default::default() };
        let tags = vec!["a".to_string(), "b".to_string()];
        let s = init_embeddings(&cfg, 3, &tags, 5, None).unwrap();
        let alpha = -2.75;
        let scaled = EmbeddingState { users: &s.users * alpha, hashtags: &s.hashtags * alpha, seed: 5 };
        let a = forward(&channels, &s, &cfg).unwrap();
        let b = forward(&channels, &scaled, &cfg).unwrap();
        assert!((&a.users * alpha - &b.users).iter().all(|d| d.abs() <= 1e-10));
        assert!((&a.hashtags * alpha - &b.hashtags).iter().all(|d| d.abs() <= 1e-10));
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = ModelConfig { dim: 3, ..Default::default() };
        let tags: Vec<String> = vec!["x".into(), "y".into()];
        let s = init_embeddings(&cfg, 4, &tags, 99, None).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, s.users.view(), s.hashtags.view(), s.seed).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 32 + 6 * 3 * 8);
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), s);
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(&bad[..]).is_err());
    }

    #[test]
    fn index_round_trip() {
        let users = vec!["u1".to_string(), "u 2".to_string()];
        let tags = vec!["apruebo".to_string()];
        let mut buf = Vec::new();
        write_index(&mut buf, &users, &tags).unwrap();
        assert_eq!(read_index(&buf[..]).unwrap(), (users, tags));
    }
}
