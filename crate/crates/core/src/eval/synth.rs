//! Planted two-camp interaction data for end-to-end checks.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::InteractionCounts;
use crate::sparse::CsrMatrix;

use super::stance::{StanceAnnotation, StanceClass};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_hashtags: usize,
    pub n_neutral: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub interactions_per_user: usize,
    /// Share of the follow probability spent inside a camp.
    pub homophily: f64,
    /// Base probability of a mutual follow between two users.
    pub social_density: f64,
    /// Fraction of interactions recorded as retweets.
    pub retweet_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 200,
            n_hashtags: 100,
            n_neutral: 10,
            p_in: 0.8,
            p_out: 0.1,
            interactions_per_user: 20,
            homophily: 0.9,
            social_density: 0.05,
            retweet_fraction: 0.3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.p_in) && unit(self.p_out) && self.p_out < self.p_in) {
            return Err(Error::Config(format!("need 0 <= p_out < p_in <= 1, got p_in={} p_out={}", self.p_in, self.p_out)));
        }
        if self.p_in + self.p_out > 1.0 + 1e-12 {
            return Err(Error::Config("p_in + p_out exceeds 1".into()));
        }
        if self.n_users < 2 {
            return Err(Error::Config("need at least 2 users".into()));
        }
        if self.n_hashtags < self.n_neutral + 2 {
            return Err(Error::Config("need at least one hashtag per camp besides the neutral ones".into()));
        }
        if !(unit(self.homophily) && unit(self.social_density) && unit(self.retweet_fraction)) {
            return Err(Error::Config("homophily, social_density and retweet_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDataset {
    pub counts: InteractionCounts,
    pub annotations: StanceAnnotation,
    /// Camp of each user, in `counts.users` order.
    pub planted: Vec<StanceClass>,
}

fn camp_tags(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}_{i:03}")).collect()
}

/// Users alternate between POS and NEG camps. Each interaction picks an
/// own-camp hashtag with probability `p_in`, an other-camp one with `p_out`
/// and a neutral one otherwise (own camp when there are no neutral tags).
/// Mutual follows appear with probability `homophily · social_density`
/// inside a camp and `(1 - homophily) · social_density` across camps.
/// Only camp hashtags are annotated. Hashtags nobody used are dropped from
/// the counts but stay annotated.
pub fn synth_generate<R: Rng>(cfg: &SynthConfig, rng: &mut R) -> Result<SynthDataset> {
    cfg.validate()?;
    let n_camp = cfg.n_hashtags - cfg.n_neutral;
    let pos_tags = camp_tags("pos", n_camp - n_camp / 2);
    let neg_tags = camp_tags("neg", n_camp / 2);
    let neu_tags = camp_tags("neu", cfg.n_neutral);
    let width = cfg.n_users.to_string().len().max(4);
    let users: Vec<String> = (0..cfg.n_users).map(|i| format!("u{i:0width$}")).collect();
    let planted: Vec<StanceClass> = (0..cfg.n_users)
        .map(|i| if i % 2 == 0 { StanceClass::Pos } else { StanceClass::Neg })
        .collect();

    // (user, tag) -> (tweets, retweets)
    let mut uses: BTreeMap<(usize, &str), (f64, f64)> = BTreeMap::new();
    for (u, camp) in planted.iter().enumerate() {
        let (own, other) = match camp {
            StanceClass::Pos => (&pos_tags, &neg_tags),
            _ => (&neg_tags, &pos_tags),
        };
        for _ in 0..cfg.interactions_per_user {
            let r: f64 = rng.gen();
            let pool = if r < cfg.p_in {
                own
            } else if r < cfg.p_in + cfg.p_out {
                other
            } else if neu_tags.is_empty() {
                own
            } else {
                &neu_tags
            };
            let tag = pool[rng.gen_range(0..pool.len())].as_str();
            let entry = uses.entry((u, tag)).or_default();
            if rng.gen::<f64>() < cfg.retweet_fraction {
                entry.1 += 1.0;
            } else {
                entry.0 += 1.0;
            }
        }
    }

    let mut follows = Vec::new();
    for a in 0..cfg.n_users {
        for b in a + 1..cfg.n_users {
            let p = if planted[a] == planted[b] {
                cfg.homophily * cfg.social_density
            } else {
                (1.0 - cfg.homophily) * cfg.social_density
            };
            if rng.gen::<f64>() < p {
                follows.push((a, b, 1.0));
                follows.push((b, a, 1.0));
            }
        }
    }

    let mut hashtags: Vec<String> = uses.keys().map(|(_, t)| t.to_string()).collect();
    hashtags.sort();
    hashtags.dedup();
    let column: BTreeMap<&str, usize> = hashtags.iter().enumerate().map(|(j, h)| (h.as_str(), j)).collect();
    let (n, m) = (users.len(), hashtags.len());
    let mut tweet = Vec::new();
    let mut retweet = Vec::new();
    let mut total = Vec::new();
    for (&(u, tag), &(t, rt)) in &uses {
        let j = column[tag];
        if t > 0.0 {
            tweet.push((u, j, t));
        }
        if rt > 0.0 {
            retweet.push((u, j, rt));
        }
        total.push((u, j, t + rt));
    }
    let counts = InteractionCounts {
        users,
        hashtags,
        total: CsrMatrix::from_triplets(n, m, total)?,
        tweet: CsrMatrix::from_triplets(n, m, tweet)?,
        retweet: CsrMatrix::from_triplets(n, m, retweet)?,
        reply: CsrMatrix::zeros(n, m),
        mentions: CsrMatrix::zeros(n, n),
        replies: CsrMatrix::zeros(n, n),
        mutual_follows: CsrMatrix::from_triplets(n, n, follows)?,
    };

    // neutral tags belong to no camp and stay unannotated
    let members = pos_tags
        .iter()
        .map(|t| (StanceClass::Pos, t.clone()))
        .chain(neg_tags.iter().map(|t| (StanceClass::Neg, t.clone())));
    let mut annotations = StanceAnnotation::from_members(members)?;
    annotations.set_usage(&counts);
    Ok(SynthDataset {
        counts,
        annotations,
        planted,
    })
}

/// `user<TAB>class` lines in user order.
pub fn write_planted<W: std::io::Write>(mut w: W, users: &[String], planted: &[StanceClass]) -> std::io::Result<()> {
    for (u, c) in users.iter().zip(planted) {
        writeln!(w, "{u}\t{c}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_interaction_graph;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn generate(cfg: &SynthConfig, seed: u64) -> SynthDataset {
        synth_generate(cfg, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn camps_are_balanced() {
        for n_users in [2, 7, 200] {
            let d = generate(&SynthConfig { n_users, ..SynthConfig::default() }, 1);
            let pos = d.planted.iter().filter(|c| **c == StanceClass::Pos).count() as i64;
            let neg = d.planted.len() as i64 - pos;
            assert!((pos - neg).abs() <= 1);
        }
    }

    #[test]
    fn no_crossing_gives_two_blocks() {
        let cfg = SynthConfig {
            n_neutral: 0,
            p_in: 1.0,
            p_out: 0.0,
            ..SynthConfig::default()
        };
        let d = generate(&cfg, 4);
        let g = build_interaction_graph(&d.counts).unwrap();
        for (u, j, _) in g.edges() {
            let tag = &d.counts.hashtags[j];
            let expected = if d.planted[u] == StanceClass::Pos { "pos_" } else { "neg_" };
            assert!(tag.starts_with(expected), "user {u} used {tag}");
        }
    }

    #[test]
    fn volume_and_annotations() {
        let cfg = SynthConfig::default();
        let d = generate(&cfg, 2);
        assert_eq!(d.counts.total.sum(), (cfg.n_users * cfg.interactions_per_user) as f64);
        let split = d.counts.tweet.add(&d.counts.retweet).unwrap();
        assert_eq!(split.to_dense(), d.counts.total.to_dense());
        assert_eq!(d.annotations.class_size(StanceClass::Pos), 45);
        assert_eq!(d.annotations.class_size(StanceClass::Neg), 45);
        assert_eq!(d.annotations.class_size(StanceClass::Neutral), 0);
        assert_eq!(d.counts.hashtags.iter().filter(|h| h.starts_with("neu_")).count(), 10);
        assert_eq!(d.counts.mutual_follows.asymmetry(), 0.0);
    }

    #[test]
    fn seeded_output_repeats() {
        let cfg = SynthConfig::default();
        assert_eq!(generate(&cfg, 11), generate(&cfg, 11));
        assert_ne!(generate(&cfg, 11).counts, generate(&cfg, 12).counts);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for (p_in, p_out) in [(0.5, 0.5), (0.3, 0.6), (0.9, 0.2), (1.2, 0.0)] {
            let cfg = SynthConfig { p_in, p_out, ..SynthConfig::default() };
            assert!(matches!(synth_generate(&cfg, &mut rng), Err(Error::Config(_))));
        }
    }
}
