//! Tweet corpus ingestion: text normalization, record parsing, account
//! filters and extraction of user-hashtag and user-user count matrices.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use chrono::{DateTime, NaiveDateTime};
use log::warn;
use regex::Regex;
use serde::Deserialize;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Case-folds, compatibility-decomposes and drops combining marks, repeated
/// until the string no longer changes.
pub fn normalize_text(raw: &str) -> String {
    let mut current = raw.to_string();
    for _ in 0..8 {
        let folded = caseless::default_case_fold_str(&current);
        let next: String = folded.nfkd().filter(|c| !is_combining_mark(*c)).collect();
        if next == current {
            break;
        }
        current = next;
    }
    current
}

/// `"#Más"` becomes `"mas"`. Returns [`Error::DegenerateHashtag`] when nothing
/// is left, so callers can drop the token.
pub fn normalize_hashtag(raw: &str) -> Result<String> {
    let normalized = normalize_text(raw);
    let stripped = normalized.trim_start_matches('#');
    if stripped.is_empty() {
        return Err(Error::DegenerateHashtag(raw.to_string()));
    }
    Ok(stripped.to_string())
}

fn hashtag_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"[#＃]([\p{L}\p{N}\p{M}_]+)").unwrap())
}

/// Raw hashtag tokens found in `text`, without the leading `#`.
pub fn extract_hashtags(text: &str) -> Vec<String> {
    hashtag_regex()
        .captures_iter(text)
        .map(|c| c[1].to_string())
        .collect()
}

/// Per-token hook applied after cleaning, for lemmatizers or stemmers.
pub trait TokenTransform: Send + Sync {
    fn apply(&self, token: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl TokenTransform for Identity {
    fn apply(&self, token: &str) -> String {
        token.to_string()
    }
}

impl<F> TokenTransform for F
where
    F: Fn(&str) -> String + Send + Sync,
{
    fn apply(&self, token: &str) -> String {
        self(token)
    }
}

struct Patterns {
    url: Regex,
    www: Regex,
    email: Regex,
    mention: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        url: Regex::new(r"(?i)\b[a-z][a-z0-9+.\-]*://\S*").unwrap(),
        www: Regex::new(r"(?i)\bwww\.\S+").unwrap(),
        email: Regex::new(r"[\w.+\-]+@[\w\-]+(\.[\w\-]+)+").unwrap(),
        mention: Regex::new(r"@\w+").unwrap(),
    })
}

/// Cleans tweet text into tokens for the embedding trainer.
pub struct TextPreprocessor {
    stopwords: HashSet<String>,
    stemmer: Box<dyn TokenTransform>,
}

impl Default for TextPreprocessor {
    fn default() -> Self {
        TextPreprocessor {
            stopwords: HashSet::new(),
            stemmer: Box::new(Identity),
        }
    }
}

impl TextPreprocessor {
    pub fn new<I, S>(stopwords: I, stemmer: Box<dyn TokenTransform>) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        TextPreprocessor {
            stopwords: stopwords
                .into_iter()
                .map(|s| normalize_text(s.as_ref()))
                .collect(),
            stemmer,
        }
    }

    pub fn preprocess(&self, text: &str) -> Vec<String> {
        let p = patterns();
        let text = p.url.replace_all(text, " ");
        let text = p.www.replace_all(&text, " ");
        let text = p.email.replace_all(&text, " ");
        let text = p.mention.replace_all(&text, " ");
        let text = normalize_text(&text);
        text.split(|c: char| !c.is_alphanumeric())
            .filter(|t| !t.is_empty() && !self.stopwords.contains(*t))
            .map(|t| self.stemmer.apply(t))
            .filter(|t| !t.is_empty())
            .collect()
    }
}

pub fn preprocess_text(text: &str, stemmer: &dyn TokenTransform) -> Vec<String> {
    let pre = TextPreprocessor::default();
    pre.preprocess(text)
        .into_iter()
        .map(|t| stemmer.apply(&t))
        .filter(|t| !t.is_empty())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TweetKind {
    Original,
    Retweet,
    Reply,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user_id: String,
    /// UTC seconds.
    pub timestamp: i64,
    pub text: String,
    pub hashtags: Vec<String>,
    pub kind: TweetKind,
    pub ref_user_id: Option<String>,
    pub mentions: Vec<String>,
    pub location: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTweet {
    tweet_id: String,
    user_id: String,
    timestamp: String,
    text: String,
    kind: TweetKind,
    #[serde(default)]
    ref_user_id: Option<String>,
    #[serde(default)]
    mentions: Vec<String>,
    #[serde(default)]
    hashtags: Option<Vec<String>>,
    #[serde(default)]
    location: Option<String>,
}

fn parse_timestamp(s: &str) -> std::result::Result<i64, String> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(dt.and_utc().timestamp());
        }
    }
    Err(format!("unrecognized timestamp {s:?}"))
}

impl TryFrom<RawTweet> for TweetRecord {
    type Error = String;

    fn try_from(raw: RawTweet) -> std::result::Result<Self, String> {
        let timestamp = parse_timestamp(&raw.timestamp)?;
        if raw.kind == TweetKind::Original && raw.ref_user_id.is_some() {
            return Err("original tweet carries ref_user_id".into());
        }
        let hashtags = raw.hashtags.unwrap_or_else(|| extract_hashtags(&raw.text));
        Ok(TweetRecord {
            tweet_id: raw.tweet_id,
            user_id: raw.user_id,
            timestamp,
            text: raw.text,
            hashtags,
            kind: raw.kind,
            ref_user_id: raw.ref_user_id,
            mentions: raw.mentions,
            location: raw.location,
        })
    }
}

/// Tweets plus follow edges, as loaded from disk.
#[derive(Debug, Clone, Default)]
pub struct RawCorpus {
    pub tweets: Vec<TweetRecord>,
    /// `(follower, followee)` pairs.
    pub follows: Vec<(String, String)>,
}

impl RawCorpus {
    pub fn user_ids(&self) -> BTreeSet<&str> {
        self.tweets.iter().map(|t| t.user_id.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Abort on the first malformed line instead of skipping it.
    pub strict: bool,
}

fn parse_tweet_line(line: &str) -> std::result::Result<TweetRecord, String> {
    let raw: RawTweet = serde_json::from_str(line).map_err(|e| e.to_string())?;
    TweetRecord::try_from(raw)
}

/// Loads line-delimited tweet records and optional tab-separated follow
/// edges. Duplicate tweet ids keep the last occurrence.
pub fn parse_corpus<T: BufRead, F: BufRead>(
    tweets: T,
    follows: Option<F>,
    opts: ParseOptions,
) -> Result<RawCorpus> {
    let mut records: Vec<TweetRecord> = Vec::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    for (i, line) in tweets.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::Record {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_tweet_line(&line) {
            Ok(rec) => {
                if let Some(&slot) = by_id.get(&rec.tweet_id) {
                    warn!("duplicate tweet_id {} at line {lineno}, keeping last", rec.tweet_id);
                    records[slot] = rec;
                } else {
                    by_id.insert(rec.tweet_id.clone(), records.len());
                    records.push(rec);
                }
            }
            Err(message) if opts.strict => return Err(Error::Record { line: lineno, message }),
            Err(message) => warn!("skipping line {lineno}: {message}"),
        }
    }

    let mut follow_edges = Vec::new();
    if let Some(follows) = follows {
        for (i, line) in follows.lines().enumerate() {
            let lineno = i + 1;
            let line = line.map_err(|e| Error::Record {
                line: lineno,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            match cols[..] {
                [a, b] if !a.is_empty() && !b.is_empty() => {
                    follow_edges.push((a.to_string(), b.to_string()))
                }
                _ if opts.strict => {
                    return Err(Error::Record {
                        line: lineno,
                        message: format!("expected two tab-separated ids, got {line:?}"),
                    })
                }
                _ => warn!("skipping follow line {lineno}"),
            }
        }
    }

    Ok(RawCorpus {
        tweets: records,
        follows: follow_edges,
    })
}

/// One user id per line; blank lines ignored.
pub fn read_outlets<R: BufRead>(reader: R) -> Result<HashSet<String>> {
    let mut out = HashSet::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::parse("outlets", e.to_string()))?;
        let id = line.trim();
        if !id.is_empty() {
            out.insert(id.to_string());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CorpusFilterConfig {
    pub max_outlets_followed: usize,
    pub max_avg_daily_tweets: f64,
    pub location_allowlist: Option<BTreeSet<String>>,
}

impl Default for CorpusFilterConfig {
    fn default() -> Self {
        CorpusFilterConfig {
            max_outlets_followed: 10,
            max_avg_daily_tweets: 3.0,
            location_allowlist: None,
        }
    }
}

impl CorpusFilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.max_avg_daily_tweets > 0.0) {
            return Err(Error::Config("max_avg_daily_tweets must be > 0".into()));
        }
        Ok(())
    }
}

const SECONDS_PER_DAY: f64 = 86_400.0;

/// Drops hyperactive accounts, accounts following too many outlets and,
/// when an allowlist is set, accounts outside the listed locations.
pub fn apply_filters(
    corpus: &RawCorpus,
    cfg: &CorpusFilterConfig,
    outlets: &HashSet<String>,
) -> Result<RawCorpus> {
    cfg.validate()?;

    struct Activity {
        count: usize,
        first: i64,
        last: i64,
        location: Option<String>,
    }
    let mut activity: BTreeMap<&str, Activity> = BTreeMap::new();
    for t in &corpus.tweets {
        let a = activity.entry(t.user_id.as_str()).or_insert(Activity {
            count: 0,
            first: t.timestamp,
            last: t.timestamp,
            location: None,
        });
        a.count += 1;
        a.first = a.first.min(t.timestamp);
        a.last = a.last.max(t.timestamp);
        if t.location.is_some() {
            a.location = t.location.clone();
        }
    }

    let mut outlets_followed: HashMap<&str, HashSet<&str>> = HashMap::new();
    for (follower, followee) in &corpus.follows {
        if outlets.contains(followee) {
            outlets_followed
                .entry(follower.as_str())
                .or_default()
                .insert(followee.as_str());
        }
    }

    let allow: Option<HashSet<String>> = cfg
        .location_allowlist
        .as_ref()
        .map(|s| s.iter().map(|l| normalize_text(l.trim())).collect());

    let kept: HashSet<&str> = activity
        .iter()
        .filter(|(user, a)| {
            let span_days = ((a.last - a.first) as f64 / SECONDS_PER_DAY).max(1.0);
            if a.count as f64 / span_days > cfg.max_avg_daily_tweets {
                return false;
            }
            let n_outlets = outlets_followed.get(*user).map_or(0, HashSet::len);
            if n_outlets > cfg.max_outlets_followed {
                return false;
            }
            match (&allow, &a.location) {
                (None, _) => true,
                (Some(_), None) => false,
                (Some(allow), Some(loc)) => allow.contains(&normalize_text(loc.trim())),
            }
        })
        .map(|(u, _)| *u)
        .collect();

    Ok(RawCorpus {
        tweets: corpus
            .tweets
            .iter()
            .filter(|t| kept.contains(t.user_id.as_str()))
            .cloned()
            .collect(),
        follows: corpus.follows.clone(),
    })
}

/// Which user-hashtag relation a matrix records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Tweet,
    Retweet,
    Reply,
}

impl std::str::FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tweet" | "t" => Ok(Relation::Tweet),
            "retweet" | "rt" => Ok(Relation::Retweet),
            "reply" => Ok(Relation::Reply),
            other => Err(Error::Config(format!("unknown relation {other:?}"))),
        }
    }
}

/// Usage counts indexed by lexicographically ordered users and hashtags.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionCounts {
    pub users: Vec<String>,
    pub hashtags: Vec<String>,
    /// All uses of hashtag j by user i, regardless of tweet kind.
    pub total: CsrMatrix,
    pub tweet: CsrMatrix,
    pub retweet: CsrMatrix,
    pub reply: CsrMatrix,
    pub mentions: CsrMatrix,
    pub replies: CsrMatrix,
    pub mutual_follows: CsrMatrix,
}

const COUNT_FILES: [&str; 7] = [
    "t.coo",
    "t_tweet.coo",
    "t_retweet.coo",
    "t_reply.coo",
    "mentions.coo",
    "replies.coo",
    "mutual_follows.coo",
];

impl InteractionCounts {
    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_hashtags(&self) -> usize {
        self.hashtags.len()
    }

    pub fn relation(&self, r: Relation) -> &CsrMatrix {
        match r {
            Relation::Tweet => &self.tweet,
            Relation::Retweet => &self.retweet,
            Relation::Reply => &self.reply,
        }
    }

    /// Column sums of the total count matrix.
    pub fn hashtag_usage(&self) -> Vec<f64> {
        let mut usage = vec![0.0; self.n_hashtags()];
        for (_, j, v) in self.total.iter() {
            usage[j] += v;
        }
        usage
    }

    pub fn hashtag_index(&self) -> HashMap<&str, usize> {
        self.hashtags
            .iter()
            .enumerate()
            .map(|(i, h)| (h.as_str(), i))
            .collect()
    }

    fn matrices(&self) -> [&CsrMatrix; 7] {
        [
            &self.total,
            &self.tweet,
            &self.retweet,
            &self.reply,
            &self.mentions,
            &self.replies,
            &self.mutual_follows,
        ]
    }

    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_lines(&dir.join("users.txt"), &self.users)?;
        write_lines(&dir.join("hashtags.txt"), &self.hashtags)?;
        for (name, m) in COUNT_FILES.iter().zip(self.matrices()) {
            write_matrix(&dir.join(name), m)?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let users = read_lines(&dir.join("users.txt"))?;
        let hashtags = read_lines(&dir.join("hashtags.txt"))?;
        let mut mats = Vec::with_capacity(COUNT_FILES.len());
        for name in COUNT_FILES {
            mats.push(read_matrix(&dir.join(name))?);
        }
        let [total, tweet, retweet, reply, mentions, replies, mutual_follows]: [CsrMatrix; 7] =
            mats.try_into().expect("seven matrices");
        let (n, m) = (users.len(), hashtags.len());
        for (name, mat) in COUNT_FILES.iter().zip([&total, &tweet, &retweet, &reply]) {
            if mat.rows() != n || mat.cols() != m {
                return Err(Error::parse(*name, format!("expected {n}x{m}")));
            }
        }
        for (name, mat) in COUNT_FILES[4..].iter().zip([&mentions, &replies, &mutual_follows]) {
            if mat.rows() != n || mat.cols() != n {
                return Err(Error::parse(*name, format!("expected {n}x{n}")));
            }
        }
        Ok(InteractionCounts {
            users,
            hashtags,
            total,
            tweet,
            retweet,
            reply,
            mentions,
            replies,
            mutual_follows,
        })
    }
}

pub(crate) fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    for l in lines {
        writeln!(w, "{l}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_lines(path: &Path) -> Result<Vec<String>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    BufReader::new(f)
        .lines()
        .map(|l| l.map_err(|e| Error::io(path, e)))
        .filter(|l| !matches!(l, Ok(s) if s.is_empty()))
        .collect()
}

pub(crate) fn write_matrix(path: &Path, m: &CsrMatrix) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    m.write_coo(&mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn read_matrix(path: &Path) -> Result<CsrMatrix> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    CsrMatrix::read_coo(BufReader::new(f), &path.display().to_string())
}

/// Builds the count matrices from a (filtered) corpus.
pub fn extract_interactions(corpus: &RawCorpus) -> Result<InteractionCounts> {
    if corpus.tweets.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let users: Vec<String> = corpus.user_ids().into_iter().map(String::from).collect();
    let user_index: HashMap<&str, usize> = users
        .iter()
        .enumerate()
        .map(|(i, u)| (u.as_str(), i))
        .collect();

    // (user, hashtag, kind) per occurrence
    let mut occurrences: Vec<(usize, String, TweetKind)> = Vec::new();
    let mut mention_trips = Vec::new();
    let mut reply_trips = Vec::new();
    for t in &corpus.tweets {
        let u = user_index[t.user_id.as_str()];
        for raw in &t.hashtags {
            match normalize_hashtag(raw) {
                Ok(h) => occurrences.push((u, h, t.kind)),
                Err(_) => warn!("dropping degenerate hashtag {raw:?} in tweet {}", t.tweet_id),
            }
        }
        for m in &t.mentions {
            if let Some(&v) = user_index.get(m.as_str()) {
                mention_trips.push((u, v, 1.0));
            }
        }
        if t.kind == TweetKind::Reply {
            if let Some(v) = t.ref_user_id.as_deref().and_then(|r| user_index.get(r)) {
                reply_trips.push((u, *v, 1.0));
            }
        }
    }

    let hashtags: Vec<String> = occurrences
        .iter()
        .map(|(_, h, _)| h.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let hashtag_index: HashMap<&str, usize> = hashtags
        .iter()
        .enumerate()
        .map(|(i, h)| (h.as_str(), i))
        .collect();

    let (n, m) = (users.len(), hashtags.len());
    let trips = |kind: Option<TweetKind>| {
        occurrences
            .iter()
            .filter(move |(_, _, k)| kind.is_none_or(|want| *k == want))
            .map(|(u, h, _)| (*u, hashtag_index[h.as_str()], 1.0))
    };
    let total = CsrMatrix::from_triplets(n, m, trips(None))?;
    let tweet = CsrMatrix::from_triplets(n, m, trips(Some(TweetKind::Original)))?;
    let retweet = CsrMatrix::from_triplets(n, m, trips(Some(TweetKind::Retweet)))?;
    let reply = CsrMatrix::from_triplets(n, m, trips(Some(TweetKind::Reply)))?;

    let directed: HashSet<(usize, usize)> = corpus
        .follows
        .iter()
        .filter_map(|(a, b)| Some((*user_index.get(a.as_str())?, *user_index.get(b.as_str())?)))
        .collect();
    let mutual: BTreeSet<(usize, usize)> = directed
        .iter()
        .filter(|(a, b)| a != b && directed.contains(&(*b, *a)))
        .copied()
        .collect();
    let mutual_follows = CsrMatrix::from_triplets(n, n, mutual.into_iter().map(|(a, b)| (a, b, 1.0)))?;

    Ok(InteractionCounts {
        users,
        hashtags,
        total,
        tweet,
        retweet,
        reply,
        mentions: CsrMatrix::from_triplets(n, n, mention_trips)?,
        replies: CsrMatrix::from_triplets(n, n, reply_trips)?,
        mutual_follows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tweet(id: &str, user: &str, ts: i64, text: &str, kind: TweetKind, r: Option<&str>) -> TweetRecord {
        TweetRecord {
            tweet_id: id.into(),
            user_id: user.into(),
            timestamp: ts,
            text: text.into(),
            hashtags: extract_hashtags(text),
            kind,
            ref_user_id: r.map(String::from),
            mentions: vec![],
            location: None,
        }
    }

    #[test]
    fn hashtag_normalization_examples() {
        assert_eq!(normalize_hashtag("#Apruebo").unwrap(), "apruebo");
        assert_eq!(normalize_hashtag("Más").unwrap(), "mas");
        assert_eq!(normalize_hashtag("apruebo").unwrap(), "apruebo");
        assert_eq!(normalize_hashtag("#PlebiscitoConstitución").unwrap(), "plebiscitoconstitucion");
    }

    #[test]
    fn degenerate_hashtags_are_signalled() {
        assert!(matches!(normalize_hashtag("#"), Err(Error::DegenerateHashtag(_))));
        assert!(matches!(normalize_hashtag(""), Err(Error::DegenerateHashtag(_))));
        assert!(matches!(normalize_hashtag("\u{301}"), Err(Error::DegenerateHashtag(_))));
    }

    #[test]
    fn preprocess_examples() {
        assert_eq!(preprocess_text("Vota YA! https://t.co/x", &Identity), vec!["vota", "ya"]);
        assert!(preprocess_text("", &Identity).is_empty());
        assert_eq!(
            preprocess_text("Más info vía email a@b.cl", &Identity),
            vec!["mas", "info", "via", "email"]
        );
    }

    #[test]
    fn preprocess_strips_mentions_emoji_and_stopwords() {
        let pre = TextPreprocessor::new(["de", "LA"], Box::new(Identity));
        assert_eq!(
            pre.preprocess("@pedro la Marcha de hoy 🔥🔥 #Apruebo!!"),
            vec!["marcha", "hoy", "apruebo"]
        );
    }

    #[test]
    fn stemmer_runs_last() {
        let chop = |t: &str| t.chars().take(4).collect::<String>();
        assert_eq!(preprocess_text("Votaremos Mañana", &chop), vec!["vota", "mana"]);
    }

    const TWEETS: &str = r##"{"tweet_id":"1","user_id":"a","timestamp":"2020-01-01T00:00:00Z","text":"hola #A","kind":"original","mentions":[]}
{"tweet_id":"2","user_id":"b","timestamp":"2020-01-02T00:00:00Z","text":"rt #b","kind":"retweet","ref_user_id":"a","mentions":["a"]}
{"tweet_id":"3","user_id":"a","timestamp":"2020-01-03T00:00:00Z","text":"x","kind":"reply","ref_user_id":"b","mentions":[],"hashtags":["#C"]}
"##;

    #[test]
    fn parse_three_valid_lines() {
        let c = parse_corpus(TWEETS.as_bytes(), None::<&[u8]>, ParseOptions::default()).unwrap();
        assert_eq!(c.tweets.len(), 3);
        assert_eq!(c.tweets[0].hashtags, vec!["A"]);
        assert_eq!(c.tweets[2].hashtags, vec!["#C"]);
        assert_eq!(c.tweets[1].timestamp - c.tweets[0].timestamp, 86_400);
    }

    #[test]
    fn strict_mode_reports_malformed_line() {
        let text = format!("{}not json\n", TWEETS);
        let err = parse_corpus(text.as_bytes(), None::<&[u8]>, ParseOptions { strict: true }).unwrap_err();
        assert!(matches!(err, Error::Record { line: 4, .. }));
        let lenient = parse_corpus(text.as_bytes(), None::<&[u8]>, ParseOptions { strict: false }).unwrap();
        assert_eq!(lenient.tweets.len(), 3);
    }

    #[test]
    fn original_with_reference_is_malformed() {
        let line = r##"{"tweet_id":"1","user_id":"a","timestamp":"2020-01-01T00:00:00Z","text":"","kind":"original","ref_user_id":"b"}"##;
        let err = parse_corpus(line.as_bytes(), None::<&[u8]>, ParseOptions { strict: true }).unwrap_err();
        assert!(matches!(err, Error::Record { line: 1, .. }));
    }

    #[test]
    fn duplicate_tweet_id_keeps_last() {
        let text = r##"{"tweet_id":"1","user_id":"a","timestamp":"2020-01-01T00:00:00Z","text":"#x","kind":"original"}
{"tweet_id":"1","user_id":"a","timestamp":"2020-01-01T00:00:00Z","text":"#y","kind":"original"}
"##;
        let c = parse_corpus(text.as_bytes(), None::<&[u8]>, ParseOptions::default()).unwrap();
        assert_eq!(c.tweets.len(), 1);
        assert_eq!(c.tweets[0].hashtags, vec!["y"]);
        let counts = extract_interactions(&c).unwrap();
        assert_eq!(counts.hashtags, vec!["y"]);
    }

    #[test]
    fn follow_file_parsing() {
        let follows = "a\tb\nb\ta\n\nbad line\n";
        let c = parse_corpus(TWEETS.as_bytes(), Some(follows.as_bytes()), ParseOptions::default()).unwrap();
        assert_eq!(c.follows.len(), 2);
        assert!(parse_corpus(TWEETS.as_bytes(), Some(follows.as_bytes()), ParseOptions { strict: true }).is_err());
    }

    fn user_tweets(user: &str, n: usize, spacing: i64) -> Vec<TweetRecord> {
        (0..n)
            .map(|i| tweet(&format!("{user}{i}"), user, i as i64 * spacing, "#x", TweetKind::Original, None))
            .collect()
    }

    #[test]
    fn activity_filter() {
        let mut tweets = user_tweets("busy", 10, 86_400 * 2 / 9);
        tweets.extend(user_tweets("calm", 2, 60));
        let corpus = RawCorpus { tweets, follows: vec![] };
        let out = apply_filters(&corpus, &CorpusFilterConfig::default(), &HashSet::new()).unwrap();
        assert_eq!(out.user_ids().into_iter().collect::<Vec<_>>(), vec!["calm"]);
    }

    #[test]
    fn outlet_and_location_filters() {
        let mut tweets = user_tweets("p", 1, 0);
        tweets.extend(user_tweets("q", 1, 0));
        tweets[0].location = Some("Valparaíso".into());
        tweets[1].location = Some("SANTIAGO".into());
        let follows = vec![("q".to_string(), "o1".to_string()), ("q".to_string(), "o2".to_string())];
        let outlets: HashSet<String> = ["o1", "o2"].iter().map(|s| s.to_string()).collect();
        let corpus = RawCorpus { tweets, follows };

        let cfg = CorpusFilterConfig {
            location_allowlist: Some(["santiago".to_string()].into_iter().collect()),
            ..Default::default()
        };
        let out = apply_filters(&corpus, &cfg, &outlets).unwrap();
        assert_eq!(out.user_ids().into_iter().collect::<Vec<_>>(), vec!["q"]);

        let cfg = CorpusFilterConfig { max_outlets_followed: 1, ..Default::default() };
        let out = apply_filters(&corpus, &cfg, &outlets).unwrap();
        assert_eq!(out.user_ids().into_iter().collect::<Vec<_>>(), vec!["p"]);
    }

    #[test]
    fn nonpositive_rate_is_rejected() {
        let cfg = CorpusFilterConfig { max_avg_daily_tweets: 0.0, ..Default::default() };
        assert!(matches!(
            apply_filters(&RawCorpus::default(), &cfg, &HashSet::new()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn repeated_hashtag_counts_twice() {
        let corpus = RawCorpus {
            tweets: vec![tweet("1", "u", 0, "hola #a #a", TweetKind::Original, None)],
            follows: vec![],
        };
        let c = extract_interactions(&corpus).unwrap();
        assert_eq!(c.hashtags, vec!["a"]);
        assert_eq!(c.total.get(0, 0), 2.0);
    }

    #[test]
    fn retweets_split_and_mutual_follows() {
        let corpus = RawCorpus {
            tweets: vec![
                tweet("1", "p", 0, "#a", TweetKind::Original, None),
                tweet("2", "q", 0, "RT #b", TweetKind::Retweet, Some("p")),
                tweet("3", "q", 0, "#a", TweetKind::Reply, Some("p")),
            ],
            follows: vec![("p".into(), "q".into()), ("q".into(), "p".into()), ("p".into(), "zz".into())],
        };
        let c = extract_interactions(&corpus).unwrap();
        assert_eq!(c.users, vec!["p", "q"]);
        assert_eq!(c.hashtags, vec!["a", "b"]);
        assert_eq!(c.retweet.get(1, 1), 1.0);
        assert_eq!(c.total.get(1, 1), 1.0);
        assert_eq!(c.tweet.get(1, 1), 0.0);
        assert_eq!(c.reply.get(1, 0), 1.0);
        assert_eq!(c.replies.get(1, 0), 1.0);
        assert_eq!(c.mutual_follows.get(0, 1), 1.0);
        assert_eq!(c.mutual_follows.get(1, 0), 1.0);
        assert_eq!(c.mutual_follows.nnz(), 2);
        let sum = c.tweet.add(&c.retweet).unwrap().add(&c.reply).unwrap();
        assert_eq!(sum, c.total);
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(extract_interactions(&RawCorpus::default()), Err(Error::EmptyCorpus)));
    }

    fn hashtag_text() -> impl Strategy<Value = String> {
        "[#＃]?[a-zA-ZáéíóúñÁÉÍÓÚÑüÜçÇßøÅåΣσςαβΩДдЖж0-9_\u{0301}\u{0308}ﬁ①]{0,12}"
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(raw in hashtag_text()) {
            if let Ok(once) = normalize_hashtag(&raw) {
                prop_assert_eq!(normalize_hashtag(&once).unwrap(), once);
            }
        }

        #[test]
        fn normalize_ignores_case(raw in hashtag_text()) {
            let up = normalize_hashtag(&raw.to_uppercase()).ok();
            let low = normalize_hashtag(&raw.to_lowercase()).ok();
            prop_assert_eq!(up, low);
        }

        #[test]
        fn normalize_is_idempotent_on_any_text(raw in "\\PC{0,16}") {
            if let Ok(once) = normalize_hashtag(&raw) {
                prop_assert_eq!(normalize_hashtag(&once).unwrap(), once);
            }
        }

        #[test]
        fn counts_are_conserved(tags in proptest::collection::vec(proptest::collection::vec(0usize..5, 0..6), 1..8)) {
            let names = ["a", "B", "c", "Ñ", "d"];
            let tweets: Vec<TweetRecord> = tags.iter().enumerate().map(|(i, t)| TweetRecord {
                tweet_id: i.to_string(),
                user_id: format!("u{}", i % 3),
                timestamp: 0,
                text: String::new(),
                hashtags: t.iter().map(|j| names[*j].to_string()).collect(),
                kind: if i % 2 == 0 { TweetKind::Original } else { TweetKind::Retweet },
                ref_user_id: if i % 2 == 0 { None } else { Some("u0".into()) },
                mentions: vec![],
                location: None,
            }).collect();
            let incidences: usize = tags.iter().map(Vec::len).sum();
            let c = extract_interactions(&RawCorpus { tweets, follows: vec![] }).unwrap();
            prop_assert_eq!(c.total.sum(), incidences as f64);
            let usage = c.hashtag_usage();
            prop_assert!(usage.iter().all(|u| *u > 0.0));
        }

        #[test]
        fn activity_filter_is_monotone(rates in proptest::collection::vec((1usize..12, 1i64..5), 1..6), a in 0.5f64..6.0, b in 0.5f64..6.0) {
            let mut tweets = Vec::new();
            for (k, (n, days)) in rates.iter().enumerate() {
                let spacing = if *n > 1 { days * 86_400 / (*n as i64 - 1) } else { 0 };
                tweets.extend(user_tweets(&format!("u{k}"), *n, spacing));
            }
            let corpus = RawCorpus { tweets, follows: vec![] };
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let run = |rate| apply_filters(&corpus, &CorpusFilterConfig { max_avg_daily_tweets: rate, ..Default::default() }, &HashSet::new())
                .unwrap().user_ids().into_iter().map(String::from).collect::<BTreeSet<_>>();
            prop_assert!(run(lo).is_subset(&run(hi)));
        }
    }

    #[test]
    fn counts_round_trip_through_directory() {
        let corpus = parse_corpus(TWEETS.as_bytes(), Some("a\tb\nb\ta\n".as_bytes()), ParseOptions::default()).unwrap();
        let c = extract_interactions(&corpus).unwrap();
        let dir = tempfile::tempdir().unwrap();
        c.write_dir(dir.path()).unwrap();
        assert_eq!(InteractionCounts::read_dir(dir.path()).unwrap(), c);
    }
}
