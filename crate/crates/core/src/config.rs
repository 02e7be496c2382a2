//! Run configuration: `key = value` files, flag overrides, printing.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::eval::{ExperimentConfig, SynthConfig};
use crate::ingest::{CorpusFilterConfig, Relation};

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    pub filter: CorpusFilterConfig,
    pub experiment: ExperimentConfig,
    pub synth: SynthConfig,
    pub threads: usize,
    pub deterministic: bool,
    pub pretrained: Option<PathBuf>,
}

/// Every accepted key, in print order.
pub const KEYS: &[&str] = &[
    "seed",
    "threads",
    "deterministic",
    "max_outlets_followed",
    "max_avg_daily_tweets",
    "location_allowlist",
    "dim",
    "layers",
    "social",
    "pathsim",
    "use_pretrained",
    "pretrained",
    "include_layer0",
    "social_follow",
    "social_mention",
    "social_reply",
    "metapath",
    "pathsim_min_weight",
    "pathsim_top_k",
    "learning_rate",
    "lambda_reg",
    "batch_size",
    "max_epochs",
    "patience",
    "eval_every",
    "refresh_every",
    "variant",
    "holdout_fraction",
    "folds",
    "runs",
    "k",
    "binary_only",
    "synth_users",
    "synth_hashtags",
    "synth_neutral",
    "p_in",
    "p_out",
    "interactions_per_user",
    "homophily",
    "social_density",
    "retweet_fraction",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("bad value {value:?} for {key}"))),
    }
}

fn relation_name(r: Relation) -> &'static str {
    match r {
        Relation::Tweet => "tweet",
        Relation::Retweet => "retweet",
        Relation::Reply => "reply",
    }
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.experiment;
        let s = &mut self.synth;
        match key {
            "seed" => e.seed = parse(key, value)?,
            "threads" => self.threads = parse(key, value)?,
            "deterministic" => self.deterministic = parse_bool(key, value)?,
            "max_outlets_followed" => self.filter.max_outlets_followed = parse(key, value)?,
            "max_avg_daily_tweets" => self.filter.max_avg_daily_tweets = parse(key, value)?,
            "location_allowlist" => {
                let set: BTreeSet<String> = value
                    .split(',')
                    .map(|l| l.trim().to_string())
                    .filter(|l| !l.is_empty())
                    .collect();
                self.filter.location_allowlist = (!set.is_empty()).then_some(set);
            }
            "dim" => e.model.dim = parse(key, value)?,
            "layers" => e.model.layers = parse(key, value)?,
            "social" => e.model.social = parse_bool(key, value)?,
            "pathsim" => e.model.pathsim = parse_bool(key, value)?,
            "use_pretrained" => e.model.use_pretrained = parse_bool(key, value)?,
            "pretrained" => self.pretrained = (!value.trim().is_empty()).then(|| PathBuf::from(value.trim())),
            "include_layer0" => e.model.include_layer0 = parse_bool(key, value)?,
            "social_follow" => e.channels.social.follow = parse(key, value)?,
            "social_mention" => e.channels.social.mention = parse(key, value)?,
            "social_reply" => e.channels.social.reply = parse(key, value)?,
            "metapath" => {
                let (l, r) = value
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("metapath must be LEFT,RIGHT, got {value:?}")))?;
                e.channels.metapath.left = l.parse()?;
                e.channels.metapath.right = r.parse()?;
            }
            "pathsim_min_weight" => e.channels.pathsim_min_weight = parse(key, value)?,
            "pathsim_top_k" => {
                let k: usize = parse(key, value)?;
                e.channels.pathsim_top_k = (k > 0).then_some(k);
            }
            "learning_rate" => e.train.learning_rate = parse(key, value)?,
            "lambda_reg" => e.train.lambda_reg = parse(key, value)?,
            "batch_size" => e.train.batch_size = parse(key, value)?,
            "max_epochs" => e.train.max_epochs = parse(key, value)?,
            "patience" => e.train.patience = parse(key, value)?,
            "eval_every" => e.train.eval_every = parse(key, value)?,
            "refresh_every" => e.train.refresh_every = parse(key, value)?,
            "variant" => e.variant = value.trim().parse()?,
            "holdout_fraction" => e.eval.holdout_fraction = parse(key, value)?,
            "folds" => e.eval.folds = parse(key, value)?,
            "runs" => e.eval.runs = parse(key, value)?,
            "k" => e.eval.k = parse(key, value)?,
            "binary_only" => e.eval.binary_only = parse_bool(key, value)?,
            "synth_users" => s.n_users = parse(key, value)?,
            "synth_hashtags" => s.n_hashtags = parse(key, value)?,
            "synth_neutral" => s.n_neutral = parse(key, value)?,
            "p_in" => s.p_in = parse(key, value)?,
            "p_out" => s.p_out = parse(key, value)?,
            "interactions_per_user" => s.interactions_per_user = parse(key, value)?,
            "homophily" => s.homophily = parse(key, value)?,
            "social_density" => s.social_density = parse(key, value)?,
            "retweet_fraction" => s.retweet_fraction = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let e = &self.experiment;
        let s = &self.synth;
        let v = match key {
            "seed" => e.seed.to_string(),
            "threads" => self.threads.to_string(),
            "deterministic" => self.deterministic.to_string(),
            "max_outlets_followed" => self.filter.max_outlets_followed.to_string(),
            "max_avg_daily_tweets" => self.filter.max_avg_daily_tweets.to_string(),
            "location_allowlist" => self
                .filter
                .location_allowlist
                .as_ref()
                .map(|s| s.iter().cloned().collect::<Vec<_>>().join(","))
                .unwrap_or_default(),
            "dim" => e.model.dim.to_string(),
            "layers" => e.model.layers.to_string(),
            "social" => e.model.social.to_string(),
            "pathsim" => e.model.pathsim.to_string(),
            "use_pretrained" => e.model.use_pretrained.to_string(),
            "pretrained" => self.pretrained.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            "include_layer0" => e.model.include_layer0.to_string(),
            "social_follow" => e.channels.social.follow.to_string(),
            "social_mention" => e.channels.social.mention.to_string(),
            "social_reply" => e.channels.social.reply.to_string(),
            "metapath" => format!(
                "{},{}",
                relation_name(e.channels.metapath.left),
                relation_name(e.channels.metapath.right)
            ),
            "pathsim_min_weight" => e.channels.pathsim_min_weight.to_string(),
            "pathsim_top_k" => e.channels.pathsim_top_k.unwrap_or(0).to_string(),
            "learning_rate" => e.train.learning_rate.to_string(),
            "lambda_reg" => e.train.lambda_reg.to_string(),
            "batch_size" => e.train.batch_size.to_string(),
            "max_epochs" => e.train.max_epochs.to_string(),
            "patience" => e.train.patience.to_string(),
            "eval_every" => e.train.eval_every.to_string(),
            "refresh_every" => e.train.refresh_every.to_string(),
            "variant" => e.variant.to_string(),
            "holdout_fraction" => e.eval.holdout_fraction.to_string(),
            "folds" => e.eval.folds.to_string(),
            "runs" => e.eval.runs.to_string(),
            "k" => e.eval.k.to_string(),
            "binary_only" => e.eval.binary_only.to_string(),
            "synth_users" => s.n_users.to_string(),
            "synth_hashtags" => s.n_hashtags.to_string(),
            "synth_neutral" => s.n_neutral.to_string(),
            "p_in" => s.p_in.to_string(),
            "p_out" => s.p_out.to_string(),
            "interactions_per_user" => s.interactions_per_user.to_string(),
            "homophily" => s.homophily.to_string(),
            "social_density" => s.social_density.to_string(),
            "retweet_fraction" => s.retweet_fraction.to_string(),
            _ => return None,
        };
        Some(v)
    }

    /// Applies `key = value` lines; `#` starts a comment line.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse("config", format!("line {}: expected key = value", i + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        self.apply_text(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.filter.validate()?;
        self.experiment.model.validate()?;
        self.experiment.train.validate()?;
        self.experiment.eval.validate()?;
        self.synth.validate()?;
        if self.experiment.model.use_pretrained && self.pretrained.is_none() {
            return Err(Error::Config("use_pretrained needs a pretrained path".into()));
        }
        Ok(())
    }

    /// All keys as `key = value` lines; reading them back gives the same
    /// configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap_or_default());
        }
        out
    }
}
