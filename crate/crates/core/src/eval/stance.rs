//! Hashtag annotations and user-level stance classification.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::ingest::{normalize_hashtag, InteractionCounts};

/// Stance classes in tie-break order: on equal scores the later class wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StanceClass {
    Neg,
    Neutral,
    Pos,
}

impl StanceClass {
    pub const ALL: [StanceClass; 3] = [StanceClass::Neg, StanceClass::Neutral, StanceClass::Pos];

    /// Value used for RMSE.
    pub fn numeric(self) -> f64 {
        match self {
            StanceClass::Neg => 0.0,
            StanceClass::Neutral => 0.5,
            StanceClass::Pos => 1.0,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            StanceClass::Neg => "NEG",
            StanceClass::Neutral => "NEUTRAL",
            StanceClass::Pos => "POS",
        }
    }
}

impl fmt::Display for StanceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StanceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "POS" => Ok(StanceClass::Pos),
            "NEG" => Ok(StanceClass::Neg),
            "NEUTRAL" | "NEU" => Ok(StanceClass::Neutral),
            other => Err(Error::parse("annotations", format!("unknown class {other:?}"))),
        }
    }
}

/// Annotated hashtags per class, with corpus usage for ranking.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StanceAnnotation {
    members: BTreeMap<StanceClass, Vec<String>>,
    usage: HashMap<String, f64>,
}

impl StanceAnnotation {
    pub fn from_members(members: impl IntoIterator<Item = (StanceClass, String)>) -> Result<Self> {
        let mut out = StanceAnnotation::default();
        for (class, tag) in members {
            out.insert(class, &tag)?;
        }
        Ok(out)
    }

    fn insert(&mut self, class: StanceClass, raw: &str) -> Result<()> {
        let tag = normalize_hashtag(raw)?;
        for (other, list) in &self.members {
            if *other != class && list.contains(&tag) {
                warn!("hashtag {tag:?} annotated as both {other} and {class}");
            }
        }
        let list = self.members.entry(class).or_default();
        if list.contains(&tag) {
            warn!("duplicate annotation {tag:?} in {class}");
        } else {
            list.push(tag);
        }
        Ok(())
    }

    /// Tab-separated `hashtag<TAB>class` lines. An empty file is a
    /// configuration error.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut out = StanceAnnotation::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::parse("annotations", e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let (tag, class) = line
                .split_once('\t')
                .ok_or_else(|| Error::parse("annotations", format!("line {}: expected hashtag<TAB>class", i + 1)))?;
            out.insert(class.parse()?, tag.trim())?;
        }
        if out.members.values().all(Vec::is_empty) {
            return Err(Error::Config("annotation file lists no hashtags".into()));
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for class in [StanceClass::Pos, StanceClass::Neg, StanceClass::Neutral] {
            for tag in self.members(class) {
                writeln!(w, "{tag}\t{class}")?;
            }
        }
        Ok(())
    }

    pub fn members(&self, class: StanceClass) -> &[String] {
        self.members.get(&class).map_or(&[], Vec::as_slice)
    }

    pub fn class_size(&self, class: StanceClass) -> usize {
        self.members(class).len()
    }

    pub fn set_usage(&mut self, counts: &InteractionCounts) {
        let usage = counts.hashtag_usage();
        self.usage = counts.hashtags.iter().cloned().zip(usage).collect();
    }

    pub fn usage(&self, tag: &str) -> f64 {
        self.usage.get(tag).copied().unwrap_or(0.0)
    }

    /// Maps annotated hashtags to corpus indices, dropping those absent
    /// from the corpus. Members are ordered by decreasing usage.
    pub fn resolve(&self, hashtags: &[String]) -> AnnotationIndex {
        let position: HashMap<&str, usize> = hashtags.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
        let mut classes = BTreeMap::new();
        for (class, list) in &self.members {
            let mut found: Vec<(usize, &String)> = Vec::new();
            for tag in list {
                match position.get(tag.as_str()) {
                    Some(&j) => found.push((j, tag)),
                    None => warn!("annotated hashtag {tag:?} does not occur in the corpus"),
                }
            }
            found.sort_by(|a, b| self.usage(b.1).total_cmp(&self.usage(a.1)).then(a.1.cmp(b.1)));
            classes.insert(*class, found.into_iter().map(|(j, _)| j).collect());
        }
        for class in StanceClass::ALL {
            if classes.get(&class).is_none_or(Vec::is_empty) {
                warn!("no {class} hashtag occurs in the corpus; the class is left out of stance decisions");
            }
        }
        AnnotationIndex { classes }
    }
}

/// Annotated hashtag indices per class, most used first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnnotationIndex {
    classes: BTreeMap<StanceClass, Vec<usize>>,
}

impl AnnotationIndex {
    pub fn new(classes: impl IntoIterator<Item = (StanceClass, Vec<usize>)>) -> Self {
        AnnotationIndex {
            classes: classes.into_iter().collect(),
        }
    }

    pub fn members(&self, class: StanceClass) -> &[usize] {
        self.classes.get(&class).map_or(&[], Vec::as_slice)
    }

    pub fn contains(&self, hashtag: usize) -> bool {
        self.classes.values().any(|v| v.contains(&hashtag))
    }

    pub fn is_empty(&self) -> bool {
        self.classes.values().all(Vec::is_empty)
    }

    /// POS and NEG only.
    pub fn binary(&self) -> AnnotationIndex {
        AnnotationIndex::new(
            [StanceClass::Neg, StanceClass::Pos]
                .into_iter()
                .map(|c| (c, self.members(c).to_vec())),
        )
    }

    /// The `x` most used POS and NEG hashtags.
    pub fn top_x(&self, x: usize) -> Result<AnnotationIndex> {
        let limit = self.members(StanceClass::Pos).len().min(self.members(StanceClass::Neg).len());
        if x == 0 || x > limit {
            return Err(Error::Bounds(format!("x = {x} outside 1..={limit}")));
        }
        Ok(AnnotationIndex::new(
            [StanceClass::Neg, StanceClass::Pos]
                .into_iter()
                .map(|c| (c, self.members(c)[..x].to_vec())),
        ))
    }
}

/// Class with the greatest mean value over its annotated hashtags; classes
/// without hashtags are skipped. `value(j)` is the score of hashtag `j`.
pub fn classify_by_mean(value: impl Fn(usize) -> f64, index: &AnnotationIndex) -> Option<StanceClass> {
    let mut best: Option<(StanceClass, f64)> = None;
    for class in StanceClass::ALL {
        let members = index.members(class);
        if members.is_empty() {
            continue;
        }
        let mean = members.iter().map(|&j| value(j)).sum::<f64>() / members.len() as f64;
        if best.is_none_or(|(_, b)| mean >= b) {
            best = Some((class, mean));
        }
    }
    best.map(|(c, _)| c)
}

/// Predicted stance from a user's affinities to all hashtags.
pub fn classify_stance(affinities: &[f64], index: &AnnotationIndex) -> Option<StanceClass> {
    classify_by_mean(|j| affinities[j], index)
}

/// Observed stance from hidden `(hashtag, weight)` edges; missing hashtags
/// count as zero.
pub fn ground_truth_stance(hidden: &[(usize, f64)], index: &AnnotationIndex) -> Option<StanceClass> {
    let weights: HashMap<usize, f64> = hidden.iter().copied().collect();
    classify_by_mean(|j| weights.get(&j).copied().unwrap_or(0.0), index)
}

/// `(accuracy, rmse)` over paired predictions.
pub fn stance_metrics(predicted: &[StanceClass], truth: &[StanceClass]) -> Result<(f64, f64)> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} labels", predicted.len(), truth.len())));
    }
    if predicted.is_empty() {
        return Err(Error::EmptyEvaluation);
    }
    let n = predicted.len() as f64;
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count() as f64;
    let mse = predicted
        .iter()
        .zip(truth)
        .map(|(p, t)| (p.numeric() - t.numeric()).powi(2))
        .sum::<f64>()
        / n;
    Ok((correct / n, mse.sqrt()))
}
