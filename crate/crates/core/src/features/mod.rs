//! Node scores and the ordered-pair feature vector.
//!
//! For a pair `(a, b)` the vector interleaves one slot for `a` and one for
//! `b` per score, in this order: leader-follower rank, reputation PageRank,
//! undirected degree, accepted-answer delay, asker's prior accepted answers,
//! best reference-passage similarity of the accepted answer.

mod lf_rank;
mod node;
mod pagerank;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::DifficultyNetwork;
use crate::ingest::Dataset;
use crate::types::{QuestionId, Timestamp};

pub use lf_rank::{leader_follower_rank, normalized_lf_rank, DEFAULT_ALPHA};
pub use node::{
    accepted_count_feature, degree_feature, degrees, normalize_counts, prior_accepted_counts, textual_feature,
    time_decay_feature, ReferenceCorpus,
};
pub use pagerank::{asker_reputations, reputation_pagerank, PageRankOutcome, DEFAULT_DAMPING};

pub const CACHE_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeScores {
    pub lf_rank: f64,
    pub pagerank: f64,
    pub degree: u32,
    pub time_decay: f64,
    pub accepted_count: f64,
    pub text_sim: f64,
    /// Posting time, kept for the later-posted tie-break.
    pub posted_at: Timestamp,
}

impl NodeScores {
    fn pair_values(&self) -> [f64; 6] {
        [
            self.lf_rank,
            self.pagerank,
            f64::from(self.degree),
            self.time_decay,
            self.accepted_count,
            self.text_sim,
        ]
    }
}

/// One `(a, b)` slot pair of the feature vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeaturePair {
    LeaderFollower,
    PageRank,
    Degree,
    TimeDecay,
    AcceptedCount,
    Textual,
}

impl FeaturePair {
    pub const ALL: [FeaturePair; 6] = [
        FeaturePair::LeaderFollower,
        FeaturePair::PageRank,
        FeaturePair::Degree,
        FeaturePair::TimeDecay,
        FeaturePair::AcceptedCount,
        FeaturePair::Textual,
    ];

    fn index(self) -> usize {
        self as usize
    }

    /// `F1F2`, `F3F4`, ...
    pub fn label(self) -> &'static str {
        ["F1F2", "F3F4", "F5F6", "F7F8", "F9F10", "F11F12"][self.index()]
    }
}

impl FromStr for FeaturePair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FeaturePair::ALL
            .into_iter()
            .find(|p| p.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown feature pair {s:?}")))
    }
}

impl fmt::Display for FeaturePair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which slot pairs are active; bit `i` is `FeaturePair::ALL[i]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FeatureMask(u8);

impl Default for FeatureMask {
    fn default() -> Self {
        FeatureMask::ALL
    }
}

impl FeatureMask {
    pub const ALL: FeatureMask = FeatureMask(0b11_1111);

    pub fn from_bits(bits: u8) -> Result<FeatureMask> {
        if bits == 0 || bits & !FeatureMask::ALL.0 != 0 {
            return Err(Error::InvalidParameter(format!("invalid feature mask {bits:#b}")));
        }
        Ok(FeatureMask(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn without(self, pair: FeaturePair) -> FeatureMask {
        FeatureMask(self.0 & !(1 << pair.index()))
    }

    pub fn contains(self, pair: FeaturePair) -> bool {
        self.0 & (1 << pair.index()) != 0
    }

    pub fn dimension(self) -> usize {
        2 * self.0.count_ones() as usize
    }
}

/// Feature vector of an ordered pair: the active slot pairs in canonical
/// order, each as `[value(a), value(b)]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PairFeatureVector(pub Vec<f64>);

impl PairFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct NodeScoreCache {
    pub scores: BTreeMap<QuestionId, NodeScores>,
}

impl NodeScoreCache {
    pub fn get(&self, q: QuestionId) -> Option<&NodeScores> {
        self.scores.get(&q)
    }

    pub fn contains(&self, q: QuestionId) -> bool {
        self.scores.contains_key(&q)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn posted_at(&self, q: QuestionId) -> Option<Timestamp> {
        self.scores.get(&q).map(|s| s.posted_at)
    }

    pub fn ids(&self) -> impl Iterator<Item = QuestionId> + '_ {
        self.scores.keys().copied()
    }
}

pub fn assemble_pair(cache: &NodeScoreCache, a: QuestionId, b: QuestionId) -> Result<PairFeatureVector> {
    assemble_pair_masked(cache, FeatureMask::ALL, a, b)
}

pub fn assemble_pair_masked(
    cache: &NodeScoreCache,
    mask: FeatureMask,
    a: QuestionId,
    b: QuestionId,
) -> Result<PairFeatureVector> {
    if a == b {
        return Err(Error::InvalidParameter(format!("pair of identical questions {a}")));
    }
    let sa = cache.get(a).ok_or(Error::UnknownQuestion(a))?.pair_values();
    let sb = cache.get(b).ok_or(Error::UnknownQuestion(b))?.pair_values();
    let mut out = Vec::with_capacity(mask.dimension());
    for p in FeaturePair::ALL {
        if mask.contains(p) {
            out.push(sa[p.index()]);
            out.push(sb[p.index()]);
        }
    }
    Ok(PairFeatureVector(out))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureConfig {
    pub alpha: f64,
    pub damping: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            alpha: DEFAULT_ALPHA,
            damping: DEFAULT_DAMPING,
        }
    }
}

/// Compute every node score of `g`. Without a corpus the textual scores are 0.
pub fn compute_cache(
    ds: &Dataset,
    g: &DifficultyNetwork,
    corpus: Option<&ReferenceCorpus>,
    cfg: &FeatureConfig,
) -> Result<NodeScoreCache> {
    if let Some(c) = corpus {
        if c.is_empty() {
            return Err(Error::InvalidParameter(
                "textual features need a non-empty reference corpus".into(),
            ));
        }
    }
    let lf = normalized_lf_rank(g, cfg.alpha)?;
    let pr = reputation_pagerank(g, &asker_reputations(ds, g), cfg.damping)?;
    let deg = degrees(g);
    let accepted = normalize_counts(&prior_accepted_counts(ds));

    let nodes: Vec<QuestionId> = g.nodes().iter().copied().collect();
    let scores = nodes
        .par_iter()
        .map(|&q| {
            let rec = ds.question(q).ok_or(Error::UnknownQuestion(q))?;
            let acc = ds.accepted_answer(rec);
            let text_sim = match corpus {
                Some(c) => textual_feature(acc, c)?,
                None => 0.0,
            };
            Ok((
                q,
                NodeScores {
                    lf_rank: lf[&q],
                    pagerank: pr.scores[&q],
                    degree: deg[&q],
                    time_decay: time_decay_feature(rec, acc)?,
                    accepted_count: accepted.get(&q).copied().unwrap_or(0.0),
                    text_sim,
                    posted_at: rec.created_at,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(NodeScoreCache {
        scores: scores.into_iter().collect(),
    })
}

/// Text form: a `#qdiff-cache<TAB>1` header, then one line per node,
/// `qid f1 f3 f5 f7 f9 f11 posted_at`, space separated, ascending id.
pub fn write_cache<W: Write>(cache: &NodeScoreCache, mut w: W) -> Result<()> {
    writeln!(w, "#qdiff-cache\t{CACHE_FORMAT_VERSION}")?;
    for (q, s) in &cache.scores {
        writeln!(
            w,
            "{q} {} {} {} {} {} {} {}",
            s.lf_rank, s.pagerank, s.degree, s.time_decay, s.accepted_count, s.text_sim, s.posted_at
        )?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_cache<R: BufRead>(r: R) -> Result<NodeScoreCache> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Corrupt("empty cache file".into()))??;
    let version: u32 = header
        .strip_prefix("#qdiff-cache\t")
        .and_then(|v| v.trim().parse().ok())
        .ok_or_else(|| Error::Corrupt(format!("not a cache file: {header:?}")))?;
    if version != CACHE_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: CACHE_FORMAT_VERSION,
        });
    }
    let mut scores = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 8 {
            return Err(Error::malformed(
                line_no,
                format!("expected 8 columns, got {}", f.len()),
            ));
        }
        let real = |k: usize| -> Result<f64> {
            f[k].parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::malformed(line_no, format!("bad value {:?}", f[k])))
        };
        let q: QuestionId = f[0].parse().map_err(|_| Error::malformed(line_no, "bad question id"))?;
        let s = NodeScores {
            lf_rank: real(1)?,
            pagerank: real(2)?,
            degree: f[3].parse().map_err(|_| Error::malformed(line_no, "bad degree"))?,
            time_decay: real(4)?,
            accepted_count: real(5)?,
            text_sim: real(6)?,
            posted_at: f[7].parse().map_err(|_| Error::malformed(line_no, "bad timestamp"))?,
        };
        scores.insert(q, s);
    }
    Ok(NodeScoreCache { scores })
}
