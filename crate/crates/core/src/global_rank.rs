//! Absolute easy/medium/hard levels from a sampled tournament of pair
//! predictions, and the transitivity audit of pair predictions.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{pagerank_scores, ScoreSource, ScoreTable};
use crate::error::{Error, Result};
use crate::graph::{DifficultyNetwork, EdgeType, NetworkParams, TypeSet};
use crate::model::PairJudge;
use crate::types::QuestionId;

/// Largest number of cut candidates per side of the threshold grid.
const MAX_CUT_CANDIDATES: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Easy,
    Medium,
    Hard,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Easy, Level::Medium, Level::Hard];

    pub fn name(self) -> &'static str {
        match self {
            Level::Easy => "easy",
            Level::Medium => "medium",
            Level::Hard => "hard",
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Level {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Level::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidParameter(format!("unknown level {s:?}")))
    }
}

fn sample_pairs(nodes: &[QuestionId], n_samples: usize, rng: &mut ChaCha8Rng) -> Vec<(QuestionId, QuestionId)> {
    let mut seen = HashSet::with_capacity(n_samples);
    let mut pairs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let picked = index::sample(rng, nodes.len(), 2);
        let (a, b) = (nodes[picked.index(0)], nodes[picked.index(1)]);
        if seen.insert((a.min(b), a.max(b))) {
            pairs.push((a, b));
        }
    }
    pairs
}

/// Draw `n_samples` random pairs of distinct nodes (repeats dropped) and
/// orient each from the easier to the harder question by `judge`.
pub fn sample_tournament(
    judge: &dyn PairJudge,
    nodes: &[QuestionId],
    n_samples: usize,
    seed: u64,
) -> Result<DifficultyNetwork> {
    if n_samples == 0 {
        return Err(Error::InvalidParameter("at least one sample is needed".into()));
    }
    if nodes.len() < 2 {
        return Err(Error::InvalidParameter("a tournament needs two nodes".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = sample_pairs(nodes, n_samples, &mut rng);
    let oriented: Vec<(QuestionId, QuestionId)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            let v = judge.judge(a, b)?;
            Ok(if v.harder == b { (a, b) } else { (b, a) })
        })
        .collect::<Result<_>>()?;
    let mut g = DifficultyNetwork::new(nodes.iter().copied(), NetworkParams::default());
    for (easy, hard) in oriented {
        g.add_edge(easy, hard, TypeSet::single(EdgeType::External))?;
    }
    Ok(g)
}

/// Standard PageRank over the tournament; higher is harder.
pub fn global_scores(tournament: &DifficultyNetwork) -> Result<ScoreTable> {
    let t = pagerank_scores(tournament, 0.85)?;
    ScoreTable::new(t.scores, ScoreSource::TournamentPR)
}

/// Two cut points: `s < cut1` is easy, `cut1 <= s < cut2` medium, the rest hard.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub cut1: f64,
    pub cut2: f64,
    /// Macro-F1 reached on the training labels.
    pub train_macro_f1: f64,
}

impl Thresholds {
    pub fn level(&self, s: f64) -> Level {
        if s < self.cut1 {
            Level::Easy
        } else if s < self.cut2 {
            Level::Medium
        } else {
            Level::Hard
        }
    }

    pub fn apply(&self, scores: &ScoreTable) -> BTreeMap<QuestionId, Level> {
        scores.scores.iter().map(|(q, s)| (*q, self.level(*s))).collect()
    }
}

/// Macro-F1 averaged over the levels present in `truth`.
pub fn macro_f1(truth: &[Level], predicted: &[Level]) -> f64 {
    let present: Vec<Level> = Level::ALL.into_iter().filter(|l| truth.contains(l)).collect();
    if present.is_empty() {
        return 0.0;
    }
    let total: f64 = present
        .iter()
        .map(|&l| {
            let tp = truth
                .iter()
                .zip(predicted)
                .filter(|(t, p)| **t == l && **p == l)
                .count() as f64;
            let pp = predicted.iter().filter(|p| **p == l).count() as f64;
            let ap = truth.iter().filter(|t| **t == l).count() as f64;
            if tp == 0.0 {
                0.0
            } else {
                2.0 * tp / (pp + ap)
            }
        })
        .sum();
    total / present.len() as f64
}

/// Cut candidates: below everything, every midpoint between consecutive
/// distinct training scores, above everything. Thinned to evenly spaced
/// quantiles when there are too many.
fn cut_candidates(sorted: &[f64]) -> Vec<f64> {
    let mut distinct: Vec<f64> = sorted.to_vec();
    distinct.dedup();
    let mut cuts = Vec::with_capacity(distinct.len() + 1);
    cuts.push(f64::NEG_INFINITY);
    cuts.extend(distinct.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    cuts.push(f64::INFINITY);
    if cuts.len() > MAX_CUT_CANDIDATES {
        let last = cuts.len() - 1;
        let thinned: Vec<f64> = (0..MAX_CUT_CANDIDATES)
            .map(|i| cuts[i * last / (MAX_CUT_CANDIDATES - 1)])
            .collect();
        cuts = thinned;
        cuts.dedup();
    }
    cuts
}

/// Choose the cut pair maximizing training macro-F1 over the grid of
/// candidates; the first maximum in `(cut1, cut2)` order wins.
pub fn fit_thresholds(scores: &ScoreTable, training: &[(QuestionId, Level)]) -> Result<Thresholds> {
    let mut rows: Vec<(f64, Level)> = training
        .iter()
        .map(|(q, l)| scores.get(*q).map(|s| (s, *l)).ok_or(Error::UnknownQuestion(*q)))
        .collect::<Result<_>>()?;
    if rows.is_empty() {
        return Err(Error::Degenerate("no training labels".into()));
    }
    if rows.iter().all(|r| r.1 == rows[0].1) {
        return Err(Error::Degenerate("all training labels share one level".into()));
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let cuts = cut_candidates(&sorted);
    // prefix[k][l]: number of rows among the first k with level l.
    let mut prefix = vec![[0usize; 3]; rows.len() + 1];
    for (i, r) in rows.iter().enumerate() {
        prefix[i + 1] = prefix[i];
        prefix[i + 1][r.1 as usize] += 1;
    }
    let totals = prefix[rows.len()];
    let present: Vec<usize> = (0..3).filter(|&l| totals[l] > 0).collect();
    let below = |c: f64| sorted.partition_point(|&s| s < c);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    for (i, &c1) in cuts.iter().enumerate() {
        let k1 = below(c1);
        for &c2 in &cuts[i..] {
            let k2 = below(c2);
            let ranges = [(0, k1), (k1, k2), (k2, rows.len())];
            let f: f64 = present
                .iter()
                .map(|&l| {
                    let (lo, hi) = ranges[l];
                    let tp = prefix[hi][l] - prefix[lo][l];
                    if tp == 0 {
                        0.0
                    } else {
                        2.0 * tp as f64 / ((hi - lo) + totals[l]) as f64
                    }
                })
                .sum::<f64>()
                / present.len() as f64;
            if f > best.0 {
                best = (f, c1, c2);
            }
        }
    }
    Ok(Thresholds {
        cut1: best.1,
        cut2: best.2,
        train_macro_f1: best.0,
    })
}

/// Fit thresholds on `training` and label every scored question.
pub fn threshold_levels(
    scores: &ScoreTable,
    training: &[(QuestionId, Level)],
) -> Result<(Thresholds, BTreeMap<QuestionId, Level>)> {
    let t = fit_thresholds(scores, training)?;
    Ok((t, t.apply(scores)))
}

/// Held-out macro-F1 over `folds` seeded folds, thresholds fitted on the
/// remaining folds each time. Returns the per-fold scores.
pub fn cross_validate_levels(
    scores: &ScoreTable,
    labels: &[(QuestionId, Level)],
    folds: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if folds < 2 || folds > labels.len() {
        return Err(Error::InvalidParameter(format!(
            "cannot split {} labels into {folds} folds",
            labels.len()
        )));
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    (0..folds)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| i % folds == f);
            let train: Vec<(QuestionId, Level)> = train.iter().map(|&i| labels[order[i]]).collect();
            let t = fit_thresholds(scores, &train)?;
            let truth: Vec<Level> = test.iter().map(|&i| labels[order[i]].1).collect();
            let pred: Vec<Level> = test
                .iter()
                .map(|&i| {
                    scores
                        .get(labels[order[i]].0)
                        .map(|s| t.level(s))
                        .ok_or(Error::UnknownQuestion(labels[order[i]].0))
                })
                .collect::<Result<_>>()?;
            Ok(macro_f1(&truth, &pred))
        })
        .collect()
}

/// A tournament is acyclic exactly when its out-degrees are 0, 1, ..., n-1.
fn has_cycle(wins: &mut [usize]) -> bool {
    wins.sort_unstable();
    wins.iter().enumerate().any(|(i, &w)| i != w)
}

/// Fraction of `trials` random node sets of size `n` whose pairwise
/// predictions contain a directed cycle.
pub fn cycle_rate(judge: &dyn PairJudge, nodes: &[QuestionId], n: usize, trials: usize, seed: u64) -> Result<f64> {
    if n < 2 || n > nodes.len() {
        return Err(Error::InvalidParameter(format!(
            "cycle length {n} needs 2..={} nodes",
            nodes.len()
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is needed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets: Vec<Vec<QuestionId>> = (0..trials)
        .map(|_| {
            index::sample(&mut rng, nodes.len(), n)
                .into_iter()
                .map(|i| nodes[i])
                .collect()
        })
        .collect();
    let cyclic = sets
        .par_iter()
        .map(|set| {
            let mut wins = vec![0usize; n];
            for i in 0..n {
                for j in i + 1..n {
                    let v = judge.judge(set[i], set[j])?;
                    wins[if v.harder == set[i] { i } else { j }] += 1;
                }
            }
            Ok(has_cycle(&mut wins))
        })
        .collect::<Result<Vec<bool>>>()?;
    Ok(cyclic.iter().filter(|&&c| c).count() as f64 / trials as f64)
}

/// Deterministic fair coin per unordered pair, for audits and tests.
pub struct CoinJudge {
    pub seed: u64,
}

impl PairJudge for CoinJudge {
    fn judge(&self, a: QuestionId, b: QuestionId) -> Result<crate::model::Verdict> {
        let (lo, hi) = (a.min(b), a.max(b));
        let mut rng =
            ChaCha8Rng::seed_from_u64(self.seed ^ lo.0.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ hi.0.rotate_left(29));
        let harder = if rng.gen_bool(0.5) { hi } else { lo };
        let margin = if harder == b { 1.0 } else { -1.0 };
        Ok(crate::model::Verdict {
            harder,
            confidence: 0.5,
            margin,
        })
    }
}
