//! Regularized competition model: one expertise score per question, pushed
//! apart along edges by a hinge margin and pulled together for textually
//! similar questions.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use super::{ScoreSource, ScoreTable};
use crate::error::{Error, Result};
use crate::graph::DifficultyNetwork;
use crate::ingest::Dataset;
use crate::text::Analyzer;
use crate::types::QuestionId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RcmParams {
    /// Neighbors kept per question for the smoothness term.
    pub k: usize,
    pub delta: f64,
    pub gamma: f64,
    pub iterations: usize,
}

impl Default for RcmParams {
    fn default() -> Self {
        RcmParams {
            k: 10,
            delta: 1.0,
            gamma: 0.001,
            iterations: 1000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RcmState {
    /// Node ids of the graph, ascending; `theta[i]` belongs to `ids[i]`.
    pub ids: Vec<QuestionId>,
    pub theta: Vec<f64>,
    pub margin_delta: f64,
    pub gamma: f64,
    /// Symmetric similarity weights, stored once per pair with `i < j`.
    pub sim_weights: BTreeMap<(usize, usize), f64>,
    /// Full objective before the first step and after every step.
    pub objective: Vec<f64>,
}

impl RcmState {
    pub fn scores(&self) -> Result<ScoreTable> {
        ScoreTable::new(
            self.ids.iter().copied().zip(self.theta.iter().copied()).collect(),
            ScoreSource::Rcm,
        )
    }
}

/// Stemmed unigrams of title, body and tags.
pub fn question_term_sets(ds: &Dataset) -> BTreeMap<QuestionId, BTreeSet<String>> {
    let analyzer = Analyzer::default();
    ds.questions
        .values()
        .map(|q| (q.question_id, analyzer.term_set(&q.full_text())))
        .collect()
}

fn jaccard(a: &[u32], b: &[u32]) -> f64 {
    let (mut i, mut j, mut inter) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                inter += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Jaccard weights over each node's top-`k` neighbors (ties by ascending
/// id, zero similarities dropped), symmetrized by union.
fn similarity_weights(
    ids: &[QuestionId],
    texts: &BTreeMap<QuestionId, BTreeSet<String>>,
    k: usize,
) -> BTreeMap<(usize, usize), f64> {
    let mut vocab: HashMap<&str, u32> = HashMap::new();
    let sets: Vec<Vec<u32>> = ids
        .iter()
        .map(|q| {
            let mut v: Vec<u32> = texts
                .get(q)
                .into_iter()
                .flatten()
                .map(|t| {
                    let next = vocab.len() as u32;
                    *vocab.entry(t.as_str()).or_insert(next)
                })
                .collect();
            v.sort_unstable();
            v
        })
        .collect();
    let mut postings: Vec<Vec<usize>> = vec![Vec::new(); vocab.len()];
    for (i, s) in sets.iter().enumerate() {
        for &t in s {
            postings[t as usize].push(i);
        }
    }
    let neighbors: Vec<Vec<(usize, f64)>> = (0..ids.len())
        .into_par_iter()
        .map(|i| {
            let mut cands: Vec<usize> = sets[i]
                .iter()
                .flat_map(|&t| postings[t as usize].iter().copied())
                .filter(|&j| j != i)
                .collect();
            cands.sort_unstable();
            cands.dedup();
            let mut scored: Vec<(usize, f64)> = cands
                .into_iter()
                .map(|j| (j, jaccard(&sets[i], &sets[j])))
                .filter(|p| p.1 > 0.0)
                .collect();
            scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            scored.truncate(k);
            scored
        })
        .collect();
    let mut w = BTreeMap::new();
    for (i, ns) in neighbors.into_iter().enumerate() {
        for (j, s) in ns {
            w.insert((i.min(j), i.max(j)), s);
        }
    }
    w
}

struct Problem<'a> {
    edges: &'a [(usize, usize)],
    weights: &'a BTreeMap<(usize, usize), f64>,
    delta: f64,
}

impl Problem<'_> {
    fn objective(&self, theta: &[f64]) -> f64 {
        let hinge: f64 = self
            .edges
            .iter()
            .map(|&(i, j)| (self.delta - (theta[j] - theta[i])).max(0.0))
            .sum();
        let smooth: f64 = self
            .weights
            .iter()
            .map(|(&(i, j), w)| w * (theta[j] - theta[i]).powi(2))
            .sum();
        hinge + smooth
    }

    fn subgradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; theta.len()];
        for &(i, j) in self.edges {
            if self.delta - (theta[j] - theta[i]) > 0.0 {
                g[i] += 1.0;
                g[j] -= 1.0;
            }
        }
        for (&(i, j), w) in self.weights {
            let d = 2.0 * w * (theta[j] - theta[i]);
            g[j] += d;
            g[i] -= d;
        }
        g
    }
}

/// Subgradient descent `theta <- theta - gamma * g` from zero. A step that
/// would raise the objective is halved until it does not (at most 30
/// times); if none helps, the iteration stops.
pub fn rcm_train(
    g: &DifficultyNetwork,
    texts: &BTreeMap<QuestionId, BTreeSet<String>>,
    params: &RcmParams,
) -> Result<RcmState> {
    if params.iterations == 0 {
        return Err(Error::InvalidParameter("RCM needs at least one iteration".into()));
    }
    if !(params.delta > 0.0) || !(params.gamma > 0.0) {
        return Err(Error::InvalidParameter("RCM delta and gamma must be positive".into()));
    }
    let idx = g.index();
    let edges: Vec<(usize, usize)> = g.edges().map(|e| (idx.pos[&e.from], idx.pos[&e.to])).collect();
    let weights = similarity_weights(&idx.ids, texts, params.k);
    let problem = Problem {
        edges: &edges,
        weights: &weights,
        delta: params.delta,
    };
    let mut theta = vec![0.0; idx.len()];
    let mut current = problem.objective(&theta);
    let mut objective = vec![current];
    'outer: for _ in 0..params.iterations {
        let grad = problem.subgradient(&theta);
        if grad.iter().all(|&x| x == 0.0) {
            break;
        }
        let mut step = params.gamma;
        for _ in 0..=30 {
            let cand: Vec<f64> = theta.iter().zip(&grad).map(|(t, d)| t - step * d).collect();
            let value = problem.objective(&cand);
            if value <= current {
                theta = cand;
                current = value;
                objective.push(current);
                continue 'outer;
            }
            step /= 2.0;
        }
        break;
    }
    Ok(RcmState {
        ids: idx.ids,
        theta,
        margin_delta: params.delta,
        gamma: params.gamma,
        sim_weights: weights,
        objective,
    })
}
