use std::collections::{BTreeMap, BTreeSet};

use super::{ScoreSource, ScoreTable};
use crate::error::{Error, Result};
use crate::graph::{DifficultyNetwork, EdgeType, NetworkParams, TypeSet};
use crate::ingest::Dataset;
use crate::types::{QuestionId, UserId};

const TOLERANCE: f64 = 1e-12;
const MAX_ITERATIONS: usize = 1000;

/// For every user, an edge from each question they answered without being
/// accepted to each question where their answer was accepted. Nodes are all
/// questions of `ds`.
pub fn build_acceptance_graph(ds: &Dataset) -> DifficultyNetwork {
    let mut accepted: BTreeMap<UserId, BTreeSet<QuestionId>> = BTreeMap::new();
    let mut answered: BTreeMap<UserId, BTreeSet<QuestionId>> = BTreeMap::new();
    for a in ds.answers.values() {
        let Some(u) = a.owner else { continue };
        answered.entry(u).or_default().insert(a.parent_question);
        if a.is_accepted {
            accepted.entry(u).or_default().insert(a.parent_question);
        }
    }
    let params = NetworkParams {
        bucket_width_weeks: ds.bucket_width_weeks,
        ..NetworkParams::default()
    };
    let mut g = DifficultyNetwork::new(ds.questions.keys().copied(), params);
    let tag = TypeSet::single(EdgeType::External);
    for (u, wins) in &accepted {
        for &lost in answered[u].difference(wins) {
            for &won in wins {
                g.add_edge(lost, won, tag).expect("both questions are nodes");
            }
        }
    }
    g
}

/// Standard PageRank with uniform teleport; dangling mass is spread
/// uniformly. Higher score is harder.
pub fn pagerank_scores(g: &DifficultyNetwork, damping: f64) -> Result<ScoreTable> {
    if !(0.0..1.0).contains(&damping) {
        return Err(Error::InvalidParameter(format!("damping {damping} outside [0, 1)")));
    }
    let idx = g.index();
    let n = idx.len();
    if n == 0 {
        return ScoreTable::new(BTreeMap::new(), ScoreSource::PageRankBaseline);
    }
    let nf = n as f64;
    let mut pr = vec![1.0 / nf; n];
    let mut next = vec![0.0; n];
    for _ in 0..MAX_ITERATIONS {
        let dangling: f64 = (0..n).filter(|&i| idx.out[i].is_empty()).map(|i| pr[i]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        next.iter_mut().for_each(|x| *x = base);
        for i in 0..n {
            let out = &idx.out[i];
            if !out.is_empty() {
                let share = damping * pr[i] / out.len() as f64;
                for &j in out {
                    next[j] += share;
                }
            }
        }
        let change: f64 = pr.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut pr, &mut next);
        if change < TOLERANCE {
            break;
        }
    }
    let scores = idx.ids.iter().copied().zip(pr).collect();
    ScoreTable::new(scores, ScoreSource::PageRankBaseline)
}
