//! Reputation-seeded PageRank:
//! `PR(q) = (1 - d) * r_q + d * sum_{j -> q} PR(j) / outdeg(j)`.
//!
//! The teleport term is not normalized and mass at dangling nodes is simply
//! dropped; with `d < 1` the map is still a contraction.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::DifficultyNetwork;
use crate::ingest::Dataset;
use crate::types::QuestionId;

pub const DEFAULT_DAMPING: f64 = 0.85;
pub const TOLERANCE: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;

#[derive(Clone, Debug)]
pub struct PageRankOutcome {
    pub scores: BTreeMap<QuestionId, f64>,
    pub iterations: usize,
    /// `max |F(PR) - PR|` at the returned scores.
    pub residual: f64,
}

/// Asker reputation divided by the dataset's maximum reputation; anonymous
/// askers get 0.
pub fn asker_reputations(ds: &Dataset, g: &DifficultyNetwork) -> BTreeMap<QuestionId, f64> {
    let max = ds.max_reputation() as f64;
    g.nodes()
        .iter()
        .map(|&q| {
            let r = ds
                .question(q)
                .and_then(|q| q.owner)
                .and_then(|u| ds.users.get(&u))
                .map(|u| if max > 0.0 { u.reputation as f64 / max } else { 0.0 })
                .unwrap_or(0.0);
            (q, r)
        })
        .collect()
}

pub fn reputation_pagerank(
    g: &DifficultyNetwork,
    reputations: &BTreeMap<QuestionId, f64>,
    damping: f64,
) -> Result<PageRankOutcome> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "damping must be in (0, 1), got {damping}"
        )));
    }
    let idx = g.index();
    let r: Vec<f64> = idx
        .ids
        .iter()
        .map(|q| {
            let v = reputations.get(q).copied().unwrap_or(0.0);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::InvalidParameter(format!("non-finite reputation for {q}")))
            }
        })
        .collect::<Result<_>>()?;
    let out_deg: Vec<f64> = idx.out.iter().map(|o| o.len() as f64).collect();
    let step = |pr: &[f64], next: &mut [f64]| {
        for (i, slot) in next.iter_mut().enumerate() {
            let inflow: f64 = idx.inn[i].iter().map(|&j| pr[j] / out_deg[j]).sum();
            *slot = (1.0 - damping) * r[i] + damping * inflow;
        }
    };

    let mut pr = r.clone();
    let mut next = vec![0.0; pr.len()];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        step(&pr, &mut next);
        iterations += 1;
        let delta = max_abs_diff(&pr, &next);
        std::mem::swap(&mut pr, &mut next);
        if delta < TOLERANCE {
            break;
        }
    }
    step(&pr, &mut next);
    let residual = max_abs_diff(&pr, &next);
    Ok(PageRankOutcome {
        scores: idx.ids.iter().copied().zip(pr).collect(),
        iterations,
        residual,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeType, NetworkParams, TypeSet};

    fn net(n: u64, edges: &[(u64, u64)]) -> DifficultyNetwork {
        let mut g = DifficultyNetwork::new((1..=n).map(QuestionId), NetworkParams::default());
        for &(a, b) in edges {
            g.add_edge(QuestionId(a), QuestionId(b), TypeSet::single(EdgeType::Type3))
                .unwrap();
        }
        g
    }

    fn ones(n: u64) -> BTreeMap<QuestionId, f64> {
        (1..=n).map(|i| (QuestionId(i), 1.0)).collect()
    }

    #[test]
    fn isolated_node() {
        let out = reputation_pagerank(&net(1, &[]), &ones(1), 0.85).unwrap();
        assert!((out.scores[&QuestionId(1)] - 0.15).abs() < 1e-10);
    }

    #[test]
    fn two_node_chain() {
        let out = reputation_pagerank(&net(2, &[(1, 2)]), &ones(2), 0.85).unwrap();
        assert!((out.scores[&QuestionId(1)] - 0.15).abs() < 1e-8);
        assert!((out.scores[&QuestionId(2)] - 0.2775).abs() < 1e-8);
        assert!(out.residual < 1e-8);
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut r = ones(1);
        r.insert(QuestionId(1), f64::NAN);
        assert!(reputation_pagerank(&net(1, &[]), &r, 0.85).is_err());
        assert!(reputation_pagerank(&net(1, &[]), &ones(1), 1.0).is_err());
    }
}
