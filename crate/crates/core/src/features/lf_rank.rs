//! Leader-follower ranking.
//!
//! Nodes are sorted by `gamma = in_degree - out_degree` (descending, ties by
//! ascending id). Groups larger than `1 / alpha` are split: the first
//! `floor(alpha * n)` positions become leaders, the rest followers, each
//! part is ranked recursively on its induced subgraph, and followers are
//! placed after leaders. Rank 1 is the strongest leader.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{DifficultyNetwork, NetworkIndex};
use crate::types::QuestionId;

pub const DEFAULT_ALPHA: f64 = 0.65;

pub fn leader_follower_rank(g: &DifficultyNetwork, alpha: f64) -> Result<BTreeMap<QuestionId, u32>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let idx = g.index();
    let mut stamp = vec![0u32; idx.len()];
    let mut token = 0u32;
    let order = rank_group(&idx, (0..idx.len()).collect(), alpha, &mut stamp, &mut token);
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(pos, node)| (idx.ids[node], pos as u32 + 1))
        .collect())
}

/// Rank normalized by the node count, in `(0, 1]`.
pub fn normalized_lf_rank(g: &DifficultyNetwork, alpha: f64) -> Result<BTreeMap<QuestionId, f64>> {
    let n = g.node_count() as f64;
    Ok(leader_follower_rank(g, alpha)?
        .into_iter()
        .map(|(q, r)| (q, f64::from(r) / n))
        .collect())
}

/// Returns the group's nodes in rank order.
fn rank_group(idx: &NetworkIndex, group: Vec<usize>, alpha: f64, stamp: &mut [u32], token: &mut u32) -> Vec<usize> {
    if group.len() <= 1 {
        return group;
    }
    *token += 1;
    let tok = *token;
    for &v in &group {
        stamp[v] = tok;
    }
    let mut keyed: Vec<(i64, usize)> = group
        .iter()
        .map(|&v| {
            let ins = idx.inn[v].iter().filter(|&&u| stamp[u] == tok).count() as i64;
            let outs = idx.out[v].iter().filter(|&&u| stamp[u] == tok).count() as i64;
            (ins - outs, v)
        })
        .collect();
    // Dense positions follow ascending question id, so `v` is the id tie-break.
    keyed.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let sorted: Vec<usize> = keyed.into_iter().map(|(_, v)| v).collect();

    let n = sorted.len();
    if n as f64 <= 1.0 / alpha {
        return sorted;
    }
    let n_leaders = (alpha * n as f64).floor() as usize;
    let mut sorted = sorted;
    let followers = sorted.split_off(n_leaders);
    let mut out = rank_group(idx, sorted, alpha, stamp, token);
    out.extend(rank_group(idx, followers, alpha, stamp, token));
    out
}
