use super::{ScoreSource, ScoreTable};
use crate::error::Result;
use crate::graph::DifficultyNetwork;

const TOLERANCE: f64 = 1e-10;
const MAX_ITERATIONS: usize = 100_000;

#[derive(Clone, Debug)]
pub struct HitsOutcome {
    /// Authority scores; higher is harder.
    pub authorities: ScoreTable,
    pub hubs: ScoreTable,
    pub iterations: usize,
    pub residual: f64,
    /// Set when the graph has no edges and every score is zero.
    pub degenerate: bool,
}

fn normalize(v: &mut [f64]) -> bool {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

/// Hub and authority power iteration from all-ones hubs, L2 normalized each
/// round, until both vectors move less than 1e-10 (max norm).
pub fn hits_authority(g: &DifficultyNetwork) -> Result<HitsOutcome> {
    let idx = g.index();
    let n = idx.len();
    let mut hub = vec![1.0; n];
    let mut auth = vec![0.0; n];
    let mut iterations = 0;
    let mut residual = 0.0;
    let degenerate = g.edge_count() == 0;
    if !degenerate {
        normalize(&mut hub);
        loop {
            iterations += 1;
            let mut next_auth = vec![0.0; n];
            for (i, out) in idx.out.iter().enumerate() {
                for &j in out {
                    next_auth[j] += hub[i];
                }
            }
            normalize(&mut next_auth);
            let mut next_hub: Vec<f64> = idx
                .out
                .iter()
                .map(|out| out.iter().map(|&j| next_auth[j]).sum())
                .collect();
            normalize(&mut next_hub);
            residual = auth
                .iter()
                .zip(&next_auth)
                .chain(hub.iter().zip(&next_hub))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            auth = next_auth;
            hub = next_hub;
            if residual < TOLERANCE || iterations >= MAX_ITERATIONS {
                break;
            }
        }
    }
    let table = |v: Vec<f64>| ScoreTable::new(idx.ids.iter().copied().zip(v).collect(), ScoreSource::Hits);
    Ok(HitsOutcome {
        authorities: table(auth)?,
        hubs: table(hub)?,
        iterations,
        residual,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeType, NetworkParams, TypeSet};
    use crate::types::QuestionId;

    fn graph(n: u64, edges: &[(u64, u64)]) -> DifficultyNetwork {
        let mut g = DifficultyNetwork::new((1..=n).map(QuestionId), NetworkParams::default());
        for &(a, b) in edges {
            g.add_edge(QuestionId(a), QuestionId(b), TypeSet::single(EdgeType::Type1))
                .unwrap();
        }
        g
    }

    #[test]
    fn single_edge_fixed_point() {
        let out = hits_authority(&graph(2, &[(1, 2)])).unwrap();
        assert_eq!(out.authorities.get(QuestionId(2)), Some(1.0));
        assert_eq!(out.authorities.get(QuestionId(1)), Some(0.0));
        assert_eq!(out.hubs.get(QuestionId(1)), Some(1.0));
        assert!(!out.degenerate);
    }

    #[test]
    fn empty_graph_is_degenerate() {
        let out = hits_authority(&graph(3, &[])).unwrap();
        assert!(out.degenerate);
        assert!(out.authorities.scores.values().all(|&s| s == 0.0));
    }

    #[test]
    fn authorities_are_unit_and_non_negative() {
        let out = hits_authority(&graph(5, &[(1, 2), (3, 2), (2, 4), (5, 4), (1, 4)])).unwrap();
        let a: Vec<f64> = out.authorities.scores.values().copied().collect();
        assert!(a.iter().all(|&x| x >= 0.0));
        assert!((a.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(out.residual < 1e-10);
    }
}
