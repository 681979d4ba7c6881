//! Edge builders, one per hypothesis, and their union.
//!
//! Answer time is identified with the answered question's bucket; only
//! correct answers (accepted or positively scored) between two distinct,
//! known users generate type 1 and type 2 edges.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use super::{DifficultyNetwork, EdgeType, NetworkParams, TypeSet};
use crate::error::{Error, Result};
use crate::ingest::{Dataset, QuestionRecord};
use crate::types::{QuestionId, UserId};

pub type EdgeSet = BTreeSet<(QuestionId, QuestionId)>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Hypotheses {
    pub h1: bool,
    pub h2: bool,
    pub h3: bool,
}

impl Default for Hypotheses {
    fn default() -> Self {
        Hypotheses {
            h1: true,
            h2: true,
            h3: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BuildParams {
    /// Recency window of type 2 edges, in buckets.
    pub delta_t: u32,
    pub hypotheses: Hypotheses,
}

impl Default for BuildParams {
    fn default() -> Self {
        BuildParams {
            delta_t: 1,
            hypotheses: Hypotheses::default(),
        }
    }
}

/// `(answered question, answerer)` for every correct answer between distinct users.
fn correct_answer_pairs(ds: &Dataset) -> Vec<(&QuestionRecord, UserId)> {
    ds.answers
        .values()
        .filter(|a| a.is_correct())
        .filter_map(|a| {
            let answerer = a.owner?;
            let q = ds.questions.get(&a.parent_question)?;
            let asker = q.owner?;
            (asker != answerer).then_some((q, answerer))
        })
        .collect()
}

fn for_each_answer_edge(ds: &Dataset, select: impl Fn(u32, &[&QuestionRecord]) -> Vec<QuestionId> + Sync) -> EdgeSet {
    let by_owner = ds.questions_by_owner();
    let pairs = correct_answer_pairs(ds);
    pairs
        .par_iter()
        .flat_map_iter(|(q, answerer)| {
            let own: &[&QuestionRecord] = by_owner.get(answerer).map(Vec::as_slice).unwrap_or(&[]);
            select(q.bucket, own)
                .into_iter()
                .map(move |target| (q.question_id, target))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Edges `Q_R -> Q_B` for each question of the answerer posted in a strictly
/// later bucket than the answered question.
pub fn build_type1_edges(ds: &Dataset) -> EdgeSet {
    for_each_answer_edge(ds, |t_r, own| {
        // `own` is time ordered, hence bucket ordered.
        let start = own.partition_point(|q| q.bucket <= t_r);
        own[start..].iter().map(|q| q.question_id).collect()
    })
}

/// Edges `Q_R -> Q_B` for each question of the answerer with
/// `0 <= T_R - T_B <= delta_t` (same bucket included).
pub fn build_type2_edges(ds: &Dataset, delta_t: u32) -> EdgeSet {
    for_each_answer_edge(ds, |t_r, own| {
        let lo = t_r.saturating_sub(delta_t);
        let start = own.partition_point(|q| q.bucket < lo);
        let end = own.partition_point(|q| q.bucket <= t_r);
        own[start..end].iter().map(|q| q.question_id).collect()
    })
}

/// Chain of each user's consecutive questions, ordered by timestamp then id.
pub fn build_type3_edges(ds: &Dataset) -> EdgeSet {
    ds.questions_by_owner()
        .values()
        .flat_map(|qs| qs.windows(2).map(|w| (w[0].question_id, w[1].question_id)))
        .collect()
}

/// Union of the enabled hypothesis edge sets over all questions of `ds`.
pub fn build_network(ds: &Dataset, params: &BuildParams) -> Result<DifficultyNetwork> {
    if params.delta_t == 0 {
        return Err(Error::InvalidParameter("delta_t must be at least one bucket".into()));
    }
    let mut g = DifficultyNetwork::new(
        ds.questions.keys().copied(),
        NetworkParams {
            bucket_width_weeks: ds.bucket_width_weeks,
            delta_t: params.delta_t,
        },
    );
    let h = params.hypotheses;
    let mut sets: BTreeMap<EdgeType, EdgeSet> = BTreeMap::new();
    if h.h1 {
        sets.insert(EdgeType::Type1, build_type1_edges(ds));
    }
    if h.h2 {
        sets.insert(EdgeType::Type2, build_type2_edges(ds, params.delta_t));
    }
    if h.h3 {
        sets.insert(EdgeType::Type3, build_type3_edges(ds));
    }
    for (ty, edges) in sets {
        for (a, b) in edges {
            g.add_edge(a, b, TypeSet::single(ty))?;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::example_one;

    #[test]
    fn example_one_type_sets() {
        let (ds, ids) = example_one();
        let t1 = build_type1_edges(&ds);
        assert_eq!(t1, EdgeSet::from([(ids.r2, ids.b3), (ids.r2, ids.b4)]));
        let t2 = build_type2_edges(&ds, 1);
        assert_eq!(t2, EdgeSet::from([(ids.r2, ids.b2)]));
        let t2_wide = build_type2_edges(&ds, 2);
        assert_eq!(t2_wide, EdgeSet::from([(ids.r2, ids.b1), (ids.r2, ids.b2)]));
        let t3 = build_type3_edges(&ds);
        assert!(t3.contains(&(ids.b2, ids.b3)));
        assert!(!t3.contains(&(ids.b2, ids.b4)));
        assert_eq!(t3.len(), 5);
    }

    #[test]
    fn self_answers_make_no_edges() {
        let (mut ds, ids) = example_one();
        for a in ds.answers.values_mut() {
            a.owner = ds.questions[&ids.r2].owner;
        }
        assert!(build_type1_edges(&ds).is_empty());
        assert!(build_type2_edges(&ds, 5).is_empty());
    }

    #[test]
    fn empty_dataset_gives_empty_network() {
        let g = build_network(&Dataset::default(), &BuildParams::default()).unwrap();
        assert_eq!(g.node_count(), 0);
        assert_eq!(g.edge_count(), 0);
        assert!(build_network(
            &Dataset::default(),
            &BuildParams {
                delta_t: 0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn hypotheses_can_be_dropped() {
        let (ds, _) = example_one();
        let params = BuildParams {
            delta_t: 1,
            hypotheses: Hypotheses {
                h1: true,
                h2: false,
                h3: false,
            },
        };
        let g = build_network(&ds, &params).unwrap();
        assert_eq!(g.edge_count(), 2);
        assert!(g.edges().all(|e| e.types == TypeSet::single(EdgeType::Type1)));
    }
}
