//! Per-question scores that do not need the iterative solvers.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::graph::DifficultyNetwork;
use crate::ingest::{AnswerRecord, Dataset, QuestionRecord, SECONDS_PER_DAY};
use crate::text::{Analyzer, SparseVector, TfIdf};
use crate::types::{QuestionId, Timestamp, UserId};

/// Number of distinct neighbours in the undirected version of the network.
pub fn degree_feature(g: &DifficultyNetwork, q: QuestionId) -> Result<u32> {
    if !g.contains_node(q) {
        return Err(Error::UnknownQuestion(q));
    }
    let neighbours: BTreeSet<QuestionId> = g
        .edges()
        .filter_map(|e| {
            if e.from == q {
                Some(e.to)
            } else if e.to == q {
                Some(e.from)
            } else {
                None
            }
        })
        .collect();
    Ok(neighbours.len() as u32)
}

/// Undirected distinct-neighbour counts for every node in one pass.
pub fn degrees(g: &DifficultyNetwork) -> BTreeMap<QuestionId, u32> {
    let mut adj: HashMap<QuestionId, BTreeSet<QuestionId>> = HashMap::new();
    for e in g.edges() {
        adj.entry(e.from).or_default().insert(e.to);
        adj.entry(e.to).or_default().insert(e.from);
    }
    g.nodes()
        .iter()
        .map(|q| (*q, adj.get(q).map_or(0, |s| s.len() as u32)))
        .collect()
}

/// `1 - exp(-delta_days)` between the question and its accepted answer;
/// 1 when nothing was accepted.
pub fn time_decay_feature(q: &QuestionRecord, accepted: Option<&AnswerRecord>) -> Result<f64> {
    let Some(a) = accepted else {
        return Ok(1.0);
    };
    let delta = a.created_at - q.created_at;
    if delta < 0 {
        return Err(Error::InvalidParameter(format!(
            "accepted answer {} predates question {}",
            a.answer_id, q.question_id
        )));
    }
    let days = delta as f64 / SECONDS_PER_DAY as f64;
    Ok(1.0 - (-days).exp())
}

/// Raw count of accepted answers the asker of each question authored
/// strictly before the question was posted.
pub fn prior_accepted_counts(ds: &Dataset) -> BTreeMap<QuestionId, u64> {
    let mut accepted_times: HashMap<UserId, Vec<Timestamp>> = HashMap::new();
    for a in ds.answers.values().filter(|a| a.is_accepted) {
        if let Some(u) = a.owner {
            accepted_times.entry(u).or_default().push(a.created_at);
        }
    }
    for v in accepted_times.values_mut() {
        v.sort_unstable();
    }
    ds.questions
        .values()
        .map(|q| {
            let c = q
                .owner
                .and_then(|u| accepted_times.get(&u))
                .map_or(0, |times| times.partition_point(|&t| t < q.created_at) as u64);
            (q.question_id, c)
        })
        .collect()
}

/// Prior accepted answers of the asker, normalized by the maximum raw count
/// over all questions of the dataset (0 when that maximum is 0).
pub fn accepted_count_feature(ds: &Dataset, q: &QuestionRecord) -> f64 {
    normalize_counts(&prior_accepted_counts(ds))
        .get(&q.question_id)
        .copied()
        .unwrap_or(0.0)
}

pub fn normalize_counts(raw: &BTreeMap<QuestionId, u64>) -> BTreeMap<QuestionId, f64> {
    let max = raw.values().copied().max().unwrap_or(0);
    raw.iter()
        .map(|(q, &c)| (*q, if max == 0 { 0.0 } else { c as f64 / max as f64 }))
        .collect()
}

/// Reference text split into blank-line separated passages, with TF-IDF
/// weights fitted over the passages.
pub struct ReferenceCorpus {
    pub passages: Vec<Vec<String>>,
    tfidf: TfIdf,
    vectors: Vec<SparseVector>,
    analyzer: Analyzer,
}

impl ReferenceCorpus {
    pub fn from_text(text: &str) -> ReferenceCorpus {
        let analyzer = Analyzer::default();
        let mut passages = Vec::new();
        let mut current = String::new();
        let flush = |current: &mut String, passages: &mut Vec<Vec<String>>| {
            let toks = analyzer.tokenize(current);
            if !toks.is_empty() {
                passages.push(toks);
            }
            current.clear();
        };
        for line in text.lines() {
            if line.trim().is_empty() {
                flush(&mut current, &mut passages);
            } else {
                current.push_str(line);
                current.push('\n');
            }
        }
        flush(&mut current, &mut passages);
        let tfidf = TfIdf::fit(passages.iter());
        let vectors = passages.iter().map(|p| tfidf.vector(p)).collect();
        ReferenceCorpus {
            passages,
            tfidf,
            vectors,
            analyzer,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.passages.is_empty()
    }

    /// Maximum TF-IDF cosine between `text` and any passage.
    pub fn best_passage_similarity(&self, text: &str) -> f64 {
        let v = self.tfidf.vector(&self.analyzer.tokenize(text));
        self.vectors.iter().map(|p| v.cosine(p)).fold(0.0, f64::max)
    }
}

/// Best passage similarity of the accepted answer, 0 when nothing was accepted.
pub fn textual_feature(accepted: Option<&AnswerRecord>, corpus: &ReferenceCorpus) -> Result<f64> {
    if corpus.is_empty() {
        return Err(Error::InvalidParameter(
            "textual features need a non-empty reference corpus".into(),
        ));
    }
    Ok(accepted.map_or(0.0, |a| corpus.best_passage_similarity(&a.body)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EdgeType, NetworkParams, TypeSet};
    use crate::types::AnswerId;

    fn question(t: Timestamp) -> QuestionRecord {
        QuestionRecord {
            question_id: QuestionId(1),
            owner: None,
            created_at: t,
            bucket: 0,
            tags: Default::default(),
            title: String::new(),
            body: String::new(),
            accepted_answer_id: None,
        }
    }

    fn answer(t: Timestamp, body: &str) -> AnswerRecord {
        AnswerRecord {
            answer_id: AnswerId(2),
            parent_question: QuestionId(1),
            owner: None,
            created_at: t,
            score: 1,
            is_accepted: true,
            body: body.into(),
        }
    }

    #[test]
    fn time_decay_values() {
        let q = question(1000);
        assert_eq!(time_decay_feature(&q, None).unwrap(), 1.0);
        assert_eq!(time_decay_feature(&q, Some(&answer(1000, ""))).unwrap(), 0.0);
        let one_day = time_decay_feature(&q, Some(&answer(1000 + 86_400, ""))).unwrap();
        assert!((one_day - 0.632_120_558_828_557_7).abs() < 1e-12);
        assert!(time_decay_feature(&q, Some(&answer(999, ""))).is_err());
    }

    #[test]
    fn degree_counts_distinct_neighbours() {
        let mut g = DifficultyNetwork::new([1, 2, 3].map(QuestionId), NetworkParams::default());
        let t = TypeSet::single(EdgeType::Type1);
        g.add_edge(QuestionId(1), QuestionId(2), t).unwrap();
        g.add_edge(QuestionId(2), QuestionId(1), t).unwrap();
        assert_eq!(degree_feature(&g, QuestionId(1)).unwrap(), 1);
        assert_eq!(degree_feature(&g, QuestionId(3)).unwrap(), 0);
        assert!(degree_feature(&g, QuestionId(4)).is_err());
        assert_eq!(degrees(&g)[&QuestionId(2)], 1);
    }

    #[test]
    fn textual_feature_rules() {
        let corpus =
            ReferenceCorpus::from_text("garbage collector heap generation\n\nthread monitor lock deadlock\n\n\n");
        assert_eq!(corpus.passages.len(), 2);
        assert_eq!(textual_feature(None, &corpus).unwrap(), 0.0);
        let same = answer(0, "garbage collector heap generation");
        assert!((textual_feature(Some(&same), &corpus).unwrap() - 1.0).abs() < 1e-12);
        // Same answer tokens, concentrated in one passage vs split over two.
        let reply = answer(0, "garbage collector thread monitor");
        let together = ReferenceCorpus::from_text("garbage collector thread monitor\n\nheap generation lock deadlock");
        let apart = ReferenceCorpus::from_text("garbage collector heap generation\n\nthread monitor lock deadlock");
        assert!(textual_feature(Some(&reply), &apart).unwrap() < textual_feature(Some(&reply), &together).unwrap());
        assert!(textual_feature(None, &ReferenceCorpus::from_text("\n\n")).is_err());
    }
}
