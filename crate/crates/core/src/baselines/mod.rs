//! Scalar-score baselines and the cross-network evaluation matrix.
//!
//! Every baseline reduces to a [`ScoreTable`] (higher score means harder),
//! judged pairwise by [`score_table_predict`].

mod acceptance;
mod competition;
mod cross;
mod hits;
mod rcm;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::Dataset;
use crate::model::{verdict_from_margin, PairJudge, Verdict};
use crate::types::{later_posted, QuestionId, Timestamp};

pub use acceptance::{build_acceptance_graph, pagerank_scores};
pub use competition::{elo_scores, extract_competitions, Competition, CompetitionGraph, Elo, Entity, RatingEngine};
pub use cross::{
    cross_matrix, CrossMatrix, HitsScorer, ModelScorer, NetworkScorer, PageRankScorer, RcmScorer, TrainedJudge,
};
pub use hits::{hits_authority, HitsOutcome};
pub use rcm::{question_term_sets, rcm_train, RcmParams, RcmState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScoreSource {
    Rcm,
    PageRankBaseline,
    Hits,
    TournamentPR,
    Elo,
}

impl ScoreSource {
    pub fn name(self) -> &'static str {
        match self {
            ScoreSource::Rcm => "rcm",
            ScoreSource::PageRankBaseline => "pagerank",
            ScoreSource::Hits => "hits",
            ScoreSource::TournamentPR => "tournament",
            ScoreSource::Elo => "elo",
        }
    }
}

impl fmt::Display for ScoreSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreSource {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "rcm" => Ok(ScoreSource::Rcm),
            "pagerank" => Ok(ScoreSource::PageRankBaseline),
            "hits" => Ok(ScoreSource::Hits),
            "tournament" => Ok(ScoreSource::TournamentPR),
            "elo" => Ok(ScoreSource::Elo),
            other => Err(Error::InvalidParameter(format!("unknown score source {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub scores: BTreeMap<QuestionId, f64>,
    pub source: ScoreSource,
}

impl ScoreTable {
    pub fn new(scores: BTreeMap<QuestionId, f64>, source: ScoreSource) -> Result<ScoreTable> {
        if let Some((q, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::Degenerate(format!("non-finite score {s} for {q}")));
        }
        Ok(ScoreTable { scores, source })
    }

    pub fn get(&self, q: QuestionId) -> Option<f64> {
        self.scores.get(&q).copied()
    }
}

/// Higher score is harder; exact ties go to the later-posted question.
/// Margin is `score(b) - score(a)`; confidence grows from 0.5 with the
/// relative score gap `|s_b - s_a| / (|s_a| + |s_b|)`.
pub fn score_table_predict(
    t: &ScoreTable,
    a: QuestionId,
    b: QuestionId,
    posted_a: Option<Timestamp>,
    posted_b: Option<Timestamp>,
) -> Result<Verdict> {
    let sa = t.get(a).ok_or(Error::ColdStart(a))?;
    let sb = t.get(b).ok_or(Error::ColdStart(b))?;
    let margin = sb - sa;
    let scale = sa.abs() + sb.abs();
    let confidence = if scale > 0.0 {
        0.5 + 0.5 * (margin.abs() / scale).min(1.0)
    } else {
        0.5
    };
    Ok(verdict_from_margin(margin, a, b, confidence, |a, b| {
        later_posted(a, posted_a, b, posted_b)
    }))
}

/// A score table bound to posting times for tie-breaks.
#[derive(Clone, Debug)]
pub struct ScoreJudge {
    pub table: ScoreTable,
    pub posted: BTreeMap<QuestionId, Timestamp>,
}

impl ScoreJudge {
    pub fn new(table: ScoreTable, ds: &Dataset) -> ScoreJudge {
        let posted = ds.questions.values().map(|q| (q.question_id, q.created_at)).collect();
        ScoreJudge { table, posted }
    }
}

impl PairJudge for ScoreJudge {
    fn judge(&self, a: QuestionId, b: QuestionId) -> Result<Verdict> {
        score_table_predict(
            &self.table,
            a,
            b,
            self.posted.get(&a).copied(),
            self.posted.get(&b).copied(),
        )
    }
}

/// `qid<TAB>score` lines in ascending id order.
pub fn write_scores<W: Write>(t: &ScoreTable, mut w: W) -> Result<()> {
    for (q, s) in &t.scores {
        writeln!(w, "{q}\t{s}")?;
    }
    Ok(())
}

pub fn read_scores<R: BufRead>(r: R, source: ScoreSource) -> Result<ScoreTable> {
    let mut scores = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (q, s) = line
            .split_once('\t')
            .ok_or_else(|| Error::malformed(i + 1, "expected qid<TAB>score"))?;
        let q: QuestionId = q
            .trim()
            .parse()
            .map_err(|_| Error::malformed(i + 1, "bad question id"))?;
        let s: f64 = s.trim().parse().map_err(|_| Error::malformed(i + 1, "bad score"))?;
        scores.insert(q, s);
    }
    ScoreTable::new(scores, source)
}
