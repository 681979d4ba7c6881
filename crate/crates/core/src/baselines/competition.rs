//! Competition extraction for skill-rating baselines. Each question with an
//! accepted answer becomes a pseudo-user competing against the people
//! involved with it; the rating engine itself is pluggable.

use std::collections::{BTreeMap, BTreeSet};

use super::{ScoreSource, ScoreTable};
use crate::error::Result;
use crate::ingest::Dataset;
use crate::types::{QuestionId, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Entity {
    User(UserId),
    /// The pseudo-user standing for a question; its rating is its difficulty.
    Question(QuestionId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Competition {
    pub winner: Entity,
    pub loser: Entity,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CompetitionGraph {
    pub competitions: Vec<Competition>,
}

impl CompetitionGraph {
    pub fn len(&self) -> usize {
        self.competitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.competitions.is_empty()
    }
}

/// Per question with an accepted answer, in `(created_at, id)` order: the
/// question beats its asker, the best answerer beats the question and the
/// asker, and the best answerer beats every other answerer. Pairs with an
/// anonymous side or with winner = loser are skipped.
pub fn extract_competitions(ds: &Dataset) -> CompetitionGraph {
    let by_question = ds.answers_by_question();
    let mut questions: Vec<_> = ds.questions.values().collect();
    questions.sort_by_key(|q| (q.created_at, q.question_id));
    let mut out = Vec::new();
    let mut push = |winner: Option<Entity>, loser: Option<Entity>| {
        if let (Some(w), Some(l)) = (winner, loser) {
            if w != l {
                out.push(Competition { winner: w, loser: l });
            }
        }
    };
    for q in questions {
        let Some(best) = ds.accepted_answer(q) else { continue };
        let pseudo = Some(Entity::Question(q.question_id));
        let asker = q.owner.map(Entity::User);
        let best_user = best.owner.map(Entity::User);
        push(pseudo, asker);
        push(best_user, pseudo);
        push(best_user, asker);
        let others: BTreeSet<UserId> = by_question
            .get(&q.question_id)
            .into_iter()
            .flatten()
            .filter(|a| a.answer_id != best.answer_id)
            .filter_map(|a| a.owner)
            .collect();
        for u in others {
            push(best_user, Some(Entity::User(u)));
        }
    }
    CompetitionGraph { competitions: out }
}

/// Consumes competitions and produces entity ratings.
pub trait RatingEngine {
    fn rate(&self, cg: &CompetitionGraph) -> BTreeMap<Entity, f64>;
}

/// Sequential Elo, a stand-in for a Bayesian skill-rating engine.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Elo {
    pub k: f64,
    pub initial: f64,
}

impl Default for Elo {
    fn default() -> Self {
        Elo {
            k: 32.0,
            initial: 1500.0,
        }
    }
}

impl RatingEngine for Elo {
    fn rate(&self, cg: &CompetitionGraph) -> BTreeMap<Entity, f64> {
        let mut r: BTreeMap<Entity, f64> = BTreeMap::new();
        for c in &cg.competitions {
            let rw = *r.entry(c.winner).or_insert(self.initial);
            let rl = *r.entry(c.loser).or_insert(self.initial);
            let expected = 1.0 / (1.0 + 10f64.powf((rl - rw) / 400.0));
            let delta = self.k * (1.0 - expected);
            r.insert(c.winner, rw + delta);
            r.insert(c.loser, rl - delta);
        }
        r
    }
}

/// Question pseudo-user ratings from `engine`; questions without any
/// competition keep `default`.
pub fn elo_scores(ds: &Dataset, engine: &dyn RatingEngine, default: f64) -> Result<ScoreTable> {
    let ratings = engine.rate(&extract_competitions(ds));
    let scores = ds
        .questions
        .keys()
        .map(|&q| (q, ratings.get(&Entity::Question(q)).copied().unwrap_or(default)))
        .collect();
    ScoreTable::new(scores, ScoreSource::Elo)
}
