//! Pairwise edge-direction model: training set construction, the pair
//! scoring interface, symmetric prediction and evaluation.

mod io;
mod linear;
mod metrics;

use crate::error::{Error, Result};
use crate::features::{assemble_pair_masked, FeatureMask, NodeScoreCache, PairFeatureVector};
use crate::graph::DifficultyNetwork;
use crate::types::{later_posted, QuestionId};

pub use io::{read_model, write_model, MODEL_FORMAT_VERSION};
pub use linear::{
    incremental_update, train, PairClassifier, TrainConfig, UpdateOutcome, DEFAULT_FEEDBACK_THRESHOLD,
    ONLINE_LEARNING_RATE,
};
pub use metrics::{auc_from_scores, evaluate, precision_recall_f1, EvalReport, LabeledPair};

/// +1 for the edge's own orientation `(from, to)`, -1 for its reverse.
#[derive(Clone, Debug, Default)]
pub struct TrainingSet {
    pub entries: Vec<(PairFeatureVector, i8)>,
    /// Source edge `(from, to)` of each entry.
    pub provenance: Vec<(QuestionId, QuestionId)>,
    pub mask: FeatureMask,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn class_sizes(&self) -> (usize, usize) {
        let pos = self.entries.iter().filter(|(_, y)| *y > 0).count();
        (pos, self.entries.len() - pos)
    }
}

/// Every edge `a -> b` yields `(features(a, b), +1)` and `(features(b, a), -1)`.
pub fn make_training_set(g: &DifficultyNetwork, cache: &NodeScoreCache) -> Result<TrainingSet> {
    make_training_set_masked(g, cache, FeatureMask::ALL)
}

pub fn make_training_set_masked(
    g: &DifficultyNetwork,
    cache: &NodeScoreCache,
    mask: FeatureMask,
) -> Result<TrainingSet> {
    let mut ts = TrainingSet {
        entries: Vec::with_capacity(2 * g.edge_count()),
        provenance: Vec::with_capacity(2 * g.edge_count()),
        mask,
    };
    for e in g.edges() {
        ts.entries.push((assemble_pair_masked(cache, mask, e.from, e.to)?, 1));
        ts.provenance.push((e.from, e.to));
        ts.entries.push((assemble_pair_masked(cache, mask, e.to, e.from)?, -1));
        ts.provenance.push((e.from, e.to));
    }
    Ok(ts)
}

/// A model that scores one ordered pair feature vector; positive means the
/// second question is the harder one.
pub trait PairScorer: Send + Sync {
    fn mask(&self) -> FeatureMask;
    fn score(&self, features: &PairFeatureVector) -> f64;
    /// Calibrated confidence in `[0.5, 1]` for a decision margin.
    fn confidence(&self, margin: f64) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verdict {
    pub harder: QuestionId,
    pub confidence: f64,
    /// Signed towards the queried order: positive means the second question
    /// of the query is harder.
    pub margin: f64,
}

/// Score both orders and compare: `margin = (s(a, b) - s(b, a)) / 2`.
/// Zero margins go to the later-posted question.
pub fn predict_pair<S: PairScorer + ?Sized>(
    model: &S,
    cache: &NodeScoreCache,
    a: QuestionId,
    b: QuestionId,
) -> Result<Verdict> {
    for q in [a, b] {
        if !cache.contains(q) {
            return Err(Error::ColdStart(q));
        }
    }
    let mask = model.mask();
    let s_ab = model.score(&assemble_pair_masked(cache, mask, a, b)?);
    let s_ba = model.score(&assemble_pair_masked(cache, mask, b, a)?);
    let margin = (s_ab - s_ba) / 2.0;
    Ok(verdict_from_margin(
        margin,
        a,
        b,
        model.confidence(margin.abs()),
        |a, b| later_posted(a, cache.posted_at(a), b, cache.posted_at(b)),
    ))
}

pub(crate) fn verdict_from_margin(
    margin: f64,
    a: QuestionId,
    b: QuestionId,
    confidence: f64,
    tie_break: impl FnOnce(QuestionId, QuestionId) -> QuestionId,
) -> Verdict {
    let harder = if margin > 0.0 {
        b
    } else if margin < 0.0 {
        a
    } else {
        tie_break(a, b)
    };
    Verdict {
        harder,
        confidence,
        margin,
    }
}

/// Anything that can decide which of two questions is harder.
pub trait PairJudge: Send + Sync {
    fn judge(&self, a: QuestionId, b: QuestionId) -> Result<Verdict>;
}

/// A pair model bound to the node scores it reads.
pub struct ModelJudge<'a, S: PairScorer + ?Sized> {
    pub model: &'a S,
    pub cache: &'a NodeScoreCache,
}

impl<'a, S: PairScorer + ?Sized> ModelJudge<'a, S> {
    pub fn new(model: &'a S, cache: &'a NodeScoreCache) -> Self {
        ModelJudge { model, cache }
    }
}

impl<S: PairScorer + ?Sized> PairJudge for ModelJudge<'_, S> {
    fn judge(&self, a: QuestionId, b: QuestionId) -> Result<Verdict> {
        predict_pair(self.model, self.cache, a, b)
    }
}
