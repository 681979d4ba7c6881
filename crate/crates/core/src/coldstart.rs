//! Pairs involving brand-new questions, which have no network presence and
//! no answer history: each brand-new question is replaced by its nearest
//! text neighbors and the pair model votes over the proxy pairs.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::features::{degree_feature, degrees, prior_accepted_counts, NodeScoreCache};
use crate::graph::DifficultyNetwork;
use crate::ingest::Dataset;
use crate::model::{predict_pair, verdict_from_margin, PairScorer, Verdict};
use crate::text::{Analyzer, SparseVector, TfIdf};
use crate::types::{later_posted, QuestionId, Timestamp};

pub const DEFAULT_K: usize = 5;

/// A unit-comparable text embedding.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuestionEmbedding {
    pub vector: SparseVector,
}

impl QuestionEmbedding {
    pub fn norm(&self) -> f64 {
        self.vector.norm
    }

    pub fn cosine(&self, other: &QuestionEmbedding) -> f64 {
        self.vector.cosine(&other.vector)
    }
}

pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> QuestionEmbedding;
}

/// TF-IDF unigram vectors fitted on question texts.
pub struct TfIdfEmbedder {
    analyzer: Analyzer,
    tfidf: TfIdf,
}

impl TfIdfEmbedder {
    pub fn fit<'a>(texts: impl IntoIterator<Item = &'a str>) -> TfIdfEmbedder {
        let analyzer = Analyzer::default();
        let docs: Vec<Vec<String>> = texts.into_iter().map(|t| analyzer.tokenize(t)).collect();
        TfIdfEmbedder {
            tfidf: TfIdf::fit(docs.iter()),
            analyzer,
        }
    }
}

impl EmbeddingProvider for TfIdfEmbedder {
    fn embed(&self, text: &str) -> QuestionEmbedding {
        QuestionEmbedding {
            vector: self.tfidf.vector(&self.analyzer.tokenize(text)),
        }
    }
}

/// Isolated in `g` (or absent from it), no accepted answer, and an asker
/// without accepted answers before the question was posted.
pub fn is_brand_new(g: &DifficultyNetwork, ds: &Dataset, q: QuestionId) -> bool {
    let Some(rec) = ds.question(q) else { return true };
    let isolated = degree_feature(g, q).map_or(true, |d| d == 0);
    let asker_history = prior_accepted_counts(ds).get(&q).copied().unwrap_or(0) > 0;
    isolated && ds.accepted_answer(rec).is_none() && !asker_history
}

/// Embeddings of every question that is not brand-new, for neighbor search.
pub struct ColdStartIndex {
    provider: Box<dyn EmbeddingProvider>,
    pool: Vec<(QuestionId, QuestionEmbedding)>,
    brand_new: BTreeSet<QuestionId>,
    texts: BTreeMap<QuestionId, String>,
    posted: BTreeMap<QuestionId, Timestamp>,
}

impl ColdStartIndex {
    /// TF-IDF embeddings fitted on all question texts of `ds`.
    pub fn build(ds: &Dataset, g: &DifficultyNetwork) -> ColdStartIndex {
        let texts: BTreeMap<QuestionId, String> =
            ds.questions.values().map(|q| (q.question_id, q.full_text())).collect();
        let provider = TfIdfEmbedder::fit(texts.values().map(String::as_str));
        ColdStartIndex::with_provider(ds, g, Box::new(provider), texts)
    }

    pub fn with_provider(
        ds: &Dataset,
        g: &DifficultyNetwork,
        provider: Box<dyn EmbeddingProvider>,
        texts: BTreeMap<QuestionId, String>,
    ) -> ColdStartIndex {
        let prior = prior_accepted_counts(ds);
        let degree = degrees(g);
        let mut brand_new = BTreeSet::new();
        let mut pool = Vec::new();
        for q in ds.questions.values() {
            let id = q.question_id;
            let isolated = degree.get(&id).is_none_or(|&d| d == 0);
            let fresh = isolated && ds.accepted_answer(q).is_none() && prior.get(&id).copied().unwrap_or(0) == 0;
            if fresh {
                brand_new.insert(id);
            } else if g.contains_node(id) {
                pool.push((id, provider.embed(&texts[&id])));
            }
        }
        let posted = ds.questions.values().map(|q| (q.question_id, q.created_at)).collect();
        ColdStartIndex {
            provider,
            pool,
            brand_new,
            texts,
            posted,
        }
    }

    pub fn is_brand_new(&self, q: QuestionId) -> bool {
        self.brand_new.contains(&q) || !self.posted.contains_key(&q)
    }

    pub fn text(&self, q: QuestionId) -> Option<&str> {
        self.texts.get(&q).map(String::as_str)
    }

    pub fn posted_at(&self, q: QuestionId) -> Option<Timestamp> {
        self.posted.get(&q).copied()
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }

    pub fn embed(&self, text: &str) -> QuestionEmbedding {
        self.provider.embed(text)
    }

    /// Top `k` pool questions by cosine similarity, ties by ascending id.
    pub fn knn_similar(&self, query: &QuestionEmbedding, k: usize) -> Vec<QuestionId> {
        if k > self.pool.len() {
            tracing::warn!(k, pool = self.pool.len(), "fewer candidates than requested neighbors");
        }
        let mut scored: Vec<(f64, QuestionId)> = self.pool.iter().map(|(q, e)| (query.cosine(e), *q)).collect();
        scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        scored.into_iter().take(k).map(|(_, q)| q).collect()
    }
}

/// One side of a queried pair.
#[derive(Clone, Debug, PartialEq)]
pub enum PairSide {
    /// A question with features in the cache.
    Known(QuestionId),
    /// A brand-new question described by its text.
    New {
        id: QuestionId,
        text: String,
        posted_at: Option<Timestamp>,
    },
}

impl PairSide {
    pub fn id(&self) -> QuestionId {
        match self {
            PairSide::Known(q) | PairSide::New { id: q, .. } => *q,
        }
    }

    fn posted_at(&self, cache: &NodeScoreCache, index: &ColdStartIndex) -> Option<Timestamp> {
        match self {
            PairSide::Known(q) => cache.posted_at(*q).or_else(|| index.posted_at(*q)),
            PairSide::New { posted_at, id, .. } => posted_at.or_else(|| index.posted_at(*id)),
        }
    }

    /// Classify `q`: known when it has features and is not brand-new,
    /// otherwise new with its stored text or `inline` text.
    pub fn resolve(
        q: QuestionId,
        inline: Option<&str>,
        cache: &NodeScoreCache,
        index: &ColdStartIndex,
    ) -> Result<PairSide> {
        if cache.contains(q) && !index.is_brand_new(q) {
            return Ok(PairSide::Known(q));
        }
        let text = index.text(q).or(inline).ok_or(Error::UnknownQuestion(q))?.to_string();
        Ok(PairSide::New {
            id: q,
            text,
            posted_at: index.posted_at(q),
        })
    }
}

/// Verdict for a pair where at least one side is brand-new. Each new side is
/// replaced by its `k` nearest neighbors and every proxy pair is judged by
/// the model; the side winning more proxy pairs is harder (ties go to the
/// later-posted question). Confidence is the mean model confidence of the
/// proxy pairs won by the winning side.
pub fn predict_cold_pair<S: PairScorer + ?Sized>(
    model: &S,
    cache: &NodeScoreCache,
    index: &ColdStartIndex,
    q1: &PairSide,
    q2: &PairSide,
    k: usize,
) -> Result<Verdict> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let proxies = |side: &PairSide| -> Vec<QuestionId> {
        match side {
            PairSide::Known(q) => vec![*q],
            PairSide::New { text, .. } => index.knn_similar(&index.embed(text), k),
        }
    };
    let (p1, p2) = (proxies(q1), proxies(q2));
    let (a, b) = (q1.id(), q2.id());
    let mut wins = [Vec::new(), Vec::new()];
    for &x in &p1 {
        for &y in &p2 {
            if x == y {
                continue;
            }
            let v = predict_pair(model, cache, x, y)?;
            wins[usize::from(v.harder == y)].push(v.confidence);
        }
    }
    let total = wins[0].len() + wins[1].len();
    if total == 0 {
        return Err(Error::Degenerate(format!("no proxy pairs for ({a}, {b})")));
    }
    let margin = (wins[1].len() as f64 - wins[0].len() as f64) / total as f64;
    let (ta, tb) = (q1.posted_at(cache, index), q2.posted_at(cache, index));
    let v = verdict_from_margin(margin, a, b, 0.5, |a, b| later_posted(a, ta, b, tb));
    let side = &wins[usize::from(v.harder == b)];
    let confidence = if side.is_empty() {
        0.5
    } else {
        side.iter().sum::<f64>() / side.len() as f64
    };
    Ok(Verdict { confidence, ..v })
}

/// Route a pair to the model when both sides are known, else to the
/// neighbor vote. The flag reports whether the vote was used.
pub fn predict_any<S: PairScorer + ?Sized>(
    model: &S,
    cache: &NodeScoreCache,
    index: &ColdStartIndex,
    q1: &PairSide,
    q2: &PairSide,
    k: usize,
) -> Result<(Verdict, bool)> {
    match (q1, q2) {
        (PairSide::Known(a), PairSide::Known(b)) => Ok((predict_pair(model, cache, *a, *b)?, false)),
        _ => Ok((predict_cold_pair(model, cache, index, q1, q2, k)?, true)),
    }
}
