//! Every scorer evaluated on every network construction.

use std::fmt::Write as _;

use rayon::prelude::*;

use super::{hits_authority, pagerank_scores, question_term_sets, rcm_train, RcmParams, ScoreJudge};
use crate::error::Result;
use crate::features::{compute_cache, NodeScoreCache, ReferenceCorpus};
use crate::graph::DifficultyNetwork;
use crate::ingest::Dataset;
use crate::model::{evaluate, predict_pair, EvalReport, LabeledPair, PairClassifier, PairJudge, Verdict};
use crate::pipeline::{fit, PipelineConfig};
use crate::types::QuestionId;

/// A method that turns a question network into a pair judge.
pub trait NetworkScorer: Send + Sync {
    fn name(&self) -> String;
    fn fit(&self, g: &DifficultyNetwork, ds: &Dataset, corpus: Option<&ReferenceCorpus>) -> Result<Box<dyn PairJudge>>;
}

/// A pair model that owns the node scores it reads.
#[derive(Clone, Debug)]
pub struct TrainedJudge {
    pub model: PairClassifier,
    pub cache: NodeScoreCache,
}

impl PairJudge for TrainedJudge {
    fn judge(&self, a: QuestionId, b: QuestionId) -> Result<Verdict> {
        predict_pair(&self.model, &self.cache, a, b)
    }
}

/// Node features on the given network, then the pair classifier.
#[derive(Clone, Copy, Debug, Default)]
pub struct ModelScorer {
    pub config: PipelineConfig,
}

impl NetworkScorer for ModelScorer {
    fn name(&self) -> String {
        "model".into()
    }

    fn fit(&self, g: &DifficultyNetwork, ds: &Dataset, corpus: Option<&ReferenceCorpus>) -> Result<Box<dyn PairJudge>> {
        let cache = compute_cache(ds, g, corpus, &self.config.features)?;
        let model = fit(g, &cache, &self.config)?;
        Ok(Box::new(TrainedJudge { model, cache }))
    }
}

#[derive(Clone, Copy, Debug)]
pub struct PageRankScorer {
    pub damping: f64,
}

impl Default for PageRankScorer {
    fn default() -> Self {
        PageRankScorer { damping: 0.85 }
    }
}

impl NetworkScorer for PageRankScorer {
    fn name(&self) -> String {
        "pagerank".into()
    }

    fn fit(&self, g: &DifficultyNetwork, ds: &Dataset, _: Option<&ReferenceCorpus>) -> Result<Box<dyn PairJudge>> {
        Ok(Box::new(ScoreJudge::new(pagerank_scores(g, self.damping)?, ds)))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct HitsScorer;

impl NetworkScorer for HitsScorer {
    fn name(&self) -> String {
        "hits".into()
    }

    fn fit(&self, g: &DifficultyNetwork, ds: &Dataset, _: Option<&ReferenceCorpus>) -> Result<Box<dyn PairJudge>> {
        Ok(Box::new(ScoreJudge::new(hits_authority(g)?.authorities, ds)))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RcmScorer {
    pub params: RcmParams,
}

impl NetworkScorer for RcmScorer {
    fn name(&self) -> String {
        "rcm".into()
    }

    fn fit(&self, g: &DifficultyNetwork, ds: &Dataset, _: Option<&ReferenceCorpus>) -> Result<Box<dyn PairJudge>> {
        let state = rcm_train(g, &question_term_sets(ds), &self.params)?;
        Ok(Box::new(ScoreJudge::new(state.scores()?, ds)))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CrossMatrix {
    pub networks: Vec<String>,
    pub scorers: Vec<String>,
    /// `reports[network][scorer]`.
    pub reports: Vec<Vec<EvalReport>>,
}

impl CrossMatrix {
    /// One row per network, F1 and AUC columns per scorer.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("network");
        for name in &self.scorers {
            let _ = write!(s, "\t{name}_f1\t{name}_auc");
        }
        s.push('\n');
        for (net, row) in self.networks.iter().zip(&self.reports) {
            s.push_str(net);
            for r in row {
                let _ = write!(s, "\t{:.4}\t{:.4}", r.f1, r.auc);
            }
            s.push('\n');
        }
        s
    }
}

pub fn cross_matrix(
    networks: &[(String, DifficultyNetwork)],
    scorers: &[&dyn NetworkScorer],
    test_pairs: &[LabeledPair],
    ds: &Dataset,
    corpus: Option<&ReferenceCorpus>,
) -> Result<CrossMatrix> {
    let cells: Vec<(usize, usize)> = (0..networks.len())
        .flat_map(|n| (0..scorers.len()).map(move |s| (n, s)))
        .collect();
    let results: Vec<Result<EvalReport>> = cells
        .par_iter()
        .map(|&(n, s)| {
            let judge = scorers[s].fit(&networks[n].1, ds, corpus)?;
            evaluate(judge.as_ref(), test_pairs)
        })
        .collect();
    let mut reports = vec![Vec::with_capacity(scorers.len()); networks.len()];
    for ((n, _), r) in cells.into_iter().zip(results) {
        reports[n].push(r?);
    }
    Ok(CrossMatrix {
        networks: networks.iter().map(|(name, _)| name.clone()).collect(),
        scorers: scorers.iter().map(|s| s.name()).collect(),
        reports,
    })
}
