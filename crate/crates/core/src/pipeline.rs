//! Dataset to network to node scores to trained model, in one call.

use crate::error::Result;
use crate::features::{compute_cache, FeatureConfig, FeatureMask, NodeScoreCache, ReferenceCorpus};
use crate::graph::{build_network, BuildParams, DifficultyNetwork};
use crate::ingest::Dataset;
use crate::model::{make_training_set_masked, train, PairClassifier, TrainConfig};

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PipelineConfig {
    pub build: BuildParams,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub mask: FeatureMask,
}

#[derive(Clone, Debug)]
pub struct Artifacts {
    pub network: DifficultyNetwork,
    pub cache: NodeScoreCache,
    pub model: PairClassifier,
}

pub fn network_and_cache(
    ds: &Dataset,
    corpus: Option<&ReferenceCorpus>,
    cfg: &PipelineConfig,
) -> Result<(DifficultyNetwork, NodeScoreCache)> {
    let network = build_network(ds, &cfg.build)?;
    let cache = compute_cache(ds, &network, corpus, &cfg.features)?;
    Ok((network, cache))
}

/// Train on an already built network and its node scores.
pub fn fit(network: &DifficultyNetwork, cache: &NodeScoreCache, cfg: &PipelineConfig) -> Result<PairClassifier> {
    let ts = make_training_set_masked(network, cache, cfg.mask)?;
    train(&ts, &cfg.train)
}

pub fn run(ds: &Dataset, corpus: Option<&ReferenceCorpus>, cfg: &PipelineConfig) -> Result<Artifacts> {
    let (network, cache) = network_and_cache(ds, corpus, cfg)?;
    let model = fit(&network, &cache, cfg)?;
    Ok(Artifacts { network, cache, model })
}
