//! Linear max-margin pair classifier (hinge loss, L2 penalty) trained by
//! seeded epoch-wise subgradient descent on standardized features, with a
//! logistic confidence map fitted on held-out edges.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{predict_pair, PairScorer, TrainingSet, Verdict};
use crate::error::{Error, Result};
use crate::features::{assemble_pair_masked, FeatureMask, NodeScoreCache, PairFeatureVector};
use crate::types::QuestionId;

/// Contradicting feedback is ignored above this confidence.
pub const DEFAULT_FEEDBACK_THRESHOLD: f64 = 0.75;
pub const ONLINE_LEARNING_RATE: f64 = 0.05;
const MIN_STD: f64 = 1e-12;
const MIN_EDGES_FOR_HOLDOUT: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    /// L2 penalty.
    pub lambda: f64,
    pub epochs: u32,
    /// Step size at step `t` is `eta0 / sqrt(t)`.
    pub eta0: f64,
    pub seed: u64,
    /// Share of edges held out to fit the confidence map.
    pub holdout_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda: 1e-4,
            epochs: 30,
            eta0: 0.1,
            seed: 13,
            holdout_fraction: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairClassifier {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Per-dimension `(mean, std)`; zero-variance dimensions are stored as
    /// `(0, 1)` and pass through unchanged.
    pub scaler: Vec<(f64, f64)>,
    pub mask: FeatureMask,
    /// Slope of `confidence = 1 / (1 + exp(-slope * |margin|))`.
    pub calibration: f64,
    pub config: TrainConfig,
    /// Online updates applied since training.
    pub updates: u64,
}

impl PairClassifier {
    pub fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.scaler)
            .map(|(v, (mean, std))| (v - mean) / std)
            .collect()
    }

    fn raw(&self, z: &[f64]) -> f64 {
        self.weights.iter().zip(z).map(|(w, x)| w * x).sum::<f64>() + self.bias
    }

    /// Half the difference of the standardized vectors of both orders; the
    /// pair margin is `w . pair_direction`.
    fn pair_direction(&self, cache: &NodeScoreCache, a: QuestionId, b: QuestionId) -> Result<Vec<f64>> {
        let ab = self.standardize(assemble_pair_masked(cache, self.mask, a, b)?.as_slice());
        let ba = self.standardize(assemble_pair_masked(cache, self.mask, b, a)?.as_slice());
        Ok(ab.iter().zip(&ba).map(|(x, y)| (x - y) / 2.0).collect())
    }
}

impl PairScorer for PairClassifier {
    fn mask(&self) -> FeatureMask {
        self.mask
    }

    fn score(&self, features: &PairFeatureVector) -> f64 {
        self.raw(&self.standardize(features.as_slice()))
    }

    fn confidence(&self, margin: f64) -> f64 {
        1.0 / (1.0 + (-self.calibration * margin.abs()).exp())
    }
}

fn fit_scaler(rows: &[&[f64]], dim: usize) -> Vec<(f64, f64)> {
    let n = rows.len() as f64;
    (0..dim)
        .map(|k| {
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
            let std = var.sqrt();
            if std < MIN_STD {
                (0.0, 1.0)
            } else {
                (mean, std)
            }
        })
        .collect()
}

/// Maximum-likelihood slope of `P(correct) = sigmoid(slope * |margin|)`,
/// smoothed with one correct and one incorrect pseudo-observation at the
/// mean margin so perfectly separated hold-outs still give a finite slope.
fn fit_calibration(samples: &[(f64, bool)]) -> f64 {
    if samples.is_empty() {
        return 1.0;
    }
    let mean = samples.iter().map(|s| s.0).sum::<f64>() / samples.len() as f64;
    let mut all: Vec<(f64, bool)> = samples.to_vec();
    all.push((mean, true));
    all.push((mean, false));
    // d/ds NLL = sum (sigmoid(s x) - y) x, increasing in s.
    let grad = |s: f64| -> f64 {
        all.iter()
            .map(|&(x, y)| (1.0 / (1.0 + (-s * x).exp()) - if y { 1.0 } else { 0.0 }) * x)
            .sum()
    };
    if grad(0.0) >= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while grad(hi) < 0.0 && hi < 1e6 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if grad(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn train(ts: &TrainingSet, cfg: &TrainConfig) -> Result<PairClassifier> {
    if ts.is_empty() {
        return Err(Error::Degenerate("empty training set".into()));
    }
    let (pos, neg) = ts.class_sizes();
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate("training set has a single class".into()));
    }
    if cfg.epochs == 0 || !(cfg.eta0 > 0.0) || !(cfg.lambda >= 0.0) {
        return Err(Error::InvalidParameter(
            "epochs, eta0 and lambda must be positive".into(),
        ));
    }
    let dim = ts.mask.dimension();
    if let Some((f, _)) = ts.entries.iter().find(|(f, _)| f.len() != dim) {
        return Err(Error::InvalidParameter(format!(
            "feature vector of length {} for mask of dimension {dim}",
            f.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut edges: Vec<(QuestionId, QuestionId)> = ts.provenance.clone();
    edges.sort_unstable();
    edges.dedup();
    let n_holdout = if edges.len() >= MIN_EDGES_FOR_HOLDOUT {
        ((edges.len() as f64) * cfg.holdout_fraction).floor() as usize
    } else {
        0
    };
    edges.shuffle(&mut rng);
    let holdout: HashSet<(QuestionId, QuestionId)> = edges[..n_holdout].iter().copied().collect();

    let train_idx: Vec<usize> = (0..ts.len())
        .filter(|&i| !holdout.contains(&ts.provenance[i]))
        .collect();
    let rows: Vec<&[f64]> = train_idx.iter().map(|&i| ts.entries[i].0.as_slice()).collect();
    let scaler = fit_scaler(&rows, dim);
    if scaler.iter().all(|&s| s == (0.0, 1.0)) && rows.iter().all(|r| r.iter().all(|v| *v == 0.0)) {
        return Err(Error::Degenerate("all features are zero".into()));
    }

    let mut model = PairClassifier {
        weights: vec![0.0; dim],
        bias: 0.0,
        scaler,
        mask: ts.mask,
        calibration: 1.0,
        config: *cfg,
        updates: 0,
    };
    let standardized: Vec<Vec<f64>> = rows.iter().map(|r| model.standardize(r)).collect();
    let labels: Vec<f64> = train_idx.iter().map(|&i| f64::from(ts.entries[i].1)).collect();
    let mut order: Vec<usize> = (0..standardized.len()).collect();
    let mut t = 0u64;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = cfg.eta0 / (t as f64).sqrt();
            let x = &standardized[i];
            let y = labels[i];
            let active = y * model.raw(x) < 1.0;
            let shrink = 1.0 - eta * cfg.lambda;
            for (w, xi) in model.weights.iter_mut().zip(x) {
                *w *= shrink;
                if active {
                    *w += eta * y * xi;
                }
            }
            if active {
                model.bias += eta * y;
            }
        }
    }

    // Calibrate on each held-out edge once, in its own orientation.
    let mut held: Vec<(QuestionId, QuestionId)> = holdout.into_iter().collect();
    held.sort_unstable();
    let mut samples = Vec::with_capacity(held.len());
    for (a, b) in held {
        let i = ts
            .provenance
            .iter()
            .position(|&p| p == (a, b))
            .expect("held-out edge has entries");
        let (f_ab, f_ba) = if ts.entries[i].1 > 0 {
            (&ts.entries[i].0, &ts.entries[i + 1].0)
        } else {
            (&ts.entries[i + 1].0, &ts.entries[i].0)
        };
        let margin = (model.score(f_ab) - model.score(f_ba)) / 2.0;
        samples.push((margin.abs(), margin > 0.0));
    }
    model.calibration = fit_calibration(&samples);
    Ok(model)
}

#[derive(Clone, Debug, PartialEq)]
pub enum UpdateOutcome {
    Accepted {
        model: PairClassifier,
        before: Verdict,
    },
    /// Contradicting feedback on a pair the model is confident about.
    Rejected {
        before: Verdict,
    },
}

impl UpdateOutcome {
    pub fn is_accepted(&self) -> bool {
        matches!(self, UpdateOutcome::Accepted { .. })
    }
}

/// Apply one hinge subgradient step for the feedback "`harder` is the harder
/// of `(a, b)`", unless it contradicts a verdict held with confidence above
/// `threshold`.
pub fn incremental_update(
    model: &PairClassifier,
    cache: &NodeScoreCache,
    a: QuestionId,
    b: QuestionId,
    harder: QuestionId,
    threshold: f64,
) -> Result<UpdateOutcome> {
    if harder != a && harder != b {
        return Err(Error::InvalidParameter(format!(
            "feedback names {harder}, which is not part of the pair ({a}, {b})"
        )));
    }
    let before = predict_pair(model, cache, a, b)?;
    if before.harder != harder && before.confidence > threshold {
        return Ok(UpdateOutcome::Rejected { before });
    }
    let y = if harder == b { 1.0 } else { -1.0 };
    let z = model.pair_direction(cache, a, b)?;
    let margin: f64 = model.weights.iter().zip(&z).map(|(w, x)| w * x).sum();
    let mut next = model.clone();
    if y * margin < 1.0 {
        for (w, zi) in next.weights.iter_mut().zip(&z) {
            *w += ONLINE_LEARNING_RATE * y * zi;
        }
    }
    next.updates += 1;
    Ok(UpdateOutcome::Accepted { model: next, before })
}
