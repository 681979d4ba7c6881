use super::PairJudge;
use crate::error::{Error, Result};
use crate::types::QuestionId;

/// A queried pair and the question known to be harder.
pub type LabeledPair = ((QuestionId, QuestionId), QuestionId);

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: f64,
    pub n: usize,
}

/// Binary precision, recall and F1 where the positive class is "the second
/// question is harder".
pub fn precision_recall_f1(truth: &[bool], predicted: &[bool]) -> (f64, f64, f64) {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&t, &p) in truth.iter().zip(predicted) {
        match (t, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            _ => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f)
}

/// Area under the ROC curve as the Mann-Whitney statistic; ties count half.
/// Returns 0.5 when one class is missing.
pub fn auc_from_scores(truth: &[bool], scores: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..scores.len().min(truth.len())).collect();
    idx.sort_by(|&i, &j| scores[i].total_cmp(&scores[j]));
    let n_pos = idx.iter().filter(|&&i| truth[i]).count();
    let n_neg = idx.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }
    let mut rank_sum = 0.0;
    let mut k = 0;
    while k < idx.len() {
        let mut end = k;
        while end + 1 < idx.len() && scores[idx[end + 1]] == scores[idx[k]] {
            end += 1;
        }
        // Average 1-based rank of the tie group.
        let avg = (k + end) as f64 / 2.0 + 1.0;
        rank_sum += avg * idx[k..=end].iter().filter(|&&i| truth[i]).count() as f64;
        k = end + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    u / (n_pos as f64 * n_neg as f64)
}

/// Judge every pair, each in its stored orientation. AUC ranks the margins.
pub fn evaluate<J: PairJudge + ?Sized>(judge: &J, pairs: &[LabeledPair]) -> Result<EvalReport> {
    if pairs.is_empty() {
        return Err(Error::Degenerate("no pairs to evaluate".into()));
    }
    let mut truth = Vec::with_capacity(pairs.len());
    let mut predicted = Vec::with_capacity(pairs.len());
    let mut scores = Vec::with_capacity(pairs.len());
    for &((a, b), harder) in pairs {
        if harder != a && harder != b {
            return Err(Error::InvalidParameter(format!("label {harder} is not in ({a}, {b})")));
        }
        let v = judge.judge(a, b)?;
        truth.push(harder == b);
        predicted.push(v.harder == b);
        scores.push(v.margin);
    }
    let (precision, recall, f1) = precision_recall_f1(&truth, &predicted);
    Ok(EvalReport {
        precision,
        recall,
        f1,
        auc: auc_from_scores(&truth, &scores),
        n: pairs.len(),
    })
}
