//! Robustness harness: noise injection, ablations and domain adaptation,
//! driven by `key = value` config files, with TSV results and an
//! append-only run ledger.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::OpenOptions;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{compute_cache, FeaturePair, ReferenceCorpus};
use crate::graph::{build_network, DifficultyNetwork, EdgeType, TypeSet};
use crate::ingest::{read_dataset, Dataset};
use crate::model::{evaluate, EvalReport, LabeledPair, ModelJudge};
use crate::pipeline::{fit, run, PipelineConfig};
use crate::synth::{SynthConfig, SynthWorld};
use crate::types::{QuestionId, UserId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Insert random new edges.
    Noise1,
    /// Delete random edges, then insert as many random new ones.
    Noise2,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Noise1 => "noise1",
            NoiseKind::Noise2 => "noise2",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "noise1" | "1" => Ok(NoiseKind::Noise1),
            "noise2" | "2" => Ok(NoiseKind::Noise2),
            _ => Err(Error::InvalidParameter(format!("unknown noise kind {s:?}"))),
        }
    }
}

/// Perturb `floor(x * |E| / 100)` edges of `g`. Inserted edges are tagged
/// [`EdgeType::Noise`]; the reverse of an existing edge counts as new.
pub fn inject_noise(g: &DifficultyNetwork, kind: NoiseKind, x_percent: f64, seed: u64) -> Result<DifficultyNetwork> {
    if !(0.0..=100.0).contains(&x_percent) {
        return Err(Error::InvalidParameter(format!(
            "noise level {x_percent} outside 0..=100"
        )));
    }
    let count = (x_percent * g.edge_count() as f64 / 100.0).floor() as usize;
    let mut out = g.clone();
    if count == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if kind == NoiseKind::Noise2 {
        let edges: Vec<(QuestionId, QuestionId)> = g.edges().map(|e| (e.from, e.to)).collect();
        for i in index::sample(&mut rng, edges.len(), count) {
            out.remove_edge(edges[i].0, edges[i].1);
        }
    }
    let nodes: Vec<QuestionId> = g.nodes().iter().copied().collect();
    let n = nodes.len();
    let capacity = n.saturating_mul(n.saturating_sub(1));
    if capacity < out.edge_count() + count {
        return Err(Error::InvalidParameter(format!(
            "{count} noise edges do not fit in a {n}-node network with {} edges",
            out.edge_count()
        )));
    }
    let mut added = 0;
    while added < count {
        let a = nodes[rng.gen_range(0..n)];
        let b = nodes[rng.gen_range(0..n)];
        if a == b || out.contains_edge(a, b) {
            continue;
        }
        out.add_edge(a, b, TypeSet::single(EdgeType::Noise))?;
        added += 1;
    }
    Ok(out)
}

/// What one ablation cell removes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Ablation {
    Nothing,
    Feature(FeaturePair),
    /// Hypothesis 1, 2 or 3.
    Hypothesis(u8),
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ablation::Nothing => f.write_str("none"),
            Ablation::Feature(p) => write!(f, "{p}"),
            Ablation::Hypothesis(h) => write!(f, "H{h}"),
        }
    }
}

impl FromStr for Ablation {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("none") {
            return Ok(Ablation::Nothing);
        }
        if let Some(h) = t.strip_prefix(['H', 'h']) {
            return match h {
                "1" => Ok(Ablation::Hypothesis(1)),
                "2" => Ok(Ablation::Hypothesis(2)),
                "3" => Ok(Ablation::Hypothesis(3)),
                _ => Err(Error::InvalidParameter(format!("unknown hypothesis {s:?}"))),
            };
        }
        t.parse().map(Ablation::Feature)
    }
}

impl Ablation {
    pub fn all() -> Vec<Ablation> {
        let mut v = vec![Ablation::Nothing];
        v.extend(FeaturePair::ALL.into_iter().map(Ablation::Feature));
        v.extend((1..=3).map(Ablation::Hypothesis));
        v
    }

    /// `base` with this element switched off.
    pub fn apply(self, base: &PipelineConfig) -> PipelineConfig {
        let mut cfg = *base;
        match self {
            Ablation::Nothing => {}
            Ablation::Feature(p) => cfg.mask = cfg.mask.without(p),
            Ablation::Hypothesis(1) => cfg.build.hypotheses.h1 = false,
            Ablation::Hypothesis(2) => cfg.build.hypotheses.h2 = false,
            Ablation::Hypothesis(_) => cfg.build.hypotheses.h3 = false,
        }
        cfg
    }
}

/// A dataset with optional reference corpus and labelled evaluation pairs.
pub struct Benchmark {
    pub dataset: Dataset,
    pub corpus: Option<ReferenceCorpus>,
    pub pairs: Vec<LabeledPair>,
}

impl Benchmark {
    /// Generate a synthetic world and draw `n_pairs` planted pairs that are
    /// not direct edges of its network under `cfg`.
    pub fn synthetic(world: &SynthConfig, n_pairs: usize, pair_seed: u64, cfg: &PipelineConfig) -> Result<Benchmark> {
        let w = SynthWorld::generate(world);
        let g = build_network(&w.dataset, &cfg.build)?;
        let pairs = w.planted_pairs(&g, n_pairs, pair_seed);
        Ok(Benchmark {
            corpus: Some(ReferenceCorpus::from_text(&w.corpus)),
            dataset: w.dataset,
            pairs,
        })
    }
}

/// Result of one experiment cell.
#[derive(Clone, Debug, PartialEq)]
pub struct CellResult {
    pub experiment: String,
    pub cell: String,
    pub edges: usize,
    pub dimension: usize,
    pub report: EvalReport,
    /// F1 change against the reference cell of the same experiment.
    pub delta_f1: Option<f64>,
}

fn train_and_evaluate(
    ds: &Dataset,
    g: &DifficultyNetwork,
    corpus: Option<&ReferenceCorpus>,
    pairs: &[LabeledPair],
    cfg: &PipelineConfig,
) -> Result<(EvalReport, usize)> {
    let cache = compute_cache(ds, g, corpus, &cfg.features)?;
    let model = fit(g, &cache, cfg)?;
    let report = evaluate(&ModelJudge::new(&model, &cache), pairs)?;
    Ok((report, model.weights.len()))
}

/// Retrain and evaluate on each noisy version of the benchmark network.
/// Cells run in parallel; `delta_f1` is against the noise-free network.
pub fn noise_experiment(
    bench: &Benchmark,
    cfg: &PipelineConfig,
    cells: &[(NoiseKind, f64)],
    seed: u64,
) -> Result<Vec<CellResult>> {
    let g = build_network(&bench.dataset, &cfg.build)?;
    let (clean, dim) = train_and_evaluate(&bench.dataset, &g, bench.corpus.as_ref(), &bench.pairs, cfg)?;
    let mut out = vec![CellResult {
        experiment: "noise".into(),
        cell: "clean".into(),
        edges: g.edge_count(),
        dimension: dim,
        report: clean,
        delta_f1: Some(0.0),
    }];
    let rows = cells
        .par_iter()
        .map(|&(kind, x)| {
            let noisy = inject_noise(&g, kind, x, seed)?;
            let (report, dim) = train_and_evaluate(&bench.dataset, &noisy, bench.corpus.as_ref(), &bench.pairs, cfg)?;
            Ok(CellResult {
                experiment: "noise".into(),
                cell: format!("{kind}@{x}"),
                edges: noisy.edge_count(),
                dimension: dim,
                delta_f1: Some(report.f1 - clean.f1),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    out.extend(rows);
    Ok(out)
}

/// One retrain with `drop` removed.
pub fn ablate(bench: &Benchmark, cfg: &PipelineConfig, drop: Ablation) -> Result<CellResult> {
    let cell_cfg = drop.apply(cfg);
    let g = build_network(&bench.dataset, &cell_cfg.build)?;
    let (report, dim) = train_and_evaluate(&bench.dataset, &g, bench.corpus.as_ref(), &bench.pairs, &cell_cfg)?;
    Ok(CellResult {
        experiment: "ablate".into(),
        cell: drop.to_string(),
        edges: g.edge_count(),
        dimension: dim,
        report,
        delta_f1: None,
    })
}

/// All `drops`, each compared against the full configuration.
pub fn ablation_experiment(bench: &Benchmark, cfg: &PipelineConfig, drops: &[Ablation]) -> Result<Vec<CellResult>> {
    let base = ablate(bench, cfg, Ablation::Nothing)?;
    let mut rows = drops
        .par_iter()
        .filter(|d| **d != Ablation::Nothing)
        .map(|&d| ablate(bench, cfg, d))
        .collect::<Result<Vec<_>>>()?;
    for r in &mut rows {
        r.delta_f1 = Some(r.report.f1 - base.report.f1);
    }
    let mut out = vec![CellResult {
        delta_f1: Some(0.0),
        ..base
    }];
    out.extend(rows);
    Ok(out)
}

/// How users of two datasets are matched.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UserLink {
    /// Same site: user ids are shared.
    UserId,
    /// Different sites of one network: users share an account id.
    AccountId,
}

impl FromStr for UserLink {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "user" => Ok(UserLink::UserId),
            "account" => Ok(UserLink::AccountId),
            _ => Err(Error::InvalidParameter(format!("unknown user link {s:?}"))),
        }
    }
}

/// Users of `test` that also appear in `train` under `link`.
pub fn common_users(train: &Dataset, test: &Dataset, link: UserLink) -> BTreeSet<UserId> {
    match link {
        UserLink::UserId => test
            .users
            .keys()
            .filter(|u| train.users.contains_key(u))
            .copied()
            .collect(),
        UserLink::AccountId => {
            let accounts: HashSet<u64> = train.users.values().filter_map(|u| u.account_id).collect();
            test.users
                .values()
                .filter(|u| u.account_id.is_some_and(|a| accounts.contains(&a)))
                .map(|u| u.user_id)
                .collect()
        }
    }
}

/// Train on `train`, evaluate on the pairs of `test` whose two askers are
/// common to both datasets. Test features come from the test network.
pub fn domain_adapt(train: &Benchmark, test: &Benchmark, cfg: &PipelineConfig, link: UserLink) -> Result<CellResult> {
    let model = run(&train.dataset, train.corpus.as_ref(), cfg)?.model;
    let common = common_users(&train.dataset, &test.dataset, link);
    let asked_by_common = |q: QuestionId| {
        test.dataset
            .question(q)
            .and_then(|r| r.owner)
            .is_some_and(|u| common.contains(&u))
    };
    let pairs: Vec<LabeledPair> = test
        .pairs
        .iter()
        .filter(|((a, b), _)| asked_by_common(*a) && asked_by_common(*b))
        .copied()
        .collect();
    let g = build_network(&test.dataset, &cfg.build)?;
    let cache = compute_cache(&test.dataset, &g, test.corpus.as_ref(), &cfg.features)?;
    let report = evaluate(&ModelJudge::new(&model, &cache), &pairs)?;
    Ok(CellResult {
        experiment: "domain".into(),
        cell: "cross".into(),
        edges: g.edge_count(),
        dimension: model.weights.len(),
        report,
        delta_f1: None,
    })
}

/// `key = value` lines; `#` starts a comment.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "seed",
    "users",
    "questions",
    "buckets",
    "answer_noise",
    "spread",
    "max_answers",
    "passages",
    "pairs",
    "pair_seed",
    "train_seed",
    "delta_t",
    "dataset",
    "corpus",
    "labels",
    "kinds",
    "levels",
    "noise_seed",
    "drops",
    "test_seed",
    "test_id_base",
    "test_vocabulary_salt",
    "test_dataset",
    "test_corpus",
    "test_labels",
    "link",
];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::malformed(i + 1, "expected key = value"))?;
            let k = k.trim().to_ascii_lowercase();
            if !KNOWN_KEYS.contains(&k.as_str()) {
                return Err(Error::malformed(i + 1, format!("unknown key {k:?}")));
            }
            let v = v.trim().trim_matches('"').to_string();
            if values.insert(k.clone(), v).is_some() {
                return Err(Error::malformed(i + 1, format!("duplicate key {k:?}")));
            }
        }
        Ok(ExperimentConfig { values })
    }

    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentConfig::parse(&text)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("cannot parse {key} = {v:?}"))),
        }
    }

    /// Comma separated list.
    pub fn list<T: FromStr>(&self, key: &str, default: Vec<T>) -> Result<Vec<T>> {
        match self.raw(key) {
            None => Ok(default),
            Some(v) => v
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::InvalidParameter(format!("cannot parse {key} entry {s:?}")))
                })
                .collect(),
        }
    }

    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        cfg.train.seed = self.get("train_seed", cfg.train.seed)?;
        cfg.build.delta_t = self.get("delta_t", cfg.build.delta_t)?;
        Ok(cfg)
    }

    fn world(&self, prefix: &str, seed_default: u64) -> Result<SynthConfig> {
        let mut w = SynthConfig::benchmark(self.get(&format!("{prefix}seed"), seed_default)?);
        w.users = self.get("users", w.users)?;
        w.questions = self.get("questions", w.questions)?;
        w.buckets = self.get("buckets", w.buckets)?;
        w.answer_noise = self.get("answer_noise", w.answer_noise)?;
        w.difficulty_spread = self.get("spread", w.difficulty_spread)?;
        w.max_answers = self.get("max_answers", w.max_answers)?;
        w.passages = self.get("passages", w.passages)?;
        if !prefix.is_empty() {
            w.id_base = self.get("test_id_base", 10_000_000)?;
            w.vocabulary_salt = self.get("test_vocabulary_salt", 1)?;
        }
        Ok(w)
    }

    /// The benchmark named by `{prefix}dataset` / `{prefix}corpus` /
    /// `{prefix}labels`, or a synthetic world when no dataset is given.
    fn benchmark_with(&self, prefix: &str, seed_default: u64) -> Result<Benchmark> {
        let cfg = self.pipeline()?;
        match self.raw(&format!("{prefix}dataset")) {
            Some(path) => {
                let labels = self
                    .raw(&format!("{prefix}labels"))
                    .ok_or_else(|| Error::InvalidParameter(format!("{prefix}dataset needs {prefix}labels")))?;
                let dataset = read_dataset(open(Path::new(path))?)?;
                let corpus = match self.raw(&format!("{prefix}corpus")) {
                    Some(c) => Some(ReferenceCorpus::from_text(
                        &std::fs::read_to_string(c).map_err(|e| Error::io(c, e))?,
                    )),
                    None => None,
                };
                let pairs = read_labeled_pairs(open(Path::new(labels))?)?;
                Ok(Benchmark { dataset, corpus, pairs })
            }
            None => Benchmark::synthetic(
                &self.world(prefix, seed_default)?,
                self.get("pairs", 500)?,
                self.get("pair_seed", 101)?,
                &cfg,
            ),
        }
    }

    pub fn benchmark(&self) -> Result<Benchmark> {
        self.benchmark_with("", 1)
    }

    pub fn test_benchmark(&self) -> Result<Benchmark> {
        self.benchmark_with("test_", 2)
    }
}

fn open(path: &Path) -> Result<std::io::BufReader<std::fs::File>> {
    Ok(std::io::BufReader::new(
        std::fs::File::open(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Which protocol an `experiment` run executes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Noise,
    Ablate,
    Domain,
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "noise" => Ok(ExperimentKind::Noise),
            "ablate" => Ok(ExperimentKind::Ablate),
            "domain" => Ok(ExperimentKind::Domain),
            _ => Err(Error::InvalidParameter(format!("unknown experiment {s:?}"))),
        }
    }
}

pub fn run_experiment(kind: ExperimentKind, cfg: &ExperimentConfig) -> Result<Vec<CellResult>> {
    let pipeline = cfg.pipeline()?;
    match kind {
        ExperimentKind::Noise => {
            let kinds = cfg.list("kinds", vec![NoiseKind::Noise1, NoiseKind::Noise2])?;
            let levels = cfg.list("levels", vec![5.0, 10.0, 15.0, 20.0])?;
            let cells: Vec<(NoiseKind, f64)> = kinds
                .iter()
                .flat_map(|k| levels.iter().map(move |x| (*k, *x)))
                .collect();
            noise_experiment(&cfg.benchmark()?, &pipeline, &cells, cfg.get("noise_seed", 7)?)
        }
        ExperimentKind::Ablate => {
            let drops = cfg.list("drops", Ablation::all())?;
            ablation_experiment(&cfg.benchmark()?, &pipeline, &drops)
        }
        ExperimentKind::Domain => {
            let train = cfg.benchmark()?;
            let test = cfg.test_benchmark()?;
            let link = cfg.get("link", UserLink::AccountId)?;
            let same = ablate(&test, &pipeline, Ablation::Nothing)?;
            let mut cross = domain_adapt(&train, &test, &pipeline, link)?;
            cross.delta_f1 = Some(cross.report.f1 - same.report.f1);
            Ok(vec![
                CellResult {
                    experiment: "domain".into(),
                    cell: "same".into(),
                    delta_f1: Some(0.0),
                    ..same
                },
                cross,
            ])
        }
    }
}

pub const RESULTS_HEADER: &str = "experiment\tcell\tedges\tdimension\tn\tprecision\trecall\tf1\tauc\tdelta_f1";

pub fn write_results<W: Write>(rows: &[CellResult], mut w: W) -> Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in rows {
        let delta = r.delta_f1.map_or_else(|| "-".to_string(), |d| format!("{d:.6}"));
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{delta}",
            r.experiment,
            r.cell,
            r.edges,
            r.dimension,
            r.report.n,
            r.report.precision,
            r.report.recall,
            r.report.f1,
            r.report.auc
        )?;
    }
    Ok(())
}

/// `qid_a<TAB>qid_b<TAB>harder` lines; `#` lines are comments.
pub fn read_labeled_pairs<R: BufRead>(r: R) -> Result<Vec<LabeledPair>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let ids: Vec<u64> = t
            .split('\t')
            .map(|f| f.trim().parse::<u64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::malformed(i + 1, "expected three numeric ids"))?;
        let [a, b, h] = ids[..] else {
            return Err(Error::malformed(i + 1, "expected three numeric ids"));
        };
        if h != a && h != b {
            return Err(Error::malformed(i + 1, "harder id is not part of the pair"));
        }
        out.push(((QuestionId(a), QuestionId(b)), QuestionId(h)));
    }
    Ok(out)
}

pub fn write_labeled_pairs<W: Write>(pairs: &[LabeledPair], mut w: W) -> Result<()> {
    for ((a, b), h) in pairs {
        writeln!(w, "{}\t{}\t{}", a.0, b.0, h.0)?;
    }
    Ok(())
}

/// Append-only log of runs and events: `unix_seconds<TAB>event<TAB>key=value...`.
pub struct RunLedger {
    path: PathBuf,
    lock: Mutex<()>,
}

impl RunLedger {
    pub fn new(path: impl Into<PathBuf>) -> RunLedger {
        RunLedger {
            path: path.into(),
            lock: Mutex::new(()),
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn append(&self, event: &str, fields: &[(&str, String)]) -> Result<()> {
        let _guard = self.lock.lock().unwrap_or_else(|p| p.into_inner());
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut line = format!("{now}\t{event}");
        for (k, v) in fields {
            line.push_str(&format!("\t{k}={}", v.replace(['\t', '\n'], " ")));
        }
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| Error::io(&self.path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))
    }

    pub fn record_results(&self, rows: &[CellResult]) -> Result<()> {
        for r in rows {
            self.append(
                &r.experiment,
                &[
                    ("cell", r.cell.clone()),
                    ("edges", r.edges.to_string()),
                    ("n", r.report.n.to_string()),
                    ("f1", format!("{:.6}", r.report.f1)),
                    ("auc", format!("{:.6}", r.report.auc)),
                ],
            )?;
        }
        Ok(())
    }
}
