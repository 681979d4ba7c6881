//! `qdiff`: command line front end of the difficulty estimation pipeline.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qdiff_core::baselines::{
    build_acceptance_graph, elo_scores, hits_authority, pagerank_scores, question_term_sets, rcm_train, write_scores,
    Elo, RcmParams, ScoreTable,
};
use qdiff_core::coldstart::{predict_any, ColdStartIndex, PairSide, DEFAULT_K};
use qdiff_core::experiments::{
    read_labeled_pairs, run_experiment, write_labeled_pairs, write_results, ExperimentConfig, ExperimentKind, RunLedger,
};
use qdiff_core::features::{
    compute_cache, read_cache, write_cache, FeatureConfig, FeatureMask, FeaturePair, NodeScoreCache, ReferenceCorpus,
};
use qdiff_core::global_rank::{cross_validate_levels, global_scores, sample_tournament, threshold_levels, Level};
use qdiff_core::graph::{build_network, read_network, write_network, BuildParams, DifficultyNetwork, Hypotheses};
use qdiff_core::ingest::{
    parse_posts, parse_users, read_dataset, write_dataset, Dataset, ParseMode, DEFAULT_BUCKET_WEEKS,
};
use qdiff_core::model::{
    evaluate, make_training_set_masked, predict_pair, read_model, train, write_model, ModelJudge, PairClassifier,
    TrainConfig,
};
use qdiff_core::service::{has_snapshot, read_snapshot, serve, Service, ServiceConfig, Snapshot};
use qdiff_core::synth::{SynthConfig, SynthWorld};
use qdiff_core::QuestionId;

/// Exit status when a file was written by an incompatible format version.
const EXIT_VERSION_MISMATCH: u8 = 3;

#[derive(Parser)]
#[command(
    name = "qdiff",
    version,
    about = "Relative question difficulty estimation for CQA archives"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse post and user dumps into a dataset file.
    Ingest(IngestArgs),
    /// Build the difficulty network of a dataset.
    BuildGraph(BuildGraphArgs),
    /// Compute the per-question score cache.
    Features(FeaturesArgs),
    /// Train the pair classifier.
    Train(TrainArgs),
    /// Predict which question of a pair is harder.
    Predict(PredictArgs),
    /// Score labelled pairs with a trained model.
    Evaluate(EvaluateArgs),
    /// Score every question with a scalar baseline.
    Baseline(BaselineArgs),
    /// Predict a pair that may contain brand-new questions.
    ColdstartPredict(ColdstartArgs),
    /// Easy/medium/hard levels from a sampled tournament.
    GlobalRank(GlobalRankArgs),
    /// Run a noise, ablation or domain adaptation experiment.
    Experiment(ExperimentArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Write a synthetic benchmark world with its planted labels.
    Synth(SynthArgs),
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    posts: PathBuf,
    #[arg(long)]
    users: PathBuf,
    /// Comma separated tags; questions need at least one. Empty keeps all.
    #[arg(long, default_value = "")]
    tags: String,
    #[arg(long, default_value_t = DEFAULT_BUCKET_WEEKS)]
    bucket_weeks: u32,
    /// Abort on the first malformed row instead of skipping it.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HypothesisFlags {
    /// Leave out type 1 edges.
    #[arg(long)]
    no_h1: bool,
    /// Leave out type 2 edges.
    #[arg(long)]
    no_h2: bool,
    /// Leave out type 3 edges.
    #[arg(long)]
    no_h3: bool,
}

impl HypothesisFlags {
    fn hypotheses(&self) -> Hypotheses {
        Hypotheses {
            h1: !self.no_h1,
            h2: !self.no_h2,
            h3: !self.no_h3,
        }
    }
}

#[derive(Args)]
struct BuildGraphArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long, default_value_t = 1)]
    delta_t: u32,
    #[command(flatten)]
    hypotheses: HypothesisFlags,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Reference text for the textual feature; without it that feature is 0.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, default_value_t = FeatureConfig::default().alpha)]
    alpha: f64,
    #[arg(long, default_value_t = FeatureConfig::default().damping)]
    damping: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().lambda)]
    lambda: f64,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: u32,
    #[arg(long, default_value_t = TrainConfig::default().eta0)]
    eta0: f64,
    /// Feature pairs to leave out, e.g. `F1F2,F9F10`.
    #[arg(long, value_delimiter = ',')]
    drop: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    /// `<qid1>,<qid2>`
    #[arg(long)]
    pair: String,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    /// `qid_a<TAB>qid_b<TAB>harder` lines.
    #[arg(long)]
    pairs: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Rcm,
    Pagerank,
    Hits,
    Elo,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Network to score (rcm, hits, pagerank); pagerank and hits fall back
    /// to the acceptance graph of the dataset.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Dataset (needed by rcm and elo, and by pagerank/hits without a network).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long, default_value_t = RcmParams::default().delta)]
    delta: f64,
    #[arg(long, default_value_t = RcmParams::default().gamma)]
    gamma: f64,
    #[arg(long, default_value_t = RcmParams::default().iterations)]
    iterations: usize,
    #[arg(long, default_value_t = RcmParams::default().k)]
    neighbors: usize,
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ColdstartArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    /// `<qid1>,<qid2>`
    #[arg(long)]
    pair: String,
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Text of the first question when it is not in the dataset.
    #[arg(long)]
    text_a: Option<String>,
    /// Text of the second question when it is not in the dataset.
    #[arg(long)]
    text_b: Option<String>,
}

#[derive(Args)]
struct GlobalRankArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    cache: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// `qid<TAB>easy|medium|hard` lines used to place the two cuts.
    #[arg(long)]
    levels_train: PathBuf,
    /// Cross-validation folds over the training labels; 0 skips it.
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentName {
    Noise,
    Ablate,
    Domain,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(value_enum)]
    kind: ExperimentName,
    /// `key = value` file; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Run ledger the cell results are appended to.
    #[arg(long, default_value = "runs.log")]
    ledger: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// Network file; rebuilt from the dataset when absent.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Cache file; recomputed from the dataset when absent.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Corpus used when the cache is recomputed.
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Overrides `QDIFF_PORT`.
    #[arg(long)]
    port: Option<u16>,
    /// Overrides `QDIFF_SNAPSHOT_DIR`; an existing snapshot there is restored.
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// Overrides `QDIFF_CONFIDENCE_THRESHOLD`.
    #[arg(long)]
    threshold: Option<f64>,
    /// Overrides `QDIFF_LEDGER`.
    #[arg(long)]
    ledger: Option<PathBuf>,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Unit-test sized world instead of the benchmark world.
    #[arg(long)]
    small: bool,
    /// Labelled evaluation pairs to draw.
    #[arg(long, default_value_t = 500)]
    pairs: usize,
    #[arg(long)]
    out_dir: PathBuf,
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("cannot open {}", path.display()))?,
    ))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot create {}", path.display()))?,
    ))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().with_context(|| format!("cannot write {}", path.display()))
}

fn load_dataset(path: &Path) -> Result<Dataset> {
    read_dataset(open(path)?).with_context(|| format!("cannot read dataset {}", path.display()))
}

fn load_network(path: &Path) -> Result<DifficultyNetwork> {
    read_network(open(path)?).with_context(|| format!("cannot read network {}", path.display()))
}

fn load_cache(path: &Path) -> Result<NodeScoreCache> {
    read_cache(open(path)?).with_context(|| format!("cannot read cache {}", path.display()))
}

fn load_model(path: &Path) -> Result<PairClassifier> {
    read_model(open(path)?).with_context(|| format!("cannot read model {}", path.display()))
}

fn load_corpus(path: &Path) -> Result<ReferenceCorpus> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read corpus {}", path.display()))?;
    Ok(ReferenceCorpus::from_text(&text))
}

fn parse_pair(s: &str) -> Result<(QuestionId, QuestionId)> {
    let Some((a, b)) = s.split_once(',') else {
        bail!("expected <qid1>,<qid2>, got {s:?}");
    };
    let a: u64 = a.trim().parse().with_context(|| format!("bad question id {a:?}"))?;
    let b: u64 = b.trim().parse().with_context(|| format!("bad question id {b:?}"))?;
    if a == b {
        bail!("a pair needs two distinct questions");
    }
    Ok((QuestionId(a), QuestionId(b)))
}

fn ingest(a: IngestArgs) -> Result<()> {
    let mode = if a.strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    };
    let tags: BTreeSet<String> = a
        .tags
        .split(',')
        .map(|t| t.trim().to_ascii_lowercase())
        .filter(|t| !t.is_empty())
        .collect();
    let posts = parse_posts(open(&a.posts)?, &tags, mode).context("cannot parse posts")?;
    let (users, user_stats) = parse_users(open(&a.users)?, mode).context("cannot parse users")?;
    let stats = posts.stats.clone();
    let ds = Dataset::assemble(posts, users, a.bucket_weeks)?;
    let mut w = create(&a.out)?;
    write_dataset(&ds, &mut w)?;
    finish(w, &a.out)?;
    println!(
        "questions\t{}\nanswers\t{}\nusers\t{}\nmalformed_posts\t{}\nmalformed_users\t{}\nfiltered_questions\t{}",
        ds.questions.len(),
        ds.answers.len(),
        ds.users.len(),
        stats.malformed,
        user_stats.malformed,
        stats.filtered_questions
    );
    Ok(())
}

fn build_graph(a: BuildGraphArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let params = BuildParams {
        delta_t: a.delta_t,
        hypotheses: a.hypotheses.hypotheses(),
    };
    let g = build_network(&ds, &params)?;
    let mut w = create(&a.out)?;
    write_network(&g, &mut w)?;
    finish(w, &a.out)?;
    println!("nodes\t{}\nedges\t{}", g.node_count(), g.edge_count());
    for (t, n) in g.type_counts() {
        println!("type_{t:?}\t{n}");
    }
    Ok(())
}

fn features(a: FeaturesArgs) -> Result<()> {
    let ds = load_dataset(&a.dataset)?;
    let g = load_network(&a.network)?;
    let corpus = a.corpus.as_deref().map(load_corpus).transpose()?;
    let cfg = FeatureConfig {
        alpha: a.alpha,
        damping: a.damping,
    };
    let cache = compute_cache(&ds, &g, corpus.as_ref(), &cfg)?;
    let mut w = create(&a.out)?;
    write_cache(&cache, &mut w)?;
    finish(w, &a.out)?;
    println!("questions\t{}", cache.len());
    Ok(())
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let g = load_network(&a.network)?;
    let cache = load_cache(&a.cache)?;
    let mut mask = FeatureMask::ALL;
    for d in &a.drop {
        mask = mask.without(d.parse::<FeaturePair>()?);
    }
    let mask = FeatureMask::from_bits(mask.bits()).context("cannot drop every feature pair")?;
    let cfg = TrainConfig {
        lambda: a.lambda,
        epochs: a.epochs,
        eta0: a.eta0,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let ts = make_training_set_masked(&g, &cache, mask)?;
    let model = train(&ts, &cfg)?;
    let mut w = create(&a.out)?;
    write_model(&model, &mut w)?;
    finish(w, &a.out)?;
    let (pos, neg) = ts.class_sizes();
    println!(
        "examples\t{}\nclass_1\t{pos}\nclass_2\t{neg}\ndimension\t{}\ncalibration\t{:.6}",
        ts.len(),
        model.weights.len(),
        model.calibration
    );
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let cache = load_cache(&a.cache)?;
    let (qa, qb) = parse_pair(&a.pair)?;
    let v = predict_pair(&model, &cache, qa, qb)?;
    println!(
        "harder\t{}\nconfidence\t{:.6}\nmargin\t{:.6}",
        v.harder, v.confidence, v.margin
    );
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let cache = load_cache(&a.cache)?;
    let pairs = read_labeled_pairs(open(&a.pairs)?)?;
    let r = evaluate(&ModelJudge::new(&model, &cache), &pairs)?;
    println!(
        "n\t{}\nprecision\t{:.6}\nrecall\t{:.6}\nf1\t{:.6}\nauc\t{:.6}",
        r.n, r.precision, r.recall, r.f1, r.auc
    );
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let dataset = a.dataset.as_deref().map(load_dataset).transpose()?;
    let network = a.network.as_deref().map(load_network).transpose()?;
    let need_ds = || dataset.as_ref().context("this method needs --dataset");
    let graph_or_acceptance = || -> Result<DifficultyNetwork> {
        match &network {
            Some(g) => Ok(g.clone()),
            None => Ok(build_acceptance_graph(need_ds()?)),
        }
    };
    let table: ScoreTable = match a.method {
        Method::Rcm => {
            let g = network.as_ref().context("rcm needs --network")?;
            let params = RcmParams {
                k: a.neighbors,
                delta: a.delta,
                gamma: a.gamma,
                iterations: a.iterations,
            };
            rcm_train(g, &question_term_sets(need_ds()?), &params)?.scores()?
        }
        Method::Pagerank => pagerank_scores(&graph_or_acceptance()?, a.damping)?,
        Method::Hits => {
            let out = hits_authority(&graph_or_acceptance()?)?;
            if out.degenerate {
                tracing::warn!("graph has no edges; every authority is zero");
            }
            out.authorities
        }
        Method::Elo => elo_scores(need_ds()?, &Elo::default(), Elo::default().initial)?,
    };
    let mut w = create(&a.out)?;
    write_scores(&table, &mut w)?;
    finish(w, &a.out)?;
    println!("scored\t{}", table.scores.len());
    Ok(())
}

fn coldstart(a: ColdstartArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let ds = load_dataset(&a.dataset)?;
    let g = load_network(&a.network)?;
    let cache = load_cache(&a.cache)?;
    let (qa, qb) = parse_pair(&a.pair)?;
    let index = ColdStartIndex::build(&ds, &g);
    let sa = PairSide::resolve(qa, a.text_a.as_deref(), &cache, &index)?;
    let sb = PairSide::resolve(qb, a.text_b.as_deref(), &cache, &index)?;
    let (v, cold) = predict_any(&model, &cache, &index, &sa, &sb, a.k)?;
    println!(
        "harder\t{}\nconfidence\t{:.6}\nmargin\t{:.6}\ncold_start_used\t{cold}",
        v.harder, v.confidence, v.margin
    );
    Ok(())
}

fn read_levels(path: &Path) -> Result<Vec<(QuestionId, Level)>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (q, l) = t
            .split_once('\t')
            .with_context(|| format!("{}:{}: expected qid<TAB>level", path.display(), i + 1))?;
        let q: u64 = q
            .trim()
            .parse()
            .with_context(|| format!("{}:{}: bad question id", path.display(), i + 1))?;
        out.push((QuestionId(q), l.parse()?));
    }
    Ok(out)
}

fn global_rank(a: GlobalRankArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let cache = load_cache(&a.cache)?;
    let labels = read_levels(&a.levels_train)?;
    let nodes: Vec<QuestionId> = cache.ids().collect();
    let judge = ModelJudge::new(&model, &cache);
    let tournament = sample_tournament(&judge, &nodes, a.samples, a.seed)?;
    let scores = global_scores(&tournament)?;
    let (th, levels) = threshold_levels(&scores, &labels)?;
    let mut w = create(&a.out)?;
    writeln!(w, "qid\tscore\tlevel")?;
    for (q, l) in &levels {
        writeln!(w, "{}\t{:.12}\t{l}", q.0, scores.scores[q])?;
    }
    finish(w, &a.out)?;
    println!(
        "tournament_edges\t{}\ncut1\t{:.12}\ncut2\t{:.12}\ntrain_macro_f1\t{:.6}",
        tournament.edge_count(),
        th.cut1,
        th.cut2,
        th.train_macro_f1
    );
    if a.folds > 0 {
        let folds = cross_validate_levels(&scores, &labels, a.folds, a.seed)?;
        println!("cv_macro_f1\t{:.6}", folds.iter().sum::<f64>() / folds.len() as f64);
    }
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let cfg = match &a.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let kind = match a.kind {
        ExperimentName::Noise => ExperimentKind::Noise,
        ExperimentName::Ablate => ExperimentKind::Ablate,
        ExperimentName::Domain => ExperimentKind::Domain,
    };
    let rows = run_experiment(kind, &cfg)?;
    let mut w = create(&a.out)?;
    write_results(&rows, &mut w)?;
    finish(w, &a.out)?;
    RunLedger::new(&a.ledger).record_results(&rows)?;
    for r in &rows {
        println!(
            "{}\t{}\tf1={:.4}\tauc={:.4}",
            r.experiment, r.cell, r.report.f1, r.report.auc
        );
    }
    Ok(())
}

async fn shutdown_signal() {
    if let Err(e) = tokio::signal::ctrl_c().await {
        tracing::warn!(error = %e, "cannot listen for ctrl-c");
        std::future::pending::<()>().await;
    }
    tracing::info!("shutting down");
}

fn serve_cmd(a: ServeArgs) -> Result<()> {
    let mut config = ServiceConfig::from_env()?;
    if let Some(p) = a.port {
        config.port = p;
    }
    if let Some(d) = a.snapshot_dir {
        config.snapshot_dir = Some(d);
    }
    if let Some(t) = a.threshold {
        config.threshold = t;
    }
    if let Some(l) = a.ledger {
        config.ledger = Some(l);
    }
    let ds = load_dataset(&a.dataset)?;
    let restored = match &config.snapshot_dir {
        Some(dir) if has_snapshot(dir) => {
            let s = read_snapshot(dir).with_context(|| format!("cannot restore snapshot from {}", dir.display()))?;
            tracing::info!(generation = s.generation, dir = %dir.display(), "restored snapshot");
            Some(s)
        }
        _ => None,
    };
    let snapshot = match restored {
        Some(s) => s,
        None => {
            let model = load_model(&a.model)?;
            let network = match &a.network {
                Some(p) => load_network(p)?,
                None => build_network(&ds, &BuildParams::default())?,
            };
            let cache = match &a.cache {
                Some(p) => load_cache(p)?,
                None => {
                    let corpus = a.corpus.as_deref().map(load_corpus).transpose()?;
                    compute_cache(&ds, &network, corpus.as_ref(), &FeatureConfig::default())?
                }
            };
            Snapshot {
                model,
                network,
                cache,
                generation: 0,
            }
        }
    };
    let port = config.port;
    let svc = Service::new(snapshot, &ds, config)?;
    drop(ds);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind((a.host.as_str(), port))
            .await
            .with_context(|| format!("cannot bind {}:{port}", a.host))?;
        tracing::info!(addr = %listener.local_addr()?, "listening");
        serve(svc, listener, shutdown_signal()).await?;
        Ok(())
    })
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = if a.small {
        SynthConfig::small(a.seed)
    } else {
        SynthConfig::benchmark(a.seed)
    };
    let world = SynthWorld::generate(&cfg);
    world.write_dumps(&a.out_dir)?;
    let g = build_network(&world.dataset, &BuildParams::default())?;
    let pairs = world.planted_pairs(&g, a.pairs, a.seed.wrapping_add(100));
    let labels = a.out_dir.join("labels.tsv");
    let mut w = create(&labels)?;
    write_labeled_pairs(&pairs, &mut w)?;
    finish(w, &labels)?;
    let levels = a.out_dir.join("levels.tsv");
    let mut w = create(&levels)?;
    for (q, l) in world.planted_levels() {
        writeln!(w, "{}\t{l}", q.0)?;
    }
    finish(w, &levels)?;
    println!(
        "questions\t{}\nedges\t{}\nconsistency\t{:.4}\npairs\t{}",
        world.dataset.questions.len(),
        g.edge_count(),
        world.consistency(&g),
        pairs.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::BuildGraph(a) => build_graph(a),
        Command::Features(a) => features(a),
        Command::Train(a) => train_cmd(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Baseline(a) => baseline(a),
        Command::ColdstartPredict(a) => coldstart(a),
        Command::GlobalRank(a) => global_rank(a),
        Command::Experiment(a) => experiment(a),
        Command::Serve(a) => serve_cmd(a),
        Command::Synth(a) => synth(a),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let version = e.chain().any(|c| {
                matches!(
                    c.downcast_ref::<qdiff_core::Error>(),
                    Some(qdiff_core::Error::VersionMismatch { .. })
                )
            });
            ExitCode::from(if version { EXIT_VERSION_MISMATCH } else { 1 })
        }
    }
}
