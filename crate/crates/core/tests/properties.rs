//! Property tests for the invariants of each module, checked on random
//! inputs against independent oracles where one exists.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use proptest::prelude::*;
use qdiff_core::baselines::{build_acceptance_graph, extract_competitions};
use qdiff_core::coldstart::{predict_cold_pair, ColdStartIndex, PairSide};
use qdiff_core::experiments::{inject_noise, NoiseKind};
use qdiff_core::features::{compute_cache, reputation_pagerank, FeatureConfig, ReferenceCorpus};
use qdiff_core::global_rank::{fit_thresholds, global_scores, sample_tournament, Level};
use qdiff_core::graph::{
    build_network, write_network, BuildParams, DifficultyNetwork, EdgeType, NetworkParams, TypeSet,
};
use qdiff_core::model::{
    auc_from_scores, incremental_update, precision_recall_f1, predict_pair, ModelJudge, PairJudge,
    DEFAULT_FEEDBACK_THRESHOLD,
};
use qdiff_core::pipeline::{run, Artifacts, PipelineConfig};
use qdiff_core::synth::{SynthConfig, SynthWorld};
use qdiff_core::{QuestionId, UserId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset(seed: u64) -> qdiff_core::Dataset {
    common::random_dataset(&mut ChaCha8Rng::seed_from_u64(seed), 50)
}

fn random_graph(seed: u64, max_nodes: u64) -> DifficultyNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=max_nodes);
    let p = rng.gen_range(0.05..0.5);
    let mut g = DifficultyNetwork::new((1..=n).map(QuestionId), NetworkParams::default());
    for a in 1..=n {
        for b in 1..=n {
            if a != b && rng.gen_bool(p) {
                g.add_edge(QuestionId(a), QuestionId(b), TypeSet::single(EdgeType::Type1))
                    .unwrap();
            }
        }
    }
    g
}

struct Small {
    world: SynthWorld,
    artifacts: Artifacts,
    index: ColdStartIndex,
}

fn small() -> &'static Small {
    static SMALL: OnceLock<Small> = OnceLock::new();
    SMALL.get_or_init(|| {
        let world = SynthWorld::generate(&SynthConfig::small(3));
        let corpus = ReferenceCorpus::from_text(&world.corpus);
        let artifacts = run(&world.dataset, Some(&corpus), &PipelineConfig::default()).unwrap();
        let index = ColdStartIndex::build(&world.dataset, &artifacts.network);
        Small {
            world,
            artifacts,
            index,
        }
    })
}

fn pick(ids: &[QuestionId], i: usize, j: usize) -> Option<(QuestionId, QuestionId)> {
    let (a, b) = (ids[i % ids.len()], ids[j % ids.len()]);
    (a != b).then_some((a, b))
}

/// Stepwise binary oracle: counts in one pass, no shared helpers.
fn f1_oracle(truth: &[bool], pred: &[bool]) -> (f64, f64, f64) {
    let tp = truth.iter().zip(pred).filter(|(t, p)| **t && **p).count() as f64;
    let pp = pred.iter().filter(|p| **p).count() as f64;
    let ap = truth.iter().filter(|t| **t).count() as f64;
    let p = if pp > 0.0 { tp / pp } else { 0.0 };
    let r = if ap > 0.0 { tp / ap } else { 0.0 };
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    (p, r, f)
}

/// AUC as the fraction of (positive, negative) pairs ordered correctly.
fn auc_oracle(truth: &[bool], scores: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..truth.len() {
        for j in 0..truth.len() {
            if truth[i] && !truth[j] {
                den += 1.0;
                num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    if den == 0.0 {
        0.5
    } else {
        num / den
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn network_edges_follow_their_rules(seed in any::<u64>(), delta in 1u32..4) {
        let ds = dataset(seed);
        let g = build_network(&ds, &BuildParams { delta_t: delta, ..BuildParams::default() }).unwrap();
        prop_assert_eq!(g.nodes().len(), ds.questions.len());
        let mut seen = BTreeSet::new();
        for e in g.edges() {
            prop_assert_ne!(e.from, e.to);
            prop_assert!(seen.insert((e.from, e.to)));
            let (f, t) = (&ds.questions[&e.from], &ds.questions[&e.to]);
            prop_assert!(f.owner.is_some() && t.owner.is_some());
            if e.types.contains(EdgeType::Type1) {
                prop_assert!(f.bucket < t.bucket);
            }
            if e.types.contains(EdgeType::Type2) {
                prop_assert!(f.bucket >= t.bucket && f.bucket - t.bucket <= delta);
            }
            if e.types.contains(EdgeType::Type3) {
                prop_assert!((f.created_at, f.question_id) < (t.created_at, t.question_id));
                prop_assert_eq!(f.owner, t.owner);
            }
        }
    }

    #[test]
    fn network_serialization_is_deterministic(seed in any::<u64>()) {
        let ds = dataset(seed);
        let bytes = |d: &qdiff_core::Dataset| {
            let mut out = Vec::new();
            write_network(&build_network(d, &BuildParams::default()).unwrap(), &mut out).unwrap();
            out
        };
        prop_assert_eq!(bytes(&ds), bytes(&ds.clone()));
    }

    #[test]
    fn tag_filter_is_idempotent(seed in any::<u64>(), keep in proptest::sample::subsequence(vec!["java", "rust", "go"], 0..=3)) {
        let filter: BTreeSet<String> = keep.into_iter().map(String::from).collect();
        let mut once = dataset(seed);
        once.retain_tags(&filter);
        let mut twice = once.clone();
        twice.retain_tags(&filter);
        prop_assert_eq!(&once, &twice);
        for a in once.answers.values() {
            prop_assert!(once.questions.contains_key(&a.parent_question));
        }
        for q in once.questions.values() {
            let accepted = once.answers.values().filter(|a| a.parent_question == q.question_id && a.is_accepted).count();
            prop_assert!(accepted <= 1);
        }
    }

    #[test]
    fn node_scores_stay_in_range(seed in any::<u64>()) {
        let ds = dataset(seed);
        let g = build_network(&ds, &BuildParams::default()).unwrap();
        let corpus = ReferenceCorpus::from_text("q0 java answer\n\nrust q1 passage");
        let cache = compute_cache(&ds, &g, Some(&corpus), &FeatureConfig::default()).unwrap();
        prop_assert_eq!(cache.ids().collect::<BTreeSet<_>>(), g.nodes().clone());
        let n = g.node_count() as f64;
        let mut ranks: Vec<u64> = Vec::new();
        for s in cache.scores.values() {
            for v in [s.lf_rank, s.pagerank, s.time_decay, s.accepted_count, s.text_sim] {
                prop_assert!(v.is_finite());
            }
            for v in [s.time_decay, s.accepted_count, s.text_sim] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            ranks.push((s.lf_rank * n).round() as u64);
        }
        ranks.sort_unstable();
        prop_assert_eq!(ranks, (1..=g.node_count() as u64).collect::<Vec<_>>());
    }

    #[test]
    fn reputation_pagerank_floor(seed in any::<u64>()) {
        let g = random_graph(seed, 20);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let r: BTreeMap<QuestionId, f64> = g.nodes().iter().map(|&v| (v, rng.gen_range(0.0..=1.0))).collect();
        let out = reputation_pagerank(&g, &r, 0.85).unwrap();
        let floor = 0.15 * r.values().copied().fold(f64::INFINITY, f64::min);
        prop_assert!(out.residual < 1e-8);
        for v in out.scores.values() {
            prop_assert!(*v >= floor - 1e-12);
        }
    }

    #[test]
    fn metrics_match_oracles(seed in any::<u64>(), n in 1usize..60) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        let pred: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        // Coarse scores so ties occur.
        let scores: Vec<f64> = (0..n).map(|_| f64::from(rng.gen_range(-4..=4)) / 2.0).collect();
        let (p, r, f) = precision_recall_f1(&truth, &pred);
        let (op, or, of) = f1_oracle(&truth, &pred);
        prop_assert!((p - op).abs() < 1e-12 && (r - or).abs() < 1e-12 && (f - of).abs() < 1e-12);
        prop_assert!((auc_from_scores(&truth, &scores) - auc_oracle(&truth, &scores)).abs() < 1e-12);
    }

    #[test]
    fn acceptance_graph_matches_oracle(seed in any::<u64>()) {
        let ds = dataset(seed);
        let mut want = BTreeSet::new();
        for a in ds.answers.values() {
            for b in ds.answers.values() {
                if a.owner.is_some() && a.owner == b.owner && !a.is_accepted && b.is_accepted {
                    let lost = a.parent_question;
                    let won = b.parent_question;
                    let also_won = ds.answers.values().any(|c| c.owner == a.owner && c.parent_question == lost && c.is_accepted);
                    if lost != won && !also_won {
                        want.insert((lost, won));
                    }
                }
            }
        }
        let got: BTreeSet<_> = build_acceptance_graph(&ds).edges().map(|e| (e.from, e.to)).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn competition_counts(seed in any::<u64>()) {
        let ds = dataset(seed);
        let mut want = 0usize;
        for q in ds.questions.values() {
            let Some(best) = ds.answers.values().find(|a| a.parent_question == q.question_id && a.is_accepted) else { continue };
            let others: BTreeSet<UserId> = ds.answers.values()
                .filter(|a| a.parent_question == q.question_id && a.answer_id != best.answer_id)
                .filter_map(|a| a.owner)
                .collect();
            // Question beats asker; best answerer beats question, asker and
            // each other answerer; anonymous sides and self-pairs drop out.
            want += usize::from(q.owner.is_some());
            want += usize::from(best.owner.is_some());
            want += usize::from(best.owner.is_some() && q.owner.is_some() && best.owner != q.owner);
            want += others.iter().filter(|&&u| best.owner.is_some() && Some(u) != best.owner).count();
        }
        let cg = extract_competitions(&ds);
        prop_assert_eq!(cg.len(), want);
        prop_assert!(cg.competitions.iter().all(|c| c.winner != c.loser));
    }

    #[test]
    fn noise_keeps_nodes_and_is_reproducible(seed in any::<u64>(), x in 0.0f64..=20.0, second in any::<bool>()) {
        let g = random_graph(seed, 25);
        let kind = if second { NoiseKind::Noise2 } else { NoiseKind::Noise1 };
        let a = inject_noise(&g, kind, x, seed).unwrap();
        let b = inject_noise(&g, kind, x, seed).unwrap();
        prop_assert_eq!(a.nodes(), g.nodes());
        let k = (x * g.edge_count() as f64 / 100.0).floor() as usize;
        let expected = if second { g.edge_count() } else { g.edge_count() + k };
        prop_assert_eq!(a.edge_count(), expected);
        let ea: Vec<_> = a.edges().collect();
        let eb: Vec<_> = b.edges().collect();
        prop_assert_eq!(ea, eb);
    }

    #[test]
    fn threshold_cuts_are_ordered(seed in any::<u64>(), n in 3usize..80) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scores: BTreeMap<QuestionId, f64> = (0..n as u64).map(|i| (QuestionId(i), rng.gen_range(0.0..1.0))).collect();
        let table = qdiff_core::baselines::ScoreTable::new(scores, qdiff_core::baselines::ScoreSource::TournamentPR).unwrap();
        let mut labels: Vec<(QuestionId, Level)> = (0..n as u64).map(|i| (QuestionId(i), Level::ALL[rng.gen_range(0..3)])).collect();
        labels[0].1 = Level::Easy;
        labels[1].1 = Level::Hard;
        let t = fit_thresholds(&table, &labels).unwrap();
        prop_assert!(t.cut1 <= t.cut2);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn training_is_deterministic(seed in 0u64..4) {
        let world = SynthWorld::generate(&SynthConfig::small(seed));
        let a = run(&world.dataset, None, &PipelineConfig::default()).unwrap();
        let b = run(&world.dataset, None, &PipelineConfig::default()).unwrap();
        prop_assert_eq!(a.model, b.model);
    }

    #[test]
    fn tournament_edges_agree_with_the_model(seed in any::<u64>(), samples in 1usize..300) {
        let s = small();
        let ids: Vec<QuestionId> = s.artifacts.cache.ids().take(40).collect();
        let judge = ModelJudge::new(&s.artifacts.model, &s.artifacts.cache);
        let t = sample_tournament(&judge, &ids, samples, seed).unwrap();
        for e in t.edges() {
            prop_assert_eq!(predict_pair(&s.artifacts.model, &s.artifacts.cache, e.from, e.to).unwrap().harder, e.to);
            prop_assert!(!t.contains_edge(e.to, e.from));
        }
        let scores = global_scores(&t).unwrap();
        prop_assert_eq!(scores.scores.len(), ids.len());
    }

    #[test]
    fn cold_start_votes_are_symmetric(i in any::<usize>(), j in any::<usize>(), k in 1usize..8, both_new in any::<bool>()) {
        let s = small();
        let ids: Vec<QuestionId> = s.artifacts.cache.ids().collect();
        let Some((a, b)) = pick(&ids, i, j) else { return Ok(()) };
        let new = |q: QuestionId| PairSide::New {
            id: QuestionId(q.0 + 1_000_000),
            text: s.world.dataset.questions[&q].full_text(),
            posted_at: Some(s.world.dataset.questions[&q].created_at),
        };
        let x = new(a);
        let y = if both_new { new(b) } else { PairSide::Known(b) };
        let (m, c, idx) = (&s.artifacts.model, &s.artifacts.cache, &s.index);
        match (predict_cold_pair(m, c, idx, &x, &y, k), predict_cold_pair(m, c, idx, &y, &x, k)) {
            (Ok(u), Ok(v)) => {
                prop_assert_eq!(u.harder, v.harder);
                prop_assert!((u.confidence - v.confidence).abs() < 1e-12);
            }
            (Err(_), Err(_)) => {}
            (u, v) => prop_assert!(false, "only one order failed: {:?} / {:?}", u, v),
        }
    }

    #[test]
    fn accepted_feedback_is_unsure_or_agreeing(i in any::<usize>(), j in any::<usize>(), second in any::<bool>()) {
        let s = small();
        let ids: Vec<QuestionId> = s.artifacts.cache.ids().collect();
        let Some((a, b)) = pick(&ids, i, j) else { return Ok(()) };
        let harder = if second { b } else { a };
        let before = predict_pair(&s.artifacts.model, &s.artifacts.cache, a, b).unwrap();
        let out = incremental_update(&s.artifacts.model, &s.artifacts.cache, a, b, harder, DEFAULT_FEEDBACK_THRESHOLD).unwrap();
        if out.is_accepted() {
            prop_assert!(before.confidence <= DEFAULT_FEEDBACK_THRESHOLD || before.harder == harder);
        } else {
            prop_assert!(before.confidence > DEFAULT_FEEDBACK_THRESHOLD && before.harder != harder);
        }
    }
}

#[test]
fn coin_judge_auc_is_chance() {
    use qdiff_core::global_rank::CoinJudge;
    use qdiff_core::model::evaluate;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs: Vec<_> = (0..1000u64)
        .map(|i| {
            let (a, b) = (QuestionId(2 * i), QuestionId(2 * i + 1));
            ((a, b), if rng.gen_bool(0.5) { a } else { b })
        })
        .collect();
    let judge = CoinJudge { seed: 9 };
    let report = evaluate(&judge as &dyn PairJudge, &pairs).unwrap();
    assert!((report.auc - 0.5).abs() < 0.05, "coin AUC {}", report.auc);
}
