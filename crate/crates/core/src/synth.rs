//! Synthetic CQA worlds with a planted difficulty order.
//!
//! Users carry a latent expertise that grows over time; each question's
//! difficulty sits close to its asker's expertise at posting time, and
//! questions are answered correctly mostly by users whose expertise exceeds
//! the difficulty. A tunable share of answers come from under-qualified
//! users, which produces hypothesis edges that contradict the planted order.
//! Accepted-answer delays and answer texts are drawn so that the metadata and
//! textual features carry (noisy) difficulty signal, and each question's text
//! contains words tied to its difficulty band, which is what the cold-start
//! neighbourhoods rely on.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::DifficultyNetwork;
use crate::ingest::{AnswerRecord, Dataset, PostsParse, QuestionRecord, UserRecord, SECONDS_PER_DAY};
use crate::types::{AnswerId, QuestionId, Timestamp, UserId};

const BASE_EPOCH: Timestamp = 1_325_376_000; // 2012-01-01
const BUCKET_SECS: i64 = 14 * SECONDS_PER_DAY;

/// Ids of the seven questions in the two-user worked example: Robin asks at
/// buckets 0, 2, 4; Bob asks at buckets 0, 1, 3, 4 and correctly answers
/// Robin's bucket-2 question.
#[derive(Clone, Copy, Debug)]
pub struct ExampleOneIds {
    pub robin: UserId,
    pub bob: UserId,
    pub r1: QuestionId,
    pub r2: QuestionId,
    pub r3: QuestionId,
    pub b1: QuestionId,
    pub b2: QuestionId,
    pub b3: QuestionId,
    pub b4: QuestionId,
    pub answer: AnswerId,
}

/// Users with reputation 1 for hand-built datasets; [`Dataset::assemble`]
/// drops owners that are not in the users table.
pub fn plain_users(ids: impl IntoIterator<Item = u64>) -> BTreeMap<UserId, UserRecord> {
    ids.into_iter()
        .map(|i| {
            let u = UserId(i);
            let rec = UserRecord {
                user_id: u,
                account_id: None,
                reputation: 1,
                registration_time: BASE_EPOCH,
            };
            (u, rec)
        })
        .collect()
}

pub fn example_one() -> (Dataset, ExampleOneIds) {
    let ids = ExampleOneIds {
        robin: UserId(1),
        bob: UserId(2),
        r1: QuestionId(11),
        r2: QuestionId(12),
        r3: QuestionId(13),
        b1: QuestionId(21),
        b2: QuestionId(22),
        b3: QuestionId(23),
        b4: QuestionId(24),
        answer: AnswerId(100),
    };
    let at = |bucket: i64, hours: i64| BASE_EPOCH + bucket * BUCKET_SECS + hours * 3600;
    let question = |id: QuestionId, owner: UserId, created_at: Timestamp, accepted: Option<AnswerId>| QuestionRecord {
        question_id: id,
        owner: Some(owner),
        created_at,
        bucket: 0,
        tags: BTreeSet::from(["java".to_string()]),
        title: format!("question {id}"),
        body: String::new(),
        accepted_answer_id: accepted,
    };
    let mut posts = PostsParse::default();
    for q in [
        question(ids.r1, ids.robin, at(0, 0), None),
        question(ids.r2, ids.robin, at(2, 5), Some(ids.answer)),
        question(ids.r3, ids.robin, at(4, 5), None),
        question(ids.b1, ids.bob, at(0, 3), None),
        question(ids.b2, ids.bob, at(1, 3), None),
        question(ids.b3, ids.bob, at(3, 3), None),
        question(ids.b4, ids.bob, at(4, 3), None),
    ] {
        posts.questions.insert(q.question_id, q);
    }
    posts.answers.insert(
        ids.answer,
        AnswerRecord {
            answer_id: ids.answer,
            parent_question: ids.r2,
            owner: Some(ids.bob),
            created_at: at(2, 29),
            score: 2,
            is_accepted: true,
            body: "answer".into(),
        },
    );
    let users = [(ids.robin, 10), (ids.bob, 500)]
        .into_iter()
        .map(|(u, rep)| {
            (
                u,
                UserRecord {
                    user_id: u,
                    account_id: Some(u.0 + 1000),
                    reputation: rep,
                    registration_time: BASE_EPOCH - 86_400,
                },
            )
        })
        .collect();
    let ds = Dataset::assemble(posts, users, 2).expect("example dataset is valid");
    (ds, ids)
}

#[derive(Clone, Debug)]
pub struct SynthConfig {
    pub seed: u64,
    pub users: usize,
    pub questions: usize,
    /// Timespan in two-week buckets.
    pub buckets: u32,
    /// Probability that an answer comes from an under-qualified user.
    pub answer_noise: f64,
    /// Spread of question difficulty around the asker's expertise.
    pub difficulty_spread: f64,
    pub max_answers: usize,
    /// Offset added to every generated id, to keep domains disjoint.
    pub id_base: u64,
    /// Salt for the generated vocabulary, to model a different site.
    pub vocabulary_salt: u64,
    pub passages: usize,
}

impl SynthConfig {
    /// Benchmark-sized world (a couple of thousand questions).
    pub fn benchmark(seed: u64) -> SynthConfig {
        SynthConfig {
            seed,
            users: 120,
            questions: 3000,
            buckets: 52,
            answer_noise: 0.25,
            difficulty_spread: 0.03,
            max_answers: 5,
            id_base: 0,
            vocabulary_salt: 0,
            passages: 40,
        }
    }

    /// Small world for unit tests.
    pub fn small(seed: u64) -> SynthConfig {
        SynthConfig {
            users: 40,
            questions: 200,
            buckets: 20,
            passages: 12,
            ..SynthConfig::benchmark(seed)
        }
    }
}

/// A generated dataset with its planted difficulty and reference corpus.
#[derive(Clone, Debug)]
pub struct SynthWorld {
    pub dataset: Dataset,
    pub difficulty: BTreeMap<QuestionId, f64>,
    /// Blank-line separated passages for the textual feature.
    pub corpus: String,
    pub config: SynthConfig,
}

struct Vocabulary {
    passages: Vec<Vec<String>>,
    bands: Vec<Vec<String>>,
    filler: Vec<String>,
}

fn make_word(rng: &mut ChaCha8Rng) -> String {
    const CONS: &[u8] = b"bcdfghjklmnprstvz";
    const VOW: &[u8] = b"aiou";
    let mut w = String::new();
    for _ in 0..3 {
        w.push(CONS[rng.gen_range(0..CONS.len())] as char);
        w.push(VOW[rng.gen_range(0..VOW.len())] as char);
    }
    w.push('k');
    w
}

impl Vocabulary {
    fn new(cfg: &SynthConfig) -> Vocabulary {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.vocabulary_salt ^ 0x005e_ed0f_70c5);
        let mut seen = HashSet::new();
        let mut fresh = |rng: &mut ChaCha8Rng| loop {
            let w = make_word(rng);
            if seen.insert(w.clone()) {
                return w;
            }
        };
        let passages = (0..cfg.passages)
            .map(|_| (0..25).map(|_| fresh(&mut rng)).collect())
            .collect();
        let bands = (0..BANDS).map(|_| (0..12).map(|_| fresh(&mut rng)).collect()).collect();
        let filler = (0..200).map(|_| fresh(&mut rng)).collect();
        Vocabulary {
            passages,
            bands,
            filler,
        }
    }
}

const BANDS: usize = 8;

struct SynthUser {
    id: UserId,
    base: f64,
    growth: f64,
}

impl SynthUser {
    fn expertise(&self, tau: f64) -> f64 {
        self.base + self.growth * tau
    }
}

impl SynthWorld {
    pub fn generate(cfg: &SynthConfig) -> SynthWorld {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let vocab = Vocabulary::new(cfg);
        let span = i64::from(cfg.buckets) * BUCKET_SECS;
        let users: Vec<SynthUser> = (0..cfg.users)
            .map(|i| SynthUser {
                id: UserId(cfg.id_base + 1 + i as u64),
                base: rng.gen_range(0.0..0.1),
                growth: rng.gen_range(0.5..1.0),
            })
            .collect();

        let spread = Normal::new(0.0, cfg.difficulty_spread.max(1e-9)).expect("valid spread");
        let mut posts = PostsParse::default();
        let mut difficulty = BTreeMap::new();
        let mut next_answer = cfg.id_base + 10 * cfg.questions as u64 + 1;
        let mut asked: Vec<(f64, usize)> = (0..cfg.questions)
            .map(|_| (rng.gen::<f64>(), rng.gen_range(0..users.len())))
            .collect();
        asked.sort_by(|a, b| a.0.total_cmp(&b.0));

        let lo = 0.0;
        let hi = 1.3;
        for (k, &(tau, owner)) in asked.iter().enumerate() {
            let qid = QuestionId(cfg.id_base + 1 + k as u64);
            let asker = &users[owner];
            let d = asker.expertise(tau) + spread.sample(&mut rng);
            difficulty.insert(qid, d);
            let created_at = BASE_EPOCH + (tau * span as f64) as i64;
            let band = (((d - lo) / (hi - lo)) * BANDS as f64).clamp(0.0, BANDS as f64 - 1.0) as usize;

            let mut title = String::new();
            let mut body = String::new();
            for _ in 0..3 {
                let _ = write!(title, "{} ", vocab.bands[band].choose(&mut rng).unwrap());
            }
            for _ in 0..12 {
                let w = if rng.gen_bool(0.5) {
                    vocab.bands[band].choose(&mut rng).unwrap()
                } else {
                    vocab.filler.choose(&mut rng).unwrap()
                };
                let _ = write!(body, "{w} ");
            }

            // Answerers: mostly users clearly above the difficulty.
            let n_answers = rng.gen_range(1..=cfg.max_answers);
            let qualified: Vec<&SynthUser> = users
                .iter()
                .filter(|u| u.id != asker.id && u.expertise(tau) >= d + 0.05)
                .collect();
            let unqualified: Vec<&SynthUser> = users
                .iter()
                .filter(|u| u.id != asker.id && u.expertise(tau) < d)
                .collect();
            let mut answerers: Vec<&SynthUser> = Vec::new();
            for _ in 0..n_answers {
                let pool = if rng.gen_bool(cfg.answer_noise) || qualified.is_empty() {
                    &unqualified
                } else {
                    &qualified
                };
                if let Some(u) = pool.choose(&mut rng) {
                    if !answerers.iter().any(|a| a.id == u.id) {
                        answerers.push(u);
                    }
                }
            }
            let mut accepted = None;
            for (i, u) in answerers.iter().enumerate() {
                let aid = AnswerId(next_answer);
                next_answer += 1;
                let best = i == 0 && rng.gen_bool((0.97 - 0.15 * d).clamp(0.5, 0.97));
                // Harder questions wait longer for their accepted answer.
                let delay_days = (0.05 + 1.5 * d.max(0.0)) * rng.gen_range(0.9..1.1);
                let answer_time = created_at + (delay_days * SECONDS_PER_DAY as f64) as i64 + 60;
                let score: i64 = if best {
                    rng.gen_range(1..10)
                } else if u.expertise(tau) >= d {
                    rng.gen_range(0..3)
                } else {
                    rng.gen_range(-2..=1)
                };
                let text = answer_text(&mut rng, &vocab, d, hi);
                if best {
                    accepted = Some(aid);
                }
                posts.answers.insert(
                    aid,
                    AnswerRecord {
                        answer_id: aid,
                        parent_question: qid,
                        owner: Some(u.id),
                        created_at: answer_time,
                        score,
                        is_accepted: best,
                        body: text,
                    },
                );
            }
            posts.questions.insert(
                qid,
                QuestionRecord {
                    question_id: qid,
                    owner: Some(asker.id),
                    created_at,
                    bucket: 0,
                    tags: BTreeSet::from(["java".to_string()]),
                    title: title.trim_end().to_string(),
                    body: body.trim_end().to_string(),
                    accepted_answer_id: accepted,
                },
            );
        }

        let user_records = users
            .iter()
            .map(|u| {
                let rep = (u.expertise(1.0) * 1000.0 * rng.gen_range(0.7..1.3)).max(1.0) as u64;
                (
                    u.id,
                    UserRecord {
                        user_id: u.id,
                        account_id: Some(100_000 + u.id.0 - cfg.id_base),
                        reputation: rep,
                        registration_time: BASE_EPOCH - 30 * SECONDS_PER_DAY,
                    },
                )
            })
            .collect();
        let dataset = Dataset::assemble(posts, user_records, 2).expect("synthetic dataset is valid");
        let corpus = vocab
            .passages
            .iter()
            .map(|p| p.join(" "))
            .collect::<Vec<_>>()
            .join("\n\n");
        SynthWorld {
            dataset,
            difficulty,
            corpus,
            config: cfg.clone(),
        }
    }

    pub fn harder(&self, a: QuestionId, b: QuestionId) -> QuestionId {
        if self.difficulty[&b] > self.difficulty[&a] {
            b
        } else {
            a
        }
    }

    /// Fraction of network edges that point from the easier to the harder
    /// question of the planted order.
    pub fn consistency(&self, g: &DifficultyNetwork) -> f64 {
        let n = g.edge_count();
        if n == 0 {
            return 1.0;
        }
        let ok = g
            .edges()
            .filter(|e| self.difficulty[&e.to] > self.difficulty[&e.from])
            .count();
        ok as f64 / n as f64
    }

    /// Uniform random ordered pairs not directly connected in `g`, labelled
    /// with the planted harder question.
    pub fn planted_pairs(
        &self,
        g: &DifficultyNetwork,
        n: usize,
        seed: u64,
    ) -> Vec<((QuestionId, QuestionId), QuestionId)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<QuestionId> = self.difficulty.keys().copied().collect();
        let mut seen = HashSet::new();
        let mut out = Vec::with_capacity(n);
        let mut attempts = 0usize;
        while out.len() < n && attempts < n * 100 {
            attempts += 1;
            let a = *ids.choose(&mut rng).unwrap();
            let b = *ids.choose(&mut rng).unwrap();
            if a == b || g.contains_edge(a, b) || g.contains_edge(b, a) {
                continue;
            }
            if !seen.insert((a.min(b), a.max(b))) {
                continue;
            }
            out.push(((a, b), self.harder(a, b)));
        }
        out
    }

    /// Three-level labels from planted-difficulty terciles.
    pub fn planted_levels(&self) -> BTreeMap<QuestionId, crate::global_rank::Level> {
        use crate::global_rank::Level;
        let mut sorted: Vec<(QuestionId, f64)> = self.difficulty.iter().map(|(q, d)| (*q, *d)).collect();
        sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        let n = sorted.len();
        sorted
            .into_iter()
            .enumerate()
            .map(|(i, (q, _))| {
                let level = match i * 3 / n.max(1) {
                    0 => Level::Easy,
                    1 => Level::Medium,
                    _ => Level::Hard,
                };
                (q, level)
            })
            .collect()
    }

    /// Write `Posts.ndjson`, `Users.ndjson` and `corpus.txt` under `dir`.
    pub fn write_dumps(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ds = &self.dataset;
        let posts_path = dir.join("Posts.ndjson");
        let mut posts =
            std::io::BufWriter::new(std::fs::File::create(&posts_path).map_err(|e| Error::io(&posts_path, e))?);
        for q in ds.questions.values() {
            let tags: String = q.tags.iter().map(|t| format!("<{t}>")).collect();
            let row = serde_json::json!({
                "Id": q.question_id.0,
                "PostTypeId": 1,
                "AcceptedAnswerId": q.accepted_answer_id.map(|a| a.0),
                "CreationDate": iso(q.created_at),
                "OwnerUserId": q.owner.map(|u| u.0),
                "Title": q.title,
                "Body": q.body,
                "Tags": tags,
                "Score": 0,
            });
            writeln!(posts, "{row}")?;
        }
        for a in ds.answers.values() {
            let row = serde_json::json!({
                "Id": a.answer_id.0,
                "PostTypeId": 2,
                "ParentId": a.parent_question.0,
                "CreationDate": iso(a.created_at),
                "OwnerUserId": a.owner.map(|u| u.0),
                "Body": a.body,
                "Score": a.score,
            });
            writeln!(posts, "{row}")?;
        }
        posts.flush()?;
        let users_path = dir.join("Users.ndjson");
        let mut users =
            std::io::BufWriter::new(std::fs::File::create(&users_path).map_err(|e| Error::io(&users_path, e))?);
        for u in ds.users.values() {
            let row = serde_json::json!({
                "Id": u.user_id.0,
                "Reputation": u.reputation,
                "CreationDate": iso(u.registration_time),
                "AccountId": u.account_id,
            });
            writeln!(users, "{row}")?;
        }
        users.flush()?;
        let corpus_path = dir.join("corpus.txt");
        std::fs::write(&corpus_path, &self.corpus).map_err(|e| Error::io(&corpus_path, e))?;
        Ok(())
    }
}

fn iso(t: Timestamp) -> String {
    chrono::DateTime::from_timestamp(t, 0)
        .map(|dt| dt.format("%Y-%m-%dT%H:%M:%S%.3f").to_string())
        .unwrap_or_else(|| t.to_string())
}

/// Easy answers draw most tokens from one passage; hard answers scatter
/// them over several passages and words absent from the corpus.
const ANSWER_WORDS: usize = 100;

fn answer_text(rng: &mut ChaCha8Rng, vocab: &Vocabulary, d: f64, hi: f64) -> String {
    let concentration = (1.0 - d / hi).clamp(0.05, 0.95);
    let home = rng.gen_range(0..vocab.passages.len());
    let mut words = Vec::with_capacity(ANSWER_WORDS);
    for _ in 0..ANSWER_WORDS {
        let w = if rng.gen_bool(concentration) {
            vocab.passages[home].choose(rng).unwrap()
        } else if rng.gen_bool(0.5) {
            vocab.passages.choose(rng).unwrap().choose(rng).unwrap()
        } else {
            vocab.filler.choose(rng).unwrap()
        };
        words.push(w.as_str());
    }
    words.join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_network, BuildParams};

    #[test]
    fn generation_is_deterministic() {
        let a = SynthWorld::generate(&SynthConfig::small(5));
        let b = SynthWorld::generate(&SynthConfig::small(5));
        assert_eq!(a.dataset, b.dataset);
        assert_eq!(a.corpus, b.corpus);
        a.dataset.validate().unwrap();
    }

    #[test]
    fn hypothesis_edges_mostly_follow_the_planted_order() {
        let w = SynthWorld::generate(&SynthConfig::benchmark(1));
        let g = build_network(&w.dataset, &BuildParams::default()).unwrap();
        let c = w.consistency(&g);
        assert!(g.edge_count() > 1000, "edges {}", g.edge_count());
        assert!((0.88..0.94).contains(&c), "consistency {c}");
    }
}
