//! Random hand-built datasets shared by the oracle and property tests.

use std::collections::BTreeSet;

use qdiff_core::ingest::PostsParse;
use qdiff_core::synth::plain_users;
use qdiff_core::{AnswerId, AnswerRecord, Dataset, QuestionId, QuestionRecord, UserId};
use rand::Rng;

const TAGS: [&str; 3] = ["java", "rust", "go"];

/// At most `max_posts` posts by up to five users. Timestamps are whole days
/// over ten weeks, so equal timestamps and equal buckets both occur; about
/// one owner in ten is anonymous.
pub fn random_dataset(rng: &mut impl Rng, max_posts: usize) -> Dataset {
    let users = rng.gen_range(1..=5u64);
    let posts = rng.gen_range(1..=max_posts);
    let n_questions = rng.gen_range(1..=posts);
    let base = 1_400_000_000i64;
    let mut parse = PostsParse::default();
    let owner = |rng: &mut dyn rand::RngCore| rng.gen_bool(0.9).then(|| UserId(rng.gen_range(1..=users)));
    for i in 0..n_questions as u64 {
        let id = QuestionId(1000 + i);
        let mut tags: BTreeSet<String> = TAGS
            .iter()
            .filter(|_| rng.gen_bool(0.4))
            .map(|t| t.to_string())
            .collect();
        if tags.is_empty() {
            tags.insert(TAGS[rng.gen_range(0..TAGS.len())].to_string());
        }
        parse.questions.insert(
            id,
            QuestionRecord {
                question_id: id,
                owner: owner(rng),
                created_at: base + rng.gen_range(0..70i64) * 86_400,
                bucket: 0,
                tags,
                title: format!("q{i}"),
                body: String::new(),
                accepted_answer_id: None,
            },
        );
    }
    let qids: Vec<QuestionId> = parse.questions.keys().copied().collect();
    for i in 0..(posts - n_questions) as u64 {
        let aid = AnswerId(5000 + i);
        let parent = qids[rng.gen_range(0..qids.len())];
        if rng.gen_bool(0.4) {
            parse.questions.get_mut(&parent).unwrap().accepted_answer_id = Some(aid);
        }
        parse.answers.insert(
            aid,
            AnswerRecord {
                answer_id: aid,
                parent_question: parent,
                owner: owner(rng),
                created_at: parse.questions[&parent].created_at + rng.gen_range(0..10i64) * 3_600,
                score: rng.gen_range(-2..=3),
                is_accepted: false,
                body: String::new(),
            },
        );
    }
    Dataset::assemble(parse, plain_users(1..=users), 2).unwrap()
}
