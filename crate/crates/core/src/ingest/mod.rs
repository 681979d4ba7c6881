//! Normalized CQA records and the dataset snapshot they live in.
//!
//! Dumps are parsed by [`dump`]; [`Dataset::assemble`] then resolves owners,
//! fixes the bucket origin at the earliest post and assigns time buckets.

mod dump;
mod snapshot;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{AnswerId, QuestionId, Timestamp, UserId};

pub use dump::{parse_posts, parse_timestamp, parse_users, ParseMode, ParseStats, PostsParse};
pub use snapshot::{read_dataset, write_dataset, DATASET_FORMAT_VERSION};

pub const SECONDS_PER_DAY: i64 = 86_400;
pub const DEFAULT_BUCKET_WEEKS: u32 = 2;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: UserId,
    /// Network-wide identity shared across sites of the same platform.
    pub account_id: Option<u64>,
    pub reputation: u64,
    pub registration_time: Timestamp,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionRecord {
    pub question_id: QuestionId,
    /// `None` for anonymous or unresolvable askers. Such questions stay in
    /// the network as nodes but never produce hypothesis edges.
    pub owner: Option<UserId>,
    pub created_at: Timestamp,
    pub bucket: u32,
    pub tags: BTreeSet<String>,
    pub title: String,
    pub body: String,
    pub accepted_answer_id: Option<AnswerId>,
}

impl QuestionRecord {
    /// Title, body and tags joined for text processing.
    pub fn full_text(&self) -> String {
        let mut s = String::with_capacity(self.title.len() + self.body.len() + 16);
        s.push_str(&self.title);
        s.push('\n');
        s.push_str(&self.body);
        for t in &self.tags {
            s.push(' ');
            s.push_str(t);
        }
        s
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub answer_id: AnswerId,
    pub parent_question: QuestionId,
    pub owner: Option<UserId>,
    pub created_at: Timestamp,
    /// Upvotes minus downvotes.
    pub score: i64,
    pub is_accepted: bool,
    pub body: String,
}

impl AnswerRecord {
    /// An answer counts as correct when it was accepted or has a positive score.
    pub fn is_correct(&self) -> bool {
        self.is_accepted || self.score > 0
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    pub questions: BTreeMap<QuestionId, QuestionRecord>,
    pub answers: BTreeMap<AnswerId, AnswerRecord>,
    pub users: BTreeMap<UserId, UserRecord>,
    pub bucket_width_weeks: u32,
    pub epoch: Timestamp,
}

/// Bucket index of `t` for buckets of `width_weeks` weeks starting at `epoch`.
pub fn bucketize(t: Timestamp, epoch: Timestamp, width_weeks: u32) -> Result<u32> {
    if width_weeks == 0 {
        return Err(Error::InvalidParameter("bucket width must be positive".into()));
    }
    if t < epoch {
        return Err(Error::BeforeEpoch { t, epoch });
    }
    let width = i64::from(width_weeks) * 7 * SECONDS_PER_DAY;
    u32::try_from((t - epoch) / width)
        .map_err(|_| Error::InvalidParameter(format!("timestamp {t} is out of bucket range")))
}

impl Dataset {
    /// Build a dataset from parsed posts and users.
    ///
    /// The epoch is the earliest question or answer timestamp. Owners that do
    /// not resolve against `users` are cleared.
    pub fn assemble(
        posts: PostsParse,
        users: BTreeMap<UserId, UserRecord>,
        bucket_width_weeks: u32,
    ) -> Result<Dataset> {
        let PostsParse {
            mut questions,
            mut answers,
            ..
        } = posts;
        let epoch = questions
            .values()
            .map(|q| q.created_at)
            .chain(answers.values().map(|a| a.created_at))
            .min()
            .unwrap_or(0);

        let mut unresolved = 0usize;
        for q in questions.values_mut() {
            if let Some(o) = q.owner {
                if !users.contains_key(&o) {
                    q.owner = None;
                    unresolved += 1;
                }
            }
            q.bucket = bucketize(q.created_at, epoch, bucket_width_weeks)?;
        }
        answers.retain(|_, a| questions.contains_key(&a.parent_question));
        for a in answers.values_mut() {
            if let Some(o) = a.owner {
                if !users.contains_key(&o) {
                    a.owner = None;
                    unresolved += 1;
                }
            }
            a.is_accepted = questions[&a.parent_question].accepted_answer_id == Some(a.answer_id);
        }
        if unresolved > 0 {
            tracing::warn!(unresolved, "posts with owners missing from the users table");
        }
        Ok(Dataset {
            questions,
            answers,
            users,
            bucket_width_weeks,
            epoch,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.questions.is_empty()
    }

    pub fn question(&self, q: QuestionId) -> Option<&QuestionRecord> {
        self.questions.get(&q)
    }

    /// The retained accepted answer of `q`, if any.
    pub fn accepted_answer(&self, q: &QuestionRecord) -> Option<&AnswerRecord> {
        q.accepted_answer_id
            .and_then(|id| self.answers.get(&id))
            .filter(|a| a.is_accepted)
    }

    pub fn answers_by_question(&self) -> HashMap<QuestionId, Vec<&AnswerRecord>> {
        let mut out: HashMap<QuestionId, Vec<&AnswerRecord>> = HashMap::new();
        for a in self.answers.values() {
            out.entry(a.parent_question).or_default().push(a);
        }
        out
    }

    /// Questions per asker in ascending `(created_at, question_id)` order.
    pub fn questions_by_owner(&self) -> BTreeMap<UserId, Vec<&QuestionRecord>> {
        let mut out: BTreeMap<UserId, Vec<&QuestionRecord>> = BTreeMap::new();
        for q in self.questions.values() {
            if let Some(o) = q.owner {
                out.entry(o).or_default().push(q);
            }
        }
        for qs in out.values_mut() {
            qs.sort_by_key(|q| (q.created_at, q.question_id));
        }
        out
    }

    pub fn max_reputation(&self) -> u64 {
        self.users.values().map(|u| u.reputation).max().unwrap_or(0)
    }

    /// Keep only questions whose tags intersect `filter` (and their answers).
    /// An empty filter keeps everything.
    pub fn retain_tags(&mut self, filter: &BTreeSet<String>) {
        if filter.is_empty() {
            return;
        }
        self.questions.retain(|_, q| q.tags.iter().any(|t| filter.contains(t)));
        let questions = &self.questions;
        self.answers.retain(|_, a| questions.contains_key(&a.parent_question));
    }

    /// Check the referential invariants; used after loading snapshots.
    pub fn validate(&self) -> Result<()> {
        let mut accepted_per_q: HashMap<QuestionId, usize> = HashMap::new();
        for a in self.answers.values() {
            let Some(q) = self.questions.get(&a.parent_question) else {
                return Err(Error::Corrupt(format!(
                    "answer {} points at missing question {}",
                    a.answer_id, a.parent_question
                )));
            };
            if a.is_accepted {
                if q.accepted_answer_id != Some(a.answer_id) {
                    return Err(Error::Corrupt(format!(
                        "answer {} flagged accepted but question {} disagrees",
                        a.answer_id, q.question_id
                    )));
                }
                *accepted_per_q.entry(q.question_id).or_default() += 1;
            }
            if let Some(o) = a.owner {
                if !self.users.contains_key(&o) {
                    return Err(Error::Corrupt(format!("answer owner {o} missing")));
                }
            }
        }
        if accepted_per_q.values().any(|&c| c > 1) {
            return Err(Error::Corrupt("question with several accepted answers".into()));
        }
        for q in self.questions.values() {
            if q.bucket != bucketize(q.created_at, self.epoch, self.bucket_width_weeks)? {
                return Err(Error::Corrupt(format!("question {} has a stale bucket", q.question_id)));
            }
            if let Some(o) = q.owner {
                if !self.users.contains_key(&o) {
                    return Err(Error::Corrupt(format!("question owner {o} missing")));
                }
            }
        }
        Ok(())
    }
}
