//! Line-record dataset snapshot.
//!
//! ```text
//! qdiff-dataset 1
//! {"kind":"meta","bucket_width_weeks":2,"epoch":1262304000}
//! {"kind":"user",...}      one per user, ascending id
//! {"kind":"question",...}  one per question, ascending id
//! {"kind":"answer",...}    one per answer, ascending id
//! ```

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{AnswerRecord, Dataset, QuestionRecord, UserRecord};
use crate::error::{Error, Result};
use crate::types::Timestamp;

pub const DATASET_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "qdiff-dataset";

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Line {
    Meta { bucket_width_weeks: u32, epoch: Timestamp },
    User(UserRecord),
    Question(QuestionRecord),
    Answer(AnswerRecord),
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LineRef<'a> {
    Meta { bucket_width_weeks: u32, epoch: Timestamp },
    User(&'a UserRecord),
    Question(&'a QuestionRecord),
    Answer(&'a AnswerRecord),
}

fn put<W: Write>(w: &mut W, line: &LineRef<'_>) -> Result<()> {
    serde_json::to_writer(&mut *w, line).map_err(std::io::Error::from)?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_dataset<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC} {DATASET_FORMAT_VERSION}")?;
    put(
        &mut w,
        &LineRef::Meta {
            bucket_width_weeks: ds.bucket_width_weeks,
            epoch: ds.epoch,
        },
    )?;
    for u in ds.users.values() {
        put(&mut w, &LineRef::User(u))?;
    }
    for q in ds.questions.values() {
        put(&mut w, &LineRef::Question(q))?;
    }
    for a in ds.answers.values() {
        put(&mut w, &LineRef::Answer(a))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Dataset> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Corrupt("empty dataset file".into()))??;
    let version = header
        .strip_prefix(MAGIC)
        .and_then(|v| v.trim().parse::<u32>().ok())
        .ok_or_else(|| Error::Corrupt(format!("not a dataset snapshot: {header:?}")))?;
    if version != DATASET_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: DATASET_FORMAT_VERSION,
        });
    }
    let mut ds = Dataset::default();
    let mut saw_meta = false;
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Line = serde_json::from_str(&line).map_err(|e| Error::malformed(i + 2, e.to_string()))?;
        match rec {
            Line::Meta {
                bucket_width_weeks,
                epoch,
            } => {
                ds.bucket_width_weeks = bucket_width_weeks;
                ds.epoch = epoch;
                saw_meta = true;
            }
            Line::User(u) => {
                ds.users.insert(u.user_id, u);
            }
            Line::Question(q) => {
                ds.questions.insert(q.question_id, q);
            }
            Line::Answer(a) => {
                ds.answers.insert(a.answer_id, a);
            }
        }
    }
    if !saw_meta {
        return Err(Error::Corrupt("dataset snapshot without meta record".into()));
    }
    ds.validate()?;
    Ok(ds)
}
