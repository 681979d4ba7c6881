//! Readers for Stack Exchange style `Posts.xml` / `Users.xml` dumps and the
//! equivalent newline-delimited JSON fixture format.
//!
//! Both formats are row oriented: every row is a flat mapping from attribute
//! name (`Id`, `PostTypeId`, `CreationDate`, ...) to a scalar value. The format
//! is sniffed from the first non-blank byte (`<` for XML, `{` for JSON lines).

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::BufRead;

use chrono::{DateTime, NaiveDateTime};
use quick_xml::events::Event;
use quick_xml::Reader;

use super::{AnswerRecord, QuestionRecord, UserRecord};
use crate::error::{Error, Result};
use crate::types::{AnswerId, QuestionId, Timestamp, UserId};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ParseMode {
    /// Skip malformed rows and count them.
    #[default]
    Lenient,
    /// Abort on the first malformed row.
    Strict,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParseStats {
    pub rows: usize,
    pub malformed: usize,
    /// Answers whose parent never appeared in the stream.
    pub dangling_answers: usize,
    /// Answers dropped because their parent was removed by the tag filter.
    pub filtered_answers: usize,
    pub filtered_questions: usize,
    pub duplicate_ids: usize,
    /// Rows of other post types (wiki excerpts, ...), ignored.
    pub other_rows: usize,
}

#[derive(Clone, Debug, Default)]
pub struct PostsParse {
    pub questions: BTreeMap<QuestionId, QuestionRecord>,
    pub answers: BTreeMap<AnswerId, AnswerRecord>,
    pub stats: ParseStats,
}

type RawRow = HashMap<String, String>;

/// Parse `2008-07-31T21:42:52.667`, RFC 3339, or integer Unix seconds.
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    let s = s.trim();
    if let Ok(secs) = s.parse::<i64>() {
        return Some(secs);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    let naive = s.trim_end_matches('Z');
    ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S%.f"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(naive, fmt).ok())
        .map(|dt| dt.and_utc().timestamp())
}

fn parse_tags(raw: &str) -> BTreeSet<String> {
    raw.split(['<', '>', '|'])
        .map(|t| t.trim().to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

fn for_each_row<R: BufRead>(mut reader: R, mut f: impl FnMut(usize, RawRow) -> Result<()>) -> Result<()> {
    let first = loop {
        let buf = reader.fill_buf()?;
        if buf.is_empty() {
            return Ok(());
        }
        match buf.iter().position(|b| !b.is_ascii_whitespace()) {
            Some(i) => {
                let b = buf[i];
                reader.consume(i);
                break b;
            }
            None => {
                let n = buf.len();
                reader.consume(n);
            }
        }
    };
    if first == b'{' {
        json_rows(reader, f)
    } else {
        xml_rows(reader, &mut f)
    }
}

fn json_rows<R: BufRead>(reader: R, mut f: impl FnMut(usize, RawRow) -> Result<()>) -> Result<()> {
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row = match serde_json::from_str::<serde_json::Value>(&line) {
            Ok(serde_json::Value::Object(obj)) => obj
                .into_iter()
                .filter_map(|(k, v)| {
                    let v = match v {
                        serde_json::Value::Null => return None,
                        serde_json::Value::String(s) => s,
                        other => other.to_string(),
                    };
                    Some((k, v))
                })
                .collect(),
            // An unparsable line is handed on as an empty row, which the
            // row handlers treat like any other malformed row.
            _ => RawRow::new(),
        };
        f(line_no, row)?;
    }
    Ok(())
}

fn xml_rows<R: BufRead>(reader: R, f: &mut impl FnMut(usize, RawRow) -> Result<()>) -> Result<()> {
    let mut reader = Reader::from_reader(reader);
    let mut buf = Vec::new();
    let mut row_no = 0usize;
    loop {
        match reader.read_event_into(&mut buf) {
            Ok(Event::Empty(e)) | Ok(Event::Start(e)) if e.name().as_ref() == b"row" => {
                row_no += 1;
                let mut row = RawRow::new();
                for attr in e.attributes() {
                    let parsed = attr.map_err(|e| e.to_string()).and_then(|a| {
                        let key = String::from_utf8_lossy(a.key.as_ref()).into_owned();
                        a.unescape_value()
                            .map(|v| (key, v.into_owned()))
                            .map_err(|e| e.to_string())
                    });
                    match parsed {
                        Ok((k, v)) => {
                            row.insert(k, v);
                        }
                        Err(_) => {
                            // Drop the whole row: a half-read row is worse
                            // than a skipped one.
                            row.clear();
                            break;
                        }
                    }
                }
                f(row_no, row)?;
            }
            Ok(Event::Eof) => break,
            Err(e) => {
                return Err(Error::malformed(
                    row_no + 1,
                    format!("xml error at byte {}: {e}", reader.buffer_position()),
                ))
            }
            Ok(_) => {}
        }
        buf.clear();
    }
    Ok(())
}

fn field<'a>(row: &'a RawRow, key: &str) -> Option<&'a str> {
    row.get(key).map(String::as_str).filter(|s| !s.trim().is_empty())
}

fn req_u64(row: &RawRow, key: &str) -> Result<u64, String> {
    let v = field(row, key).ok_or_else(|| format!("missing {key}"))?;
    v.trim().parse().map_err(|_| format!("bad {key}: {v:?}"))
}

fn opt_u64(row: &RawRow, key: &str) -> Result<Option<u64>, String> {
    match field(row, key) {
        None => Ok(None),
        // Dumps use -1 for the community user and deleted accounts.
        Some(v) if v.trim().starts_with('-') => Ok(None),
        Some(v) => v.trim().parse().map(Some).map_err(|_| format!("bad {key}: {v:?}")),
    }
}

fn req_time(row: &RawRow, key: &str) -> Result<Timestamp, String> {
    let v = field(row, key).ok_or_else(|| format!("missing {key}"))?;
    parse_timestamp(v).ok_or_else(|| format!("bad {key}: {v:?}"))
}

enum Post {
    Question(QuestionRecord),
    Answer(AnswerRecord),
    Other,
}

fn post_from_row(row: &RawRow) -> Result<Post, String> {
    let id = req_u64(row, "Id")?;
    let kind = req_u64(row, "PostTypeId")?;
    let created_at = req_time(row, "CreationDate")?;
    let owner = opt_u64(row, "OwnerUserId")?.map(UserId);
    match kind {
        1 => Ok(Post::Question(QuestionRecord {
            question_id: QuestionId(id),
            owner,
            created_at,
            bucket: 0,
            tags: field(row, "Tags").map(parse_tags).unwrap_or_default(),
            title: field(row, "Title").unwrap_or_default().to_string(),
            body: field(row, "Body").unwrap_or_default().to_string(),
            accepted_answer_id: opt_u64(row, "AcceptedAnswerId")?.map(AnswerId),
        })),
        2 => {
            let score = match field(row, "Score") {
                None => 0,
                Some(v) => v.trim().parse().map_err(|_| format!("bad Score: {v:?}"))?,
            };
            Ok(Post::Answer(AnswerRecord {
                answer_id: AnswerId(id),
                parent_question: QuestionId(req_u64(row, "ParentId")?),
                owner,
                created_at,
                score,
                is_accepted: false,
                body: field(row, "Body").unwrap_or_default().to_string(),
            }))
        }
        _ => Ok(Post::Other),
    }
}

fn reject(mode: ParseMode, stats: &mut ParseStats, line: usize, reason: String) -> Result<()> {
    match mode {
        ParseMode::Strict => Err(Error::malformed(line, reason)),
        ParseMode::Lenient => {
            tracing::debug!(line, %reason, "skipping malformed row");
            stats.malformed += 1;
            Ok(())
        }
    }
}

/// Parse a posts stream, keeping questions whose tags meet `tag_filter`
/// (empty filter keeps all) and the answers of kept questions.
pub fn parse_posts<R: BufRead>(reader: R, tag_filter: &BTreeSet<String>, mode: ParseMode) -> Result<PostsParse> {
    let mut out = PostsParse::default();
    let mut seen_questions: HashSet<QuestionId> = HashSet::new();
    let mut pending: Vec<AnswerRecord> = Vec::new();
    let mut seen_answers: HashSet<AnswerId> = HashSet::new();
    let filter: BTreeSet<String> = tag_filter.iter().map(|t| t.to_lowercase()).collect();

    for_each_row(reader, |line, row| {
        out.stats.rows += 1;
        match post_from_row(&row) {
            Err(reason) => reject(mode, &mut out.stats, line, reason),
            Ok(Post::Other) => {
                out.stats.other_rows += 1;
                Ok(())
            }
            Ok(Post::Question(q)) => {
                if !seen_questions.insert(q.question_id) {
                    out.stats.duplicate_ids += 1;
                    return reject(mode, &mut out.stats, line, format!("duplicate post {}", q.question_id));
                }
                if filter.is_empty() || q.tags.iter().any(|t| filter.contains(t)) {
                    out.questions.insert(q.question_id, q);
                } else {
                    out.stats.filtered_questions += 1;
                }
                Ok(())
            }
            Ok(Post::Answer(a)) => {
                if !seen_answers.insert(a.answer_id) {
                    out.stats.duplicate_ids += 1;
                    return reject(mode, &mut out.stats, line, format!("duplicate post {}", a.answer_id));
                }
                pending.push(a);
                Ok(())
            }
        }
    })?;

    for mut a in pending {
        match out.questions.get(&a.parent_question) {
            Some(q) => {
                a.is_accepted = q.accepted_answer_id == Some(a.answer_id);
                out.answers.insert(a.answer_id, a);
            }
            None if seen_questions.contains(&a.parent_question) => out.stats.filtered_answers += 1,
            None => out.stats.dangling_answers += 1,
        }
    }
    Ok(out)
}

/// Parse a users stream. Duplicate ids keep the first record.
pub fn parse_users<R: BufRead>(reader: R, mode: ParseMode) -> Result<(BTreeMap<UserId, UserRecord>, ParseStats)> {
    let mut users = BTreeMap::new();
    let mut stats = ParseStats::default();
    for_each_row(reader, |line, row| {
        stats.rows += 1;
        let parsed = (|| -> Result<UserRecord, String> {
            let reputation = match field(&row, "Reputation") {
                None => 0,
                Some(v) => {
                    let r: i64 = v.trim().parse().map_err(|_| format!("bad Reputation: {v:?}"))?;
                    r.max(0) as u64
                }
            };
            Ok(UserRecord {
                user_id: UserId(req_u64(&row, "Id")?),
                account_id: opt_u64(&row, "AccountId")?,
                reputation,
                registration_time: match field(&row, "CreationDate") {
                    None => 0,
                    Some(_) => req_time(&row, "CreationDate")?,
                },
            })
        })();
        match parsed {
            Err(reason) => reject(mode, &mut stats, line, reason),
            Ok(u) => {
                match users.entry(u.user_id) {
                    Entry::Occupied(_) => {
                        tracing::warn!(user = %u.user_id, "duplicate user id, keeping the first record");
                        stats.duplicate_ids += 1;
                    }
                    Entry::Vacant(slot) => {
                        slot.insert(u);
                    }
                }
                Ok(())
            }
        }
    })?;
    Ok((users, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn filter(tags: &[&str]) -> BTreeSet<String> {
        tags.iter().map(|s| s.to_string()).collect()
    }

    const POSTS_XML: &str = r#"<?xml version="1.0" encoding="utf-8"?>
<posts>
  <row Id="1" PostTypeId="1" AcceptedAnswerId="3" CreationDate="2010-01-01T10:00:00.000" Score="5" OwnerUserId="7" Title="Generics" Body="&lt;p&gt;why erasure?&lt;/p&gt;" Tags="&lt;java&gt;&lt;generics&gt;" />
  <row Id="2" PostTypeId="1" CreationDate="2010-01-02T10:00:00.000" OwnerUserId="8" Title="Pointers" Body="c" Tags="&lt;c&gt;" />
  <row Id="3" PostTypeId="2" ParentId="1" CreationDate="2010-01-01T12:00:00.000" Score="3" OwnerUserId="8" Body="type erasure" />
  <row Id="4" PostTypeId="2" ParentId="2" CreationDate="2010-01-02T12:00:00.000" Score="1" OwnerUserId="7" Body="malloc" />
  <row Id="5" PostTypeId="2" ParentId="99" CreationDate="2010-01-02T12:00:00.000" Score="1" OwnerUserId="7" Body="orphan" />
  <row Id="6" PostTypeId="2" ParentId="1" CreationDate="2010-01-03T12:00:00.000" Score="0" OwnerUserId="9" Body="other" />
  <row Id="7" PostTypeId="5" CreationDate="2010-01-03T12:00:00.000" Body="wiki" />
</posts>"#;

    #[test]
    fn xml_filter_and_acceptance() {
        let p = parse_posts(POSTS_XML.as_bytes(), &filter(&["java"]), ParseMode::Strict).unwrap();
        assert_eq!(p.questions.len(), 1);
        let q = &p.questions[&QuestionId(1)];
        assert_eq!(q.tags, filter(&["java", "generics"]));
        assert_eq!(q.body, "<p>why erasure?</p>");
        assert_eq!(q.owner, Some(UserId(7)));
        assert_eq!(
            p.answers.keys().copied().collect::<Vec<_>>(),
            vec![AnswerId(3), AnswerId(6)]
        );
        assert!(p.answers[&AnswerId(3)].is_accepted);
        assert!(!p.answers[&AnswerId(6)].is_accepted);
        assert_eq!(p.stats.filtered_answers, 1);
        assert_eq!(p.stats.dangling_answers, 1);
        assert_eq!(p.stats.filtered_questions, 1);
        assert_eq!(p.stats.other_rows, 1);
    }

    #[test]
    fn empty_filter_keeps_everything() {
        let p = parse_posts(POSTS_XML.as_bytes(), &BTreeSet::new(), ParseMode::Strict).unwrap();
        assert_eq!(p.questions.len(), 2);
        assert_eq!(p.answers.len(), 3);
    }

    #[test]
    fn lenient_skips_and_strict_aborts() {
        let data = "{\"Id\":1,\"PostTypeId\":1,\"CreationDate\":\"2010-01-01T00:00:00\",\"Tags\":\"<java>\"}\n\
                    {\"Id\":\"x\",\"PostTypeId\":1}\n\
                    not json at all\n\
                    {\"Id\":2,\"PostTypeId\":2,\"ParentId\":1,\"CreationDate\":1262304000,\"Score\":-2}\n";
        let p = parse_posts(data.as_bytes(), &filter(&["java"]), ParseMode::Lenient).unwrap();
        assert_eq!(p.stats.malformed, 2);
        assert_eq!(p.questions.len(), 1);
        assert_eq!(p.answers[&AnswerId(2)].score, -2);
        let err = parse_posts(data.as_bytes(), &filter(&["java"]), ParseMode::Strict).unwrap_err();
        assert!(matches!(err, Error::Malformed { line: 2, .. }));
    }

    #[test]
    fn users_defaults_and_duplicates() {
        let xml = r#"<users>
  <row Id="7" Reputation="150" CreationDate="2009-01-01T00:00:00.000" AccountId="700" />
  <row Id="8" CreationDate="2009-01-01T00:00:00.000" />
  <row Id="7" Reputation="9" CreationDate="2009-01-01T00:00:00.000" />
</users>"#;
        let (users, stats) = parse_users(xml.as_bytes(), ParseMode::Strict).unwrap();
        assert_eq!(users.len(), 2);
        assert_eq!(users[&UserId(7)].reputation, 150);
        assert_eq!(users[&UserId(7)].account_id, Some(700));
        assert_eq!(users[&UserId(8)].reputation, 0);
        assert_eq!(stats.duplicate_ids, 1);
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("1970-01-01T00:00:10.500"), Some(10));
        assert_eq!(parse_timestamp("1970-01-02T00:00:00Z"), Some(86_400));
        assert_eq!(parse_timestamp("42"), Some(42));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn community_owner_is_anonymous() {
        let data = "{\"Id\":1,\"PostTypeId\":1,\"CreationDate\":0,\"OwnerUserId\":-1}\n";
        let p = parse_posts(data.as_bytes(), &BTreeSet::new(), ParseMode::Strict).unwrap();
        assert_eq!(p.questions[&QuestionId(1)].owner, None);
    }
}
