//! Line-delimited record ingestion.
//!
//! Each non-blank line is one JSON object. Two shapes are accepted:
//!
//! ```text
//! {"id": "1", "user": "alice", "timestamp": "2013-07-21T10:00:00Z", "text": "RT @bob: #vote13"}
//! {"id": "2", "user": "alice", "timestamp": 1374400800, "practice": "tagging", "facts": ["vote13"]}
//! ```
//!
//! `timestamp` is either epoch seconds or an ISO-8601 string; a timestamp
//! without an offset is read as UTC.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use super::{
    extract_facts, CorpusError, ExtractOptions, Fact, ObservationWindow, Practice, Roster,
    Transaction, UserHandle,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SkipReason {
    Malformed,
    DuplicateId,
    UnknownAuthor,
    OutOfWindow,
    NoFacts,
}

impl SkipReason {
    pub const ALL: [SkipReason; 5] = [
        SkipReason::Malformed,
        SkipReason::DuplicateId,
        SkipReason::UnknownAuthor,
        SkipReason::OutOfWindow,
        SkipReason::NoFacts,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::Malformed => "malformed",
            SkipReason::DuplicateId => "duplicate_id",
            SkipReason::UnknownAuthor => "unknown_author",
            SkipReason::OutOfWindow => "out_of_window",
            SkipReason::NoFacts => "no_facts",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IngestReport {
    pub records_read: usize,
    pub accepted: usize,
    pub malformed: usize,
    pub duplicate_id: usize,
    pub unknown_author: usize,
    pub out_of_window: usize,
    pub no_facts: usize,
    /// `(line number, message)` for each malformed line.
    pub errors: Vec<(usize, String)>,
}

impl IngestReport {
    pub fn count(&self, reason: SkipReason) -> usize {
        match reason {
            SkipReason::Malformed => self.malformed,
            SkipReason::DuplicateId => self.duplicate_id,
            SkipReason::UnknownAuthor => self.unknown_author,
            SkipReason::OutOfWindow => self.out_of_window,
            SkipReason::NoFacts => self.no_facts,
        }
    }

    pub fn skipped(&self) -> usize {
        SkipReason::ALL.iter().map(|&r| self.count(r)).sum()
    }

    fn skip(&mut self, reason: SkipReason) {
        match reason {
            SkipReason::Malformed => self.malformed += 1,
            SkipReason::DuplicateId => self.duplicate_id += 1,
            SkipReason::UnknownAuthor => self.unknown_author += 1,
            SkipReason::OutOfWindow => self.out_of_window += 1,
            SkipReason::NoFacts => self.no_facts += 1,
        }
    }

    /// Writes `reason,count` rows, preceded by the read and accepted totals.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["reason", "count"])?;
        w.write_record(["records_read", &self.records_read.to_string()])?;
        w.write_record(["accepted", &self.accepted.to_string()])?;
        for r in SkipReason::ALL {
            w.write_record([r.as_str(), &self.count(r).to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `line,message` rows for malformed records.
    pub fn write_errors_csv<W: Write>(&self, writer: W) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["line", "message"])?;
        for (line, msg) in &self.errors {
            w.write_record([line.to_string().as_str(), msg])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    pub extract: ExtractOptions,
}

#[derive(Debug, Clone, Default)]
pub struct Ingested {
    pub transactions: Vec<Transaction>,
    pub report: IngestReport,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Scalar {
    Text(String),
    Int(i64),
    Float(f64),
}

impl Scalar {
    fn into_id(self) -> String {
        match self {
            Scalar::Text(s) => s,
            Scalar::Int(i) => i.to_string(),
            Scalar::Float(f) => f.to_string(),
        }
    }

    fn timestamp(&self) -> Option<i64> {
        match self {
            Scalar::Text(s) => parse_timestamp(s),
            Scalar::Int(i) => Some(*i),
            Scalar::Float(f) if f.is_finite() => Some(f.floor() as i64),
            Scalar::Float(_) => None,
        }
    }
}

#[derive(Deserialize)]
struct Record {
    id: Scalar,
    user: String,
    timestamp: Scalar,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    practice: Option<String>,
    #[serde(default)]
    facts: Option<Vec<String>>,
}

#[derive(Serialize)]
struct OutRecord<'a> {
    id: &'a str,
    user: &'a str,
    timestamp: i64,
    practice: &'a str,
    facts: Vec<&'a str>,
}

/// Parses epoch seconds or an ISO-8601 date / datetime into UTC seconds.
pub fn parse_timestamp(raw: &str) -> Option<i64> {
    let s = raw.trim();
    if let Ok(n) = s.parse::<i64>() {
        return Some(n);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

enum Body {
    Raw(String),
    Extracted(Practice, Vec<Fact>),
}

struct Parsed {
    id: String,
    user: UserHandle,
    timestamp: i64,
    body: Body,
}

fn parse_line(line: &str) -> Result<Parsed, String> {
    let rec: Record = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let user = UserHandle::parse(&rec.user).map_err(|e| e.to_string())?;
    let timestamp = rec
        .timestamp
        .timestamp()
        .ok_or_else(|| "unparseable timestamp".to_string())?;
    let body = match (rec.text, rec.practice, rec.facts) {
        (Some(text), None, None) => Body::Raw(text),
        (None, Some(practice), Some(facts)) => {
            let practice: Practice = practice.parse().map_err(|e: CorpusError| e.to_string())?;
            let mut out: Vec<Fact> = Vec::with_capacity(facts.len());
            for raw in &facts {
                let f = Fact::new(practice.fact_kind(), raw).map_err(|e| e.to_string())?;
                if !out.contains(&f) {
                    out.push(f);
                }
            }
            Body::Extracted(practice, out)
        }
        _ => return Err("record needs either `text` or both `practice` and `facts`".into()),
    };
    Ok(Parsed {
        id: rec.id.into_id(),
        user,
        timestamp,
        body,
    })
}

/// Ingests line-delimited records into a validated transaction stream.
///
/// Malformed lines are recorded in the report and skipped; only I/O errors
/// abort. Raw records yield one transaction per practice with facts.
/// Duplicate detection is on the exact id for raw records and on
/// `(id, practice)` for pre-extracted ones, since a message referencing
/// several practices exports as one pre-extracted record per practice.
pub fn load_corpus<R: BufRead>(
    reader: R,
    roster: &Roster,
    window: &ObservationWindow,
    opts: &IngestOptions,
) -> Result<Ingested, CorpusError> {
    let mut out = Ingested::default();
    let mut seen: HashSet<(String, Option<Practice>)> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let report = &mut out.report;
        report.records_read += 1;
        let parsed = match parse_line(&line) {
            Ok(p) => p,
            Err(msg) => {
                report.skip(SkipReason::Malformed);
                report.errors.push((idx + 1, msg));
                continue;
            }
        };
        let key_practice = match &parsed.body {
            Body::Raw(_) => None,
            Body::Extracted(p, _) => Some(*p),
        };
        if !seen.insert((parsed.id.clone(), key_practice)) {
            report.skip(SkipReason::DuplicateId);
            continue;
        }
        let Some(group) = roster.group_of(&parsed.user).cloned() else {
            report.skip(SkipReason::UnknownAuthor);
            continue;
        };
        if !window.contains(parsed.timestamp) {
            report.skip(SkipReason::OutOfWindow);
            continue;
        }
        let per_practice: Vec<(Practice, Vec<Fact>)> = match parsed.body {
            Body::Raw(text) => extract_facts(&text, roster, &opts.extract)
                .into_practices()
                .into(),
            Body::Extracted(practice, mut facts) => {
                if practice.is_interpersonal() && opts.extract.restrict_to_roster {
                    facts.retain(|f| roster.contains_key(&f.key));
                }
                vec![(practice, facts)]
            }
        };
        let before = out.transactions.len();
        for (practice, facts) in per_practice {
            if facts.is_empty() {
                continue;
            }
            out.transactions.push(Transaction {
                id: parsed.id.clone(),
                author: parsed.user.clone(),
                group: group.clone(),
                timestamp: parsed.timestamp,
                practice,
                facts,
            });
        }
        if out.transactions.len() == before {
            out.report.skip(SkipReason::NoFacts);
        } else {
            out.report.accepted += 1;
        }
    }
    Ok(out)
}

/// Serializes transactions in the pre-extracted record shape, one per line.
///
/// Ids are written as-is, so a stream where one id carries several
/// practices re-ingests to the same transactions.
pub fn write_transactions<W: Write>(
    transactions: &[Transaction],
    mut writer: W,
) -> Result<(), CorpusError> {
    for t in transactions {
        let rec = OutRecord {
            id: &t.id,
            user: t.author.as_str(),
            timestamp: t.timestamp,
            practice: t.practice.as_str(),
            facts: t.facts.iter().map(|f| f.key.as_str()).collect(),
        };
        serde_json::to_writer(&mut writer, &rec).map_err(std::io::Error::from)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::GroupId;

    fn roster() -> Roster {
        let mut r = Roster::default();
        for (u, g) in [("alice", "A"), ("bob", "A"), ("carol", "B")] {
            r.insert(UserHandle::parse(u).unwrap(), GroupId::parse(g).unwrap())
                .unwrap();
        }
        r
    }

    fn ingest(src: &str) -> Ingested {
        load_corpus(
            src.as_bytes(),
            &roster(),
            &ObservationWindow::unbounded(),
            &IngestOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn timestamps() {
        assert_eq!(parse_timestamp("0"), Some(0));
        assert_eq!(parse_timestamp("1970-01-02"), Some(86400));
        assert_eq!(parse_timestamp("1970-01-01T01:00:00Z"), Some(3600));
        assert_eq!(parse_timestamp("1970-01-01T01:00:00+01:00"), Some(0));
        assert_eq!(parse_timestamp("1970-01-01 00:01:00"), Some(60));
        assert_eq!(parse_timestamp("yesterday"), None);
    }

    #[test]
    fn unknown_author_is_skipped() {
        let got = ingest(r##"{"id":"1","user":"mallory","timestamp":0,"text":"#x"}"##);
        assert!(got.transactions.is_empty());
        assert_eq!(got.report.unknown_author, 1);
    }

    #[test]
    fn plain_text_emits_nothing() {
        let got = ingest(r#"{"id":"1","user":"alice","timestamp":0,"text":"just words"}"#);
        assert!(got.transactions.is_empty());
        assert_eq!(got.report.no_facts, 1);
    }

    #[test]
    fn malformed_lines_do_not_abort() {
        let src =
            "not json\n{\"id\":1,\"user\":\"alice\",\"timestamp\":\"soon\",\"text\":\"#a\"}\n\
                   {\"id\":2,\"user\":\"alice\",\"timestamp\":5,\"text\":\"#a @carol RT @bob\"}\n";
        let got = ingest(src);
        assert_eq!(got.report.malformed, 2);
        assert_eq!(
            got.report.errors.iter().map(|e| e.0).collect::<Vec<_>>(),
            [1, 2]
        );
        assert_eq!(got.transactions.len(), 3);
        assert_eq!(got.report.accepted, 1);
    }

    #[test]
    fn window_and_duplicates() {
        let src = "{\"id\":\"1\",\"user\":\"alice\",\"timestamp\":5,\"text\":\"#a\"}\n\
                   {\"id\":\"1\",\"user\":\"alice\",\"timestamp\":5,\"text\":\"#b\"}\n\
                   {\"id\":\"2\",\"user\":\"alice\",\"timestamp\":50,\"text\":\"#b\"}\n";
        let got = load_corpus(
            src.as_bytes(),
            &roster(),
            &ObservationWindow { start: 0, end: 10 },
            &IngestOptions::default(),
        )
        .unwrap();
        assert_eq!(got.transactions.len(), 1);
        assert_eq!(got.report.duplicate_id, 1);
        assert_eq!(got.report.out_of_window, 1);
    }

    #[test]
    fn pre_extracted_records() {
        let src = r##"{"id":"9","user":"bob","timestamp":"1970-01-01","practice":"mentioning","facts":["@Carol","dave","carol"]}"##;
        let got = ingest(src);
        assert_eq!(got.transactions.len(), 1);
        let t = &got.transactions[0];
        assert_eq!(t.practice, Practice::Mentioning);
        assert_eq!(t.facts.len(), 1);
        assert_eq!(t.facts[0].key, "carol");
    }

    #[test]
    fn both_shapes_at_once_is_malformed() {
        let got = ingest(
            r##"{"id":"1","user":"alice","timestamp":0,"text":"#a","practice":"tagging","facts":["a"]}"##,
        );
        assert_eq!(got.report.malformed, 1);
    }

    #[test]
    fn write_and_reingest() {
        let src = r##"{"id":"1","user":"alice","timestamp":0,"text":"#a RT @carol: @bob"}"##;
        let first = ingest(src);
        let mut buf = Vec::new();
        write_transactions(&first.transactions, &mut buf).unwrap();
        let second = ingest(std::str::from_utf8(&buf).unwrap());
        assert_eq!(first.transactions, second.transactions);
    }

    #[test]
    fn report_csv() {
        let got = ingest(r#"{"id":"1","user":"mallory","timestamp":0,"text":"x"}"#);
        let mut buf = Vec::new();
        got.report.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("reason,count\nrecords_read,1\naccepted,0\n"));
        assert!(s.contains("unknown_author,1\n"));
    }
}
