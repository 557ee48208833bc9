//! Transaction ingestion: domain types, roster, fact extraction and the
//! validated transaction stream.

mod extract;
mod ingest;
mod roster;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use extract::{extract_facts, fold_key, ExtractOptions, ExtractedFacts};
pub use ingest::{
    load_corpus, parse_timestamp, write_transactions, IngestOptions, IngestReport, Ingested,
    SkipReason,
};
pub use roster::{load_follow_edges, Roster};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("invalid user handle {0:?}")]
    InvalidHandle(String),
    #[error("invalid group id {0:?}")]
    InvalidGroup(String),
    #[error("invalid fact key {0:?}")]
    InvalidFact(String),
    #[error("unknown practice {0:?}")]
    UnknownPractice(String),
    #[error("user {user} assigned to both {first} and {second}")]
    ConflictingGroup {
        user: String,
        first: String,
        second: String,
    },
    #[error("roster line {line}: {message}")]
    RosterFormat { line: usize, message: String },
    #[error("invalid transaction {id}: {message}")]
    InvalidTransaction { id: String, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Case-normalized account handle: lowercase, no whitespace, no leading `@`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct UserHandle(String);

impl UserHandle {
    pub fn parse(raw: &str) -> Result<Self, CorpusError> {
        let trimmed = raw.trim();
        let name = trimmed.strip_prefix('@').unwrap_or(trimmed).to_lowercase();
        if name.is_empty() || name.chars().any(char::is_whitespace) || name.starts_with('@') {
            return Err(CorpusError::InvalidHandle(raw.to_string()));
        }
        Ok(UserHandle(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for UserHandle {
    type Error = CorpusError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        UserHandle::parse(&s)
    }
}

impl From<UserHandle> for String {
    fn from(h: UserHandle) -> String {
        h.0
    }
}

impl fmt::Display for UserHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A group label such as a party. Kept verbatim apart from trimming.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GroupId(String);

impl GroupId {
    pub fn parse(raw: &str) -> Result<Self, CorpusError> {
        let name = raw.trim();
        if name.is_empty() {
            return Err(CorpusError::InvalidGroup(raw.to_string()));
        }
        Ok(GroupId(name.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for GroupId {
    type Error = CorpusError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        GroupId::parse(&s)
    }
}

impl From<GroupId> for String {
    fn from(g: GroupId) -> String {
        g.0
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FactKind {
    Hashtag,
    Retweetee,
    Mentionee,
    Followee,
}

impl FactKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FactKind::Hashtag => "hashtag",
            FactKind::Retweetee => "retweetee",
            FactKind::Mentionee => "mentionee",
            FactKind::Followee => "followee",
        }
    }

    pub fn is_user(self) -> bool {
        self != FactKind::Hashtag
    }
}

/// The four conversational practices. Each references exactly one fact kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Practice {
    Tagging,
    Retweeting,
    Mentioning,
    Following,
}

impl Practice {
    pub const ALL: [Practice; 4] = [
        Practice::Tagging,
        Practice::Retweeting,
        Practice::Mentioning,
        Practice::Following,
    ];

    pub fn fact_kind(self) -> FactKind {
        match self {
            Practice::Tagging => FactKind::Hashtag,
            Practice::Retweeting => FactKind::Retweetee,
            Practice::Mentioning => FactKind::Mentionee,
            Practice::Following => FactKind::Followee,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Practice::Tagging => "tagging",
            Practice::Retweeting => "retweeting",
            Practice::Mentioning => "mentioning",
            Practice::Following => "following",
        }
    }

    /// Practices whose facts are user handles and therefore form a user graph.
    pub fn is_interpersonal(self) -> bool {
        self.fact_kind().is_user()
    }
}

impl FromStr for Practice {
    type Err = CorpusError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tagging" | "hashtagging" => Ok(Practice::Tagging),
            "retweeting" => Ok(Practice::Retweeting),
            "mentioning" => Ok(Practice::Mentioning),
            "following" => Ok(Practice::Following),
            _ => Err(CorpusError::UnknownPractice(s.to_string())),
        }
    }
}

impl fmt::Display for Practice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A referenced cultural object. Ordering is by kind, then key.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Fact {
    pub kind: FactKind,
    pub key: String,
}

impl Fact {
    /// Builds a fact from a raw token: strips `#` or `@` and normalizes case.
    pub fn new(kind: FactKind, raw: &str) -> Result<Self, CorpusError> {
        let key = match kind {
            FactKind::Hashtag => {
                let t = raw.trim();
                fold_key(t.strip_prefix('#').unwrap_or(t))
            }
            _ => {
                UserHandle::parse(raw)
                    .map_err(|_| CorpusError::InvalidFact(raw.to_string()))?
                    .0
            }
        };
        if key.is_empty() || key.chars().any(char::is_whitespace) {
            return Err(CorpusError::InvalidFact(raw.to_string()));
        }
        Ok(Fact { kind, key })
    }

    pub fn hashtag(raw: &str) -> Result<Self, CorpusError> {
        Fact::new(FactKind::Hashtag, raw)
    }

    pub fn user(kind: FactKind, handle: &UserHandle) -> Self {
        Fact {
            kind,
            key: handle.as_str().to_string(),
        }
    }

    /// Human-readable label: `#tag`, `RT user`, `@user`, or the bare followee.
    pub fn label(&self) -> String {
        match self.kind {
            FactKind::Hashtag => format!("#{}", self.key),
            FactKind::Retweetee => format!("RT {}", self.key),
            FactKind::Mentionee => format!("@{}", self.key),
            FactKind::Followee => self.key.clone(),
        }
    }
}

/// Half-open observation span `[start, end)` in UTC seconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub start: i64,
    pub end: i64,
}

impl ObservationWindow {
    pub fn unbounded() -> Self {
        ObservationWindow {
            start: i64::MIN,
            end: i64::MAX,
        }
    }

    pub fn contains(&self, ts: i64) -> bool {
        ts >= self.start && ts < self.end
    }
}

/// One communicative act of one practice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub id: String,
    pub author: UserHandle,
    pub group: GroupId,
    pub timestamp: i64,
    pub practice: Practice,
    pub facts: Vec<Fact>,
}

impl Transaction {
    /// Checks every type invariant against a roster and observation span.
    pub fn validate(&self, roster: &Roster, window: &ObservationWindow) -> Result<(), CorpusError> {
        let fail = |message: String| CorpusError::InvalidTransaction {
            id: self.id.clone(),
            message,
        };
        if self.facts.is_empty() {
            return Err(fail("no facts".into()));
        }
        match roster.group_of(&self.author) {
            Some(g) if *g == self.group => {}
            Some(g) => {
                return Err(fail(format!(
                    "author group {} != roster group {g}",
                    self.group
                )))
            }
            None => return Err(fail(format!("author {} not in roster", self.author))),
        }
        if !window.contains(self.timestamp) {
            return Err(fail(format!("timestamp {} outside window", self.timestamp)));
        }
        let kind = self.practice.fact_kind();
        for (i, fact) in self.facts.iter().enumerate() {
            if fact.kind != kind {
                return Err(fail(format!(
                    "fact {} has kind {}",
                    fact.key,
                    fact.kind.as_str()
                )));
            }
            if fact.key.is_empty() {
                return Err(fail("empty fact key".into()));
            }
            if kind.is_user()
                && UserHandle::parse(&fact.key)
                    .map(|h| h.0 != fact.key)
                    .unwrap_or(true)
            {
                return Err(fail(format!(
                    "fact {} is not a normalized handle",
                    fact.key
                )));
            }
            if self.facts[..i].contains(fact) {
                return Err(fail(format!("fact {} repeated", fact.key)));
            }
        }
        Ok(())
    }
}
