//! Fixed-width windowing and per-(group, window, practice) culture vectors.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Fact, GroupId, ObservationWindow, Practice, Transaction};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CultureError {
    #[error("empty culture")]
    EmptyCulture,
    #[error("invalid window spec: {0}")]
    InvalidSpec(String),
}

pub const WEEK: i64 = 7 * 86_400;

/// `count` half-open windows `[epoch + (k-1)·width, epoch + k·width)`,
/// numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub epoch: i64,
    pub width: i64,
    pub count: usize,
}

impl WindowSpec {
    pub fn new(epoch: i64, width: i64, count: usize) -> Result<Self, CultureError> {
        if width <= 0 {
            return Err(CultureError::InvalidSpec(format!(
                "width must be positive, got {width}"
            )));
        }
        if count == 0 {
            return Err(CultureError::InvalidSpec("count must be at least 1".into()));
        }
        Ok(WindowSpec {
            epoch,
            width,
            count,
        })
    }

    pub fn weekly(epoch: i64, count: usize) -> Result<Self, CultureError> {
        WindowSpec::new(epoch, WEEK, count)
    }

    /// 1-based window index of a timestamp, or `None` outside the span.
    pub fn window_of(&self, ts: i64) -> Option<usize> {
        let offset = ts.checked_sub(self.epoch)?;
        if offset < 0 {
            return None;
        }
        let k = (offset / self.width) as u128;
        (k < self.count as u128).then(|| k as usize + 1)
    }

    pub fn start_of(&self, window: usize) -> i64 {
        self.epoch + (window as i64 - 1) * self.width
    }

    pub fn span(&self) -> ObservationWindow {
        ObservationWindow {
            start: self.epoch,
            end: self
                .epoch
                .saturating_add(self.width.saturating_mul(self.count as i64)),
        }
    }

    pub fn windows(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.count
    }
}

/// Fact frequencies of one group in one window for one practice.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CultureVector {
    pub group: GroupId,
    pub window: usize,
    pub practice: Practice,
    pub counts: BTreeMap<Fact, u64>,
    pub total: u64,
}

impl CultureVector {
    pub fn empty(group: GroupId, window: usize, practice: Practice) -> Self {
        CultureVector {
            group,
            window,
            practice,
            counts: BTreeMap::new(),
            total: 0,
        }
    }

    /// Builds a vector from `(key, count)` pairs; zero counts are skipped.
    pub fn from_counts<'a, I>(group: GroupId, window: usize, practice: Practice, pairs: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, u64)>,
    {
        let mut v = CultureVector::empty(group, window, practice);
        for (key, n) in pairs {
            if n > 0 {
                let fact = Fact {
                    kind: practice.fact_kind(),
                    key: key.to_string(),
                };
                v.add(fact, n);
            }
        }
        v
    }

    pub fn add(&mut self, fact: Fact, n: u64) {
        *self.counts.entry(fact).or_insert(0) += n;
        self.total += n;
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }

    pub fn count_of(&self, fact: &Fact) -> u64 {
        self.counts.get(fact).copied().unwrap_or(0)
    }
}

/// Facts ordered by descending count, ties by ascending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankedVector {
    pub entries: Vec<(Fact, u64)>,
}

impl RankedVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn facts(&self) -> impl Iterator<Item = &Fact> {
        self.entries.iter().map(|(f, _)| f)
    }
}

pub fn rank(vector: &CultureVector) -> Result<RankedVector, CultureError> {
    if vector.is_empty() {
        return Err(CultureError::EmptyCulture);
    }
    let mut entries: Vec<(Fact, u64)> =
        vector.counts.iter().map(|(f, &n)| (f.clone(), n)).collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(RankedVector { entries })
}

/// All culture vectors of a stream. Group-windows without activity have
/// no entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CultureSet {
    pub spec: WindowSpec,
    vectors: BTreeMap<(Practice, GroupId, usize), CultureVector>,
    /// Transactions that fell outside the window span.
    pub dropped: usize,
}

impl CultureSet {
    pub fn new(spec: WindowSpec) -> Self {
        CultureSet {
            spec,
            vectors: BTreeMap::new(),
            dropped: 0,
        }
    }

    /// Inserts a vector, replacing any existing one for the same key.
    /// Empty vectors are not stored.
    pub fn insert(&mut self, v: CultureVector) {
        let key = (v.practice, v.group.clone(), v.window);
        if v.is_empty() {
            self.vectors.remove(&key);
        } else {
            self.vectors.insert(key, v);
        }
    }

    pub fn get(
        &self,
        group: &GroupId,
        window: usize,
        practice: Practice,
    ) -> Option<&CultureVector> {
        self.vectors.get(&(practice, group.clone(), window))
    }

    pub fn iter(&self) -> impl Iterator<Item = &CultureVector> {
        self.vectors.values()
    }

    pub fn practice(&self, practice: Practice) -> impl Iterator<Item = &CultureVector> {
        self.vectors
            .iter()
            .filter(move |((p, _, _), _)| *p == practice)
            .map(|(_, v)| v)
    }

    /// Groups with at least one vector in the practice, sorted.
    pub fn groups(&self, practice: Practice) -> Vec<GroupId> {
        let mut gs: Vec<GroupId> = self.practice(practice).map(|v| v.group.clone()).collect();
        gs.dedup();
        gs
    }

    pub fn in_window(&self, practice: Practice, window: usize) -> Vec<&CultureVector> {
        self.practice(practice)
            .filter(|v| v.window == window)
            .collect()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Σ totals over all vectors: the number of (transaction, fact) pairs binned.
    pub fn reference_total(&self) -> u64 {
        self.vectors.values().map(|v| v.total).sum()
    }

    /// Writes `group,window,practice,fact_kind,fact,count` rows.
    pub fn write_csv<W: Write>(&self, practice: Option<Practice>, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["group", "window", "practice", "fact_kind", "fact", "count"])?;
        for v in self.vectors.values() {
            if practice.is_some_and(|p| p != v.practice) {
                continue;
            }
            let window = v.window.to_string();
            for (fact, n) in &v.counts {
                w.write_record([
                    v.group.as_str(),
                    &window,
                    v.practice.as_str(),
                    fact.kind.as_str(),
                    &fact.key,
                    &n.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Bins transactions into culture vectors. Each transaction's facts
/// increment exactly one (group, window, practice) vector; transactions
/// outside the span are counted in `dropped`.
pub fn bin(transactions: &[Transaction], spec: WindowSpec) -> CultureSet {
    let mut set = CultureSet::new(spec);
    for t in transactions {
        let Some(window) = spec.window_of(t.timestamp) else {
            set.dropped += 1;
            continue;
        };
        let v = set
            .vectors
            .entry((t.practice, t.group.clone(), window))
            .or_insert_with(|| CultureVector::empty(t.group.clone(), window, t.practice));
        for f in &t.facts {
            v.add(f.clone(), 1);
        }
    }
    set.vectors.retain(|_, v| !v.is_empty());
    set
}
