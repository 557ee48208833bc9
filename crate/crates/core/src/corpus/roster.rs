use std::collections::BTreeMap;
use std::io::{Read, Write};

use super::{CorpusError, GroupId, UserHandle};

/// User→group assignment. Every user maps to exactly one group.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Roster {
    members: BTreeMap<UserHandle, GroupId>,
}

impl Roster {
    /// Reads a CSV with header `user,group`. A user listed twice under the
    /// same group is accepted; under different groups it is a hard error.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, CorpusError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.eq_ignore_ascii_case(name))
                .ok_or_else(|| CorpusError::RosterFormat {
                    line: 1,
                    message: format!("missing column {name:?}"),
                })
        };
        let (ui, gi) = (col("user")?, col("group")?);
        let mut roster = Roster::default();
        for (i, row) in rdr.records().enumerate() {
            let row = row?;
            let line = i + 2;
            let field = |idx: usize| {
                row.get(idx).ok_or_else(|| CorpusError::RosterFormat {
                    line,
                    message: "short row".into(),
                })
            };
            let user = UserHandle::parse(field(ui)?).map_err(|e| CorpusError::RosterFormat {
                line,
                message: e.to_string(),
            })?;
            let group = GroupId::parse(field(gi)?).map_err(|e| CorpusError::RosterFormat {
                line,
                message: e.to_string(),
            })?;
            roster.insert(user, group)?;
        }
        Ok(roster)
    }

    pub fn insert(&mut self, user: UserHandle, group: GroupId) -> Result<(), CorpusError> {
        match self.members.get(&user) {
            Some(existing) if *existing != group => Err(CorpusError::ConflictingGroup {
                user: user.to_string(),
                first: existing.to_string(),
                second: group.to_string(),
            }),
            Some(_) => Ok(()),
            None => {
                self.members.insert(user, group);
                Ok(())
            }
        }
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), CorpusError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["user", "group"])?;
        for (u, g) in &self.members {
            w.write_record([u.as_str(), g.as_str()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn group_of(&self, user: &UserHandle) -> Option<&GroupId> {
        self.members.get(user)
    }

    pub fn contains(&self, user: &UserHandle) -> bool {
        self.members.contains_key(user)
    }

    /// Membership test on a raw normalized key.
    pub fn contains_key(&self, key: &str) -> bool {
        UserHandle::parse(key)
            .map(|h| self.contains(&h))
            .unwrap_or(false)
    }

    /// Distinct groups in sorted order.
    pub fn groups(&self) -> Vec<GroupId> {
        let mut gs: Vec<GroupId> = self.members.values().cloned().collect();
        gs.sort();
        gs.dedup();
        gs
    }

    pub fn members_of<'a>(
        &'a self,
        group: &'a GroupId,
    ) -> impl Iterator<Item = &'a UserHandle> + 'a {
        self.members
            .iter()
            .filter(move |(_, g)| *g == group)
            .map(|(u, _)| u)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UserHandle, &GroupId)> {
        self.members.iter()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Reads a follow edge list with header `source,target`.
pub fn load_follow_edges<R: Read>(reader: R) -> Result<Vec<(UserHandle, UserHandle)>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut edges = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row = row?;
        let bad = |message: String| CorpusError::RosterFormat {
            line: i + 2,
            message,
        };
        let (Some(s), Some(t)) = (row.get(0), row.get(1)) else {
            return Err(bad("expected source,target".into()));
        };
        let s = UserHandle::parse(s).map_err(|e| bad(e.to_string()))?;
        let t = UserHandle::parse(t).map_err(|e| bad(e.to_string()))?;
        edges.push((s, t));
    }
    Ok(edges)
}
