//! Accounts, revisions and sockpuppet records.
//!
//! A [`Corpus`] is validated on construction and immutable afterwards:
//! accounts are sorted by id, revisions by `(account_id, timestamp)` with the
//! input order kept for equal timestamps, and every revision and record
//! member refers to a known account.

mod io;
pub mod synth;

use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::jsonl::JsonlError;
use crate::time::Timestamp;

pub use io::{load_corpus, read_pairs, write_corpus, write_pairs, CorpusFiles, PairRecord};
pub use synth::{generate_synthetic, SynthConfig, SyntheticCorpus};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error(transparent)]
    Io(#[from] JsonlError),
    #[error("line {line}: {reason}")]
    RecordParse { line: usize, reason: String },
    #[error("unknown account id {0:?}")]
    ReferentialIntegrity(String),
    #[error("duplicate account id {0:?}")]
    DuplicateId(String),
    #[error("account {id:?}: {reason}")]
    InvalidAccount { id: String, reason: String },
    #[error("sockpuppet record #{index} has {size} member(s); at least 2 required")]
    InvalidRecord { index: usize, size: usize },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub account_id: String,
    pub username: String,
    pub creation_time: Timestamp,
    pub ban_time: Option<Timestamp>,
}

impl Account {
    pub fn is_banned(&self) -> bool {
        self.ban_time.is_some()
    }

    /// Seconds between creation and ban, if banned.
    pub fn active_duration(&self) -> Option<i64> {
        self.ban_time.map(|ban| ban - self.creation_time)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Revision {
    pub account_id: String,
    pub page_id: String,
    pub timestamp: Timestamp,
    pub added_text: String,
    pub deleted_text: String,
    pub comment: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SockpuppetRecord {
    pub member_ids: BTreeSet<String>,
}

impl SockpuppetRecord {
    pub fn new<I, S>(members: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            member_ids: members.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    accounts: Vec<Account>,
    revisions: Vec<Revision>,
    records: Vec<SockpuppetRecord>,
    index: HashMap<String, usize>,
    revision_ranges: Vec<Range<usize>>,
}

impl Corpus {
    pub fn new(
        mut accounts: Vec<Account>,
        mut revisions: Vec<Revision>,
        records: Vec<SockpuppetRecord>,
    ) -> Result<Self, CorpusError> {
        accounts.sort_by(|a, b| a.account_id.cmp(&b.account_id));
        for pair in accounts.windows(2) {
            if pair[0].account_id == pair[1].account_id {
                return Err(CorpusError::DuplicateId(pair[0].account_id.clone()));
            }
        }
        for account in &accounts {
            if let Some(ban) = account.ban_time {
                if ban <= account.creation_time {
                    return Err(CorpusError::InvalidAccount {
                        id: account.account_id.clone(),
                        reason: format!(
                            "ban_time {ban} is not after creation_time {}",
                            account.creation_time
                        ),
                    });
                }
            }
        }
        let index: HashMap<String, usize> = accounts
            .iter()
            .enumerate()
            .map(|(i, a)| (a.account_id.clone(), i))
            .collect();

        for rev in &revisions {
            let &idx = index
                .get(&rev.account_id)
                .ok_or_else(|| CorpusError::ReferentialIntegrity(rev.account_id.clone()))?;
            if rev.timestamp < accounts[idx].creation_time {
                return Err(CorpusError::InvalidAccount {
                    id: rev.account_id.clone(),
                    reason: format!("revision at {} precedes account creation", rev.timestamp),
                });
            }
        }
        for (i, record) in records.iter().enumerate() {
            if record.member_ids.len() < 2 {
                return Err(CorpusError::InvalidRecord {
                    index: i,
                    size: record.member_ids.len(),
                });
            }
            if let Some(missing) = record.member_ids.iter().find(|m| !index.contains_key(*m)) {
                return Err(CorpusError::ReferentialIntegrity(missing.clone()));
            }
        }

        // Stable: equal timestamps keep their input order.
        revisions.sort_by(|a, b| {
            index[&a.account_id]
                .cmp(&index[&b.account_id])
                .then(a.timestamp.cmp(&b.timestamp))
        });
        let mut revision_ranges = vec![0..0; accounts.len()];
        let mut start = 0;
        while start < revisions.len() {
            let owner = index[&revisions[start].account_id];
            let mut end = start + 1;
            while end < revisions.len() && revisions[end].account_id == revisions[start].account_id
            {
                end += 1;
            }
            revision_ranges[owner] = start..end;
            start = end;
        }

        Ok(Self {
            accounts,
            revisions,
            records,
            index,
            revision_ranges,
        })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), Vec::new()).expect("empty corpus is valid")
    }

    pub fn accounts(&self) -> &[Account] {
        &self.accounts
    }

    pub fn revisions(&self) -> &[Revision] {
        &self.revisions
    }

    pub fn sockpuppet_records(&self) -> &[SockpuppetRecord] {
        &self.records
    }

    pub fn account(&self, id: &str) -> Option<&Account> {
        self.index.get(id).map(|&i| &self.accounts[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Revisions of one account in time order; empty for unknown ids.
    pub fn revisions_of(&self, id: &str) -> &[Revision] {
        match self.index.get(id) {
            Some(&i) => &self.revisions[self.revision_ranges[i].clone()],
            None => &[],
        }
    }

    /// `(accounts, revisions, records)`
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.accounts.len(), self.revisions.len(), self.records.len())
    }

    /// Ids of every account named in some sockpuppet record.
    pub fn recorded_ids(&self) -> BTreeSet<&str> {
        self.records
            .iter()
            .flat_map(|r| r.member_ids.iter().map(String::as_str))
            .collect()
    }
}
