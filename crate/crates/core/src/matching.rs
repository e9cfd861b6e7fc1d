//! Matched negative samples and attribution candidate sets.
//!
//! Each task compares evasion accounts against controls picked inside a
//! fixed temporal window so that calendar effects cancel out:
//!
//! * evasion prediction: parents vs. malicious non-evaders banned within
//!   7 days of the parent's ban;
//! * early detection: `(parent, child)` vs. `(parent, benign)` where the
//!   benign account was created within 1 day of the child and strictly
//!   after the parent's ban, capped at 100 per child;
//! * ban-time detection: `(parent, child)` vs. `(parent, malicious)` where
//!   the malicious account was created after the parent's ban and within
//!   7 days of the child.
//!
//! Window boundaries are inclusive. Pool preparation (removing sockpuppets,
//! proxy and autoblock bans from the malicious pool, zero-edit accounts
//! from the benign pool) is the caller's job; [`malicious_pool`] and
//! [`benign_pool`] do the corpus-level part of it.

use std::collections::{BTreeSet, HashSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Account, Corpus};
use crate::pairing::EvasionPair;
use crate::textstats::fnv1a64;
use crate::time::{DAY, WEEK};

pub const TASK1_WINDOW: i64 = WEEK;
pub const TASK2_WINDOW: i64 = DAY;
pub const TASK3_WINDOW: i64 = WEEK;
pub const TASK2_CAP: usize = 100;
pub const MAX_CANDIDATES: usize = 50;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchError {
    #[error("account {0:?} has no ban time")]
    MissingBanTime(String),
    #[error("negative cap must be positive, got {0}")]
    InvalidCap(usize),
    #[error("true parent of child {0:?} is not an eligible banned parent")]
    TrueParentMissing(String),
    #[error("unknown account {0:?}")]
    UnknownAccount(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Positive,
    Negative,
}

impl Label {
    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }

    pub fn as_f64(self) -> f64 {
        if self.is_positive() {
            1.0
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Prediction,
    EarlyDetection,
    BantimeDetection,
    Ranking,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Prediction => "prediction",
            Task::EarlyDetection => "early_detection",
            Task::BantimeDetection => "bantime_detection",
            Task::Ranking => "ranking",
        }
    }
}

/// Evasion-prediction sample: a parent (positive) or a matched non-evader.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledAccountSample {
    pub account_id: String,
    pub label: Label,
    /// The parent this sample was matched against; positives anchor to themselves.
    pub anchor_parent_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledPairSample {
    pub parent_id: String,
    pub other_id: String,
    pub label: Label,
    pub task: Task,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub child_id: String,
    /// Most recently banned first; includes the true parent.
    pub candidate_parent_ids: Vec<String>,
    pub true_parent_id: String,
}

/// One line of a label file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelRecord {
    pub task: Task,
    pub parent_id: String,
    pub other_id: String,
    pub label: Label,
}

impl From<&LabeledAccountSample> for LabelRecord {
    fn from(s: &LabeledAccountSample) -> Self {
        LabelRecord {
            task: Task::Prediction,
            parent_id: s.anchor_parent_id.clone().unwrap_or_else(|| s.account_id.clone()),
            other_id: s.account_id.clone(),
            label: s.label,
        }
    }
}

impl From<&LabeledPairSample> for LabelRecord {
    fn from(s: &LabeledPairSample) -> Self {
        LabelRecord {
            task: s.task,
            parent_id: s.parent_id.clone(),
            other_id: s.other_id.clone(),
            label: s.label,
        }
    }
}

impl LabelRecord {
    pub fn to_account_sample(&self) -> LabeledAccountSample {
        LabeledAccountSample {
            account_id: self.other_id.clone(),
            label: self.label,
            anchor_parent_id: Some(self.parent_id.clone()),
        }
    }

    pub fn to_pair_sample(&self) -> LabeledPairSample {
        LabeledPairSample {
            parent_id: self.parent_id.clone(),
            other_id: self.other_id.clone(),
            label: self.label,
            task: self.task,
        }
    }
}

/// Banned accounts that belong to no sockpuppet record.
pub fn malicious_pool(corpus: &Corpus) -> Vec<&Account> {
    let recorded = corpus.recorded_ids();
    corpus
        .accounts()
        .iter()
        .filter(|a| a.is_banned() && !recorded.contains(a.account_id.as_str()))
        .collect()
}

/// Never-banned accounts with at least one revision that belong to no record.
pub fn benign_pool(corpus: &Corpus) -> Vec<&Account> {
    let recorded = corpus.recorded_ids();
    corpus
        .accounts()
        .iter()
        .filter(|a| {
            !a.is_banned()
                && !recorded.contains(a.account_id.as_str())
                && !corpus.revisions_of(&a.account_id).is_empty()
        })
        .collect()
}

fn lookup<'c>(corpus: &'c Corpus, id: &str) -> Result<&'c Account, MatchError> {
    corpus
        .account(id)
        .ok_or_else(|| MatchError::UnknownAccount(id.to_string()))
}

fn ban_of(account: &Account) -> Result<i64, MatchError> {
    account
        .ban_time
        .ok_or_else(|| MatchError::MissingBanTime(account.account_id.clone()))
}

/// Accounts sorted by a key for inclusive range queries.
struct TimeIndex<'a> {
    entries: Vec<(i64, &'a Account)>,
}

impl<'a> TimeIndex<'a> {
    fn new(accounts: &[&'a Account], key: impl Fn(&Account) -> i64) -> Self {
        let mut entries: Vec<(i64, &Account)> = accounts.iter().map(|a| (key(a), *a)).collect();
        entries.sort_by(|x, y| x.0.cmp(&y.0).then_with(|| x.1.account_id.cmp(&y.1.account_id)));
        Self { entries }
    }

    fn within(&self, lo: i64, hi: i64) -> impl Iterator<Item = &'a Account> + '_ {
        let start = self.entries.partition_point(|(t, _)| *t < lo);
        self.entries[start..]
            .iter()
            .take_while(move |(t, _)| *t <= hi)
            .map(|(_, a)| *a)
    }
}

/// Parents vs. pool accounts banned within `window_seconds` of the parent's ban.
pub fn match_task1(
    parents: &[&Account],
    malicious_pool: &[&Account],
    window_seconds: i64,
) -> Result<Vec<LabeledAccountSample>, MatchError> {
    for account in malicious_pool {
        ban_of(account)?;
    }
    let index = TimeIndex::new(malicious_pool, |a| a.ban_time.unwrap_or_default());
    let parent_ids: HashSet<&str> = parents.iter().map(|p| p.account_id.as_str()).collect();
    let mut out = Vec::new();
    for parent in parents {
        let ban = ban_of(parent)?;
        out.push(LabeledAccountSample {
            account_id: parent.account_id.clone(),
            label: Label::Positive,
            anchor_parent_id: Some(parent.account_id.clone()),
        });
        for m in index.within(ban - window_seconds, ban + window_seconds) {
            if parent_ids.contains(m.account_id.as_str()) {
                continue;
            }
            out.push(LabeledAccountSample {
                account_id: m.account_id.clone(),
                label: Label::Negative,
                anchor_parent_id: Some(parent.account_id.clone()),
            });
        }
    }
    out.sort_by(|a, b| {
        (&a.anchor_parent_id, a.label, &a.account_id).cmp(&(&b.anchor_parent_id, b.label, &b.account_id))
    });
    Ok(out)
}

fn pair_rng(seed: u64, pair: &EvasionPair) -> ChaCha8Rng {
    let key = format!("{}\u{1f}{}", pair.parent_id, pair.child_id);
    ChaCha8Rng::seed_from_u64(seed ^ fnv1a64(key.as_bytes()))
}

fn sort_pairs(samples: &mut [LabeledPairSample]) {
    samples.sort_by(|a, b| (&a.parent_id, a.label, &a.other_id).cmp(&(&b.parent_id, b.label, &b.other_id)));
}

/// Early-detection samples: `(parent, child)` vs. `(parent, benign)`.
///
/// When more than `cap` benign accounts qualify, `cap` of them are drawn
/// uniformly without replacement from a stream seeded by `seed` and the pair.
pub fn match_task2(
    pairs: &[EvasionPair],
    corpus: &Corpus,
    benign_pool: &[&Account],
    window_seconds: i64,
    cap: usize,
    seed: u64,
) -> Result<Vec<LabeledPairSample>, MatchError> {
    if cap == 0 {
        return Err(MatchError::InvalidCap(cap));
    }
    let index = TimeIndex::new(benign_pool, |a| a.creation_time);
    let truth: HashSet<(&str, &str)> = pairs
        .iter()
        .map(|p| (p.parent_id.as_str(), p.child_id.as_str()))
        .collect();
    let mut out = Vec::new();
    for pair in pairs {
        let parent = lookup(corpus, &pair.parent_id)?;
        let child = lookup(corpus, &pair.child_id)?;
        let ban = ban_of(parent)?;
        out.push(LabeledPairSample {
            parent_id: pair.parent_id.clone(),
            other_id: pair.child_id.clone(),
            label: Label::Positive,
            task: Task::EarlyDetection,
        });
        let matched: Vec<&Account> = index
            .within(child.creation_time - window_seconds, child.creation_time + window_seconds)
            .filter(|u| u.creation_time > ban)
            .filter(|u| u.account_id != child.account_id)
            .filter(|u| !truth.contains(&(pair.parent_id.as_str(), u.account_id.as_str())))
            .collect();
        let chosen: Vec<&Account> = if matched.len() > cap {
            let mut rng = pair_rng(seed, pair);
            let mut picks = rand::seq::index::sample(&mut rng, matched.len(), cap).into_vec();
            picks.sort_unstable();
            picks.into_iter().map(|i| matched[i]).collect()
        } else {
            matched
        };
        out.extend(chosen.into_iter().map(|u| LabeledPairSample {
            parent_id: pair.parent_id.clone(),
            other_id: u.account_id.clone(),
            label: Label::Negative,
            task: Task::EarlyDetection,
        }));
    }
    sort_pairs(&mut out);
    Ok(out)
}

/// Ban-time detection samples: `(parent, child)` vs. `(parent, malicious)`.
pub fn match_task3(
    pairs: &[EvasionPair],
    corpus: &Corpus,
    malicious_pool: &[&Account],
    window_seconds: i64,
) -> Result<Vec<LabeledPairSample>, MatchError> {
    let index = TimeIndex::new(malicious_pool, |a| a.creation_time);
    let mut out = Vec::new();
    for pair in pairs {
        let parent = lookup(corpus, &pair.parent_id)?;
        let child = lookup(corpus, &pair.child_id)?;
        let ban = ban_of(parent)?;
        out.push(LabeledPairSample {
            parent_id: pair.parent_id.clone(),
            other_id: pair.child_id.clone(),
            label: Label::Positive,
            task: Task::BantimeDetection,
        });
        for m in index.within(child.creation_time - window_seconds, child.creation_time + window_seconds) {
            if m.creation_time > ban && m.account_id != child.account_id {
                out.push(LabeledPairSample {
                    parent_id: pair.parent_id.clone(),
                    other_id: m.account_id.clone(),
                    label: Label::Negative,
                    task: Task::BantimeDetection,
                });
            }
        }
    }
    sort_pairs(&mut out);
    Ok(out)
}

/// For each child, its true parent plus up to `max_candidates` other parents
/// banned before the child's creation, most recently banned first.
pub fn build_candidate_sets(
    truth: &[EvasionPair],
    corpus: &Corpus,
    banned_parents: &[&Account],
    max_candidates: usize,
) -> Result<Vec<CandidateSet>, MatchError> {
    let index = TimeIndex::new(banned_parents, |a| a.ban_time.unwrap_or(i64::MAX));
    let eligible_ids: BTreeSet<&str> = banned_parents
        .iter()
        .filter(|a| a.is_banned())
        .map(|a| a.account_id.as_str())
        .collect();
    let mut out = Vec::with_capacity(truth.len());
    for pair in truth {
        let child = lookup(corpus, &pair.child_id)?;
        let parent = lookup(corpus, &pair.parent_id)?;
        let parent_ok = eligible_ids.contains(parent.account_id.as_str())
            && parent.ban_time.is_some_and(|b| b < child.creation_time);
        if !parent_ok {
            return Err(MatchError::TrueParentMissing(pair.child_id.clone()));
        }
        // Entries with ban < child.creation, walked from the latest ban down.
        let end = index.entries.partition_point(|(ban, _)| *ban < child.creation_time);
        // Keep every entry tied with the last one needed so the id tie-break holds.
        let mut earlier: Vec<(i64, &Account)> = Vec::new();
        for &(ban, account) in index.entries[..end].iter().rev() {
            if earlier.len() > max_candidates + 1 && earlier.last().is_some_and(|l| l.0 != ban) {
                break;
            }
            earlier.push((ban, account));
        }
        earlier.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.account_id.cmp(&y.1.account_id)));
        let mut chosen: Vec<(i64, &Account)> = earlier
            .into_iter()
            .filter(|(_, a)| a.account_id != parent.account_id && a.account_id != child.account_id)
            .take(max_candidates)
            .collect();
        chosen.push((parent.ban_time.expect("checked"), parent));
        chosen.sort_by(|x, y| y.0.cmp(&x.0).then_with(|| x.1.account_id.cmp(&y.1.account_id)));
        out.push(CandidateSet {
            child_id: child.account_id.clone(),
            candidate_parent_ids: chosen.into_iter().map(|(_, a)| a.account_id.clone()).collect(),
            true_parent_id: parent.account_id.clone(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Revision;

    fn acct(id: &str, created: i64, banned: Option<i64>) -> Account {
        Account {
            account_id: id.into(),
            username: id.into(),
            creation_time: created,
            ban_time: banned,
        }
    }

    fn pair(p: &str, c: &str) -> EvasionPair {
        EvasionPair {
            parent_id: p.into(),
            child_id: c.into(),
            group_id: 0,
        }
    }

    #[test]
    fn task1_window_is_inclusive() {
        let parent = acct("P", 0, Some(1_000_000));
        let inside = acct("M1", 10, Some(1_000_000 + 604_800));
        let outside = acct("M2", 10, Some(1_000_000 + 604_801));
        let before = acct("M3", 10, Some(1_000_000 - 604_800));
        let samples = match_task1(&[&parent], &[&inside, &outside, &before], TASK1_WINDOW).unwrap();
        let negatives: Vec<&str> = samples
            .iter()
            .filter(|s| !s.label.is_positive())
            .map(|s| s.account_id.as_str())
            .collect();
        assert_eq!(negatives, vec!["M1", "M3"]);
        assert_eq!(samples.iter().filter(|s| s.label.is_positive()).count(), 1);
    }

    #[test]
    fn task1_missing_ban() {
        let parent = acct("P", 0, Some(100));
        let m = acct("M", 0, None);
        assert_eq!(
            match_task1(&[&parent], &[&m], TASK1_WINDOW),
            Err(MatchError::MissingBanTime("M".into()))
        );
    }

    fn task2_corpus(n_benign: usize) -> Corpus {
        let mut accounts = vec![acct("P", 0, Some(1_000)), acct("C", 50_000, None)];
        let mut revisions = Vec::new();
        for i in 0..n_benign {
            let id = format!("B{i:03}");
            accounts.push(acct(&id, 50_000 + i as i64, None));
            revisions.push(Revision {
                account_id: id,
                page_id: "x".into(),
                timestamp: 60_000,
                added_text: String::new(),
                deleted_text: String::new(),
                comment: String::new(),
            });
        }
        accounts.push(acct("EDGE", 1_000, None));
        revisions.push(Revision {
            account_id: "EDGE".into(),
            page_id: "x".into(),
            timestamp: 60_000,
            added_text: String::new(),
            deleted_text: String::new(),
            comment: String::new(),
        });
        Corpus::new(accounts, revisions, vec![]).unwrap()
    }

    #[test]
    fn task2_excludes_creation_at_parent_ban() {
        let corpus = Corpus::new(
            vec![acct("P", 0, Some(50_000)), acct("C", 60_000, None), acct("EDGE", 50_000, None)],
            vec![],
            vec![],
        )
        .unwrap();
        let pool: Vec<&Account> = vec![corpus.account("EDGE").unwrap()];
        let samples = match_task2(&[pair("P", "C")], &corpus, &pool, TASK2_WINDOW, 100, 1).unwrap();
        assert_eq!(samples.len(), 1);
        assert!(samples[0].label.is_positive());
    }

    #[test]
    fn task2_cap_is_deterministic() {
        let corpus = task2_corpus(150);
        let pool = benign_pool(&corpus);
        let run = |seed| match_task2(&[pair("P", "C")], &corpus, &pool, TASK2_WINDOW, 100, seed).unwrap();
        let a = run(42);
        let negatives = a.iter().filter(|s| !s.label.is_positive()).count();
        assert_eq!(negatives, 100);
        assert_eq!(a, run(42));
        assert_ne!(a, run(43));
        assert_eq!(
            match_task2(&[pair("P", "C")], &corpus, &pool, TASK2_WINDOW, 0, 1),
            Err(MatchError::InvalidCap(0))
        );
    }

    #[test]
    fn task3_predicates() {
        let week = TASK3_WINDOW;
        let corpus = Corpus::new(
            vec![
                acct("P", 0, Some(1_000)),
                acct("C", 100_000, Some(200_000)),
                acct("EARLY", 900, Some(5_000)),
                acct("EDGE", 100_000 + week, Some(100_000 + week + 10)),
                acct("LATE", 100_001 + week, Some(100_001 + week + 10)),
            ],
            vec![],
            vec![],
        )
        .unwrap();
        let pool = vec![
            corpus.account("EARLY").unwrap(),
            corpus.account("EDGE").unwrap(),
            corpus.account("LATE").unwrap(),
        ];
        let samples = match_task3(&[pair("P", "C")], &corpus, &pool, week).unwrap();
        let negatives: Vec<&str> = samples
            .iter()
            .filter(|s| !s.label.is_positive())
            .map(|s| s.other_id.as_str())
            .collect();
        assert_eq!(negatives, vec!["EDGE"]);
    }

    fn candidate_corpus(n_distractors: usize) -> Corpus {
        let mut accounts = vec![acct("P", 0, Some(500)), acct("C", 10_000, None)];
        for i in 0..n_distractors {
            accounts.push(acct(&format!("D{i:03}"), 0, Some(100 + i as i64)));
        }
        accounts.push(acct("AFTER", 0, Some(10_000)));
        Corpus::new(accounts, vec![], vec![]).unwrap()
    }

    #[test]
    fn candidate_sets_small() {
        let corpus = candidate_corpus(3);
        let parents: Vec<&Account> = corpus.accounts().iter().filter(|a| a.is_banned()).collect();
        let sets = build_candidate_sets(&[pair("P", "C")], &corpus, &parents, 50).unwrap();
        assert_eq!(sets[0].candidate_parent_ids.len(), 4);
        assert!(!sets[0].candidate_parent_ids.contains(&"AFTER".to_string()));
        assert_eq!(sets[0].candidate_parent_ids[0], "P");
    }

    #[test]
    fn candidate_sets_keep_most_recent() {
        let corpus = candidate_corpus(80);
        let parents: Vec<&Account> = corpus.accounts().iter().filter(|a| a.is_banned()).collect();
        let sets = build_candidate_sets(&[pair("P", "C")], &corpus, &parents, 50).unwrap();
        let set = &sets[0];
        assert_eq!(set.candidate_parent_ids.len(), 51);
        assert!(set.candidate_parent_ids.contains(&"P".to_string()));
        // D030..D079 are the 50 latest bans.
        assert!(set.candidate_parent_ids.contains(&"D030".to_string()));
        assert!(!set.candidate_parent_ids.contains(&"D029".to_string()));
    }

    #[test]
    fn candidate_sets_require_true_parent() {
        let corpus = candidate_corpus(2);
        let parents: Vec<&Account> = vec![corpus.account("D000").unwrap()];
        assert_eq!(
            build_candidate_sets(&[pair("P", "C")], &corpus, &parents, 50),
            Err(MatchError::TrueParentMissing("C".into()))
        );
    }
}
