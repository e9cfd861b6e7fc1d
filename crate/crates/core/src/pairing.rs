//! Sockpuppet group merging and ban-evasion pair extraction.
//!
//! Overlapping sockpuppet records are merged into disjoint groups with a
//! union-find over account ids. Inside a group, `(u, v)` is an evasion pair
//! when `u` is the temporal predecessor of `v` (the member whose ban most
//! closely precedes `v`'s creation) and `v` is the temporal successor of
//! `u` (the earliest member created after `u`'s ban). Equal timestamps are
//! broken towards the lexicographically smaller account id.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Account, Corpus, PairRecord, SockpuppetRecord};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PairingError {
    #[error("account {account:?} is not a member of group {group}")]
    AccountNotInGroup { account: String, group: u64 },
    #[error("account {0:?} was never banned")]
    AccountNeverBanned(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SockpuppetGroup {
    pub group_id: u64,
    pub member_ids: BTreeSet<String>,
    /// The earliest-created member.
    pub master_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvasionPair {
    pub parent_id: String,
    pub child_id: String,
    pub group_id: u64,
}

impl From<&EvasionPair> for PairRecord {
    fn from(pair: &EvasionPair) -> Self {
        PairRecord {
            parent_id: pair.parent_id.clone(),
            child_id: pair.child_id.clone(),
            group_id: Some(pair.group_id),
        }
    }
}

/// Disjoint-set forest with path compression and union by rank.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut node: usize) -> usize {
        let mut root = node;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[node] != root {
            let next = self.parent[node];
            self.parent[node] = root;
            node = next;
        }
        root
    }

    /// Returns `true` when the two nodes were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.rank[a] < self.rank[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        if self.rank[a] == self.rank[b] {
            self.rank[a] += 1;
        }
        true
    }

    /// Components as sorted vertex lists, ordered by their smallest vertex.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for v in 0..self.parent.len() {
            let root = self.find(v);
            by_root.entry(root).or_default().push(v);
        }
        let mut comps: Vec<Vec<usize>> = by_root.into_values().collect();
        comps.sort_by_key(|c| c[0]);
        comps
    }
}

/// Merges records into connected components of the co-membership graph.
///
/// Group ids follow the order of each group's smallest member id. Members
/// missing from `corpus` sort after known ones when choosing the master.
pub fn merge_groups(records: &[SockpuppetRecord], corpus: &Corpus) -> Vec<SockpuppetGroup> {
    let ids: Vec<&str> = records
        .iter()
        .flat_map(|r| r.member_ids.iter().map(String::as_str))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();

    let mut uf = UnionFind::new(ids.len());
    for record in records {
        let mut members = record.member_ids.iter().map(|m| index[m.as_str()]);
        if let Some(first) = members.next() {
            for other in members {
                uf.union(first, other);
            }
        }
    }

    uf.components()
        .into_iter()
        .enumerate()
        .map(|(gid, comp)| {
            let member_ids: BTreeSet<String> = comp.iter().map(|&v| ids[v].to_string()).collect();
            let master_id = member_ids
                .iter()
                .min_by_key(|id| {
                    let created = corpus.account(id).map(|a| a.creation_time);
                    (created.is_none(), created, id.as_str())
                })
                .cloned()
                .unwrap_or_default();
            SockpuppetGroup {
                group_id: gid as u64,
                member_ids,
                master_id,
            }
        })
        .collect()
}

fn members<'c>(group: &SockpuppetGroup, corpus: &'c Corpus) -> Vec<&'c Account> {
    group
        .member_ids
        .iter()
        .filter_map(|id| corpus.account(id))
        .collect()
}

fn check_member(account: &Account, group: &SockpuppetGroup) -> Result<(), PairingError> {
    if group.member_ids.contains(&account.account_id) {
        Ok(())
    } else {
        Err(PairingError::AccountNotInGroup {
            account: account.account_id.clone(),
            group: group.group_id,
        })
    }
}

/// The member whose ban most closely precedes `account`'s creation.
pub fn temporal_predecessor(
    account: &Account,
    group: &SockpuppetGroup,
    corpus: &Corpus,
) -> Result<Option<String>, PairingError> {
    check_member(account, group)?;
    Ok(members(group, corpus)
        .into_iter()
        .filter_map(|m| m.ban_time.map(|ban| (ban, m)))
        .filter(|(ban, _)| *ban < account.creation_time)
        .max_by_key(|(ban, m)| (*ban, Reverse(m.account_id.as_str())))
        .map(|(_, m)| m.account_id.clone()))
}

/// The earliest member created after `account`'s ban.
pub fn temporal_successor(
    account: &Account,
    group: &SockpuppetGroup,
    corpus: &Corpus,
) -> Result<Option<String>, PairingError> {
    check_member(account, group)?;
    let ban = account
        .ban_time
        .ok_or_else(|| PairingError::AccountNeverBanned(account.account_id.clone()))?;
    Ok(members(group, corpus)
        .into_iter()
        .filter(|m| m.creation_time > ban)
        .min_by_key(|m| (m.creation_time, m.account_id.as_str()))
        .map(|m| m.account_id.clone()))
}

/// Pairs within one group, using sorted sweeps instead of per-member scans.
fn group_pairs(group: &SockpuppetGroup, corpus: &Corpus) -> Vec<EvasionPair> {
    let accounts = members(group, corpus);

    // (ban asc, id desc): the last entry below a bound is the latest ban,
    // smallest id among ties.
    let mut by_ban: Vec<(i64, &str)> = accounts
        .iter()
        .filter_map(|a| a.ban_time.map(|b| (b, a.account_id.as_str())))
        .collect();
    by_ban.sort_by(|x, y| x.0.cmp(&y.0).then(y.1.cmp(x.1)));

    let mut by_creation: Vec<(i64, &str)> = accounts
        .iter()
        .map(|a| (a.creation_time, a.account_id.as_str()))
        .collect();
    by_creation.sort();

    let predecessor = |created: i64| -> Option<&str> {
        let end = by_ban.partition_point(|(ban, _)| *ban < created);
        end.checked_sub(1).map(|i| by_ban[i].1)
    };
    let successor = |banned: i64| -> Option<&str> {
        let start = by_creation.partition_point(|(created, _)| *created <= banned);
        by_creation.get(start).map(|(_, id)| *id)
    };

    let mut pairs: Vec<(i64, EvasionPair)> = Vec::new();
    for parent in &accounts {
        let Some(ban) = parent.ban_time else { continue };
        let Some(child_id) = successor(ban) else { continue };
        let child = corpus.account(child_id).expect("member resolved above");
        if predecessor(child.creation_time) == Some(parent.account_id.as_str()) {
            pairs.push((
                parent.creation_time,
                EvasionPair {
                    parent_id: parent.account_id.clone(),
                    child_id: child_id.to_string(),
                    group_id: group.group_id,
                },
            ));
        }
    }
    pairs.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.parent_id.cmp(&b.1.parent_id)));
    pairs.into_iter().map(|(_, p)| p).collect()
}

/// All bidirectional evasion pairs, sorted by `(group_id, parent creation)`.
pub fn extract_evasion_pairs(groups: &[SockpuppetGroup], corpus: &Corpus) -> Vec<EvasionPair> {
    let mut ordered: Vec<&SockpuppetGroup> = groups.iter().collect();
    ordered.sort_by_key(|g| g.group_id);
    ordered
        .into_iter()
        .flat_map(|g| group_pairs(g, corpus))
        .collect()
}

/// Keeps, per group, the pair whose parent was created first.
pub fn first_pair_per_group(pairs: &[EvasionPair], corpus: &Corpus) -> Vec<EvasionPair> {
    let mut best: BTreeMap<u64, (i64, &EvasionPair)> = BTreeMap::new();
    for pair in pairs {
        let created = corpus
            .account(&pair.parent_id)
            .map_or(i64::MAX, |a| a.creation_time);
        best.entry(pair.group_id)
            .and_modify(|cur| {
                if (created, pair.parent_id.as_str()) < (cur.0, cur.1.parent_id.as_str()) {
                    *cur = (created, pair);
                }
            })
            .or_insert((created, pair));
    }
    best.into_values().map(|(_, p)| p.clone()).collect()
}

/// Convenience: merge the corpus' records, extract, and keep first pairs.
pub fn corpus_first_pairs(corpus: &Corpus) -> (Vec<SockpuppetGroup>, Vec<EvasionPair>, Vec<EvasionPair>) {
    let groups = merge_groups(corpus.sockpuppet_records(), corpus);
    let all = extract_evasion_pairs(&groups, corpus);
    let first = first_pair_per_group(&all, corpus);
    (groups, all, first)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acct(id: &str, created: i64, banned: Option<i64>) -> Account {
        Account {
            account_id: id.into(),
            username: id.into(),
            creation_time: created,
            ban_time: banned,
        }
    }

    fn corpus(accounts: Vec<Account>, records: Vec<SockpuppetRecord>) -> Corpus {
        Corpus::new(accounts, vec![], records).unwrap()
    }

    fn single_group(c: &Corpus) -> SockpuppetGroup {
        SockpuppetGroup {
            group_id: 0,
            member_ids: c.accounts().iter().map(|a| a.account_id.clone()).collect(),
            master_id: String::new(),
        }
    }

    #[test]
    fn chained_records_merge() {
        let c = corpus(
            vec![acct("A", 0, None), acct("B", 1, None), acct("C", 2, None)],
            vec![SockpuppetRecord::new(["A", "B"]), SockpuppetRecord::new(["B", "C"])],
        );
        let groups = merge_groups(c.sockpuppet_records(), &c);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].member_ids.len(), 3);
        assert_eq!(groups[0].master_id, "A");
    }

    #[test]
    fn disjoint_records_stay_apart() {
        let c = corpus(
            vec![acct("A", 5, None), acct("B", 1, None), acct("C", 2, None), acct("D", 0, None)],
            vec![SockpuppetRecord::new(["C", "D"]), SockpuppetRecord::new(["A", "B"])],
        );
        let groups = merge_groups(c.sockpuppet_records(), &c);
        assert_eq!(groups.len(), 2);
        assert_eq!(groups[0].group_id, 0);
        assert!(groups[0].member_ids.contains("A"));
        assert_eq!(groups[0].master_id, "B");
        assert_eq!(groups[1].master_id, "D");
    }

    #[test]
    fn empty_records() {
        assert!(merge_groups(&[], &Corpus::empty()).is_empty());
    }

    #[test]
    fn predecessor_picks_latest_ban() {
        let c = corpus(
            vec![acct("A", 0, Some(10)), acct("B", 1, Some(12)), acct("C", 15, None)],
            vec![],
        );
        let g = single_group(&c);
        let pred = temporal_predecessor(c.account("C").unwrap(), &g, &c).unwrap();
        assert_eq!(pred.as_deref(), Some("B"));
    }

    #[test]
    fn predecessor_absent_when_nothing_banned_earlier() {
        let c = corpus(vec![acct("A", 0, Some(10)), acct("C", 5, None)], vec![]);
        let g = single_group(&c);
        assert_eq!(temporal_predecessor(c.account("C").unwrap(), &g, &c).unwrap(), None);
    }

    #[test]
    fn predecessor_tie_prefers_smaller_id() {
        let c = corpus(
            vec![acct("B", 0, Some(12)), acct("A", 1, Some(12)), acct("C", 15, None)],
            vec![],
        );
        let g = single_group(&c);
        let pred = temporal_predecessor(c.account("C").unwrap(), &g, &c).unwrap();
        assert_eq!(pred.as_deref(), Some("A"));
    }

    #[test]
    fn successor_is_earliest_creation_after_ban() {
        let c = corpus(
            vec![acct("A", 0, Some(10)), acct("C", 15, None), acct("D", 20, None)],
            vec![],
        );
        let g = single_group(&c);
        let succ = temporal_successor(c.account("A").unwrap(), &g, &c).unwrap();
        assert_eq!(succ.as_deref(), Some("C"));
    }

    #[test]
    fn successor_absent_and_errors() {
        let c = corpus(vec![acct("A", 0, Some(10)), acct("B", 5, None)], vec![]);
        let g = single_group(&c);
        assert_eq!(temporal_successor(c.account("A").unwrap(), &g, &c).unwrap(), None);
        assert_eq!(
            temporal_successor(c.account("B").unwrap(), &g, &c),
            Err(PairingError::AccountNeverBanned("B".into()))
        );
        let other = SockpuppetGroup {
            group_id: 9,
            member_ids: ["A".to_string()].into(),
            master_id: "A".into(),
        };
        assert!(matches!(
            temporal_successor(c.account("B").unwrap(), &other, &c),
            Err(PairingError::AccountNotInGroup { .. })
        ));
    }

    #[test]
    fn successor_tie_prefers_smaller_id() {
        let c = corpus(
            vec![acct("A", 0, Some(10)), acct("D", 15, None), acct("C", 15, None)],
            vec![],
        );
        let g = single_group(&c);
        let succ = temporal_successor(c.account("A").unwrap(), &g, &c).unwrap();
        assert_eq!(succ.as_deref(), Some("C"));
    }

    #[test]
    fn two_account_group() {
        let c = corpus(
            vec![acct("A", 0, Some(10)), acct("B", 15, None)],
            vec![SockpuppetRecord::new(["A", "B"])],
        );
        let (_, pairs, _) = corpus_first_pairs(&c);
        assert_eq!(
            pairs,
            vec![EvasionPair {
                parent_id: "A".into(),
                child_id: "B".into(),
                group_id: 0
            }]
        );
    }

    #[test]
    fn bidirectional_criterion_rejects_one_sided_links() {
        let c = corpus(
            vec![acct("A", 0, Some(10)), acct("B", 1, Some(12)), acct("C", 15, None)],
            vec![SockpuppetRecord::new(["A", "B", "C"])],
        );
        let (_, pairs, _) = corpus_first_pairs(&c);
        let got: Vec<(&str, &str)> = pairs
            .iter()
            .map(|p| (p.parent_id.as_str(), p.child_id.as_str()))
            .collect();
        assert_eq!(got, vec![("B", "C")]);
    }

    #[test]
    fn first_pair_keeps_earliest_parent() {
        let c = corpus(
            vec![acct("A", 0, Some(5)), acct("B", 6, Some(9)), acct("C", 11, None)],
            vec![SockpuppetRecord::new(["A", "B"]), SockpuppetRecord::new(["B", "C"])],
        );
        let (_, all, first) = corpus_first_pairs(&c);
        assert_eq!(all.len(), 2);
        assert_eq!(first.len(), 1);
        assert_eq!((first[0].parent_id.as_str(), first[0].child_id.as_str()), ("A", "B"));
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(5);
        assert!(uf.union(0, 1));
        assert!(uf.union(3, 4));
        assert!(!uf.union(1, 0));
        assert_eq!(uf.components(), vec![vec![0, 1], vec![2], vec![3, 4]]);
    }
}
