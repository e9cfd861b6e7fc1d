use std::collections::BTreeSet;

use ban_evasion::corpus::{Account, Corpus, SockpuppetRecord};
use ban_evasion::pairing::{extract_evasion_pairs, merge_groups, UnionFind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct RandomGroups {
    pub corpus: Corpus,
    pub groups: Vec<Vec<Account>>,
    pub records: Vec<SockpuppetRecord>,
}

/// Groups of 2..=10 accounts on a coarse clock so that timestamp ties are common.
pub fn random_groups(seed: u64, n_groups: usize) -> RandomGroups {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut accounts = Vec::new();
    let mut groups = Vec::new();
    let mut records = Vec::new();
    for g in 0..n_groups {
        let size = rng.random_range(2..=10);
        let members: Vec<Account> = (0..size)
            .map(|i| {
                let creation_time = rng.random_range(0..40);
                let ban_time = rng
                    .random_bool(0.75)
                    .then(|| creation_time + rng.random_range(1..20));
                Account {
                    account_id: format!("g{g:04}m{i}"),
                    username: format!("user{g}_{i}"),
                    creation_time,
                    ban_time,
                }
            })
            .collect();
        let mut order: Vec<&str> = members.iter().map(|a| a.account_id.as_str()).collect();
        order.shuffle(&mut rng);
        // A chain of small overlapping records spans the group.
        for w in order.windows(2) {
            records.push(SockpuppetRecord::new(w.iter().copied()));
        }
        accounts.extend(members.iter().cloned());
        groups.push(members);
    }
    records.shuffle(&mut rng);
    let corpus = Corpus::new(accounts, Vec::new(), records.clone()).unwrap();
    RandomGroups {
        corpus,
        groups,
        records,
    }
}

/// Exhaustive check of both directions over every ordered pair.
pub fn brute_force_pairs(group: &[Account]) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for u in group {
        for v in group {
            if u.account_id == v.account_id {
                continue;
            }
            let Some(u_ban) = u.ban_time else { continue };
            if u_ban >= v.creation_time {
                continue;
            }
            let mut pred: Option<&Account> = None;
            for w in group {
                if let Some(b) = w.ban_time {
                    if b < v.creation_time {
                        let better = match pred {
                            None => true,
                            Some(p) => {
                                let pb = p.ban_time.unwrap();
                                b > pb || (b == pb && w.account_id < p.account_id)
                            }
                        };
                        if better {
                            pred = Some(w);
                        }
                    }
                }
            }
            let mut succ: Option<&Account> = None;
            for w in group {
                if w.creation_time > u_ban {
                    let better = match succ {
                        None => true,
                        Some(s) => {
                            w.creation_time < s.creation_time
                                || (w.creation_time == s.creation_time && w.account_id < s.account_id)
                        }
                    };
                    if better {
                        succ = Some(w);
                    }
                }
            }
            if pred.map(|p| &p.account_id) == Some(&u.account_id) && succ.map(|s| &s.account_id) == Some(&v.account_id)
            {
                out.insert((u.account_id.clone(), v.account_id.clone()));
            }
        }
    }
    out
}

pub fn dfs_components(n: usize, edges: &[(usize, usize)], present: &BTreeSet<usize>) -> BTreeSet<BTreeSet<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut out = BTreeSet::new();
    for &start in present {
        if seen[start] {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(v) = stack.pop() {
            comp.insert(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        out.insert(comp);
    }
    out
}

/// Extraction on `n_groups` random groups vs. exhaustive enumeration.
/// Returns the number of pairs and the extraction time in seconds.
pub fn check_extraction(seed: u64, n_groups: usize) -> Result<(usize, f64), String> {
    let started = std::time::Instant::now();
    let data = random_groups(seed, n_groups);
    let groups = merge_groups(&data.records, &data.corpus);
    let pairs = extract_evasion_pairs(&groups, &data.corpus);
    let elapsed = started.elapsed().as_secs_f64();
    let expected: BTreeSet<(String, String)> = data.groups.iter().flat_map(|g| brute_force_pairs(g)).collect();
    let got: BTreeSet<(String, String)> = pairs.iter().map(|p| (p.parent_id.clone(), p.child_id.clone())).collect();
    if got.len() != pairs.len() {
        return Err("duplicate pairs emitted".into());
    }
    if got != expected {
        let missing = expected.difference(&got).count();
        let extra = got.difference(&expected).count();
        return Err(format!("{missing} pairs missing, {extra} unexpected"));
    }
    Ok((pairs.len(), elapsed))
}

/// Union-find and record merging vs. depth-first search on random graphs.
pub fn check_components(seed: u64, graphs: usize) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in 0..graphs {
        let n = rng.random_range(1..=50);
        let m = rng.random_range(0..=n * 2);
        let edges: Vec<(usize, usize)> = (0..m).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
        let all: BTreeSet<usize> = (0..n).collect();

        let mut uf = UnionFind::new(n);
        for &(a, b) in &edges {
            uf.union(a, b);
        }
        let got: BTreeSet<BTreeSet<usize>> = uf.components().into_iter().map(|c| c.into_iter().collect()).collect();
        if got != dfs_components(n, &edges, &all) {
            return Err(format!("graph {g}: union-find components differ"));
        }

        // Same graph through the record-merging front end; only vertices
        // that appear in some record take part.
        let id = |v: usize| format!("v{v:02}");
        let accounts: Vec<Account> = (0..n)
            .map(|v| Account {
                account_id: id(v),
                username: id(v),
                creation_time: v as i64,
                ban_time: None,
            })
            .collect();
        let records: Vec<SockpuppetRecord> = edges
            .iter()
            .filter(|(a, b)| a != b)
            .map(|&(a, b)| SockpuppetRecord::new([id(a), id(b)]))
            .collect();
        let touched: BTreeSet<usize> = edges.iter().filter(|(a, b)| a != b).flat_map(|&(a, b)| [a, b]).collect();
        let corpus = Corpus::new(accounts, Vec::new(), records.clone()).unwrap();
        let merged: BTreeSet<BTreeSet<usize>> = merge_groups(&records, &corpus)
            .into_iter()
            .map(|g| g.member_ids.iter().map(|s| s[1..].parse().unwrap()).collect())
            .collect();
        if merged != dfs_components(n, &edges, &touched) {
            return Err(format!("graph {g}: merged groups differ"));
        }
    }
    Ok(())
}
