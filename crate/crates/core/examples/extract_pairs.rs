//! Merges sockpuppet records into groups and recovers evasion pairs,
//! then checks them against the generator's ground truth.

use std::collections::BTreeSet;

use ban_evasion::corpus::{generate_synthetic, SynthConfig};
use ban_evasion::pairing::corpus_first_pairs;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(11);
    let generated = generate_synthetic(&SynthConfig {
        seed,
        n_groups: 200,
        ..SynthConfig::default()
    })?;
    let corpus = &generated.corpus;

    let (groups, pairs, first) = corpus_first_pairs(corpus);
    let sizes: Vec<usize> = groups.iter().map(|g| g.member_ids.len()).collect();
    println!(
        "{} groups, sizes {}..={}",
        groups.len(),
        sizes.iter().min().unwrap_or(&0),
        sizes.iter().max().unwrap_or(&0)
    );
    println!("{} evasion pairs, {} first pairs", pairs.len(), first.len());

    let truth: BTreeSet<(&str, &str)> = generated
        .truth_pairs
        .iter()
        .map(|p| (p.parent_id.as_str(), p.child_id.as_str()))
        .collect();
    let found: BTreeSet<(&str, &str)> = pairs
        .iter()
        .map(|p| (p.parent_id.as_str(), p.child_id.as_str()))
        .collect();
    println!(
        "recovered {}/{} planted pairs, {} extra",
        truth.intersection(&found).count(),
        truth.len(),
        found.difference(&truth).count()
    );

    for pair in first.iter().take(5) {
        let parent = corpus.account(&pair.parent_id).unwrap();
        let child = corpus.account(&pair.child_id).unwrap();
        let gap_days = (child.creation_time - parent.ban_time.unwrap()) as f64 / 86_400.0;
        println!(
            "  {} ({}) -> {} ({})  gap {gap_days:.1} d",
            parent.account_id, parent.username, child.account_id, child.username
        );
    }
    Ok(())
}
