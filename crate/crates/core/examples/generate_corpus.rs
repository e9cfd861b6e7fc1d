//! Generates a synthetic corpus and writes it as JSONL.
//!
//! cargo run --example generate_corpus -- [out_dir] [seed] [groups]

use std::path::PathBuf;

use ban_evasion::corpus::{generate_synthetic, write_corpus, write_pairs, CorpusFiles, SynthConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "synthetic_corpus".into()));
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    let groups = args.next().map(|s| s.parse()).transpose()?.unwrap_or(300);

    let config = SynthConfig {
        seed,
        n_groups: groups,
        ..SynthConfig::default()
    };
    let generated = generate_synthetic(&config)?;

    std::fs::create_dir_all(&out)?;
    write_corpus(&generated.corpus, &CorpusFiles::in_dir(&out))?;
    write_pairs(&out.join("truth_pairs.jsonl"), &generated.truth_pairs)?;

    let (accounts, revisions, records) = generated.corpus.counts();
    let banned = generated.corpus.accounts().iter().filter(|a| a.is_banned()).count();
    println!("wrote {}", out.display());
    println!("  accounts   {accounts} ({banned} banned)");
    println!("  revisions  {revisions}");
    println!("  records    {records}");
    println!("  planted    {} evasion pairs", generated.truth_pairs.len());
    Ok(())
}
