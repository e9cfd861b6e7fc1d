//! Descriptive comparison of evaders against matched controls, plus the
//! TSV tables behind it.

use ban_evasion::corpus::{generate_synthetic, SynthConfig};
use ban_evasion::pipeline::{extract_pairs, match_samples, run_analysis, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let generated = generate_synthetic(&SynthConfig {
        n_groups: 300,
        ..SynthConfig::default()
    })?;
    let corpus = &generated.corpus;
    let config = PipelineConfig::default();
    let pairs = extract_pairs(corpus);
    let matched = match_samples(corpus, &pairs, &config)?;
    let (report, tables) = run_analysis(corpus, &pairs, &matched, &config)?;

    print!("{}", report.summary());
    for (name, body) in &tables {
        println!("{name}: {} rows", body.lines().count().saturating_sub(1));
    }
    Ok(())
}
