//! Trains and evaluates the three detection tasks on a synthetic corpus:
//! predicting which banned accounts will evade, spotting a child from its
//! first few edits, and recognising it at ban time.
//!
//! cargo run --release --example detection_tasks -- [seed] [groups]

use ban_evasion::corpus::{generate_synthetic, SynthConfig};
use ban_evasion::pipeline::{extract_pairs, match_samples, run_detection, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(7);
    let groups = args.next().map(|s| s.parse()).transpose()?.unwrap_or(300);

    let generated = generate_synthetic(&SynthConfig {
        seed,
        n_groups: groups,
        ..SynthConfig::default()
    })?;
    let corpus = &generated.corpus;
    let config = PipelineConfig::default();
    let pairs = extract_pairs(corpus);
    let matched = match_samples(corpus, &pairs, &config)?;
    let detection = run_detection(corpus, &pairs, &matched, &config)?;

    for report in &detection.report.tasks {
        println!(
            "{:<18} AUC {:.3}  test {}+/{}-  features {}",
            report.task.name(),
            report.auc,
            report.counts.test_positive,
            report.counts.test_negative,
            report.selected_features.join(",")
        );
        if let (Some(s), Some(u)) = (report.fragment_auc_successful, report.fragment_auc_unsuccessful) {
            println!("{:<18} successful evaders {s:.3}, unsuccessful {u:.3}", "");
        }
    }
    Ok(())
}
