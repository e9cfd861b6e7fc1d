//! Ranks candidate parents for each held-out child account.

use ban_evasion::corpus::{generate_synthetic, SynthConfig};
use ban_evasion::eval::{run_ranking, HarnessConfig};
use ban_evasion::features::FeatureExtractor;
use ban_evasion::pipeline::{extract_pairs, match_samples, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let generated = generate_synthetic(&SynthConfig {
        n_groups: 250,
        seed: 21,
        ..SynthConfig::default()
    })?;
    let corpus = &generated.corpus;
    let config = PipelineConfig::default();
    let pairs = extract_pairs(corpus);
    let matched = match_samples(corpus, &pairs, &config)?;

    let extractor = FeatureExtractor::new(corpus, config.task3_features(), config.threads)?;
    let outcome = run_ranking(&matched.candidates, corpus, &extractor, &HarnessConfig::new(0.9)?)?;
    let r = &outcome.report;
    println!(
        "MRR {:.3}  R@1 {:.3}  R@3 {:.3}  R@5 {:.3}  over {} children ({:.1} candidates each)",
        r.mrr, r.recall_at_1, r.recall_at_3, r.recall_at_5, r.test_children, r.mean_candidates
    );
    println!("model uses {}", r.selected_features.join(", "));

    for list in outcome.rankings.iter().take(3) {
        println!("\nchild {} (true parent at rank {})", list.child_id, list.rank_of_true_parent);
        for (id, score) in list.candidates.iter().take(3) {
            println!("  {id:<10} {score:.4}");
        }
    }
    Ok(())
}
