//! Builds the matched negative sets for the three detection tasks and the
//! candidate parent lists used for attribution.

use ban_evasion::corpus::{generate_synthetic, SynthConfig};
use ban_evasion::pipeline::{extract_pairs, match_samples, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let generated = generate_synthetic(&SynthConfig {
        n_groups: 200,
        ..SynthConfig::default()
    })?;
    let corpus = &generated.corpus;
    let pairs = extract_pairs(corpus);
    let matched = match_samples(corpus, &pairs, &PipelineConfig::default())?;

    let tally = |labels: Vec<bool>| {
        let pos = labels.iter().filter(|p| **p).count();
        (pos, labels.len() - pos)
    };
    let (p1, n1) = tally(matched.task1.iter().map(|s| s.label.is_positive()).collect());
    let (p2, n2) = tally(matched.task2.iter().map(|s| s.label.is_positive()).collect());
    let (p3, n3) = tally(matched.task3.iter().map(|s| s.label.is_positive()).collect());
    println!("prediction         {p1:>5} parents   {n1:>6} malicious controls");
    println!("early detection    {p2:>5} children  {n2:>6} benign controls");
    println!("ban-time detection {p3:>5} children  {n3:>6} malicious controls");

    let sizes: Vec<usize> = matched.candidates.iter().map(|c| c.candidate_parent_ids.len()).collect();
    let mean = sizes.iter().sum::<usize>() as f64 / sizes.len().max(1) as f64;
    println!("{} candidate sets, mean size {mean:.1}", sizes.len());
    if let Some(set) = matched.candidates.first() {
        println!(
            "  child {} true parent {} first candidates {:?}",
            set.child_id,
            set.true_parent_id,
            &set.candidate_parent_ids[..set.candidate_parent_ids.len().min(4)]
        );
    }
    Ok(())
}
