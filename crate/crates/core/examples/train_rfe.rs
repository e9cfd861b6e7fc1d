//! Logistic regression with recursive feature elimination on a toy problem
//! where only two of six features carry signal.

use ban_evasion::eval::roc_auc;
use ban_evasion::features::FeatureMatrix;
use ban_evasion::model::{rfe, train_matrix, LogisticModel, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let names: Vec<String> = ["signal_a", "signal_b", "noise_1", "noise_2", "noise_3", "noise_4"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let n = 600;
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = if rng.random_bool(0.3) { 1.0 } else { 0.0 };
        let row: Vec<f64> = (0..names.len())
            .map(|j| {
                let shift = match j {
                    0 => 1.5 * y,
                    1 => -1.0 * y,
                    _ => 0.0,
                };
                shift + rng.random_range(-1.0..1.0)
            })
            .collect();
        rows.push(row);
        labels.push(y);
    }
    let matrix = FeatureMatrix {
        names: names.clone(),
        sample_ids: (0..n).map(|i| format!("a{i}:m{i}")).collect(),
        labels,
        rows,
    };

    let config = TrainConfig::default();
    let full = train_matrix(&matrix, &config)?;
    println!("all features:");
    for (name, w) in full.feature_names.iter().zip(&full.weights) {
        println!("  {name:<10} {w:+.4}");
    }

    let result = rfe(&matrix, &config, 0.2)?;
    println!("\nelimination path (validation AUC):");
    for step in &result.history {
        println!("  {:.4}  {}", step.validation_auc, step.features.join(","));
    }
    println!("selected: {:?}", result.selected);

    let scores = result.model.predict_matrix(&matrix)?;
    println!("in-sample AUC {:.4}", roc_auc(&scores, &matrix.labels)?);

    let restored = LogisticModel::from_json(&result.model.to_json())?;
    assert_eq!(restored, result.model);
    println!("model round-trips through JSON");
    Ok(())
}
