//! L2-regularized logistic regression with recursive feature elimination.
//!
//! Features are standardized with training-set statistics; columns with
//! zero spread are only centered. Training minimizes the mean (optionally
//! class-weighted) logistic loss plus `lambda * |w|^2 / 2` by full-batch
//! gradient descent, halving the step whenever a step would increase the
//! loss. The bias is not regularized.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{roc_auc, EvalError};
use crate::features::{FeatureMatrix, FeatureVector};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("training labels contain a single class")]
    SingleClassInput,
    #[error("non-finite feature value at row {row}, column {column}")]
    NonFiniteFeature { row: usize, column: usize },
    #[error("feature {0:?} missing from input vector")]
    FeatureNameMismatch(String),
    #[error("labels must be 0 or 1, got {0}")]
    InvalidLabel(f64),
    #[error("row count {rows} does not match label count {labels}")]
    ShapeMismatch { rows: usize, labels: usize },
    #[error("recursive feature elimination needs at least 2 features")]
    TooFewFeatures,
    #[error("invalid training config: {0}")]
    InvalidConfig(&'static str),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    None,
    InverseFrequency,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub l2_lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
    pub class_weighting: ClassWeighting,
    /// Echoed into the model; training itself is deterministic.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            l2_lambda: 1.0,
            learning_rate: 0.1,
            max_epochs: 2_000,
            tolerance: 1e-8,
            class_weighting: ClassWeighting::InverseFrequency,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), ModelError> {
        if !(self.l2_lambda.is_finite() && self.l2_lambda >= 0.0) {
            return Err(ModelError::InvalidConfig("l2_lambda"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig("learning_rate"));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(ModelError::InvalidConfig("tolerance"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl StandardizationStats {
    pub fn fit(rows: &[Vec<f64>], n_features: usize) -> Self {
        let n = rows.len().max(1) as f64;
        let mut means = vec![0.0; n_features];
        for row in rows {
            for (m, x) in means.iter_mut().zip(row) {
                *m += x;
            }
        }
        for m in &mut means {
            *m /= n;
        }
        let mut stds = vec![0.0; n_features];
        for row in rows {
            for ((s, x), m) in stds.iter_mut().zip(row).zip(&means) {
                *s += (x - m) * (x - m);
            }
        }
        for s in &mut stds {
            *s = (*s / n).sqrt();
        }
        Self { means, stds }
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.means)
            .zip(&self.stds)
            .map(|((x, m), s)| if *s > 0.0 { (x - m) / s } else { x - m })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub feature_names: Vec<String>,
    /// Weights on standardized features.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub stats: StandardizationStats,
    pub config: TrainConfig,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Per-example weights: all ones, or `n / (2 n_class)` so both classes
/// carry equal total weight.
pub fn sample_weights(labels: &[f64], weighting: ClassWeighting) -> Vec<f64> {
    match weighting {
        ClassWeighting::None => vec![1.0; labels.len()],
        ClassWeighting::InverseFrequency => {
            let n = labels.len() as f64;
            let pos = labels.iter().filter(|&&y| y > 0.5).count() as f64;
            let neg = n - pos;
            labels
                .iter()
                .map(|&y| {
                    let count = if y > 0.5 { pos } else { neg };
                    if count > 0.0 {
                        n / (2.0 * count)
                    } else {
                        0.0
                    }
                })
                .collect()
        }
    }
}

/// Objective value and gradient `(d/dw, d/db)` on already-standardized rows.
pub fn loss_and_gradient(
    rows: &[Vec<f64>],
    labels: &[f64],
    sample_weights: &[f64],
    weights: &[f64],
    bias: f64,
    l2_lambda: f64,
) -> (f64, Vec<f64>, f64) {
    let n = rows.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for ((row, &y), &c) in rows.iter().zip(labels).zip(sample_weights) {
        let z: f64 = row.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>() + bias;
        loss += c * (softplus(z) - y * z);
        let residual = c * (sigmoid(z) - y);
        for (g, x) in grad.iter_mut().zip(row) {
            *g += residual * x;
        }
        grad_b += residual;
    }
    let penalty: f64 = weights.iter().map(|w| w * w).sum::<f64>() * l2_lambda / 2.0;
    for (g, w) in grad.iter_mut().zip(weights) {
        *g = *g / n + l2_lambda * w;
    }
    (loss / n + penalty, grad, grad_b / n)
}

fn check_inputs(rows: &[Vec<f64>], labels: &[f64], n_features: usize) -> Result<(), ModelError> {
    if rows.len() != labels.len() {
        return Err(ModelError::ShapeMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n_features {
            return Err(ModelError::ShapeMismatch {
                rows: row.len(),
                labels: n_features,
            });
        }
        if let Some(c) = row.iter().position(|x| !x.is_finite()) {
            return Err(ModelError::NonFiniteFeature { row: r, column: c });
        }
    }
    if let Some(&bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
        return Err(ModelError::InvalidLabel(bad));
    }
    let pos = labels.iter().filter(|&&y| y == 1.0).count();
    if pos == 0 || pos == labels.len() {
        return Err(ModelError::SingleClassInput);
    }
    Ok(())
}

pub fn train(
    feature_names: &[String],
    rows: &[Vec<f64>],
    labels: &[f64],
    config: &TrainConfig,
) -> Result<LogisticModel, ModelError> {
    config.validate()?;
    check_inputs(rows, labels, feature_names.len())?;
    let stats = StandardizationStats::fit(rows, feature_names.len());
    let x: Vec<Vec<f64>> = rows.iter().map(|r| stats.apply(r)).collect();
    let c = sample_weights(labels, config.class_weighting);

    let mut w = vec![0.0; feature_names.len()];
    let mut b = 0.0;
    let mut lr = config.learning_rate;
    let (mut loss, mut grad, mut grad_b) = loss_and_gradient(&x, labels, &c, &w, b, config.l2_lambda);
    for _ in 0..config.max_epochs {
        let cand_w: Vec<f64> = w.iter().zip(&grad).map(|(wi, gi)| wi - lr * gi).collect();
        let cand_b = b - lr * grad_b;
        let (cand_loss, cand_grad, cand_grad_b) =
            loss_and_gradient(&x, labels, &c, &cand_w, cand_b, config.l2_lambda);
        if cand_loss > loss {
            lr /= 2.0;
            if lr < 1e-12 {
                break;
            }
            continue;
        }
        let improvement = loss - cand_loss;
        w = cand_w;
        b = cand_b;
        loss = cand_loss;
        grad = cand_grad;
        grad_b = cand_grad_b;
        if improvement < config.tolerance {
            break;
        }
    }

    Ok(LogisticModel {
        feature_names: feature_names.to_vec(),
        weights: w,
        bias: b,
        stats,
        config: config.clone(),
    })
}

pub fn train_matrix(matrix: &FeatureMatrix, config: &TrainConfig) -> Result<LogisticModel, ModelError> {
    train(&matrix.names, &matrix.rows, &matrix.labels, config)
}

impl LogisticModel {
    /// Probability for a row already in this model's feature order.
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let x = self.stats.apply(row);
        let z: f64 = x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>() + self.bias;
        sigmoid(z)
    }

    /// Scores every row of a matrix, selecting this model's columns by name.
    pub fn predict_matrix(&self, matrix: &FeatureMatrix) -> Result<Vec<f64>, ModelError> {
        let projected = project(matrix, &self.feature_names)?;
        Ok(projected.rows.iter().map(|r| self.predict_row(r)).collect())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        serde_json::from_str(text).map_err(|e| ModelError::Io(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        std::fs::write(path, self.to_json()).map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

fn project(matrix: &FeatureMatrix, names: &[String]) -> Result<FeatureMatrix, ModelError> {
    if matrix.names == names {
        return Ok(matrix.clone());
    }
    if let Some(missing) = names.iter().find(|n| !matrix.names.contains(n)) {
        return Err(ModelError::FeatureNameMismatch(missing.clone()));
    }
    Ok(matrix.select(names).expect("all names present"))
}

/// `sigmoid(w . standardize(x) + b)`, looking features up by name.
pub fn predict_proba(model: &LogisticModel, x: &FeatureVector) -> Result<f64, ModelError> {
    if x.names == model.feature_names {
        return Ok(model.predict_row(&x.values));
    }
    let row = model
        .feature_names
        .iter()
        .map(|n| x.get(n).ok_or_else(|| ModelError::FeatureNameMismatch(n.clone())))
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(model.predict_row(&row))
}

/// One elimination round: the active features and their validation AUC.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeStep {
    pub features: Vec<String>,
    pub validation_auc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeResult {
    pub selected: Vec<String>,
    /// Retrained on every training row using only `selected`.
    pub model: LogisticModel,
    pub history: Vec<RfeStep>,
}

impl From<EvalError> for ModelError {
    fn from(_: EvalError) -> Self {
        ModelError::SingleClassInput
    }
}

/// Recursive feature elimination with a temporal validation holdout.
///
/// Rows must be in temporal order; the last `validation_fraction` of them
/// is held out. Each round trains on the rest, records validation AUC and
/// drops the feature with the smallest absolute standardized weight (ties
/// drop the later feature). The subset with the best validation AUC wins,
/// ties going to the smaller subset.
pub fn rfe(
    matrix: &FeatureMatrix,
    config: &TrainConfig,
    validation_fraction: f64,
) -> Result<RfeResult, ModelError> {
    if matrix.names.len() < 2 {
        return Err(ModelError::TooFewFeatures);
    }
    if !(validation_fraction > 0.0 && validation_fraction < 1.0) {
        return Err(ModelError::InvalidConfig("validation_fraction"));
    }
    check_inputs(&matrix.rows, &matrix.labels, matrix.names.len())?;
    let n = matrix.len();
    let n_val = ((n as f64 * validation_fraction).round() as usize).clamp(1, n - 1);
    let fit_rows: Vec<usize> = (0..n - n_val).collect();
    let val_rows: Vec<usize> = (n - n_val..n).collect();
    let fit = matrix.subset(&fit_rows);
    let val = matrix.subset(&val_rows);

    let mut active = matrix.names.clone();
    let mut history = Vec::new();
    loop {
        let fit_m = fit.select(&active).expect("active names exist");
        let model = train_matrix(&fit_m, config)?;
        let scores = model.predict_matrix(&val)?;
        let auc = roc_auc(&scores, &val.labels)?;
        history.push(RfeStep {
            features: active.clone(),
            validation_auc: auc,
        });
        if active.len() == 1 {
            break;
        }
        let mut drop = 0;
        for (i, w) in model.weights.iter().enumerate() {
            if w.abs() <= model.weights[drop].abs() {
                drop = i;
            }
        }
        active.remove(drop);
    }

    let best = history
        .iter()
        .max_by(|a, b| {
            a.validation_auc
                .total_cmp(&b.validation_auc)
                .then(b.features.len().cmp(&a.features.len()))
        })
        .expect("at least one round");
    let selected = best.features.clone();
    let model = train_matrix(&matrix.select(&selected).expect("names exist"), config)?;
    Ok(RfeResult {
        selected,
        model,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn separable_one_dimensional() {
        let rows = vec![vec![1.0], vec![1.0], vec![-1.0], vec![-1.0]];
        let labels = vec![1.0, 1.0, 0.0, 0.0];
        let config = TrainConfig {
            l2_lambda: 0.0,
            ..TrainConfig::default()
        };
        let model = train(&names(1), &rows, &labels, &config).unwrap();
        assert!(model.weights[0] > 0.0);
        let acc = rows
            .iter()
            .zip(&labels)
            .filter(|(r, &y)| (model.predict_row(r) > 0.5) == (y == 1.0))
            .count();
        assert_eq!(acc, 4);
    }

    #[test]
    fn heavy_regularization_shrinks_to_prior() {
        let rows = vec![vec![1.0], vec![0.5], vec![-1.0], vec![-0.2]];
        let labels = vec![1.0, 1.0, 0.0, 0.0];
        let config = TrainConfig {
            l2_lambda: 1e6,
            class_weighting: ClassWeighting::None,
            ..TrainConfig::default()
        };
        let model = train(&names(1), &rows, &labels, &config).unwrap();
        assert!(model.weights[0].abs() < 1e-5);
        for r in &rows {
            assert!((model.predict_row(r) - 0.5).abs() < 1e-3);
        }
    }

    #[test]
    fn zero_model_predicts_half() {
        let model = LogisticModel {
            feature_names: names(2),
            weights: vec![0.0, 0.0],
            bias: 0.0,
            stats: StandardizationStats {
                means: vec![0.0, 0.0],
                stds: vec![1.0, 1.0],
            },
            config: TrainConfig::default(),
        };
        let x = FeatureVector {
            names: names(2),
            values: vec![3.0, -7.0],
        };
        assert_eq!(predict_proba(&model, &x).unwrap(), 0.5);
    }

    #[test]
    fn hand_set_weight() {
        let model = LogisticModel {
            feature_names: names(1),
            weights: vec![1.0],
            bias: 0.0,
            stats: StandardizationStats {
                means: vec![0.0],
                stds: vec![1.0],
            },
            config: TrainConfig::default(),
        };
        let x = FeatureVector {
            names: names(1),
            values: vec![2.0],
        };
        let expected = 1.0 / (1.0 + (-2.0f64).exp());
        assert!((predict_proba(&model, &x).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.880_797_077_977_882_3).abs() < 1e-15);
    }

    #[test]
    fn bias_limit_is_monotone() {
        let mut prev = 0.0;
        for b in [0.0, 1.0, 5.0, 20.0, 50.0] {
            let p = sigmoid(b);
            assert!(p > prev || p == 1.0);
            prev = p;
        }
        assert!(sigmoid(50.0) > 1.0 - 1e-15);
    }

    #[test]
    fn predict_by_name_and_mismatch() {
        let model = LogisticModel {
            feature_names: vec!["b".into()],
            weights: vec![1.0],
            bias: 0.0,
            stats: StandardizationStats {
                means: vec![0.0],
                stds: vec![1.0],
            },
            config: TrainConfig::default(),
        };
        let x = FeatureVector {
            names: vec!["a".into(), "b".into()],
            values: vec![9.0, 0.0],
        };
        assert_eq!(predict_proba(&model, &x).unwrap(), 0.5);
        let y = FeatureVector {
            names: vec!["a".into()],
            values: vec![1.0],
        };
        assert_eq!(
            predict_proba(&model, &y),
            Err(ModelError::FeatureNameMismatch("b".into()))
        );
    }

    #[test]
    fn input_errors() {
        let config = TrainConfig::default();
        assert_eq!(
            train(&names(1), &[vec![1.0], vec![2.0]], &[1.0, 1.0], &config),
            Err(ModelError::SingleClassInput)
        );
        assert_eq!(
            train(&names(1), &[vec![f64::NAN], vec![2.0]], &[1.0, 0.0], &config),
            Err(ModelError::NonFiniteFeature { row: 0, column: 0 })
        );
    }

    #[test]
    fn constant_column_is_centered_only() {
        let stats = StandardizationStats::fit(&[vec![3.0, 1.0], vec![3.0, 3.0]], 2);
        assert_eq!(stats.stds[0], 0.0);
        assert_eq!(stats.apply(&[3.0, 2.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn json_round_trip_is_byte_stable() {
        let rows = vec![vec![1.0, 0.3], vec![0.2, 1.0], vec![-1.0, 0.1], vec![-0.4, -2.0]];
        let labels = vec![1.0, 1.0, 0.0, 0.0];
        let a = train(&names(2), &rows, &labels, &TrainConfig::default()).unwrap();
        let b = train(&names(2), &rows, &labels, &TrainConfig::default()).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        assert_eq!(LogisticModel::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn rfe_needs_two_features() {
        let m = FeatureMatrix {
            names: names(1),
            sample_ids: vec!["a".into(), "b".into()],
            labels: vec![0.0, 1.0],
            rows: vec![vec![0.0], vec![1.0]],
        };
        assert_eq!(rfe(&m, &TrainConfig::default(), 0.1), Err(ModelError::TooFewFeatures));
    }
}
