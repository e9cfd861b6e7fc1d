//! Temporal splits, leakage removal, ranking metrics and task harnesses.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::features::{FeatureError, FeatureExtractor, FeatureMatrix};
use crate::matching::{CandidateSet, Label, LabeledAccountSample, LabeledPairSample, Task};
use crate::model::{rfe, train_matrix, LogisticModel, ModelError, TrainConfig};
use crate::time::Timestamp;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("empty input")]
    EmptyInput,
    #[error("scores contain a single class")]
    SingleClassInput,
    #[error("score and label lengths differ ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("train fraction must lie in (0, 1), got {0}")]
    InvalidFraction(f64),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("unknown account {0:?}")]
    UnknownAccount(String),
    #[error("true parent {0:?} not among candidates")]
    TrueParentMissing(String),
    #[error("negative accounts shared by train and test: {0:?}")]
    Leakage(Vec<String>),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OrderKey {
    ParentCreationTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub order_key: OrderKey,
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self, EvalError> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(EvalError::InvalidFraction(train_fraction));
        }
        Ok(Self {
            train_fraction,
            order_key: OrderKey::ParentCreationTime,
        })
    }
}

/// A labeled sample attached to a parent account.
pub trait Anchored {
    fn anchor_id(&self) -> &str;
    /// The account whose presence in both splits would leak.
    fn member_id(&self) -> &str;
    fn is_positive(&self) -> bool;
}

impl Anchored for LabeledAccountSample {
    fn anchor_id(&self) -> &str {
        self.anchor_parent_id.as_deref().unwrap_or(&self.account_id)
    }
    fn member_id(&self) -> &str {
        &self.account_id
    }
    fn is_positive(&self) -> bool {
        self.label.is_positive()
    }
}

impl Anchored for LabeledPairSample {
    fn anchor_id(&self) -> &str {
        &self.parent_id
    }
    fn member_id(&self) -> &str {
        &self.other_id
    }
    fn is_positive(&self) -> bool {
        self.label.is_positive()
    }
}

impl Anchored for CandidateSet {
    fn anchor_id(&self) -> &str {
        &self.true_parent_id
    }
    fn member_id(&self) -> &str {
        &self.child_id
    }
    fn is_positive(&self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitBoundary {
    pub train_anchors: usize,
    pub test_anchors: usize,
    pub last_train_creation: Option<Timestamp>,
    pub first_test_creation: Option<Timestamp>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub test: Vec<T>,
    pub boundary: SplitBoundary,
}

/// Orders the parents of the positive samples by `(creation_time, id)` and
/// puts the first `floor(fraction * n)` of them, with every sample anchored
/// to them, in train. Both halves come back in anchor order, so the tail of
/// `train` is its most recent part.
pub fn temporal_split<T: Anchored + Clone>(
    samples: &[T],
    corpus: &Corpus,
    spec: &SplitSpec,
) -> Result<Split<T>, EvalError> {
    SplitSpec::new(spec.train_fraction)?;
    let mut anchors: Vec<(Timestamp, &str)> = Vec::new();
    let mut seen = HashSet::new();
    for s in samples.iter().filter(|s| s.is_positive()) {
        let id = s.anchor_id();
        if seen.insert(id) {
            let acct = corpus
                .account(id)
                .ok_or_else(|| EvalError::UnknownAccount(id.to_string()))?;
            anchors.push((acct.creation_time, id));
        }
    }
    if anchors.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    anchors.sort();
    let n_train = (spec.train_fraction * anchors.len() as f64).floor() as usize;
    let position: BTreeMap<&str, usize> = anchors.iter().enumerate().map(|(i, (_, id))| (*id, i)).collect();

    let mut indexed: Vec<(usize, usize)> = samples
        .iter()
        .enumerate()
        .filter_map(|(i, s)| position.get(s.anchor_id()).map(|&p| (p, i)))
        .collect();
    indexed.sort();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (p, i) in indexed {
        if p < n_train {
            train.push(samples[i].clone());
        } else {
            test.push(samples[i].clone());
        }
    }
    Ok(Split {
        train,
        test,
        boundary: SplitBoundary {
            train_anchors: n_train,
            test_anchors: anchors.len() - n_train,
            last_train_creation: n_train.checked_sub(1).map(|i| anchors[i].0),
            first_test_creation: anchors.get(n_train).map(|a| a.0),
        },
    })
}

/// A feature-matrix row seen as a sample; its id is `anchor:member`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixRow {
    pub anchor: String,
    pub member: String,
    pub positive: bool,
    pub index: usize,
}

impl Anchored for MatrixRow {
    fn anchor_id(&self) -> &str {
        &self.anchor
    }
    fn member_id(&self) -> &str {
        &self.member
    }
    fn is_positive(&self) -> bool {
        self.positive
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSplit {
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
    pub boundary: SplitBoundary,
    pub deduped_negatives: usize,
}

/// Temporal split plus negative dedupe of a feature matrix whose sample ids
/// have the form `anchor:member`.
pub fn split_matrix(matrix: &FeatureMatrix, corpus: &Corpus, spec: &SplitSpec) -> Result<MatrixSplit, EvalError> {
    let rows = matrix
        .sample_ids
        .iter()
        .zip(&matrix.labels)
        .enumerate()
        .map(|(index, (id, label))| {
            let (anchor, member) = id
                .split_once(':')
                .ok_or_else(|| EvalError::UnknownAccount(id.clone()))?;
            Ok(MatrixRow {
                anchor: anchor.to_string(),
                member: member.to_string(),
                positive: *label > 0.5,
                index,
            })
        })
        .collect::<Result<Vec<_>, EvalError>>()?;
    let Split {
        mut train,
        test,
        boundary,
    } = temporal_split(&rows, corpus, spec)?;
    let deduped = dedupe_negatives(&mut train, &test);
    let idx = |v: &[MatrixRow]| v.iter().map(|r| r.index).collect::<Vec<_>>();
    Ok(MatrixSplit {
        train: matrix.subset(&idx(&train)),
        test: matrix.subset(&idx(&test)),
        boundary,
        deduped_negatives: deduped,
    })
}

/// Drops every train negative whose member account is also a test negative.
/// Returns the number of samples removed.
pub fn dedupe_negatives<T: Anchored>(train: &mut Vec<T>, test: &[T]) -> usize {
    let test_neg: HashSet<&str> = test.iter().filter(|s| !s.is_positive()).map(|s| s.member_id()).collect();
    let before = train.len();
    train.retain(|s| s.is_positive() || !test_neg.contains(s.member_id()));
    before - train.len()
}

/// Negative member ids present in both splits, sorted.
pub fn negative_overlap<T: Anchored>(train: &[T], test: &[T]) -> Vec<String> {
    let test_neg: BTreeSet<&str> = test.iter().filter(|s| !s.is_positive()).map(|s| s.member_id()).collect();
    let train_neg: BTreeSet<&str> = train.iter().filter(|s| !s.is_positive()).map(|s| s.member_id()).collect();
    train_neg.intersection(&test_neg).map(|s| s.to_string()).collect()
}

/// Mann-Whitney AUC; tied scores share their average rank.
pub fn roc_auc(scores: &[f64], labels: &[f64]) -> Result<f64, EvalError> {
    if scores.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y > 0.5).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(EvalError::SingleClassInput);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Twice the rank sum keeps every quantity an integer.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg2 = (i + 1 + j + 1) as u128;
        let pos_in_block = order[i..=j].iter().filter(|&&k| labels[k] > 0.5).count() as u128;
        rank_sum2 += avg2 * pos_in_block;
        i = j + 1;
    }
    let n_pos = n_pos as u128;
    let u2 = rank_sum2 - n_pos * (n_pos + 1);
    Ok(u2 as f64 / (2 * n_pos * n_neg as u128) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedList {
    pub child_id: String,
    /// `(candidate id, score)`, best first.
    pub candidates: Vec<(String, f64)>,
    /// 1-based.
    pub rank_of_true_parent: usize,
}

impl RankedList {
    /// Sorts by descending score, ties by candidate id.
    pub fn from_scores(
        child_id: &str,
        true_parent_id: &str,
        mut candidates: Vec<(String, f64)>,
    ) -> Result<Self, EvalError> {
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let rank = candidates
            .iter()
            .position(|(id, _)| id == true_parent_id)
            .ok_or_else(|| EvalError::TrueParentMissing(true_parent_id.to_string()))?
            + 1;
        Ok(Self {
            child_id: child_id.to_string(),
            candidates,
            rank_of_true_parent: rank,
        })
    }
}

/// Scores every `(candidate, child)` pair with `model` and ranks the candidates.
pub fn rank_candidates(
    model: &LogisticModel,
    extractor: &FeatureExtractor<'_>,
    set: &CandidateSet,
) -> Result<RankedList, EvalError> {
    let pairs: Vec<(&str, &str)> = set
        .candidate_parent_ids
        .iter()
        .map(|p| (p.as_str(), set.child_id.as_str()))
        .collect();
    let matrix = extractor.score_pairs(&pairs)?;
    let scores = model.predict_matrix(&matrix)?;
    let scored = set.candidate_parent_ids.iter().cloned().zip(scores).collect();
    RankedList::from_scores(&set.child_id, &set.true_parent_id, scored)
}

pub fn mrr(rankings: &[RankedList]) -> Result<f64, EvalError> {
    if rankings.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let sum: f64 = rankings.iter().map(|r| 1.0 / r.rank_of_true_parent as f64).sum();
    Ok(sum / rankings.len() as f64)
}

pub fn recall_at_k(rankings: &[RankedList], k: usize) -> Result<f64, EvalError> {
    if k == 0 {
        return Err(EvalError::InvalidK);
    }
    if rankings.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let hits = rankings.iter().filter(|r| r.rank_of_true_parent <= k).count();
    Ok(hits as f64 / rankings.len() as f64)
}

#[derive(Debug, PartialEq)]
pub struct FragmentedAuc {
    pub successful: Result<f64, EvalError>,
    pub unsuccessful: Result<f64, EvalError>,
}

/// AUC of successful positives vs. all negatives, and of unsuccessful
/// positives vs. all negatives. `success[i]` is read only for positives;
/// positives with `None` belong to neither fragment.
pub fn fragmented_auc(scores: &[f64], labels: &[f64], success: &[Option<bool>]) -> FragmentedAuc {
    let fragment = |want: bool| {
        if scores.len() != labels.len() || success.len() != labels.len() {
            return Err(EvalError::LengthMismatch {
                scores: scores.len(),
                labels: labels.len(),
            });
        }
        let (s, l): (Vec<f64>, Vec<f64>) = scores
            .iter()
            .zip(labels)
            .zip(success)
            .filter(|((_, &y), f)| y < 0.5 || **f == Some(want))
            .map(|((s, y), _)| (*s, *y))
            .unzip();
        roc_auc(&s, &l)
    };
    FragmentedAuc {
        successful: fragment(true),
        unsuccessful: fragment(false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub train_positive: usize,
    pub train_negative: usize,
    pub test_positive: usize,
    pub test_negative: usize,
}

impl SampleCounts {
    fn of<T: Anchored>(train: &[T], test: &[T]) -> Self {
        let pos = |v: &[T]| v.iter().filter(|s| s.is_positive()).count();
        Self {
            train_positive: pos(train),
            train_negative: train.len() - pos(train),
            test_positive: pos(test),
            test_negative: test.len() - pos(test),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task: Task,
    pub auc: f64,
    pub fragment_auc_successful: Option<f64>,
    pub fragment_auc_unsuccessful: Option<f64>,
    pub counts: SampleCounts,
    pub deduped_negatives: usize,
    pub boundary: SplitBoundary,
    pub selected_features: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub report: TaskReport,
    pub model: LogisticModel,
    pub test_matrix: FeatureMatrix,
    pub test_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnessConfig {
    pub split: SplitSpec,
    pub train: TrainConfig,
    /// Holdout fraction for feature elimination; `None` trains on every feature.
    pub rfe_validation_fraction: Option<f64>,
}

impl HarnessConfig {
    pub fn new(train_fraction: f64) -> Result<Self, EvalError> {
        Ok(Self {
            split: SplitSpec::new(train_fraction)?,
            train: TrainConfig::default(),
            rfe_validation_fraction: Some(0.1),
        })
    }
}

/// Trains with feature elimination when possible. A holdout that lacks one
/// class makes elimination impossible; the model then uses every feature.
pub fn fit_model(
    matrix: &FeatureMatrix,
    config: &TrainConfig,
    rfe_fraction: Option<f64>,
) -> Result<(LogisticModel, Vec<String>), EvalError> {
    if let Some(f) = rfe_fraction.filter(|_| matrix.names.len() >= 2) {
        match rfe(matrix, config, f) {
            Ok(r) => return Ok((r.model, r.selected)),
            Err(ModelError::SingleClassInput) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let model = train_matrix(matrix, config)?;
    let names = model.feature_names.clone();
    Ok((model, names))
}

/// Split, dedupe, featurize, fit and score one detection task.
///
/// `success_of` supplies the success flag of a test positive for the
/// fragmented evaluation; pass `|_| None` to skip it.
pub fn run_task<T, F, S>(
    task: Task,
    samples: &[T],
    corpus: &Corpus,
    config: &HarnessConfig,
    featurize: F,
    success_of: S,
) -> Result<TaskOutcome, EvalError>
where
    T: Anchored + Clone,
    F: Fn(&[T]) -> Result<FeatureMatrix, FeatureError>,
    S: Fn(&T) -> Option<bool>,
{
    let Split {
        mut train,
        test,
        boundary,
    } = temporal_split(samples, corpus, &config.split)?;
    let deduped = dedupe_negatives(&mut train, &test);
    let overlap = negative_overlap(&train, &test);
    if !overlap.is_empty() {
        return Err(EvalError::Leakage(overlap));
    }
    let counts = SampleCounts::of(&train, &test);
    let train_m = featurize(&train)?;
    let test_m = featurize(&test)?;
    let (model, selected) = fit_model(&train_m, &config.train, config.rfe_validation_fraction)?;
    let scores = model.predict_matrix(&test_m)?;
    let auc = roc_auc(&scores, &test_m.labels)?;
    let flags: Vec<Option<bool>> = test
        .iter()
        .map(|s| if s.is_positive() { success_of(s) } else { None })
        .collect();
    let (frag_s, frag_u) = if flags.iter().any(Option::is_some) {
        let f = fragmented_auc(&scores, &test_m.labels, &flags);
        (f.successful.ok(), f.unsuccessful.ok())
    } else {
        (None, None)
    };
    Ok(TaskOutcome {
        report: TaskReport {
            task,
            auc,
            fragment_auc_successful: frag_s,
            fragment_auc_unsuccessful: frag_u,
            counts,
            deduped_negatives: deduped,
            boundary,
            selected_features: selected,
        },
        model,
        test_matrix: test_m,
        test_scores: scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub mrr: f64,
    pub recall_at_1: f64,
    pub recall_at_3: f64,
    pub recall_at_5: f64,
    pub train_children: usize,
    pub test_children: usize,
    pub train_pairs: usize,
    pub mean_candidates: f64,
    pub boundary: SplitBoundary,
    pub selected_features: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RankingOutcome {
    pub report: RankingReport,
    pub model: LogisticModel,
    pub rankings: Vec<RankedList>,
}

/// Candidate-set pairs labeled positive for the true parent.
pub fn candidate_pairs(sets: &[CandidateSet]) -> Vec<LabeledPairSample> {
    sets.iter()
        .flat_map(|s| {
            s.candidate_parent_ids.iter().map(move |p| LabeledPairSample {
                parent_id: p.clone(),
                other_id: s.child_id.clone(),
                label: if *p == s.true_parent_id {
                    Label::Positive
                } else {
                    Label::Negative
                },
                task: Task::Ranking,
            })
        })
        .collect()
}

/// Splits children temporally, trains a pair classifier on the training
/// children's candidate pairs and ranks each test child's candidates.
pub fn run_ranking(
    sets: &[CandidateSet],
    corpus: &Corpus,
    extractor: &FeatureExtractor<'_>,
    config: &HarnessConfig,
) -> Result<RankingOutcome, EvalError> {
    let split = temporal_split(sets, corpus, &config.split)?;
    let train_pairs = candidate_pairs(&split.train);
    let train_m = extractor.pair_matrix(&train_pairs)?;
    let (model, selected) = fit_model(&train_m, &config.train, config.rfe_validation_fraction)?;
    let rankings = split
        .test
        .iter()
        .map(|s| rank_candidates(&model, extractor, s))
        .collect::<Result<Vec<_>, _>>()?;
    let total: usize = split.test.iter().map(|s| s.candidate_parent_ids.len()).sum();
    Ok(RankingOutcome {
        report: RankingReport {
            mrr: mrr(&rankings)?,
            recall_at_1: recall_at_k(&rankings, 1)?,
            recall_at_3: recall_at_k(&rankings, 3)?,
            recall_at_5: recall_at_k(&rankings, 5)?,
            train_children: split.train.len(),
            test_children: split.test.len(),
            train_pairs: train_pairs.len(),
            mean_candidates: total as f64 / split.test.len().max(1) as f64,
            boundary: split.boundary,
            selected_features: selected,
        },
        model,
        rankings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub tasks: Vec<TaskReport>,
    pub ranking: Option<RankingReport>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn summary(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.3}"));
        let mut out = String::new();
        for t in &self.tasks {
            out.push_str(&format!(
                "{:<18} auc={:.3} successful={} unsuccessful={} train={}+/{}- test={}+/{}- deduped={} features={}\n",
                t.task.name(),
                t.auc,
                opt(t.fragment_auc_successful),
                opt(t.fragment_auc_unsuccessful),
                t.counts.train_positive,
                t.counts.train_negative,
                t.counts.test_positive,
                t.counts.test_negative,
                t.deduped_negatives,
                t.selected_features.len(),
            ));
        }
        if let Some(r) = &self.ranking {
            out.push_str(&format!(
                "{:<18} mrr={:.3} r@1={:.3} r@3={:.3} r@5={:.3} test_children={} mean_candidates={:.1}\n",
                "ranking", r.mrr, r.recall_at_1, r.recall_at_3, r.recall_at_5, r.test_children, r.mean_candidates
            ));
        }
        out
    }
}
