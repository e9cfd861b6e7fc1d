//! End-to-end orchestration: pairs, matching, the three detection tasks,
//! parent ranking and characterization, plus writing every artifact.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{
    characterize, AnalysisError, classify_success, CharacterizationReport, CharacterizeConfig, Success, Tables,
};
use crate::corpus::{generate_synthetic, write_corpus, write_pairs, Corpus, CorpusError, CorpusFiles, PairRecord, SynthConfig};
use crate::eval::{run_ranking, run_task, EvalError, EvaluationReport, HarnessConfig, RankedList, SplitSpec};
use crate::features::{FeatureConfig, FeatureError, FeatureExtractor};
use crate::jsonl;
use crate::matching::{
    benign_pool, build_candidate_sets, malicious_pool, match_task1, match_task2, match_task3, CandidateSet,
    LabelRecord, LabeledAccountSample, LabeledPairSample, MatchError, Task, MAX_CANDIDATES, TASK1_WINDOW,
    TASK2_CAP, TASK2_WINDOW, TASK3_WINDOW,
};
use crate::model::{LogisticModel, TrainConfig};
use crate::pairing::{corpus_first_pairs, EvasionPair, SockpuppetGroup};

/// A failure tagged with the stage that produced it.
#[derive(Debug, Error)]
#[error("{stage}: {message}")]
pub struct StageError {
    pub stage: &'static str,
    pub message: String,
}

impl StageError {
    pub fn new(stage: &'static str, err: impl std::fmt::Display) -> Self {
        Self {
            stage,
            message: err.to_string(),
        }
    }
}

macro_rules! stage_from {
    ($ty:ty, $stage:literal) => {
        impl From<$ty> for StageError {
            fn from(e: $ty) -> Self {
                StageError::new($stage, e)
            }
        }
    };
}
stage_from!(CorpusError, "corpus");
stage_from!(MatchError, "match");
stage_from!(FeatureError, "featurize");
stage_from!(EvalError, "evaluate");
stage_from!(AnalysisError, "analyze");

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub features: FeatureConfig,
    pub k_edits: usize,
    pub task1_window: i64,
    pub task2_window: i64,
    pub task3_window: i64,
    pub task2_cap: usize,
    pub max_candidates: usize,
    pub task1_train_fraction: f64,
    pub pair_train_fraction: f64,
    pub train: TrainConfig,
    pub rfe_validation_fraction: Option<f64>,
    pub outlier_days: f64,
    pub threads: usize,
    /// Seeds negative sampling.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            k_edits: 3,
            task1_window: TASK1_WINDOW,
            task2_window: TASK2_WINDOW,
            task3_window: TASK3_WINDOW,
            task2_cap: TASK2_CAP,
            max_candidates: MAX_CANDIDATES,
            task1_train_fraction: 0.8,
            pair_train_fraction: 0.9,
            train: TrainConfig::default(),
            rfe_validation_fraction: Some(0.1),
            outlier_days: 1_000.0,
            threads: 1,
            seed: 7,
        }
    }
}

impl PipelineConfig {
    /// Pair features for early detection: the child's first `k` edits and
    /// nothing about its (future) ban.
    pub fn task2_features(&self) -> FeatureConfig {
        FeatureConfig {
            k_limit: Some(self.k_edits),
            include_child_ban_features: false,
            ..self.features.clone()
        }
    }

    /// Pair features at ban time: full histories, child ban included.
    pub fn task3_features(&self) -> FeatureConfig {
        FeatureConfig {
            k_limit: None,
            include_child_ban_features: true,
            ..self.features.clone()
        }
    }

    fn harness(&self, fraction: f64) -> Result<HarnessConfig, EvalError> {
        Ok(HarnessConfig {
            split: SplitSpec::new(fraction)?,
            train: self.train.clone(),
            rfe_validation_fraction: self.rfe_validation_fraction,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Pairs {
    pub groups: Vec<SockpuppetGroup>,
    pub all: Vec<EvasionPair>,
    pub first: Vec<EvasionPair>,
}

pub fn extract_pairs(corpus: &Corpus) -> Pairs {
    let (groups, all, first) = corpus_first_pairs(corpus);
    Pairs { groups, all, first }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchedSamples {
    pub task1: Vec<LabeledAccountSample>,
    pub task2: Vec<LabeledPairSample>,
    pub task3: Vec<LabeledPairSample>,
    pub candidates: Vec<CandidateSet>,
}

/// Matched negatives for every task, built on the first pair of each group.
/// Candidate parents are drawn from the parents of all evasion pairs.
pub fn match_samples(corpus: &Corpus, pairs: &Pairs, config: &PipelineConfig) -> Result<MatchedSamples, MatchError> {
    let malicious = malicious_pool(corpus);
    let benign = benign_pool(corpus);
    let parent_ids: BTreeSet<&str> = pairs.first.iter().map(|p| p.parent_id.as_str()).collect();
    let parents: Vec<_> = parent_ids.iter().filter_map(|id| corpus.account(id)).collect();
    let all_parent_ids: BTreeSet<&str> = pairs.all.iter().map(|p| p.parent_id.as_str()).collect();
    let all_parents: Vec<_> = all_parent_ids.iter().filter_map(|id| corpus.account(id)).collect();
    Ok(MatchedSamples {
        task1: match_task1(&parents, &malicious, config.task1_window)?,
        task2: match_task2(&pairs.first, corpus, &benign, config.task2_window, config.task2_cap, config.seed)?,
        task3: match_task3(&pairs.first, corpus, &malicious, config.task3_window)?,
        candidates: build_candidate_sets(&pairs.first, corpus, &all_parents, config.max_candidates)?,
    })
}

#[derive(Debug, Clone)]
pub struct Detection {
    pub report: EvaluationReport,
    pub models: BTreeMap<String, LogisticModel>,
    pub rankings: Vec<RankedList>,
}

/// Runs the three detection tasks and, when candidate sets exist, ranking.
pub fn run_detection(
    corpus: &Corpus,
    pairs: &Pairs,
    matched: &MatchedSamples,
    config: &PipelineConfig,
) -> Result<Detection, StageError> {
    let success: BTreeMap<(&str, &str), Success> = pairs
        .first
        .iter()
        .zip(classify_success(&pairs.first, corpus)?)
        .map(|(p, s)| ((p.parent_id.as_str(), p.child_id.as_str()), s))
        .collect();
    let mut tasks = Vec::new();
    let mut models = BTreeMap::new();

    let account_x = FeatureExtractor::new(corpus, config.features.clone(), config.threads)?;
    let t1 = run_task(
        Task::Prediction,
        &matched.task1,
        corpus,
        &config.harness(config.task1_train_fraction)?,
        |s| account_x.account_matrix(s),
        |_| None,
    )?;
    tasks.push(t1.report);
    models.insert(Task::Prediction.name().to_string(), t1.model);

    let t2x = FeatureExtractor::new(corpus, config.task2_features(), config.threads)?;
    let t2 = run_task(
        Task::EarlyDetection,
        &matched.task2,
        corpus,
        &config.harness(config.pair_train_fraction)?,
        |s| t2x.pair_matrix(s),
        |_| None,
    )?;
    tasks.push(t2.report);
    models.insert(Task::EarlyDetection.name().to_string(), t2.model);

    let t3x = FeatureExtractor::new(corpus, config.task3_features(), config.threads)?;
    let t3 = run_task(
        Task::BantimeDetection,
        &matched.task3,
        corpus,
        &config.harness(config.pair_train_fraction)?,
        |s| t3x.pair_matrix(s),
        |s| {
            success
                .get(&(s.parent_id.as_str(), s.other_id.as_str()))
                .map(|v| *v == Success::Successful)
        },
    )?;
    tasks.push(t3.report);
    models.insert(Task::BantimeDetection.name().to_string(), t3.model);

    let (ranking, rankings) = if matched.candidates.is_empty() {
        (None, Vec::new())
    } else {
        let r = run_ranking(&matched.candidates, corpus, &t3x, &config.harness(config.pair_train_fraction)?)?;
        models.insert(Task::Ranking.name().to_string(), r.model);
        (Some(r.report), r.rankings)
    };
    Ok(Detection {
        report: EvaluationReport { tasks, ranking },
        models,
        rankings,
    })
}

pub fn run_analysis(
    corpus: &Corpus,
    pairs: &Pairs,
    matched: &MatchedSamples,
    config: &PipelineConfig,
) -> Result<(CharacterizationReport, Tables), AnalysisError> {
    characterize(
        corpus,
        &pairs.first,
        &matched.task1,
        &matched.task3,
        &config.features,
        &CharacterizeConfig {
            outlier_days: config.outlier_days,
            threads: config.threads,
        },
    )
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub corpus: Corpus,
    pub truth: Vec<PairRecord>,
    pub pairs: Pairs,
    pub matched: MatchedSamples,
    pub detection: Detection,
    pub characterization: CharacterizationReport,
    pub tables: Tables,
}

/// Summary written next to the detailed reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub accounts: usize,
    pub revisions: usize,
    pub records: usize,
    pub groups: usize,
    pub evasion_pairs: usize,
    pub first_pairs: usize,
    pub evaluation: EvaluationReport,
}

/// Generates a synthetic corpus and runs every stage on it.
pub fn reproduce(synth: &SynthConfig, config: &PipelineConfig) -> Result<PipelineOutput, StageError> {
    let generated = generate_synthetic(synth).map_err(|e| StageError::new("generate", e))?;
    run_all(generated.corpus, generated.truth_pairs, config)
}

/// Every stage after generation on an existing corpus.
pub fn run_all(corpus: Corpus, truth: Vec<PairRecord>, config: &PipelineConfig) -> Result<PipelineOutput, StageError> {
    let pairs = extract_pairs(&corpus);
    let matched = match_samples(&corpus, &pairs, config)?;
    let detection = run_detection(&corpus, &pairs, &matched, config)?;
    let (characterization, tables) = run_analysis(&corpus, &pairs, &matched, config)?;
    Ok(PipelineOutput {
        corpus,
        truth,
        pairs,
        matched,
        detection,
        characterization,
        tables,
    })
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> StageError {
    StageError::new("write", format!("{}: {e}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<(), StageError> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn write_labels<'a, T: 'a>(path: &Path, samples: &'a [T]) -> Result<(), StageError>
where
    LabelRecord: From<&'a T>,
{
    let records: Vec<LabelRecord> = samples.iter().map(LabelRecord::from).collect();
    jsonl::write_records(path, &records).map_err(|e| StageError::new("write", e))
}

/// Writes the corpus, pairs, labels, models, reports and tables under `dir`.
pub fn write_outputs(dir: &Path, output: &PipelineOutput) -> Result<(), StageError> {
    let mk = |p: &Path| std::fs::create_dir_all(p).map_err(|e| io_err(p, e));
    let corpus_dir = dir.join("corpus");
    let labels_dir = dir.join("labels");
    let models_dir = dir.join("models");
    let tables_dir = dir.join("tables");
    for d in [dir, &corpus_dir, &labels_dir, &models_dir, &tables_dir] {
        mk(d)?;
    }
    write_corpus(&output.corpus, &CorpusFiles::in_dir(&corpus_dir))?;
    write_pairs(&corpus_dir.join("truth_pairs.jsonl"), &output.truth)?;
    let as_records = |v: &[EvasionPair]| v.iter().map(PairRecord::from).collect::<Vec<_>>();
    write_pairs(&dir.join("pairs.jsonl"), &as_records(&output.pairs.all))?;
    write_pairs(&dir.join("first_pairs.jsonl"), &as_records(&output.pairs.first))?;

    write_labels(&labels_dir.join("task1.jsonl"), &output.matched.task1)?;
    write_labels(&labels_dir.join("task2.jsonl"), &output.matched.task2)?;
    write_labels(&labels_dir.join("task3.jsonl"), &output.matched.task3)?;
    jsonl::write_records(&labels_dir.join("candidates.jsonl"), &output.matched.candidates)
        .map_err(|e| StageError::new("write", e))?;

    for (name, model) in &output.detection.models {
        let path = models_dir.join(format!("{name}.json"));
        model.save(&path).map_err(|e| io_err(&path, e))?;
    }
    jsonl::write_records(&dir.join("rankings.jsonl"), &output.detection.rankings)
        .map_err(|e| StageError::new("write", e))?;

    let (accounts, revisions, records) = output.corpus.counts();
    let summary = RunSummary {
        accounts,
        revisions,
        records,
        groups: output.pairs.groups.len(),
        evasion_pairs: output.pairs.all.len(),
        first_pairs: output.pairs.first.len(),
        evaluation: output.detection.report.clone(),
    };
    write_text(
        &dir.join("report.json"),
        &(serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n"),
    )?;
    let mut text = format!(
        "accounts={accounts} revisions={revisions} records={records} groups={} pairs={} first_pairs={}\n\n",
        summary.groups, summary.evasion_pairs, summary.first_pairs
    );
    text.push_str(&output.detection.report.summary());
    text.push('\n');
    text.push_str(&output.characterization.summary());
    write_text(&dir.join("report.txt"), &text)?;
    write_text(&dir.join("analysis.json"), &output.characterization.to_json())?;
    for (name, body) in &output.tables {
        write_text(&tables_dir.join(name), body)?;
    }
    Ok(())
}

/// Feature configuration built from optional lexicon files.
pub fn feature_config_from_files(lexicon: Option<&Path>, sentiment: Option<&Path>) -> Result<FeatureConfig, StageError> {
    let mut cfg = FeatureConfig::default();
    if let Some(p) = lexicon {
        cfg.lexicon = Arc::new(crate::textstats::Lexicon::load(p).map_err(|e| StageError::new("lexicon", e))?);
    }
    if let Some(p) = sentiment {
        cfg.sentiment_lexicon =
            Arc::new(crate::textstats::SentimentLexicon::load(p).map_err(|e| StageError::new("lexicon", e))?);
    }
    Ok(cfg)
}
