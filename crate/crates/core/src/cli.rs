//! Command-line front end.
//!
//! Every option can also come from an environment variable named
//! `BAN_EVASION_<FLAG>` (upper case, dashes as underscores) or from a flat
//! `key = value` file passed with `--config`. Flags and environment
//! variables win over the file, which wins over built-in defaults.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::corpus::{load_corpus, read_pairs, write_corpus, write_pairs, Corpus, CorpusFiles, PairRecord, SynthConfig};
use crate::eval::{
    mrr, rank_candidates, recall_at_k, roc_auc, split_matrix, temporal_split, RankedList, RankingReport, SplitSpec,
    TaskReport, SampleCounts,
};
use crate::features::{FeatureExtractor, FeatureMatrix};
use crate::jsonl;
use crate::matching::{
    benign_pool, build_candidate_sets, malicious_pool, match_task1, match_task2, match_task3, CandidateSet,
    LabelRecord, Task, MAX_CANDIDATES, TASK1_WINDOW, TASK2_CAP, TASK2_WINDOW, TASK3_WINDOW,
};
use crate::model::{rfe, train_matrix, LogisticModel, ModelError, TrainConfig};
use crate::pairing::{corpus_first_pairs, EvasionPair};
use crate::pipeline::{
    self, feature_config_from_files, run_analysis, MatchedSamples, Pairs, PipelineConfig, StageError,
};
use crate::time::DAY;

const ENV_PREFIX: &str = "BAN_EVASION_";

#[derive(Debug, Parser)]
#[command(name = "ban-evasion", version, about = "Ban-evasion pairing, detection and attribution")]
struct Cli {
    /// Flat `key = value` settings file.
    #[arg(long, global = true, env = "BAN_EVASION_CONFIG")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a seeded synthetic corpus.
    Generate(GenerateArgs),
    /// Validate a corpus and write a normalized copy.
    Ingest(IngestArgs),
    /// Merge sockpuppet records and extract evasion pairs.
    ExtractPairs(IngestArgs),
    /// Build matched samples and candidate sets.
    Match(MatchArgs),
    /// Turn a label or candidate file into a feature matrix.
    Featurize(FeaturizeArgs),
    /// Split a feature matrix temporally and fit a model.
    Train(TrainArgs),
    /// Score the held-out part of a feature matrix.
    Evaluate(EvaluateArgs),
    /// Rank candidate parents of held-out children.
    Rank(RankArgs),
    /// Characterization statistics and tables.
    Analyze(AnalyzeArgs),
    /// Generate a corpus and run every stage on it.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long, env = "BAN_EVASION_ACCOUNTS")]
    accounts: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_REVISIONS")]
    revisions: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_RECORDS")]
    records: Option<PathBuf>,
    /// Directory holding accounts.jsonl, revisions.jsonl and records.jsonl.
    #[arg(long, env = "BAN_EVASION_CORPUS_DIR")]
    corpus_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long, env = "BAN_EVASION_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "BAN_EVASION_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct LexiconArgs {
    #[arg(long, env = "BAN_EVASION_LEXICON")]
    lexicon: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_SENTIMENT_LEXICON")]
    sentiment_lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, env = "BAN_EVASION_GROUPS")]
    groups: Option<usize>,
    #[arg(long, env = "BAN_EVASION_BENIGN")]
    benign: Option<usize>,
    #[arg(long, env = "BAN_EVASION_MALICIOUS")]
    malicious: Option<usize>,
    #[arg(long, env = "BAN_EVASION_EVASION_RATE")]
    evasion_rate: Option<f64>,
    #[arg(long, env = "BAN_EVASION_PAGE_OVERLAP")]
    page_overlap: Option<f64>,
    #[arg(long, env = "BAN_EVASION_VOCAB_REUSE")]
    vocab_reuse: Option<f64>,
    #[arg(long, env = "BAN_EVASION_USERNAME_MUTATION")]
    username_mutation: Option<f64>,
    #[arg(long, env = "BAN_EVASION_IDLE_GAP_DAYS")]
    idle_gap_days: Option<f64>,
    #[arg(long, env = "BAN_EVASION_ACTIVITY_CONTRAST")]
    activity_contrast: Option<f64>,
    #[arg(long, env = "BAN_EVASION_TOXICITY")]
    toxicity: Option<f64>,
    /// Start from the all-knobs-off configuration.
    #[arg(long)]
    null_control: bool,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    synth: SynthArgs,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct MatchArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    common: CommonArgs,
    /// Pairs to match; defaults to the first pair of every group.
    #[arg(long, env = "BAN_EVASION_PAIRS")]
    pairs: Option<PathBuf>,
    /// Overrides the matching window of every task.
    #[arg(long, env = "BAN_EVASION_WINDOW_DAYS")]
    window_days: Option<f64>,
    #[arg(long, env = "BAN_EVASION_MAX_CANDIDATES")]
    max_candidates: Option<usize>,
    #[arg(long, env = "BAN_EVASION_TASK2_CAP")]
    task2_cap: Option<usize>,
}

#[derive(Debug, Args)]
struct FeaturizeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    lexicons: LexiconArgs,
    /// Label file written by `match`.
    #[arg(long, env = "BAN_EVASION_LABELS")]
    labels: Option<PathBuf>,
    /// Candidate file written by `match`; featurizes candidate pairs instead.
    #[arg(long, env = "BAN_EVASION_CANDIDATES")]
    candidates: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_K_EDITS")]
    k_edits: Option<usize>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, env = "BAN_EVASION_FEATURES")]
    features: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_TRAIN_FRACTION")]
    train_fraction: Option<f64>,
    #[arg(long, env = "BAN_EVASION_L2_LAMBDA")]
    l2_lambda: Option<f64>,
    /// Skip recursive feature elimination.
    #[arg(long)]
    no_rfe: bool,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, env = "BAN_EVASION_FEATURES")]
    features: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_MODEL")]
    model: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_TRAIN_FRACTION")]
    train_fraction: Option<f64>,
    /// Pairs file whose success categories drive the fragmented AUC.
    #[arg(long, env = "BAN_EVASION_PAIRS")]
    pairs: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RankArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    lexicons: LexiconArgs,
    #[arg(long, env = "BAN_EVASION_MODEL")]
    model: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_CANDIDATES")]
    candidates: Option<PathBuf>,
    #[arg(long, env = "BAN_EVASION_TRAIN_FRACTION")]
    train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    corpus: CorpusArgs,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    lexicons: LexiconArgs,
    #[arg(long, env = "BAN_EVASION_OUTLIER_DAYS")]
    outlier_days: Option<f64>,
}

#[derive(Debug, Args)]
struct ReproduceArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    synth: SynthArgs,
    #[command(flatten)]
    lexicons: LexiconArgs,
    #[arg(long, env = "BAN_EVASION_K_EDITS")]
    k_edits: Option<usize>,
    #[arg(long, env = "BAN_EVASION_MAX_CANDIDATES")]
    max_candidates: Option<usize>,
    #[arg(long, env = "BAN_EVASION_TRAIN_FRACTION")]
    train_fraction: Option<f64>,
}

/// Keys accepted in a settings file.
const FILE_KEYS: &[&str] = &[
    "accounts",
    "revisions",
    "records",
    "corpus-dir",
    "out-dir",
    "seed",
    "threads",
    "lexicon",
    "sentiment-lexicon",
    "groups",
    "benign",
    "malicious",
    "evasion-rate",
    "page-overlap",
    "vocab-reuse",
    "username-mutation",
    "idle-gap-days",
    "activity-contrast",
    "toxicity",
    "pairs",
    "window-days",
    "max-candidates",
    "task2-cap",
    "labels",
    "candidates",
    "k-edits",
    "features",
    "train-fraction",
    "l2-lambda",
    "model",
    "outlier-days",
];

/// Settings file contents.
#[derive(Debug, Default)]
struct FileSettings(BTreeMap<String, String>);

impl FileSettings {
    fn parse(text: &str) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", i + 1))?;
            let key = key.trim().replace('_', "-");
            if !FILE_KEYS.contains(&key.as_str()) {
                return Err(format!("line {}: unknown key {key:?}", i + 1));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Self(map))
    }

    fn load(path: Option<&Path>) -> Result<Self, String> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
                Self::parse(&text).map_err(|e| format!("{}: {e}", p.display()))
            }
        }
    }

    /// The flag value, else the file value, else nothing.
    fn opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, String>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        self.0
            .get(key)
            .map(|v| v.parse::<T>().map_err(|e| format!("setting {key}: {e}")))
            .transpose()
    }

    fn get<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, String>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn path(&self, flag: Option<PathBuf>, key: &str) -> Result<PathBuf, String> {
        self.opt(flag, key)?
            .ok_or_else(|| format!("missing --{key} (or {ENV_PREFIX}{})", key.to_uppercase().replace('-', "_")))
    }
}

type CliResult<T> = Result<T, String>;

trait InStage<T> {
    fn in_stage(self, stage: &'static str) -> CliResult<T>;
}

impl<T, E: std::fmt::Display> InStage<T> for Result<T, E> {
    fn in_stage(self, stage: &'static str) -> CliResult<T> {
        self.map_err(|e| fail(stage, e))
    }
}

fn fail(stage: &'static str, e: impl std::fmt::Display) -> String {
    StageError::new(stage, e).to_string()
}

fn out_dir(s: &FileSettings, c: &CommonArgs) -> CliResult<PathBuf> {
    let dir = s.get(c.out_dir.clone(), "out-dir", PathBuf::from("out"))?;
    std::fs::create_dir_all(&dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    Ok(dir)
}

fn corpus_files(s: &FileSettings, c: &CorpusArgs) -> CliResult<CorpusFiles> {
    let dir = s.opt(c.corpus_dir.clone(), "corpus-dir")?;
    let pick = |flag: Option<PathBuf>, key: &str, name: &str| -> CliResult<PathBuf> {
        match (s.opt(flag, key)?, &dir) {
            (Some(p), _) => Ok(p),
            (None, Some(d)) => Ok(d.join(name)),
            (None, None) => Err(format!("missing --{key} or --corpus-dir")),
        }
    };
    Ok(CorpusFiles {
        accounts: pick(c.accounts.clone(), "accounts", "accounts.jsonl")?,
        revisions: pick(c.revisions.clone(), "revisions", "revisions.jsonl")?,
        records: pick(c.records.clone(), "records", "records.jsonl")?,
    })
}

fn load(s: &FileSettings, c: &CorpusArgs) -> CliResult<Corpus> {
    let f = corpus_files(s, c)?;
    load_corpus(&f.accounts, &f.revisions, &f.records).in_stage("ingest")
}

fn synth_config(s: &FileSettings, a: &SynthArgs, seed: Option<u64>) -> CliResult<SynthConfig> {
    let seed = s.get(seed, "seed", 7)?;
    let base = if a.null_control {
        SynthConfig::null_control(seed)
    } else {
        SynthConfig {
            seed,
            ..SynthConfig::default()
        }
    };
    let cfg = SynthConfig {
        n_groups: s.get(a.groups, "groups", base.n_groups)?,
        n_benign: s.get(a.benign, "benign", base.n_benign)?,
        n_nonevading_malicious: s.get(a.malicious, "malicious", base.n_nonevading_malicious)?,
        evasion_rate: s.get(a.evasion_rate, "evasion-rate", base.evasion_rate)?,
        page_overlap: s.get(a.page_overlap, "page-overlap", base.page_overlap)?,
        vocab_reuse: s.get(a.vocab_reuse, "vocab-reuse", base.vocab_reuse)?,
        username_mutation_rate: s.get(a.username_mutation, "username-mutation", base.username_mutation_rate)?,
        idle_gap_days: s.get(a.idle_gap_days, "idle-gap-days", base.idle_gap_days)?,
        activity_contrast: s.get(a.activity_contrast, "activity-contrast", base.activity_contrast)?,
        toxicity: s.get(a.toxicity, "toxicity", base.toxicity)?,
        ..base
    };
    cfg.validate().in_stage("generate")?;
    Ok(cfg)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    std::fs::write(path, text).map_err(|e| format!("{}: {e}", path.display()))
}

fn pairs_of(corpus: &Corpus) -> Pairs {
    pipeline::extract_pairs(corpus)
}

fn read_evasion_pairs(path: &Path) -> CliResult<Vec<EvasionPair>> {
    let records = read_pairs(path).in_stage("ingest")?;
    Ok(records
        .into_iter()
        .map(|r| EvasionPair {
            parent_id: r.parent_id,
            child_id: r.child_id,
            group_id: r.group_id.unwrap_or(0),
        })
        .collect())
}

fn cmd_generate(s: &FileSettings, a: &GenerateArgs) -> CliResult<()> {
    let cfg = synth_config(s, &a.synth, a.common.seed)?;
    let dir = out_dir(s, &a.common)?;
    let generated = crate::corpus::generate_synthetic(&cfg).in_stage("generate")?;
    write_corpus(&generated.corpus, &CorpusFiles::in_dir(&dir)).in_stage("generate")?;
    write_pairs(&dir.join("truth_pairs.jsonl"), &generated.truth_pairs).in_stage("generate")?;
    let (a, r, g) = generated.corpus.counts();
    println!("accounts={a} revisions={r} records={g} planted_pairs={}", generated.truth_pairs.len());
    Ok(())
}

fn cmd_ingest(s: &FileSettings, a: &IngestArgs) -> CliResult<()> {
    let corpus = load(s, &a.corpus)?;
    let dir = out_dir(s, &a.common)?;
    write_corpus(&corpus, &CorpusFiles::in_dir(&dir)).in_stage("ingest")?;
    let (n_a, n_r, n_g) = corpus.counts();
    println!("accounts={n_a} revisions={n_r} records={n_g}");
    Ok(())
}

fn cmd_extract(s: &FileSettings, a: &IngestArgs) -> CliResult<()> {
    let corpus = load(s, &a.corpus)?;
    let dir = out_dir(s, &a.common)?;
    let (groups, all, first) = corpus_first_pairs(&corpus);
    let records = |v: &[EvasionPair]| v.iter().map(PairRecord::from).collect::<Vec<_>>();
    write_pairs(&dir.join("pairs.jsonl"), &records(&all)).in_stage("extract-pairs")?;
    write_pairs(&dir.join("first_pairs.jsonl"), &records(&first)).in_stage("extract-pairs")?;
    jsonl::write_records(&dir.join("groups.jsonl"), &groups).in_stage("extract-pairs")?;
    println!("groups={} pairs={} first_pairs={}", groups.len(), all.len(), first.len());
    Ok(())
}

fn cmd_match(s: &FileSettings, a: &MatchArgs) -> CliResult<()> {
    let corpus = load(s, &a.corpus)?;
    let dir = out_dir(s, &a.common)?;
    let seed = s.get(a.common.seed, "seed", 7)?;
    let window = s
        .opt(a.window_days, "window-days")?
        .map(|d: f64| (d * DAY as f64).round() as i64);
    let max_candidates = s.get(a.max_candidates, "max-candidates", MAX_CANDIDATES)?;
    let cap = s.get(a.task2_cap, "task2-cap", TASK2_CAP)?;
    let extracted = pairs_of(&corpus);
    let first = match s.opt(a.pairs.clone(), "pairs")? {
        Some(p) => read_evasion_pairs(&p)?,
        None => extracted.first.clone(),
    };
    let malicious = malicious_pool(&corpus);
    let benign = benign_pool(&corpus);
    let parents: Vec<_> = first
        .iter()
        .map(|p| p.parent_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .filter_map(|id| corpus.account(id))
        .collect();
    let all_parents: Vec<_> = extracted
        .all
        .iter()
        .chain(&first)
        .map(|p| p.parent_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .filter_map(|id| corpus.account(id))
        .collect();
    let m = "match";
    let matched = MatchedSamples {
        task1: match_task1(&parents, &malicious, window.unwrap_or(TASK1_WINDOW)).in_stage(m)?,
        task2: match_task2(&first, &corpus, &benign, window.unwrap_or(TASK2_WINDOW), cap, seed).in_stage(m)?,
        task3: match_task3(&first, &corpus, &malicious, window.unwrap_or(TASK3_WINDOW)).in_stage(m)?,
        candidates: build_candidate_sets(&first, &corpus, &all_parents, max_candidates).in_stage(m)?,
    };
    let w = "match";
    pipeline::write_labels(&dir.join("task1.jsonl"), &matched.task1).in_stage(w)?;
    pipeline::write_labels(&dir.join("task2.jsonl"), &matched.task2).in_stage(w)?;
    pipeline::write_labels(&dir.join("task3.jsonl"), &matched.task3).in_stage(w)?;
    jsonl::write_records(&dir.join("candidates.jsonl"), &matched.candidates).in_stage(w)?;
    println!(
        "task1={} task2={} task3={} candidate_sets={}",
        matched.task1.len(),
        matched.task2.len(),
        matched.task3.len(),
        matched.candidates.len()
    );
    Ok(())
}

fn pipeline_config(s: &FileSettings, lex: &LexiconArgs, common: &CommonArgs) -> CliResult<PipelineConfig> {
    let lexicon = s.opt(lex.lexicon.clone(), "lexicon")?;
    let sentiment = s.opt(lex.sentiment_lexicon.clone(), "sentiment-lexicon")?;
    Ok(PipelineConfig {
        features: feature_config_from_files(lexicon.as_deref(), sentiment.as_deref()).map_err(|e| e.to_string())?,
        threads: s.get(common.threads, "threads", 1)?,
        seed: s.get(common.seed, "seed", 7)?,
        ..PipelineConfig::default()
    })
}

fn cmd_featurize(s: &FileSettings, a: &FeaturizeArgs) -> CliResult<()> {
    let corpus = load(s, &a.corpus)?;
    let dir = out_dir(s, &a.common)?;
    let mut cfg = pipeline_config(s, &a.lexicons, &a.common)?;
    cfg.k_edits = s.get(a.k_edits, "k-edits", 3)?;
    let f = "featurize";
    let (name, matrix) = if let Some(path) = s.opt(a.candidates.clone(), "candidates")? {
        let sets: Vec<CandidateSet> = jsonl::read_records(&path).in_stage(f)?;
        let samples = crate::eval::candidate_pairs(&sets);
        let x = FeatureExtractor::new(&corpus, cfg.task3_features(), cfg.threads).in_stage(f)?;
        ("ranking", x.pair_matrix(&samples).in_stage(f)?)
    } else {
        let path = s.path(a.labels.clone(), "labels")?;
        let records: Vec<LabelRecord> = jsonl::read_records(&path).in_stage(f)?;
        let task = records.first().map(|r| r.task).ok_or_else(|| fail(f, "empty label file"))?;
        if records.iter().any(|r| r.task != task) {
            return Err(fail(f, "label file mixes tasks"));
        }
        let matrix = match task {
            Task::Prediction => {
                let samples: Vec<_> = records.iter().map(LabelRecord::to_account_sample).collect();
                FeatureExtractor::new(&corpus, cfg.features.clone(), cfg.threads)
                    .and_then(|x| x.account_matrix(&samples))
            }
            Task::EarlyDetection => {
                let samples: Vec<_> = records.iter().map(LabelRecord::to_pair_sample).collect();
                FeatureExtractor::new(&corpus, cfg.task2_features(), cfg.threads).and_then(|x| x.pair_matrix(&samples))
            }
            Task::BantimeDetection | Task::Ranking => {
                let samples: Vec<_> = records.iter().map(LabelRecord::to_pair_sample).collect();
                FeatureExtractor::new(&corpus, cfg.task3_features(), cfg.threads).and_then(|x| x.pair_matrix(&samples))
            }
        }
        .in_stage(f)?;
        (task.name(), matrix)
    };
    let path = dir.join(format!("features_{name}.tsv"));
    matrix.write(&path).in_stage(f)?;
    println!("{}: {} rows x {} features", path.display(), matrix.len(), matrix.names.len());
    Ok(())
}

fn default_fraction(matrix_path: &Path) -> f64 {
    let name = matrix_path.file_name().unwrap_or_default().to_string_lossy();
    if name.contains("prediction") {
        0.8
    } else {
        0.9
    }
}

fn cmd_train(s: &FileSettings, a: &TrainArgs) -> CliResult<()> {
    let corpus = load(s, &a.corpus)?;
    let dir = out_dir(s, &a.common)?;
    let path = s.path(a.features.clone(), "features")?;
    let fraction = s.get(a.train_fraction, "train-fraction", default_fraction(&path))?;
    let t = "train";
    let matrix = FeatureMatrix::read(&path).in_stage(t)?;
    let split = split_matrix(&matrix, &corpus, &SplitSpec::new(fraction).in_stage(t)?).in_stage(t)?;
    let config = TrainConfig {
        l2_lambda: s.get(a.l2_lambda, "l2-lambda", 1.0)?,
        seed: s.get(a.common.seed, "seed", 0)?,
        ..TrainConfig::default()
    };
    let model = if a.no_rfe {
        train_matrix(&split.train, &config).in_stage(t)?
    } else {
        match rfe(&split.train, &config, 0.1) {
            Ok(r) => r.model,
            Err(ModelError::SingleClassInput | ModelError::TooFewFeatures) => {
                train_matrix(&split.train, &config).in_stage(t)?
            }
            Err(e) => return Err(fail(t, e)),
        }
    };
    let stem = path.file_stem().unwrap_or_default().to_string_lossy().replace("features_", "");
    let out = dir.join(format!("model_{stem}.json"));
    model.save(&out).in_stage(t)?;
    println!(
        "{}: {} features, {} train rows ({} negatives deduped)",
        out.display(),
        model.feature_names.len(),
        split.train.len(),
        split.deduped_negatives
    );
    Ok(())
}

fn cmd_evaluate(s: &FileSettings, a: &EvaluateArgs) -> CliResult<()> {
    let corpus = load(s, &a.corpus)?;
    let dir = out_dir(s, &a.common)?;
    let path = s.path(a.features.clone(), "features")?;
    let fraction = s.get(a.train_fraction, "train-fraction", default_fraction(&path))?;
    let e = "evaluate";
    let model = LogisticModel::load(&s.path(a.model.clone(), "model")?).in_stage(e)?;
    let matrix = FeatureMatrix::read(&path).in_stage(e)?;
    let split = split_matrix(&matrix, &corpus, &SplitSpec::new(fraction).in_stage(e)?).in_stage(e)?;
    let scores = model.predict_matrix(&split.test).in_stage(e)?;
    let auc = roc_auc(&scores, &split.test.labels).in_stage(e)?;
    let success: BTreeMap<String, bool> = match s.opt(a.pairs.clone(), "pairs")? {
        Some(p) => {
            let pairs = read_evasion_pairs(&p)?;
            crate::analysis::classify_success(&pairs, &corpus)
                .in_stage(e)?
                .into_iter()
                .zip(&pairs)
                .map(|(c, p)| (format!("{}:{}", p.parent_id, p.child_id), c == crate::analysis::Success::Successful))
                .collect()
        }
        None => BTreeMap::new(),
    };
    let flags: Vec<Option<bool>> = split
        .test
        .sample_ids
        .iter()
        .zip(&split.test.labels)
        .map(|(id, y)| if *y > 0.5 { success.get(id).copied() } else { None })
        .collect();
    let frag = crate::eval::fragmented_auc(&scores, &split.test.labels, &flags);
    let count = |m: &FeatureMatrix, positive: bool| m.labels.iter().filter(|y| (**y > 0.5) == positive).count();
    let stem = path.file_stem().unwrap_or_default().to_string_lossy().replace("features_", "");
    let task = [Task::Prediction, Task::EarlyDetection, Task::BantimeDetection, Task::Ranking]
        .into_iter()
        .find(|t| t.name() == stem)
        .unwrap_or(Task::BantimeDetection);
    let report = TaskReport {
        task,
        auc,
        fragment_auc_successful: frag.successful.ok(),
        fragment_auc_unsuccessful: frag.unsuccessful.ok(),
        counts: SampleCounts {
            train_positive: count(&split.train, true),
            train_negative: count(&split.train, false),
            test_positive: count(&split.test, true),
            test_negative: count(&split.test, false),
        },
        deduped_negatives: split.deduped_negatives,
        boundary: split.boundary,
        selected_features: model.feature_names.clone(),
    };
    write_json(&dir.join(format!("eval_{stem}.json")), &report)?;
    println!("{stem}: auc={auc:.4} test={} rows", split.test.len());
    Ok(())
}

fn cmd_rank(s: &FileSettings, a: &RankArgs) -> CliResult<()> {
    let corpus = load(s, &a.corpus)?;
    let dir = out_dir(s, &a.common)?;
    let cfg = pipeline_config(s, &a.lexicons, &a.common)?;
    let fraction = s.get(a.train_fraction, "train-fraction", 0.9)?;
    let r = "rank";
    let model = LogisticModel::load(&s.path(a.model.clone(), "model")?).in_stage(r)?;
    let sets: Vec<CandidateSet> = jsonl::read_records(&s.path(a.candidates.clone(), "candidates")?).in_stage(r)?;
    let split = temporal_split(&sets, &corpus, &SplitSpec::new(fraction).in_stage(r)?).in_stage(r)?;
    let x = FeatureExtractor::new(&corpus, cfg.task3_features(), cfg.threads).in_stage(r)?;
    let rankings: Vec<RankedList> = split
        .test
        .iter()
        .map(|set| rank_candidates(&model, &x, set))
        .collect::<Result<_, _>>()
        .in_stage(r)?;
    let total: usize = split.test.iter().map(|c| c.candidate_parent_ids.len()).sum();
    let report = RankingReport {
        mrr: mrr(&rankings).in_stage(r)?,
        recall_at_1: recall_at_k(&rankings, 1).in_stage(r)?,
        recall_at_3: recall_at_k(&rankings, 3).in_stage(r)?,
        recall_at_5: recall_at_k(&rankings, 5).in_stage(r)?,
        train_children: split.train.len(),
        test_children: split.test.len(),
        train_pairs: 0,
        mean_candidates: total as f64 / split.test.len().max(1) as f64,
        boundary: split.boundary,
        selected_features: model.feature_names.clone(),
    };
    jsonl::write_records(&dir.join("rankings.jsonl"), &rankings).in_stage(r)?;
    write_json(&dir.join("ranking_report.json"), &report)?;
    println!(
        "mrr={:.4} r@1={:.4} r@3={:.4} r@5={:.4} children={}",
        report.mrr, report.recall_at_1, report.recall_at_3, report.recall_at_5, report.test_children
    );
    Ok(())
}

fn cmd_analyze(s: &FileSettings, a: &AnalyzeArgs) -> CliResult<()> {
    let corpus = load(s, &a.corpus)?;
    let dir = out_dir(s, &a.common)?;
    let mut cfg = pipeline_config(s, &a.lexicons, &a.common)?;
    cfg.outlier_days = s.get(a.outlier_days, "outlier-days", 1_000.0)?;
    let pairs = pairs_of(&corpus);
    let matched = pipeline::match_samples(&corpus, &pairs, &cfg).in_stage("match")?;
    let (report, tables) = run_analysis(&corpus, &pairs, &matched, &cfg).in_stage("analyze")?;
    let tables_dir = dir.join("tables");
    std::fs::create_dir_all(&tables_dir).map_err(|e| format!("{}: {e}", tables_dir.display()))?;
    std::fs::write(dir.join("analysis.json"), report.to_json()).map_err(|e| e.to_string())?;
    for (name, body) in &tables {
        std::fs::write(tables_dir.join(name), body).map_err(|e| e.to_string())?;
    }
    print!("{}", report.summary());
    Ok(())
}

fn cmd_reproduce(s: &FileSettings, a: &ReproduceArgs) -> CliResult<()> {
    let synth = synth_config(s, &a.synth, a.common.seed)?;
    let dir = out_dir(s, &a.common)?;
    let mut cfg = pipeline_config(s, &a.lexicons, &a.common)?;
    cfg.k_edits = s.get(a.k_edits, "k-edits", 3)?;
    cfg.max_candidates = s.get(a.max_candidates, "max-candidates", MAX_CANDIDATES)?;
    if let Some(f) = s.opt(a.train_fraction, "train-fraction")? {
        cfg.task1_train_fraction = f;
        cfg.pair_train_fraction = f;
    }
    let output = pipeline::reproduce(&synth, &cfg).map_err(|e| e.to_string())?;
    pipeline::write_outputs(&dir, &output).map_err(|e| e.to_string())?;
    print!("{}", output.detection.report.summary());
    Ok(())
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = FileSettings::load(cli.config.as_deref()).and_then(|s| match &cli.command {
        Command::Generate(a) => cmd_generate(&s, a),
        Command::Ingest(a) => cmd_ingest(&s, a),
        Command::ExtractPairs(a) => cmd_extract(&s, a),
        Command::Match(a) => cmd_match(&s, a),
        Command::Featurize(a) => cmd_featurize(&s, a),
        Command::Train(a) => cmd_train(&s, a),
        Command::Evaluate(a) => cmd_evaluate(&s, a),
        Command::Rank(a) => cmd_rank(&s, a),
        Command::Analyze(a) => cmd_analyze(&s, a),
        Command::Reproduce(a) => cmd_reproduce(&s, a),
    });
    match result {
        Ok(()) => 0,
        Err(msg) => {
            eprintln!("error: {msg}");
            1
        }
    }
}
