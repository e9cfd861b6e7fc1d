//! Account-level and pairwise feature vectors.
//!
//! Account features (evasion prediction), in order:
//! creation day-of-week/month/day, ban presence and ban day-of-week/month/day
//! (`-1` when unbanned), active duration in seconds (`-1` when unbanned),
//! unique pages, total revisions, mean seconds between revisions, mean
//! characters added plus deleted per revision, one `liwc_<category>` share
//! per lexicon category over all added text, and mean sentiment.
//!
//! Pair features (detection and ranking), in order: parent creation and ban
//! calendar fields, child creation calendar fields, child ban presence and
//! calendar fields (only with `include_child_ban_features`), parent
//! duration, child duration (same flag), inter-account duration
//! `child.creation - parent.ban`, then Jaccard overlap of edited pages,
//! comment unigrams and added-text unigrams, embedding cosine of added
//! text, mean absolute profile difference and absolute sentiment difference.
//! With `k_limit` set only the other account's first `k` revisions count.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::corpus::{Account, Corpus, Revision};
use crate::matching::{LabeledAccountSample, LabeledPairSample};
use crate::parallel;
use crate::textstats::{
    cosine, embed, jaccard, liwc_profile, profile_abs_diff, sentiment, tokenize,
    EmbeddingProvider, Lexicon, PsycholinguisticProfile, SentimentLexicon, TextError,
    TrigramEmbedder,
};
use crate::time::calendar;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("revisions of {0:?} are not in time order")]
    UnsortedRevisions(String),
    #[error("parent {0:?} has no ban time")]
    MissingParentBan(String),
    #[error("k_limit must be at least 1")]
    InvalidKLimit,
    #[error("unknown account {0:?}")]
    UnknownAccount(String),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error("feature matrix line {line}: {reason}")]
    MatrixParse { line: usize, reason: String },
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub names: Vec<String>,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i])
    }

    fn push(&mut self, name: impl Into<String>, value: f64) {
        self.names.push(name.into());
        self.values.push(value);
    }

    fn push_calendar(&mut self, prefix: &str, ts: Option<i64>) {
        let (dow, month, day) = match ts.map(calendar) {
            Some(c) => (c.day_of_week as f64, c.month as f64, c.day_of_month as f64),
            None => (-1.0, -1.0, -1.0),
        };
        self.push(format!("{prefix}_dow"), dow);
        self.push(format!("{prefix}_month"), month);
        self.push(format!("{prefix}_day"), day);
    }
}

#[derive(Debug, Clone)]
pub struct FeatureConfig {
    /// Use only the other account's first `k` revisions in pair features.
    pub k_limit: Option<usize>,
    pub include_child_ban_features: bool,
    pub lexicon: Arc<Lexicon>,
    pub sentiment_lexicon: Arc<SentimentLexicon>,
    pub embedding_provider: Arc<dyn EmbeddingProvider>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            k_limit: None,
            include_child_ban_features: true,
            lexicon: Arc::new(Lexicon::demo()),
            sentiment_lexicon: Arc::new(SentimentLexicon::demo()),
            embedding_provider: Arc::new(TrigramEmbedder),
        }
    }
}

impl FeatureConfig {
    fn validate(&self) -> Result<(), FeatureError> {
        if self.k_limit == Some(0) {
            return Err(FeatureError::InvalidKLimit);
        }
        Ok(())
    }
}

/// An account together with its time-sorted revisions.
#[derive(Debug, Clone, Copy)]
pub struct AccountView<'a> {
    pub account: &'a Account,
    pub revisions: &'a [Revision],
}

impl<'a> AccountView<'a> {
    pub fn from_corpus(corpus: &'a Corpus, id: &str) -> Result<Self, FeatureError> {
        let account = corpus
            .account(id)
            .ok_or_else(|| FeatureError::UnknownAccount(id.to_string()))?;
        Ok(Self {
            account,
            revisions: corpus.revisions_of(id),
        })
    }

    fn limited(self, k: Option<usize>) -> Self {
        match k {
            Some(k) if k < self.revisions.len() => Self {
                account: self.account,
                revisions: &self.revisions[..k],
            },
            _ => self,
        }
    }

    fn check_sorted(&self) -> Result<(), FeatureError> {
        if self.revisions.windows(2).any(|w| w[0].timestamp > w[1].timestamp) {
            return Err(FeatureError::UnsortedRevisions(self.account.account_id.clone()));
        }
        Ok(())
    }
}

/// Text and edit summaries of one account's revisions.
#[derive(Debug, Clone)]
struct Digest {
    pages: HashSet<String>,
    comment_tokens: HashSet<String>,
    added_tokens: HashSet<String>,
    profile: PsycholinguisticProfile,
    sentiment: f64,
    embedding: Vec<f64>,
}

impl Digest {
    fn build(view: AccountView<'_>, config: &FeatureConfig) -> Result<Self, FeatureError> {
        view.check_sorted()?;
        let revisions = view.revisions;
        let added: Vec<String> = revisions.iter().flat_map(|r| tokenize(&r.added_text)).collect();
        let embedding = if revisions.is_empty() {
            vec![0.0; config.embedding_provider.dimension()]
        } else {
            let texts: Vec<&str> = revisions.iter().map(|r| r.added_text.as_str()).collect();
            embed(&texts, config.embedding_provider.as_ref())?.values
        };
        Ok(Self {
            pages: revisions.iter().map(|r| r.page_id.clone()).collect(),
            comment_tokens: revisions.iter().flat_map(|r| tokenize(&r.comment)).collect(),
            profile: liwc_profile(&added, &config.lexicon),
            sentiment: sentiment(&added, &config.sentiment_lexicon),
            added_tokens: added.into_iter().collect(),
            embedding,
        })
    }
}

fn account_row(view: AccountView<'_>, digest: &Digest) -> FeatureVector {
    let account = view.account;
    let revisions = view.revisions;
    let mut fv = FeatureVector {
        names: Vec::new(),
        values: Vec::new(),
    };
    fv.push_calendar("creation", Some(account.creation_time));
    fv.push("ban_present", if account.is_banned() { 1.0 } else { 0.0 });
    fv.push_calendar("ban", account.ban_time);
    fv.push("duration", account.active_duration().map_or(-1.0, |d| d as f64));
    fv.push("unique_pages", digest.pages.len() as f64);
    fv.push("total_contributions", revisions.len() as f64);
    let mean_gap = if revisions.len() < 2 {
        0.0
    } else {
        let span = revisions[revisions.len() - 1].timestamp - revisions[0].timestamp;
        span as f64 / (revisions.len() - 1) as f64
    };
    fv.push("mean_gap", mean_gap);
    let mean_size = if revisions.is_empty() {
        0.0
    } else {
        let chars: usize = revisions
            .iter()
            .map(|r| r.added_text.chars().count() + r.deleted_text.chars().count())
            .sum();
        chars as f64 / revisions.len() as f64
    };
    fv.push("mean_size", mean_size);
    for (cat, v) in digest.profile.categories.iter().zip(&digest.profile.values) {
        fv.push(format!("liwc_{cat}"), *v);
    }
    fv.push("sentiment", digest.sentiment);
    fv
}

pub fn account_features(
    view: AccountView<'_>,
    config: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    config.validate()?;
    let digest = Digest::build(view, config)?;
    Ok(account_row(view, &digest))
}

fn pair_row(
    parent: &Account,
    parent_digest: &Digest,
    other: &Account,
    other_digest: &Digest,
    config: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    let parent_ban = parent
        .ban_time
        .ok_or_else(|| FeatureError::MissingParentBan(parent.account_id.clone()))?;
    let mut fv = FeatureVector {
        names: Vec::new(),
        values: Vec::new(),
    };
    fv.push_calendar("parent_creation", Some(parent.creation_time));
    fv.push_calendar("parent_ban", Some(parent_ban));
    fv.push_calendar("child_creation", Some(other.creation_time));
    if config.include_child_ban_features {
        fv.push("child_ban_present", if other.is_banned() { 1.0 } else { 0.0 });
        fv.push_calendar("child_ban", other.ban_time);
    }
    fv.push("parent_duration", (parent_ban - parent.creation_time) as f64);
    if config.include_child_ban_features {
        fv.push("child_duration", other.active_duration().map_or(-1.0, |d| d as f64));
    }
    fv.push("inter_account_duration", (other.creation_time - parent_ban) as f64);
    fv.push("page_jaccard", jaccard(&parent_digest.pages, &other_digest.pages));
    fv.push(
        "comment_jaccard",
        jaccard(&parent_digest.comment_tokens, &other_digest.comment_tokens),
    );
    fv.push(
        "text_jaccard",
        jaccard(&parent_digest.added_tokens, &other_digest.added_tokens),
    );
    fv.push(
        "embedding_cosine",
        cosine(&parent_digest.embedding, &other_digest.embedding)?,
    );
    fv.push(
        "liwc_abs_diff",
        profile_abs_diff(&parent_digest.profile, &other_digest.profile)?,
    );
    fv.push(
        "sentiment_abs_diff",
        (parent_digest.sentiment - other_digest.sentiment).abs(),
    );
    Ok(fv)
}

pub fn pair_features(
    parent: AccountView<'_>,
    other: AccountView<'_>,
    config: &FeatureConfig,
) -> Result<FeatureVector, FeatureError> {
    config.validate()?;
    let parent_digest = Digest::build(parent, config)?;
    let other_digest = Digest::build(other.limited(config.k_limit), config)?;
    pair_row(parent.account, &parent_digest, other.account, &other_digest, config)
}

/// Labeled rows with a shared header.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub sample_ids: Vec<String>,
    pub labels: Vec<f64>,
    pub rows: Vec<Vec<f64>>,
}

impl FeatureMatrix {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Tab-separated text: `sample_id`, `label`, then one column per feature.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("sample_id\tlabel");
        for name in &self.names {
            out.push('\t');
            out.push_str(name);
        }
        out.push('\n');
        for ((id, label), row) in self.sample_ids.iter().zip(&self.labels).zip(&self.rows) {
            let _ = write!(out, "{id}\t{label}");
            for v in row {
                let _ = write!(out, "\t{v}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self, FeatureError> {
        let mut lines = text.lines().enumerate();
        let err = |line: usize, reason: String| FeatureError::MatrixParse { line, reason };
        let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
        let mut cols = header.split('\t');
        if cols.next() != Some("sample_id") || cols.next() != Some("label") {
            return Err(err(1, "header must start with sample_id, label".into()));
        }
        let names: Vec<String> = cols.map(str::to_string).collect();
        let mut m = FeatureMatrix {
            names,
            sample_ids: Vec::new(),
            labels: Vec::new(),
            rows: Vec::new(),
        };
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let id = fields.next().unwrap_or_default().to_string();
            let parse = |s: Option<&str>| -> Result<f64, FeatureError> {
                s.ok_or_else(|| err(i + 1, "missing field".into()))?
                    .parse::<f64>()
                    .map_err(|e| err(i + 1, e.to_string()))
            };
            let label = parse(fields.next())?;
            let row = fields.map(|f| parse(Some(f))).collect::<Result<Vec<_>, _>>()?;
            if row.len() != m.names.len() {
                return Err(err(i + 1, format!("{} values for {} features", row.len(), m.names.len())));
            }
            m.sample_ids.push(id);
            m.labels.push(label);
            m.rows.push(row);
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<(), FeatureError> {
        std::fs::write(path, self.to_tsv()).map_err(|e| FeatureError::Io(format!("{}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, FeatureError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| FeatureError::Io(format!("{}: {e}", path.display())))?;
        Self::from_tsv(&text)
    }

    /// Keeps only the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Option<FeatureMatrix> {
        let idx: Vec<usize> = names
            .iter()
            .map(|n| self.names.iter().position(|m| m == n))
            .collect::<Option<_>>()?;
        Some(FeatureMatrix {
            names: names.to_vec(),
            sample_ids: self.sample_ids.clone(),
            labels: self.labels.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| idx.iter().map(|&i| r[i]).collect())
                .collect(),
        })
    }

    pub fn subset(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            sample_ids: rows.iter().map(|&i| self.sample_ids[i].clone()).collect(),
            labels: rows.iter().map(|&i| self.labels[i]).collect(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }
}

/// Batch featurizer that digests each account (and each k-limited view)
/// once and shares the digests across samples.
#[derive(Debug)]
pub struct FeatureExtractor<'c> {
    corpus: &'c Corpus,
    config: FeatureConfig,
    threads: usize,
}

type DigestKey<'s> = (&'s str, Option<usize>);

impl<'c> FeatureExtractor<'c> {
    pub fn new(corpus: &'c Corpus, config: FeatureConfig, threads: usize) -> Result<Self, FeatureError> {
        config.validate()?;
        Ok(Self {
            corpus,
            config,
            threads,
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    fn digests<'s>(&self, keys: Vec<DigestKey<'s>>) -> Result<BTreeMap<DigestKey<'s>, Digest>, FeatureError> {
        let mut keys = keys;
        keys.sort();
        keys.dedup();
        let built = parallel::map(&keys, self.threads, |&(id, k)| {
            let view = AccountView::from_corpus(self.corpus, id)?;
            Digest::build(view.limited(k), &self.config)
        });
        keys.into_iter()
            .zip(built)
            .map(|(k, d)| d.map(|d| (k, d)))
            .collect()
    }

    pub fn account_matrix(&self, samples: &[LabeledAccountSample]) -> Result<FeatureMatrix, FeatureError> {
        let digests = self.digests(samples.iter().map(|s| (s.account_id.as_str(), None)).collect())?;
        let rows = parallel::map(samples, self.threads, |s| {
            let view = AccountView::from_corpus(self.corpus, &s.account_id)?;
            Ok::<_, FeatureError>(account_row(view, &digests[&(s.account_id.as_str(), None)]))
        });
        let mut m = FeatureMatrix {
            names: Vec::new(),
            sample_ids: Vec::with_capacity(samples.len()),
            labels: Vec::with_capacity(samples.len()),
            rows: Vec::with_capacity(samples.len()),
        };
        for (s, row) in samples.iter().zip(rows) {
            let row = row?;
            if m.names.is_empty() {
                m.names = row.names;
            }
            let anchor = s.anchor_parent_id.as_deref().unwrap_or(&s.account_id);
            m.sample_ids.push(format!("{anchor}:{}", s.account_id));
            m.labels.push(s.label.as_f64());
            m.rows.push(row.values);
        }
        if m.names.is_empty() {
            m.names = self.account_feature_names();
        }
        Ok(m)
    }

    pub fn pair_matrix(&self, samples: &[LabeledPairSample]) -> Result<FeatureMatrix, FeatureError> {
        let pairs: Vec<(&str, &str)> = samples
            .iter()
            .map(|s| (s.parent_id.as_str(), s.other_id.as_str()))
            .collect();
        let mut m = self.score_pairs(&pairs)?;
        m.labels = samples.iter().map(|s| s.label.as_f64()).collect();
        Ok(m)
    }

    /// Unlabeled pair rows (labels left at 0) for `(parent, other)` ids.
    pub fn score_pairs(&self, pairs: &[(&str, &str)]) -> Result<FeatureMatrix, FeatureError> {
        let k = self.config.k_limit;
        let mut keys: Vec<DigestKey<'_>> = Vec::with_capacity(pairs.len() * 2);
        for &(p, o) in pairs {
            keys.push((p, None));
            keys.push((o, k));
        }
        let digests = self.digests(keys)?;
        let rows = parallel::map(pairs, self.threads, |&(p, o)| {
            let parent = AccountView::from_corpus(self.corpus, p)?;
            let other = AccountView::from_corpus(self.corpus, o)?;
            pair_row(
                parent.account,
                &digests[&(p, None)],
                other.account,
                &digests[&(o, k)],
                &self.config,
            )
        });
        let mut m = FeatureMatrix {
            names: self.pair_feature_names(),
            sample_ids: pairs.iter().map(|(p, o)| format!("{p}:{o}")).collect(),
            labels: vec![0.0; pairs.len()],
            rows: Vec::with_capacity(pairs.len()),
        };
        for row in rows {
            m.rows.push(row?.values);
        }
        Ok(m)
    }

    pub fn account_feature_names(&self) -> Vec<String> {
        account_feature_names(&self.config)
    }

    pub fn pair_feature_names(&self) -> Vec<String> {
        pair_feature_names(&self.config)
    }
}

fn calendar_names(prefix: &str) -> [String; 3] {
    [format!("{prefix}_dow"), format!("{prefix}_month"), format!("{prefix}_day")]
}

pub fn account_feature_names(config: &FeatureConfig) -> Vec<String> {
    let mut names: Vec<String> = calendar_names("creation").into();
    names.push("ban_present".into());
    names.extend(calendar_names("ban"));
    for n in ["duration", "unique_pages", "total_contributions", "mean_gap", "mean_size"] {
        names.push(n.into());
    }
    names.extend(config.lexicon.categories().iter().map(|c| format!("liwc_{c}")));
    names.push("sentiment".into());
    names
}

pub fn pair_feature_names(config: &FeatureConfig) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    names.extend(calendar_names("parent_creation"));
    names.extend(calendar_names("parent_ban"));
    names.extend(calendar_names("child_creation"));
    if config.include_child_ban_features {
        names.push("child_ban_present".into());
        names.extend(calendar_names("child_ban"));
    }
    names.push("parent_duration".into());
    if config.include_child_ban_features {
        names.push("child_duration".into());
    }
    for n in [
        "inter_account_duration",
        "page_jaccard",
        "comment_jaccard",
        "text_jaccard",
        "embedding_cosine",
        "liwc_abs_diff",
        "sentiment_abs_diff",
    ] {
        names.push(n.into());
    }
    names
}

/// Coarse family of a feature: `temporal`, `edit` or `linguistic`.
pub fn feature_family(name: &str) -> &'static str {
    match name {
        "unique_pages" | "total_contributions" | "mean_gap" | "mean_size" | "page_jaccard"
        | "comment_jaccard" => "edit",
        n if n.starts_with("liwc_")
            || n == "sentiment"
            || n == "text_jaccard"
            || n == "embedding_cosine"
            || n == "sentiment_abs_diff" =>
        {
            "linguistic"
        }
        _ => "temporal",
    }
}
