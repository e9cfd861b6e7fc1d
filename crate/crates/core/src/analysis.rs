//! Characterization statistics: two-sample tests, correlations, success
//! categorization and descriptive comparisons of evaders and controls.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::features::{FeatureConfig, FeatureError, FeatureExtractor, FeatureMatrix};
use crate::matching::{LabeledAccountSample, LabeledPairSample};
use crate::pairing::EvasionPair;
use crate::textstats::normalized_levenshtein;
use crate::time::{DAY, HOUR};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("each sample needs at least 2 values")]
    InsufficientSamples,
    #[error("samples have zero variance")]
    ZeroVariance,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("account {0:?} has no ban time")]
    MissingBanTime(String),
    #[error("unknown account {0:?}")]
    UnknownAccount(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoSampleResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub cohens_d: f64,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn median(x: &[f64]) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_p_value(t: f64, df: f64) -> f64 {
    incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Welch's unequal-variance t-test with Welch-Satterthwaite degrees of
/// freedom; Cohen's d uses the pooled standard deviation.
pub fn welch_test(a: &[f64], b: &[f64]) -> Result<TwoSampleResult, AnalysisError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(AnalysisError::InsufficientSamples);
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (variance(a), variance(b));
    let (qa, qb) = (va / na, vb / nb);
    let se2 = qa + qb;
    if !(se2 > 0.0) {
        return Err(AnalysisError::ZeroVariance);
    }
    let diff = mean(a) - mean(b);
    let t = diff / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
    let pooled = (((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0)).sqrt();
    Ok(TwoSampleResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: student_t_p_value(t, df),
        cohens_d: diff / pooled,
    })
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, AnalysisError> {
    if x.len() != y.len() {
        return Err(AnalysisError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(AnalysisError::InsufficientSamples);
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Success {
    Successful,
    Unsuccessful,
}

/// A pair is successful iff the child stayed active strictly longer than
/// its parent. Output is aligned with `pairs`.
pub fn classify_success(pairs: &[EvasionPair], corpus: &Corpus) -> Result<Vec<Success>, AnalysisError> {
    pairs
        .iter()
        .map(|p| {
            let duration = |id: &str| {
                let a = corpus
                    .account(id)
                    .ok_or_else(|| AnalysisError::UnknownAccount(id.to_string()))?;
                a.active_duration()
                    .ok_or_else(|| AnalysisError::MissingBanTime(id.to_string()))
            };
            Ok(if duration(&p.child_id)? > duration(&p.parent_id)? {
                Success::Successful
            } else {
                Success::Unsuccessful
            })
        })
        .collect()
}

/// Drops durations above `threshold_days` and min-max normalizes the rest.
/// A degenerate range maps every value to 0.
pub fn normalize_durations(days: &[f64], threshold_days: f64) -> Vec<f64> {
    let kept: Vec<f64> = days.iter().copied().filter(|d| *d <= threshold_days).collect();
    let lo = kept.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    kept.iter()
        .map(|d| if hi > lo { (d - lo) / (hi - lo) } else { 0.0 })
        .collect()
}

/// `child.creation - parent.ban` in days for each pair, filtered at
/// `outlier_days` and min-max normalized. Pairs whose parent has no ban
/// time are skipped.
pub fn inter_account_durations(pairs: &[EvasionPair], corpus: &Corpus, outlier_days: f64) -> Vec<f64> {
    normalize_durations(&raw_inter_days(pairs, corpus), outlier_days)
}

fn raw_inter_days(pairs: &[EvasionPair], corpus: &Corpus) -> Vec<f64> {
    pairs
        .iter()
        .filter_map(|p| {
            let ban = corpus.account(&p.parent_id)?.ban_time?;
            let child = corpus.account(&p.child_id)?;
            Some((child.creation_time - ban) as f64 / DAY as f64)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub n: usize,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Mean with a 95% normal-approximation interval.
pub fn mean_ci(x: &[f64]) -> Option<MeanCi> {
    if x.is_empty() {
        return None;
    }
    let m = mean(x);
    let se = if x.len() > 1 {
        (variance(x) / x.len() as f64).sqrt()
    } else {
        0.0
    };
    Some(MeanCi {
        n: x.len(),
        mean: m,
        lower: m - 1.96 * se,
        upper: m + 1.96 * se,
    })
}

/// One metric contrasted between two groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub metric: String,
    pub group_a: Option<MeanCi>,
    pub group_b: Option<MeanCi>,
    pub median_a: Option<f64>,
    pub median_b: Option<f64>,
    pub test: Option<TwoSampleResult>,
}

impl Comparison {
    fn of(metric: impl Into<String>, a: &[f64], b: &[f64]) -> Self {
        Self {
            metric: metric.into(),
            group_a: mean_ci(a),
            group_b: mean_ci(b),
            median_a: median(a),
            median_b: median(b),
            test: welch_test(a, b).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessSummary {
    pub successful: usize,
    pub unsuccessful: usize,
    /// Successful (a) vs. unsuccessful (b).
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterAccountSummary {
    pub n: usize,
    pub median_days: Option<f64>,
    pub std_days: Option<f64>,
    pub kept_after_filter: usize,
    pub outlier_days: f64,
    pub corr_username_distance: Option<f64>,
    pub corr_page_overlap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacterizationReport {
    /// Evading parents (a) vs. matched non-evading malicious accounts (b).
    pub parents_vs_malicious: Vec<Comparison>,
    /// Evasion pairs (a) vs. matched malicious pairs (b).
    pub pairs_vs_matched: Vec<Comparison>,
    /// Child (a) vs. parent (b) within evasion pairs.
    pub child_vs_parent: Vec<Comparison>,
    pub inter_account: InterAccountSummary,
    pub success: SuccessSummary,
}

/// Plot-ready TSV tables keyed by file name.
pub type Tables = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizeConfig {
    pub outlier_days: f64,
    pub threads: usize,
}

impl Default for CharacterizeConfig {
    fn default() -> Self {
        Self {
            outlier_days: 1_000.0,
            threads: 1,
        }
    }
}

fn column(m: &FeatureMatrix, name: &str) -> Vec<f64> {
    let j = m.names.iter().position(|n| n == name).expect("known feature");
    m.rows.iter().map(|r| r[j]).collect()
}

fn username_distances(corpus: &Corpus, pairs: &[(&str, &str)]) -> Vec<f64> {
    pairs
        .iter()
        .map(|(p, o)| {
            let name = |id: &str| corpus.account(id).map_or("", |a| a.username.as_str());
            normalized_levenshtein(name(p), name(o))
        })
        .collect()
}

fn non_alnum(name: &str) -> f64 {
    name.chars().filter(|c| !c.is_alphanumeric() && !c.is_whitespace()).count() as f64
}

const ACCOUNT_METRICS: [(&str, &str, f64); 4] = [
    ("duration", "duration_days", DAY as f64),
    ("total_contributions", "revisions", 1.0),
    ("unique_pages", "unique_pages", 1.0),
    ("mean_gap", "mean_gap_hours", HOUR as f64),
];

const PAIR_METRICS: [&str; 5] = [
    "page_jaccard",
    "comment_jaccard",
    "text_jaccard",
    "embedding_cosine",
    "liwc_abs_diff",
];

/// Descriptive comparisons of evaders against their matched controls.
///
/// `task1` supplies parents and their matched malicious accounts; `task3`
/// supplies evasion pairs and matched malicious pairs. Features are taken
/// over each account's full history.
pub fn characterize(
    corpus: &Corpus,
    pairs: &[EvasionPair],
    task1: &[LabeledAccountSample],
    task3: &[LabeledPairSample],
    features: &FeatureConfig,
    config: &CharacterizeConfig,
) -> Result<(CharacterizationReport, Tables), AnalysisError> {
    let feature_config = FeatureConfig {
        k_limit: None,
        include_child_ban_features: true,
        ..features.clone()
    };
    let extractor = FeatureExtractor::new(corpus, feature_config.clone(), config.threads)?;
    let categories: Vec<String> = feature_config.lexicon.categories().to_vec();
    let mut tables = Tables::new();

    // Parents vs. matched malicious accounts.
    let mut parent_ids: Vec<&str> = task1.iter().filter(|s| s.label.is_positive()).map(|s| s.account_id.as_str()).collect();
    let mut malicious_ids: Vec<&str> = task1.iter().filter(|s| !s.label.is_positive()).map(|s| s.account_id.as_str()).collect();
    parent_ids.sort_unstable();
    parent_ids.dedup();
    malicious_ids.sort_unstable();
    malicious_ids.dedup();
    let as_samples = |ids: &[&str]| -> Vec<LabeledAccountSample> {
        ids.iter()
            .map(|id| LabeledAccountSample {
                account_id: id.to_string(),
                label: crate::matching::Label::Positive,
                anchor_parent_id: None,
            })
            .collect()
    };
    let pm = extractor.account_matrix(&as_samples(&parent_ids))?;
    let mm = extractor.account_matrix(&as_samples(&malicious_ids))?;
    let mut parents_vs_malicious = Vec::new();
    for (feature, metric, scale) in ACCOUNT_METRICS {
        let a: Vec<f64> = column(&pm, feature).iter().map(|v| v / scale).collect();
        let b: Vec<f64> = column(&mm, feature).iter().map(|v| v / scale).collect();
        parents_vs_malicious.push(Comparison::of(metric, &a, &b));
    }
    let name_stat = |ids: &[&str], f: &dyn Fn(&str) -> f64| -> Vec<f64> {
        ids.iter().map(|id| f(&corpus.account(id).expect("known").username)).collect()
    };
    let len = |n: &str| n.chars().count() as f64;
    parents_vs_malicious.push(Comparison::of("username_length", &name_stat(&parent_ids, &len), &name_stat(&malicious_ids, &len)));
    parents_vs_malicious.push(Comparison::of(
        "username_non_alphanumeric",
        &name_stat(&parent_ids, &non_alnum),
        &name_stat(&malicious_ids, &non_alnum),
    ));
    for c in &categories {
        let f = format!("liwc_{c}");
        parents_vs_malicious.push(Comparison::of(&f, &column(&pm, &f), &column(&mm, &f)));
    }
    let mut durations = String::from("group\taccount_id\tduration_days\n");
    for (group, ids, m) in [("parent", &parent_ids, &pm), ("malicious", &malicious_ids, &mm)] {
        for (id, d) in ids.iter().zip(column(m, "duration")) {
            durations.push_str(&format!("{group}\t{id}\t{}\n", d / DAY as f64));
        }
    }
    tables.insert("account_durations.tsv".into(), durations);

    // Evasion pairs vs. matched pairs.
    let evasion: Vec<(&str, &str)> = pairs.iter().map(|p| (p.parent_id.as_str(), p.child_id.as_str())).collect();
    let matched: Vec<(&str, &str)> = task3
        .iter()
        .filter(|s| !s.label.is_positive())
        .map(|s| (s.parent_id.as_str(), s.other_id.as_str()))
        .collect();
    let em = extractor.score_pairs(&evasion)?;
    let xm = extractor.score_pairs(&matched)?;
    let e_inter: Vec<f64> = column(&em, "inter_account_duration").iter().map(|v| v / DAY as f64).collect();
    let x_inter: Vec<f64> = column(&xm, "inter_account_duration").iter().map(|v| v / DAY as f64).collect();
    let e_names = username_distances(corpus, &evasion);
    let x_names = username_distances(corpus, &matched);
    let mut pairs_vs_matched = vec![
        Comparison::of("inter_account_days", &e_inter, &x_inter),
        Comparison::of("username_distance", &e_names, &x_names),
    ];
    for f in PAIR_METRICS {
        pairs_vs_matched.push(Comparison::of(f, &column(&em, f), &column(&xm, f)));
    }
    let mut sim = String::from("group\tparent_id\tother_id\tinter_account_days\tusername_distance");
    for f in PAIR_METRICS {
        sim.push('\t');
        sim.push_str(f);
    }
    sim.push('\n');
    for (group, ids, m, inter, names) in [
        ("evasion", &evasion, &em, &e_inter, &e_names),
        ("matched", &matched, &xm, &x_inter, &x_names),
    ] {
        let cols: Vec<Vec<f64>> = PAIR_METRICS.iter().map(|f| column(m, f)).collect();
        for (i, (p, o)) in ids.iter().enumerate() {
            sim.push_str(&format!("{group}\t{p}\t{o}\t{}\t{}", inter[i], names[i]));
            for c in &cols {
                sim.push_str(&format!("\t{}", c[i]));
            }
            sim.push('\n');
        }
    }
    tables.insert("pair_similarity.tsv".into(), sim);

    // Inter-account durations of evasion pairs.
    let raw = raw_inter_days(pairs, corpus);
    let page_overlap = column(&em, "page_jaccard");
    let kept: Vec<usize> = (0..raw.len()).filter(|&i| raw[i] <= config.outlier_days).collect();
    let normalized = normalize_durations(&raw, config.outlier_days);
    let pick = |v: &[f64]| kept.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let mut inter_table = String::from("parent_id\tchild_id\tinter_account_days\tnormalized\tusername_distance\tpage_jaccard\n");
    for (j, &i) in kept.iter().enumerate() {
        inter_table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            pairs[i].parent_id, pairs[i].child_id, raw[i], normalized[j], e_names[i], page_overlap[i]
        ));
    }
    tables.insert("inter_account.tsv".into(), inter_table);
    let inter_account = InterAccountSummary {
        n: raw.len(),
        median_days: median(&raw),
        std_days: (raw.len() > 1).then(|| variance(&raw).sqrt()),
        kept_after_filter: kept.len(),
        outlier_days: config.outlier_days,
        corr_username_distance: pearson(&normalized, &pick(&e_names)).ok(),
        corr_page_overlap: pearson(&normalized, &pick(&page_overlap)).ok(),
    };

    // Behaviour change from parent to child.
    let child_ids: Vec<&str> = pairs.iter().map(|p| p.child_id.as_str()).collect();
    let pair_parent_ids: Vec<&str> = pairs.iter().map(|p| p.parent_id.as_str()).collect();
    let cm = extractor.account_matrix(&as_samples(&child_ids))?;
    let ppm = extractor.account_matrix(&as_samples(&pair_parent_ids))?;
    let mut child_vs_parent = Vec::new();
    for (feature, metric, scale) in ACCOUNT_METRICS {
        let a: Vec<f64> = column(&cm, feature).iter().map(|v| v / scale).collect();
        let b: Vec<f64> = column(&ppm, feature).iter().map(|v| v / scale).collect();
        child_vs_parent.push(Comparison::of(metric, &a, &b));
    }
    for c in &categories {
        let f = format!("liwc_{c}");
        child_vs_parent.push(Comparison::of(&f, &column(&cm, &f), &column(&ppm, &f)));
    }

    // Successful vs. unsuccessful pairs.
    let success = classify_success(pairs, corpus)?;
    let split = |v: &[f64]| {
        let mut s = Vec::new();
        let mut u = Vec::new();
        for (x, flag) in v.iter().zip(&success) {
            match flag {
                Success::Successful => s.push(*x),
                Success::Unsuccessful => u.push(*x),
            }
        }
        (s, u)
    };
    let mut comparisons = Vec::new();
    for c in &categories {
        let f = format!("liwc_{c}");
        let delta: Vec<f64> = column(&cm, &f).iter().zip(column(&ppm, &f)).map(|(c, p)| c - p).collect();
        let (s, u) = split(&delta);
        comparisons.push(Comparison::of(format!("delta_{f}"), &s, &u));
    }
    let (s, u) = split(&e_names);
    comparisons.push(Comparison::of("username_distance", &s, &u));
    let (s, u) = split(&page_overlap);
    comparisons.push(Comparison::of("page_jaccard", &s, &u));
    let n_success = success.iter().filter(|s| **s == Success::Successful).count();

    Ok((
        CharacterizationReport {
            parents_vs_malicious,
            pairs_vs_matched,
            child_vs_parent,
            inter_account,
            success: SuccessSummary {
                successful: n_success,
                unsuccessful: success.len() - n_success,
                comparisons,
            },
        },
        tables,
    ))
}

impl CharacterizationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn summary(&self) -> String {
        let fmt = |c: &Comparison| {
            let m = |v: Option<MeanCi>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.4}", v.mean));
            let p = c.test.map_or_else(|| "n/a".to_string(), |t| format!("{:.2e}", t.p_value));
            format!("  {:<28} {:>10} vs {:>10}  p={p}\n", c.metric, m(c.group_a), m(c.group_b))
        };
        let mut out = String::from("parents vs. matched malicious accounts (means)\n");
        self.parents_vs_malicious.iter().for_each(|c| out.push_str(&fmt(c)));
        out.push_str("evasion pairs vs. matched pairs (means)\n");
        self.pairs_vs_matched.iter().for_each(|c| out.push_str(&fmt(c)));
        out.push_str(&format!(
            "successful pairs: {}  unsuccessful pairs: {}\n",
            self.success.successful, self.success.unsuccessful
        ));
        out
    }
}
