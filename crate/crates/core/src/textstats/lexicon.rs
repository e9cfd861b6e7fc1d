use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TextError;

const DEMO_LEXICON: &str = include_str!("../../data/demo_lexicon.dic");
const DEMO_SENTIMENT: &str = include_str!("../../data/demo_sentiment.tsv");

/// Category word lists with trailing-`*` prefix patterns.
///
/// File format: a header block between two lines holding only `%`, each
/// header line `id<TAB>name`; then one entry per line,
/// `token<TAB>id[<TAB>id...]`. Tokens are lowercase and may end in `*`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    categories: Vec<String>,
    literals: HashMap<String, Vec<usize>>,
    prefixes: Vec<(String, Vec<usize>)>,
}

impl Lexicon {
    pub fn parse(text: &str) -> Result<Self, TextError> {
        let err = |line: usize, reason: String| TextError::LexiconParse { line, reason };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));

        match lines.by_ref().find(|(_, l)| !l.trim().is_empty()) {
            Some((_, "%")) => {}
            Some((n, _)) => return Err(err(n, "expected '%' header delimiter".into())),
            None => return Err(err(0, "empty lexicon".into())),
        }

        let mut categories: Vec<String> = Vec::new();
        let mut id_to_idx: HashMap<String, usize> = HashMap::new();
        let mut closed = false;
        for (n, line) in lines.by_ref() {
            if line.trim() == "%" {
                closed = true;
                break;
            }
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split_whitespace();
            let (Some(id), Some(name), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(err(n, format!("bad category line {line:?}")));
            };
            if id_to_idx.contains_key(id) {
                return Err(err(n, format!("duplicate category id {id}")));
            }
            if categories.iter().any(|c| c == name) {
                return Err(err(n, format!("duplicate category name {name}")));
            }
            id_to_idx.insert(id.to_string(), categories.len());
            categories.push(name.to_string());
        }
        if !closed {
            return Err(err(0, "unterminated category header".into()));
        }

        let mut literals: HashMap<String, Vec<usize>> = HashMap::new();
        let mut prefixes: Vec<(String, Vec<usize>)> = Vec::new();
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let token = fields.next().unwrap_or_default().trim();
            if token.is_empty() {
                return Err(err(n, "missing token".into()));
            }
            if token != token.to_lowercase() {
                return Err(err(n, format!("entry {token:?} is not lowercase")));
            }
            let (stem, wildcard) = match token.strip_suffix('*') {
                Some(stem) => (stem, true),
                None => (token, false),
            };
            if stem.is_empty() || stem.contains('*') {
                return Err(err(n, format!("wildcard only allowed at the end: {token:?}")));
            }
            let mut cats = Vec::new();
            for id in fields.flat_map(str::split_whitespace) {
                let &idx = id_to_idx
                    .get(id)
                    .ok_or_else(|| err(n, format!("unknown category id {id}")))?;
                if !cats.contains(&idx) {
                    cats.push(idx);
                }
            }
            if cats.is_empty() {
                return Err(err(n, format!("entry {token:?} has no categories")));
            }
            if wildcard {
                prefixes.push((stem.to_string(), cats));
            } else {
                literals.entry(stem.to_string()).or_default().extend(cats);
            }
        }
        Ok(Self {
            categories,
            literals,
            prefixes,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TextError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Small open lexicon covering function words, prepositions, personal
    /// and impersonal pronouns, past focus, swearing, informal speech,
    /// affect, sexual terms, cognitive and social processes.
    pub fn demo() -> Self {
        Self::parse(DEMO_LEXICON).expect("bundled lexicon parses")
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    /// Category indices matched by one token.
    pub fn categories_of(&self, token: &str) -> Vec<usize> {
        let mut hit = vec![false; self.categories.len()];
        if let Some(cats) = self.literals.get(token) {
            for &c in cats {
                hit[c] = true;
            }
        }
        for (stem, cats) in &self.prefixes {
            if token.starts_with(stem.as_str()) {
                for &c in cats {
                    hit[c] = true;
                }
            }
        }
        hit.iter()
            .enumerate()
            .filter_map(|(i, &h)| h.then_some(i))
            .collect()
    }
}

/// Per-category share of tokens, aligned with the lexicon's categories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsycholinguisticProfile {
    pub categories: Vec<String>,
    pub values: Vec<f64>,
}

impl PsycholinguisticProfile {
    pub fn zeros(categories: &[String]) -> Self {
        Self {
            categories: categories.to_vec(),
            values: vec![0.0; categories.len()],
        }
    }

    pub fn get(&self, category: &str) -> Option<f64> {
        self.categories
            .iter()
            .position(|c| c == category)
            .map(|i| self.values[i])
    }
}

pub fn liwc_profile<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> PsycholinguisticProfile {
    let mut profile = PsycholinguisticProfile::zeros(lexicon.categories());
    if tokens.is_empty() {
        return profile;
    }
    for token in tokens {
        for c in lexicon.categories_of(token.as_ref()) {
            profile.values[c] += 1.0;
        }
    }
    let total = tokens.len() as f64;
    for v in &mut profile.values {
        *v /= total;
    }
    profile
}

/// Mean absolute per-category difference.
pub fn profile_abs_diff(
    p: &PsycholinguisticProfile,
    q: &PsycholinguisticProfile,
) -> Result<f64, TextError> {
    if p.categories != q.categories {
        return Err(TextError::CategoryMismatch);
    }
    if p.values.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = p.values.iter().zip(&q.values).map(|(a, b)| (a - b).abs()).sum();
    Ok(total / p.values.len() as f64)
}

/// Token valences in `[-1, 1]`. File format: `token<TAB>valence` per line.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SentimentLexicon {
    valences: HashMap<String, f64>,
}

impl SentimentLexicon {
    pub fn from_pairs<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, f64)>,
        S: Into<String>,
    {
        Self {
            valences: pairs.into_iter().map(|(k, v)| (k.into(), v)).collect(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut valences = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |reason: String| TextError::LexiconParse { line: i + 1, reason };
            let (token, value) = line
                .split_once('\t')
                .ok_or_else(|| err(format!("expected token<TAB>valence, got {line:?}")))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| err(format!("bad valence {value:?}: {e}")))?;
            if !value.is_finite() || !(-1.0..=1.0).contains(&value) {
                return Err(err(format!("valence {value} outside [-1, 1]")));
            }
            valences.insert(token.trim().to_lowercase(), value);
        }
        Ok(Self { valences })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TextError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn demo() -> Self {
        Self::parse(DEMO_SENTIMENT).expect("bundled sentiment lexicon parses")
    }

    pub fn valence(&self, token: &str) -> Option<f64> {
        self.valences.get(token).copied()
    }
}

/// Mean valence over tokens present in the lexicon; 0 when none match.
pub fn sentiment<S: AsRef<str>>(tokens: &[S], lex: &SentimentLexicon) -> f64 {
    let (sum, n) = tokens
        .iter()
        .filter_map(|t| lex.valence(t.as_ref()))
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
