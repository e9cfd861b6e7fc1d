//! Text primitives: tokenization, string and set similarity, lexicon
//! profiles, sentiment and sentence embeddings.

mod embedding;
mod lexicon;

use std::collections::HashSet;
use std::hash::{BuildHasher, Hash};

use thiserror::Error;

pub use embedding::{
    embed, fnv1a64, text_key, EmbeddingProvider, EmbeddingVector, ExternalEmbeddings,
    TrigramEmbedder, TRIGRAM_DIM,
};
pub use lexicon::{
    liwc_profile, profile_abs_diff, sentiment, Lexicon, PsycholinguisticProfile,
    SentimentLexicon,
};

#[derive(Debug, Error, PartialEq)]
pub enum TextError {
    #[error("lexicon line {line}: {reason}")]
    LexiconParse { line: usize, reason: String },
    #[error("profiles cover different categories")]
    CategoryMismatch,
    #[error("no texts to embed")]
    EmptyInput,
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("no precomputed embedding for text hash {0}")]
    UnknownText(String),
    #[error("{0}")]
    Io(String),
}

/// Lowercased maximal runs of alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Unit-cost edit distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Edit distance divided by the longer length; 0 for two empty strings.
pub fn normalized_levenshtein(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

/// Intersection over union; 0 when both sets are empty.
pub fn jaccard<T, S>(a: &HashSet<T, S>, b: &HashSet<T, S>) -> f64
where
    T: Eq + Hash,
    S: BuildHasher,
{
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|x| large.contains(*x)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, TextError> {
    if u.len() != v.len() {
        return Err(TextError::DimensionMismatch {
            left: u.len(),
            right: v.len(),
        });
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (x, y) in u.iter().zip(v) {
        dot += x * y;
        nu += x * x;
        nv += y * y;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[&str]) -> HashSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("Damn it!"), vec!["damn", "it"]);
        assert!(tokenize("").is_empty());
        assert_eq!(tokenize("A$$ KIKR"), vec!["a", "kikr"]);
        assert_eq!(tokenize("Ünïcode wörds, 42x"), vec!["ünïcode", "wörds", "42x"]);
    }

    #[test]
    fn levenshtein_examples() {
        assert_eq!(normalized_levenshtein("abc", "abc"), 0.0);
        assert!((normalized_levenshtein("abc", "abd") - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(normalized_levenshtein("", "xy"), 1.0);
        assert_eq!(normalized_levenshtein("", ""), 0.0);
        assert_eq!(levenshtein("kitten", "sitting"), 3);
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&set(&["x", "y"]), &set(&["x", "y"])), 1.0);
        assert_eq!(jaccard(&set(&["x"]), &set(&["y"])), 0.0);
        assert!((jaccard(&set(&["x", "y"]), &set(&["y", "z"])) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 0.0);
    }

    #[test]
    fn cosine_examples() {
        let v = [0.3, -2.0, 5.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let expected = 1.0 / 2f64.sqrt();
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - expected).abs() < 1e-15);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(
            cosine(&[1.0], &[1.0, 2.0]),
            Err(TextError::DimensionMismatch { left: 1, right: 2 })
        );
    }
}
