use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TextError;

pub const TRIGRAM_DIM: usize = 256;

/// Averaged sentence embedding tagged with the provider that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub provider: String,
    pub values: Vec<f64>,
}

/// Source of fixed-dimension sentence vectors.
pub trait EmbeddingProvider: Send + Sync + std::fmt::Debug {
    fn id(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, TextError>;
}

/// Mean of the per-text vectors.
pub fn embed<S: AsRef<str>>(
    texts: &[S],
    provider: &dyn EmbeddingProvider,
) -> Result<EmbeddingVector, TextError> {
    if texts.is_empty() {
        return Err(TextError::EmptyInput);
    }
    let mut sum = vec![0.0; provider.dimension()];
    for text in texts {
        let v = provider.embed_text(text.as_ref())?;
        if v.len() != sum.len() {
            return Err(TextError::DimensionMismatch {
                left: sum.len(),
                right: v.len(),
            });
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = texts.len() as f64;
    Ok(EmbeddingVector {
        provider: provider.id().to_string(),
        values: sum.into_iter().map(|s| s / n).collect(),
    })
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Key under which a text's vector is stored in an external-embedding file.
pub fn text_key(text: &str) -> String {
    format!("{:016x}", fnv1a64(text.as_bytes()))
}

/// Hashed character-trigram term frequencies over the lowercased text.
///
/// Texts shorter than three characters contribute their whole text as one
/// gram; the empty text maps to the zero vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrigramEmbedder;

impl TrigramEmbedder {
    pub fn bucket(gram: &str) -> usize {
        (fnv1a64(gram.as_bytes()) % TRIGRAM_DIM as u64) as usize
    }

    pub fn grams(text: &str) -> Vec<String> {
        let chars: Vec<char> = text.to_lowercase().chars().collect();
        match chars.len() {
            0 => Vec::new(),
            1 | 2 => vec![chars.iter().collect()],
            _ => chars.windows(3).map(|w| w.iter().collect()).collect(),
        }
    }
}

impl EmbeddingProvider for TrigramEmbedder {
    fn id(&self) -> &str {
        "trigram-256"
    }

    fn dimension(&self) -> usize {
        TRIGRAM_DIM
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, TextError> {
        let mut v = vec![0.0; TRIGRAM_DIM];
        for gram in Self::grams(text) {
            v[Self::bucket(&gram)] += 1.0;
        }
        Ok(v)
    }
}

/// Precomputed vectors keyed by [`text_key`].
///
/// File format: one `text-hash<TAB>comma-separated floats` line per text.
#[derive(Debug, Clone)]
pub struct ExternalEmbeddings {
    id: String,
    dimension: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl ExternalEmbeddings {
    pub fn parse(id: &str, text: &str) -> Result<Self, TextError> {
        let mut vectors = HashMap::new();
        let mut dimension = None;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |reason: String| TextError::LexiconParse { line: i + 1, reason };
            let (key, floats) = line
                .split_once('\t')
                .ok_or_else(|| err("expected hash<TAB>floats".into()))?;
            let values = floats
                .split(',')
                .map(|f| f.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(e.to_string()))?;
            if values.iter().any(|v| !v.is_finite()) {
                return Err(err("non-finite entry".into()));
            }
            match dimension {
                None => dimension = Some(values.len()),
                Some(d) if d != values.len() => {
                    return Err(TextError::DimensionMismatch {
                        left: d,
                        right: values.len(),
                    })
                }
                _ => {}
            }
            vectors.insert(key.trim().to_string(), values);
        }
        Ok(Self {
            id: id.to_string(),
            dimension: dimension.unwrap_or(0),
            vectors,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TextError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TextError::Io(format!("{}: {e}", path.display())))?;
        let id = format!("external:{}", path.file_name().unwrap_or_default().to_string_lossy());
        Self::parse(&id, &text)
    }
}

impl EmbeddingProvider for ExternalEmbeddings {
    fn id(&self) -> &str {
        &self.id
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, TextError> {
        let key = text_key(text);
        self.vectors
            .get(&key)
            .cloned()
            .ok_or(TextError::UnknownText(key))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textstats::cosine;

    #[test]
    fn deterministic_and_single_text_mean() {
        let p = TrigramEmbedder;
        let a = embed(&["hello world", "second text"], &p).unwrap();
        let b = embed(&["hello world", "second text"], &p).unwrap();
        assert_eq!(a, b);
        let single = embed(&["hello world"], &p).unwrap();
        assert_eq!(single.values, p.embed_text("hello world").unwrap());
        assert_eq!(single.provider, "trigram-256");
    }

    #[test]
    fn no_shared_trigram_buckets_means_orthogonal() {
        let (a, b) = ("aaaa", "zzzz");
        let buckets_a: Vec<usize> = TrigramEmbedder::grams(a).iter().map(|g| TrigramEmbedder::bucket(g)).collect();
        let buckets_b: Vec<usize> = TrigramEmbedder::grams(b).iter().map(|g| TrigramEmbedder::bucket(g)).collect();
        assert!(buckets_a.iter().all(|x| !buckets_b.contains(x)));
        let p = TrigramEmbedder;
        let u = embed(&[a], &p).unwrap();
        let v = embed(&[b], &p).unwrap();
        assert_eq!(cosine(&u.values, &v.values).unwrap(), 0.0);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert_eq!(embed::<&str>(&[], &TrigramEmbedder), Err(TextError::EmptyInput));
    }

    #[test]
    fn external_provider_lookup() {
        let body = format!("{}\t1,0,0\n{}\t0,1,0\n", text_key("x"), text_key("y"));
        let p = ExternalEmbeddings::parse("ext", &body).unwrap();
        assert_eq!(p.dimension(), 3);
        let v = embed(&["x", "y"], &p).unwrap();
        assert_eq!(v.values, vec![0.5, 0.5, 0.0]);
        assert!(matches!(p.embed_text("z"), Err(TextError::UnknownText(_))));
        assert!(ExternalEmbeddings::parse("ext", "k\t1,2\nj\t1\n").is_err());
    }
}
