//! Character n-gram vocabulary with document frequencies, and TF-IDF
//! vectorization against it.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every character n-gram of `text` with length in `n_min..=n_max`, in order of
/// occurrence. N-grams are taken over Unicode scalar values, not bytes.
pub fn char_ngrams(text: &str, n_min: usize, n_max: usize) -> Vec<&str> {
    let bounds: Vec<usize> = text
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(text.len()))
        .collect();
    let chars = bounds.len() - 1;
    let mut out = Vec::new();
    for n in n_min..=n_max {
        if n == 0 || n > chars {
            continue;
        }
        for start in 0..=chars - n {
            out.push(&text[bounds[start]..bounds[start + n]]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyParts", into = "VocabularyParts")]
pub struct NgramVocabulary {
    pub n_min: usize,
    pub n_max: usize,
    /// N-grams in index order (sorted by code point).
    tokens: Vec<String>,
    document_frequency: Vec<u64>,
    num_documents: u64,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyParts {
    n_min: usize,
    n_max: usize,
    num_documents: u64,
    tokens: Vec<String>,
    document_frequency: Vec<u64>,
}

impl TryFrom<VocabularyParts> for NgramVocabulary {
    type Error = Error;

    fn try_from(p: VocabularyParts) -> Result<Self> {
        NgramVocabulary::from_parts(p.n_min, p.n_max, p.tokens, p.document_frequency, p.num_documents)
    }
}

impl From<NgramVocabulary> for VocabularyParts {
    fn from(v: NgramVocabulary) -> Self {
        VocabularyParts {
            n_min: v.n_min,
            n_max: v.n_max,
            num_documents: v.num_documents,
            tokens: v.tokens,
            document_frequency: v.document_frequency,
        }
    }
}

impl NgramVocabulary {
    /// Rebuilds a vocabulary from its stored parts, checking the invariants.
    pub fn from_parts(
        n_min: usize,
        n_max: usize,
        tokens: Vec<String>,
        document_frequency: Vec<u64>,
        num_documents: u64,
    ) -> Result<Self> {
        if n_min == 0 || n_min > n_max {
            return Err(Error::validation(format!(
                "invalid n-gram range {n_min}..={n_max}"
            )));
        }
        if tokens.len() != document_frequency.len() {
            return Err(Error::validation("token and document-frequency lengths differ"));
        }
        if document_frequency.iter().any(|&df| df == 0 || df > num_documents) {
            return Err(Error::validation("document frequency out of range"));
        }
        let index: HashMap<String, usize> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if index.len() != tokens.len() {
            return Err(Error::validation("duplicate n-gram in vocabulary"));
        }
        Ok(NgramVocabulary {
            n_min,
            n_max,
            tokens,
            document_frequency,
            num_documents,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn document_frequency(&self) -> &[u64] {
        &self.document_frequency
    }

    pub fn num_documents(&self) -> u64 {
        self.num_documents
    }

    pub fn index_of(&self, ngram: &str) -> Option<usize> {
        self.index.get(ngram).copied()
    }

    /// Smoothed inverse document frequency: `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, index: usize) -> f64 {
        let n = self.num_documents as f64;
        let df = self.document_frequency[index] as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    /// Counts n-grams over `texts` and keeps the `max_features` with the
    /// highest document frequency, breaking ties by the n-gram itself.
    pub fn fit<S: AsRef<str>>(texts: &[S], n_min: usize, n_max: usize, max_features: usize) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::validation("cannot fit a vocabulary on zero texts"));
        }
        if n_min == 0 || n_min > n_max {
            return Err(Error::validation(format!(
                "invalid n-gram range {n_min}..={n_max}"
            )));
        }
        if max_features == 0 {
            return Err(Error::validation("max_features must be at least 1"));
        }

        let mut df: HashMap<&str, u64> = HashMap::new();
        let mut seen: HashSet<&str> = HashSet::new();
        for text in texts {
            seen.clear();
            for gram in char_ngrams(text.as_ref(), n_min, n_max) {
                if seen.insert(gram) {
                    *df.entry(gram).or_insert(0) += 1;
                }
            }
        }

        let mut ranked: Vec<(&str, u64)> = df.into_iter().collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_features);
        ranked.sort_unstable_by(|a, b| a.0.cmp(b.0));

        let (tokens, document_frequency) = ranked
            .into_iter()
            .map(|(g, d)| (g.to_owned(), d))
            .unzip();
        Self::from_parts(n_min, n_max, tokens, document_frequency, texts.len() as u64)
    }

    /// TF-IDF features of `text`, L2-normalized. Unknown n-grams are ignored;
    /// a text with no known n-grams maps to the zero vector.
    pub fn vectorize(&self, text: &str) -> FeatureVector {
        let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
        for gram in char_ngrams(text, self.n_min, self.n_max) {
            if let Some(i) = self.index_of(gram) {
                *counts.entry(i).or_insert(0) += 1;
            }
        }
        let mut entries: Vec<(usize, f64)> = counts
            .into_iter()
            .map(|(i, tf)| (i, tf as f64 * self.idf(i)))
            .collect();
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for (_, w) in &mut entries {
                *w /= norm;
            }
        }
        FeatureVector { entries }
    }
}

/// Sparse feature vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FeatureVector {
    entries: Vec<(usize, f64)>,
}

impl FeatureVector {
    pub fn new(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::validation("duplicate index in feature vector"));
        }
        Ok(FeatureVector { entries })
    }

    pub fn zero() -> Self {
        FeatureVector::default()
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|&(_, w)| w == 0.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.entries.last().map(|e| e.0)
    }
}
