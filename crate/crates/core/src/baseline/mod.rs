//! Native baseline backend: character n-gram TF-IDF features feeding a
//! softmax classifier trained with AdamW.

pub mod adamw;
pub mod model;
pub mod train;
pub mod vocab;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use adamw::{adamw_step, AdamWConfig, AdamWState};
pub use model::{argmax, softmax, Gradients, Prediction, SoftmaxClassifier};
pub use train::{train, train_on_features, TrainConfig, TrainOutcome, BASELINE_LEARNING_RATE};
pub use vocab::{char_ngrams, FeatureVector, NgramVocabulary};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fsutil;
use crate::predfile::PredictionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub max_features: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            ngram_min: 2,
            ngram_max: 4,
            max_features: 50_000,
        }
    }
}

/// A fitted vocabulary plus the classifier trained on it.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub vocabulary: NgramVocabulary,
    pub classifier: SoftmaxClassifier,
    pub features: FeatureConfig,
    pub train_config: TrainConfig,
    pub loss_history: Vec<f64>,
}

impl BaselineModel {
    /// Fits the vocabulary on the training texts, then trains the classifier.
    pub fn fit(corpus: &Corpus, features: FeatureConfig, train_config: TrainConfig) -> Result<Self> {
        let texts: Vec<&str> = corpus.examples().iter().map(|e| e.content.as_str()).collect();
        let vocabulary = NgramVocabulary::fit(&texts, features.ngram_min, features.ngram_max, features.max_features)?;
        let outcome = train(corpus, &vocabulary, &train_config)?;
        Ok(BaselineModel {
            vocabulary,
            classifier: outcome.classifier,
            features,
            train_config,
            loss_history: outcome.loss_history,
        })
    }

    pub fn predict_text(&self, text: &str) -> Prediction {
        self.classifier.predict(&self.vocabulary.vectorize(text))
    }

    /// Predicts every example of `corpus`, with probabilities over the
    /// model's label space.
    pub fn predict_corpus(&self, corpus: &Corpus, model_id: &str) -> Result<PredictionSet> {
        let mut entries = Vec::with_capacity(corpus.len());
        let mut probabilities = Vec::with_capacity(corpus.len());
        for ex in corpus.examples() {
            let p = self.predict_text(&ex.content);
            entries.push((ex.id.clone(), p.label));
            probabilities.push(p.probabilities);
        }
        PredictionSet::with_probabilities(
            model_id,
            entries,
            self.classifier.label_space().to_vec(),
            probabilities,
        )
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let header = ModelHeader {
            vocabulary: self.vocabulary.clone(),
            label_space: self.classifier.label_space().to_vec(),
            num_classes: self.classifier.num_classes(),
            num_features: self.classifier.num_features(),
            features: self.features,
            train_config: self.train_config,
            loss_history: self.loss_history.clone(),
        };
        let header = serde_json::to_vec(&header).map_err(|e| Error::Format(e.to_string()))?;
        let params = self.classifier.weights().len() + self.classifier.bias().len();
        let mut out = Vec::with_capacity(MAGIC.len() + 12 + header.len() + 8 * params);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for p in self.classifier.weights().iter().chain(self.classifier.bias()) {
            out.extend_from_slice(&p.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = Reader { bytes, pos: 0 };
        if cursor.take(MAGIC.len())? != MAGIC {
            return Err(Error::Format("not a baseline model file".into()));
        }
        let version = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported model format version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let header_len = u64::from_le_bytes(cursor.take(8)?.try_into().unwrap()) as usize;
        let header: ModelHeader =
            serde_json::from_slice(cursor.take(header_len)?).map_err(|e| Error::Format(e.to_string()))?;
        if header.label_space.len() != header.num_classes || header.vocabulary.len() != header.num_features {
            return Err(Error::Format("header dimensions are inconsistent".into()));
        }
        let n_weights = header.num_classes * header.num_features;
        let mut read_floats = |n: usize| -> Result<Vec<f64>> {
            Ok(cursor
                .take(n * 8)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let weights = read_floats(n_weights)?;
        let bias = read_floats(header.num_classes)?;
        if cursor.pos != bytes.len() {
            return Err(Error::Format("trailing bytes after parameters".into()));
        }
        let classifier = SoftmaxClassifier::from_parts(header.label_space, header.num_features, weights, bias)?;
        Ok(BaselineModel {
            vocabulary: header.vocabulary,
            classifier,
            features: header.features,
            train_config: header.train_config,
            loss_history: header.loss_history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_bytes()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fsutil::read_bytes(path)?).map_err(|e| match e {
            Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

const MAGIC: &[u8; 8] = b"DIALECTM";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    vocabulary: NgramVocabulary,
    label_space: Vec<String>,
    num_classes: usize,
    num_features: usize,
    features: FeatureConfig,
    train_config: TrainConfig,
    loss_history: Vec<f64>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::Format("model file is truncated".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LabeledExample;

    fn small_model() -> BaselineModel {
        let corpus = Corpus::new(vec![
            LabeledExample::new("1", "شلونك", Some("IQ")),
            LabeledExample::new("2", "ازيك", Some("EG")),
            LabeledExample::new("3", "كيفك", Some("LB")),
        ])
        .unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            ..TrainConfig::baseline_profile()
        };
        BaselineModel::fit(&corpus, FeatureConfig::default(), cfg).unwrap()
    }

    #[test]
    fn model_file_round_trips() {
        let m = small_model();
        let back = BaselineModel::from_bytes(&m.to_bytes().unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.predict_text("ازيك").label, "EG");
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = small_model().to_bytes().unwrap();
        bytes[8] = 2;
        let err = BaselineModel::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version 2"), "{err}");
    }

    #[test]
    fn truncation_and_garbage_are_rejected() {
        let bytes = small_model().to_bytes().unwrap();
        assert!(BaselineModel::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(BaselineModel::from_bytes(&extra).is_err());
        assert!(BaselineModel::from_bytes(b"garbage").is_err());
    }

    #[test]
    fn parameters_are_little_endian_f64_at_file_tail() {
        let m = small_model();
        let bytes = m.to_bytes().unwrap();
        let k = m.classifier.num_classes();
        let tail = &bytes[bytes.len() - 8 * k..];
        for (chunk, b) in tail.chunks_exact(8).zip(m.classifier.bias()) {
            assert_eq!(f64::from_le_bytes(chunk.try_into().unwrap()), *b);
        }
    }
}
