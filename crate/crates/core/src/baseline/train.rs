use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adamw::{adamw_step, AdamWConfig, AdamWState};
use super::model::{Gradients, SoftmaxClassifier};
use super::vocab::{FeatureVector, NgramVocabulary};
use crate::corpus::Corpus;
use crate::error::{Error, Result};

/// Learning rate used by the `baseline` profile. The fine-tuning rate of
/// 1e-5 barely moves a zero-initialized linear model in ten epochs.
pub const BASELINE_LEARNING_RATE: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: AdamWConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    /// 10 epochs, lr 1e-5, batch 32, AdamW.
    fn default() -> Self {
        TrainConfig {
            epochs: 10,
            learning_rate: 1e-5,
            batch_size: 32,
            optimizer: AdamWConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Same schedule as the default, with [`BASELINE_LEARNING_RATE`].
    pub fn baseline_profile() -> Self {
        TrainConfig {
            learning_rate: BASELINE_LEARNING_RATE,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::validation("learning_rate must be a positive finite number"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub classifier: SoftmaxClassifier,
    /// Mean per-example training loss of each epoch, measured before each
    /// batch's update.
    pub loss_history: Vec<f64>,
}

/// Fits a zero-initialized softmax classifier on `corpus` with minibatch AdamW.
///
/// The example order is reshuffled every epoch from a single generator seeded
/// with `config.seed`, so the result depends only on the inputs.
pub fn train(corpus: &Corpus, vocab: &NgramVocabulary, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let labels = corpus.label_space().to_vec();
    if labels.len() < 2 {
        return Err(Error::validation(format!(
            "training needs at least 2 classes, found {}",
            labels.len()
        )));
    }
    if corpus.is_empty() {
        return Err(Error::validation("training corpus is empty"));
    }
    let targets = corpus.class_indices()?;
    let features: Vec<FeatureVector> = corpus
        .examples()
        .iter()
        .map(|e| vocab.vectorize(&e.content))
        .collect();
    train_on_features(&features, &targets, labels, vocab.len(), config)
}

pub fn train_on_features(
    features: &[FeatureVector],
    targets: &[usize],
    label_space: Vec<String>,
    num_features: usize,
    config: &TrainConfig,
) -> Result<TrainOutcome> {
    config.validate()?;
    if features.len() != targets.len() || features.is_empty() {
        return Err(Error::validation("features and targets must be non-empty and equal in length"));
    }
    let mut classifier = SoftmaxClassifier::zeros(label_space, num_features);
    let mut weight_state = AdamWState::new(classifier.weights().len());
    let mut bias_state = AdamWState::new(classifier.bias().len());
    let mut grads = Gradients {
        weights: vec![0.0; classifier.weights().len()],
        bias: vec![0.0; classifier.bias().len()],
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut batch: Vec<(&FeatureVector, usize)> = Vec::with_capacity(config.batch_size);

    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| (&features[i], targets[i])));
            let loss = classifier.accumulate_gradient(&batch, &mut grads)?;
            epoch_loss += loss * chunk.len() as f64;
            adamw_step(
                classifier.weights_mut(),
                &grads.weights,
                &mut weight_state,
                config.learning_rate,
                &config.optimizer,
                true,
            )?;
            adamw_step(
                classifier.bias_mut(),
                &grads.bias,
                &mut bias_state,
                config.learning_rate,
                &config.optimizer,
                false,
            )?;
        }
        loss_history.push(epoch_loss / features.len() as f64);
    }
    Ok(TrainOutcome {
        classifier,
        loss_history,
    })
}
