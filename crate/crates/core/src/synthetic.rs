//! Seeded synthetic tweet corpora for desk-scale runs.
//!
//! Each class owns a few marker words made of random Arabic letters. A tweet
//! mixes filler words shared by all classes with one or two markers of its
//! class, plus `USER`/`NUM`/`URL` placeholders. A small fraction of tweets
//! carry another class's marker instead, so scores stay below 100.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, LabeledExample};
use crate::error::{Error, Result};

pub const COUNTRY_LABELS: [&str; 18] = [
    "Algeria",
    "Bahrain",
    "Egypt",
    "Iraq",
    "Jordan",
    "Kuwait",
    "Lebanon",
    "Libya",
    "Morocco",
    "Oman",
    "Palestine",
    "Qatar",
    "Saudi_Arabia",
    "Sudan",
    "Syria",
    "Tunisia",
    "UAE",
    "Yemen",
];

const LETTERS: &[char] = &[
    'ا', 'ب', 'ت', 'ث', 'ج', 'ح', 'خ', 'د', 'ذ', 'ر', 'ز', 'س', 'ش', 'ص', 'ض', 'ط', 'ظ', 'ع', 'غ', 'ف', 'ق',
    'ك', 'ل', 'م', 'ن', 'ه', 'و', 'ي',
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub classes: usize,
    pub per_class: usize,
    pub markers_per_class: usize,
    pub filler_words: usize,
    /// Per-tweet chance of carrying a marker from a different class.
    pub confusion_rate: f64,
    /// Per-position chance of inserting a placeholder token.
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            classes: 18,
            per_class: 500,
            markers_per_class: 3,
            filler_words: 300,
            confusion_rate: 0.03,
            noise_rate: 0.15,
            seed: 2023,
        }
    }
}

fn random_word(rng: &mut ChaCha8Rng, min_len: usize, max_len: usize) -> String {
    let len = rng.gen_range(min_len..=max_len);
    (0..len).map(|_| *LETTERS.choose(rng).expect("letters")).collect()
}

pub fn class_label(k: usize) -> String {
    COUNTRY_LABELS
        .get(k)
        .map(|s| s.to_string())
        .unwrap_or_else(|| format!("class_{k:03}"))
}

/// Generates a labeled corpus in shuffled order with ids `tw000000`, ...
pub fn generate(config: &SyntheticConfig) -> Result<Corpus> {
    if config.classes < 2 || config.per_class == 0 || config.markers_per_class == 0 || config.filler_words == 0 {
        return Err(Error::validation("synthetic corpus needs >= 2 classes and non-zero sizes"));
    }
    if !(0.0..=1.0).contains(&config.confusion_rate) || !(0.0..1.0).contains(&config.noise_rate) {
        return Err(Error::validation("synthetic rates must be probabilities"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let filler: Vec<String> = (0..config.filler_words).map(|_| random_word(&mut rng, 2, 5)).collect();
    let markers: Vec<Vec<String>> = (0..config.classes)
        .map(|_| {
            (0..config.markers_per_class)
                .map(|_| random_word(&mut rng, 5, 7))
                .collect()
        })
        .collect();

    let mut rows: Vec<(String, usize)> = Vec::with_capacity(config.classes * config.per_class);
    for class in 0..config.classes {
        for _ in 0..config.per_class {
            let mut words: Vec<String> = (0..rng.gen_range(4..=10))
                .map(|_| filler.choose(&mut rng).expect("filler").clone())
                .collect();
            let source = if rng.gen_bool(config.confusion_rate) {
                (class + rng.gen_range(1..config.classes)) % config.classes
            } else {
                class
            };
            for _ in 0..rng.gen_range(1..=2) {
                let marker = markers[source].choose(&mut rng).expect("markers").clone();
                let at = rng.gen_range(0..=words.len());
                words.insert(at, marker);
            }
            let mut tokens = Vec::with_capacity(words.len() + 4);
            if rng.gen_bool(0.5) {
                tokens.push("USER".to_string());
            }
            for w in words {
                if rng.gen_bool(config.noise_rate) {
                    tokens.push(if rng.gen_bool(0.5) { "NUM" } else { "USER" }.to_string());
                }
                tokens.push(w);
            }
            if rng.gen_bool(0.3) {
                tokens.push("URL".to_string());
            }
            rows.push((tokens.join(" "), class));
        }
    }
    rows.shuffle(&mut rng);

    let examples = rows
        .into_iter()
        .enumerate()
        .map(|(i, (content, class))| LabeledExample {
            id: format!("tw{i:06}"),
            content,
            label: Some(class_label(class)),
        })
        .collect();
    Corpus::new(examples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_labels_and_determinism() {
        let cfg = SyntheticConfig {
            per_class: 20,
            ..Default::default()
        };
        let a = generate(&cfg).unwrap();
        assert_eq!(a.len(), 360);
        assert_eq!(a.label_space().len(), 18);
        assert_eq!(a, generate(&cfg).unwrap());
        assert!(a.examples().iter().any(|e| e.content.split(' ').any(|t| t == "USER")));
    }

    #[test]
    fn rejects_degenerate_configs() {
        assert!(generate(&SyntheticConfig { classes: 1, ..Default::default() }).is_err());
        assert!(generate(&SyntheticConfig { confusion_rate: 2.0, ..Default::default() }).is_err());
    }
}
