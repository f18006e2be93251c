//! Declarative run configuration (TOML).
//!
//! ```toml
//! output_dir = "runs/desk"
//!
//! [corpus]
//! data = ["train.tsv"]          # concatenated, then split
//! extra_train = []              # appended to the training split only
//!
//! [split]
//! fractions = ["10/13", "1/13", "2/13"]
//! seed = 13
//!
//! [cleaning]
//! noise_tokens = ["USER", "NUM", "URL"]
//!
//! [[backend]]
//! kind = "native"
//! model_id = "baseline-s1"
//! seed = 1
//!
//! [[backend]]
//! kind = "external"
//! model_id = "arabert-twitter"
//! dev_predictions = "preds/arabert.dev.tsv"
//! test_predictions = "preds/arabert.test.tsv"
//!
//! [ensemble]
//! strategy = "hard"
//! tie_break = "model-priority"
//!
//! [evaluation]
//! average = "macro"
//! digits = 2
//! ```
//!
//! Instead of `data` + `[split]`, a config may name pre-split `train`, `dev`
//! and `test` files. Relative paths resolve against the config file's
//! directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baseline::{AdamWConfig, FeatureConfig, TrainConfig, BASELINE_LEARNING_RATE};
use crate::corpus::{parse_fraction, CorpusFormat, SplitSpec};
use crate::ensemble::VotePolicy;
use crate::error::{Error, Result};
use crate::eval::Average;
use crate::fsutil;
use crate::preprocess::CleaningConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Upper bound on native models trained at once; unset means all of them.
    #[serde(default)]
    pub threads: Option<usize>,
    pub corpus: CorpusSection,
    #[serde(default)]
    pub split: Option<SplitSection>,
    #[serde(default)]
    pub cleaning: CleaningConfig,
    #[serde(default, rename = "backend")]
    pub backends: Vec<BackendConfig>,
    #[serde(default)]
    pub ensemble: VotePolicy,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    pub format: Option<CorpusFormat>,
    pub data: Vec<PathBuf>,
    pub train: Vec<PathBuf>,
    pub dev: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub extra_train: Vec<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Fraction {
    Number(f64),
    Text(String),
}

impl Fraction {
    pub fn value(&self) -> Result<f64> {
        match self {
            Fraction::Number(x) => Ok(*x),
            Fraction::Text(s) => parse_fraction(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub fractions: [Fraction; 3],
    #[serde(default)]
    pub seed: u64,
}

impl SplitSection {
    pub fn spec(&self) -> Result<SplitSpec> {
        SplitSpec::new(
            self.fractions[0].value()?,
            self.fractions[1].value()?,
            self.fractions[2].value()?,
            self.seed,
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainProfile {
    /// The fine-tuning recipe verbatim: 10 epochs, lr 1e-5, batch 32.
    FineTune,
    /// Same schedule with lr 1e-2, suited to a zero-initialized linear model.
    #[default]
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    Native(NativeBackend),
    External(ExternalBackend),
}

impl BackendConfig {
    pub fn model_id(&self) -> &str {
        match self {
            BackendConfig::Native(b) => &b.model_id,
            BackendConfig::External(b) => &b.model_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NativeBackend {
    pub model_id: String,
    #[serde(default)]
    pub profile: TrainProfile,
    #[serde(default)]
    pub seed: u64,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub weight_decay: Option<f64>,
    pub ngram_min: Option<usize>,
    pub ngram_max: Option<usize>,
    pub max_features: Option<usize>,
}

impl NativeBackend {
    pub fn new(model_id: impl Into<String>, seed: u64) -> Self {
        NativeBackend {
            model_id: model_id.into(),
            profile: TrainProfile::Baseline,
            seed,
            epochs: None,
            learning_rate: None,
            batch_size: None,
            weight_decay: None,
            ngram_min: None,
            ngram_max: None,
            max_features: None,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        let base = match self.profile {
            TrainProfile::FineTune => TrainConfig::default(),
            TrainProfile::Baseline => TrainConfig {
                learning_rate: BASELINE_LEARNING_RATE,
                ..TrainConfig::default()
            },
        };
        TrainConfig {
            epochs: self.epochs.unwrap_or(base.epochs),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            optimizer: AdamWConfig {
                weight_decay: self.weight_decay.unwrap_or(base.optimizer.weight_decay),
                ..base.optimizer
            },
            seed: self.seed,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        let base = FeatureConfig::default();
        FeatureConfig {
            ngram_min: self.ngram_min.unwrap_or(base.ngram_min),
            ngram_max: self.ngram_max.unwrap_or(base.ngram_max),
            max_features: self.max_features.unwrap_or(base.max_features),
        }
    }
}

/// A backend that ran elsewhere and handed over prediction files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalBackend {
    pub model_id: String,
    pub dev_predictions: Option<PathBuf>,
    pub test_predictions: Option<PathBuf>,
    /// Optional JSON manifest written by the backend.
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub average: Average,
    pub digits: usize,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            average: Average::Macro,
            digits: 2,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation(format!("config: {e}")))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::validation(format!("config: {e}")))
    }

    /// Reads a config file and resolves its relative paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fsutil::read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Encoding {
            path: path.to_path_buf(),
            line: 0,
        })?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(out) = &mut self.output_dir {
            fix(out);
        }
        let c = &mut self.corpus;
        c.data.iter_mut().chain(&mut c.train).chain(&mut c.extra_train).for_each(fix);
        c.dev.iter_mut().chain(&mut c.test).for_each(fix);
        for b in &mut self.backends {
            if let BackendConfig::External(e) = b {
                e.dev_predictions
                    .iter_mut()
                    .chain(&mut e.test_predictions)
                    .chain(&mut e.manifest)
                    .for_each(fix);
            }
        }
    }

    /// Replaces every seed: the split gets `seed`, native backend `i` (in
    /// config order) gets `seed + i`.
    pub fn override_seed(&mut self, seed: u64) {
        if let Some(split) = &mut self.split {
            split.seed = seed;
        }
        let natives = self.backends.iter_mut().filter_map(|b| match b {
            BackendConfig::Native(n) => Some(n),
            BackendConfig::External(_) => None,
        });
        for (i, native) in natives.enumerate() {
            native.seed = seed.wrapping_add(i as u64);
        }
    }

    /// Structural checks plus existence of every referenced input file.
    pub fn validate(&self) -> Result<()> {
        let c = &self.corpus;
        let pre_split = !c.train.is_empty() || c.dev.is_some() || c.test.is_some();
        match (c.data.is_empty(), pre_split) {
            (false, true) => {
                return Err(Error::validation(
                    "corpus: give either `data` (with [split]) or `train`/`dev`/`test`, not both",
                ))
            }
            (true, false) => return Err(Error::validation("corpus: no input files configured")),
            (false, false) => {
                let split = self
                    .split
                    .as_ref()
                    .ok_or_else(|| Error::validation("corpus.data requires a [split] section"))?;
                split.spec()?;
            }
            (true, true) => {
                if c.train.is_empty() {
                    return Err(Error::validation("corpus: pre-split configs need `train`"));
                }
                if c.dev.is_none() && c.test.is_none() {
                    return Err(Error::validation("corpus: pre-split configs need `dev` or `test`"));
                }
            }
        }
        self.cleaning.validate()?;

        if self.backends.len() < 2 {
            return Err(Error::validation(format!(
                "ensemble requires at least 2 models, config has {}",
                self.backends.len()
            )));
        }
        let mut ids = HashSet::new();
        for b in &self.backends {
            let id = b.model_id();
            if id.is_empty() || id.contains(['\t', '\n', '/', '\\']) {
                return Err(Error::validation(format!("invalid model id {id:?}")));
            }
            if id == crate::ensemble::ENSEMBLE_MODEL_ID {
                return Err(Error::validation("`ensemble` is reserved for the combined model"));
            }
            if !ids.insert(id) {
                return Err(Error::validation(format!("model id `{id}` is used twice")));
            }
            match b {
                BackendConfig::Native(n) => {
                    n.train_config().validate()?;
                    let f = n.feature_config();
                    if f.ngram_min == 0 || f.ngram_min > f.ngram_max || f.max_features == 0 {
                        return Err(Error::validation(format!("`{id}`: invalid n-gram settings")));
                    }
                }
                BackendConfig::External(e) => {
                    if e.dev_predictions.is_none() && e.test_predictions.is_none() {
                        return Err(Error::validation(format!("`{id}`: external backend names no prediction files")));
                    }
                }
            }
        }
        if !self.ensemble.model_priority.is_empty() {
            let ids: Vec<&str> = self.backends.iter().map(BackendConfig::model_id).collect();
            self.ensemble.validate_for(&ids)?;
        }

        let mut inputs: Vec<&PathBuf> = c.data.iter().chain(&c.train).chain(&c.extra_train).collect();
        inputs.extend(c.dev.iter().chain(&c.test));
        for b in &self.backends {
            if let BackendConfig::External(e) = b {
                inputs.extend(e.dev_predictions.iter().chain(&e.test_predictions).chain(&e.manifest));
            }
        }
        for path in inputs {
            if !path.is_file() {
                return Err(Error::io(
                    path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "referenced file does not exist"),
                ));
            }
        }
        Ok(())
    }

    pub fn corpus_format(&self, path: &Path) -> CorpusFormat {
        self.corpus.format.unwrap_or_else(|| CorpusFormat::from_path(path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
output_dir = "out"

[corpus]
data = ["all.tsv"]

[split]
fractions = ["10/13", "1/13", 0.15384615384615385]
seed = 5

[[backend]]
kind = "native"
model_id = "a"
seed = 1

[[backend]]
kind = "native"
model_id = "b"
profile = "fine-tune"
max_features = 100

[[backend]]
kind = "external"
model_id = "hf"
dev_predictions = "hf.dev.tsv"

[ensemble]
tie_break = "lexicographic"
"#;

    #[test]
    fn parses_and_resolves() {
        let mut cfg = RunConfig::from_toml(SAMPLE).unwrap();
        cfg.resolve_paths(Path::new("/base"));
        assert_eq!(cfg.output_dir.as_deref(), Some(Path::new("/base/out")));
        assert_eq!(cfg.corpus.data, [PathBuf::from("/base/all.tsv")]);
        assert_eq!(cfg.backends.len(), 3);
        let spec = cfg.split.as_ref().unwrap().spec().unwrap();
        assert_eq!(spec.sizes(23_400).unwrap(), (18_000, 1_800, 3_600));
        match &cfg.backends[1] {
            BackendConfig::Native(n) => {
                assert_eq!(n.train_config().learning_rate, 1e-5);
                assert_eq!(n.feature_config().max_features, 100);
            }
            _ => panic!(),
        }
        match &cfg.backends[0] {
            BackendConfig::Native(n) => assert_eq!(n.train_config().learning_rate, BASELINE_LEARNING_RATE),
            _ => panic!(),
        }
        assert_eq!(cfg.evaluation.digits, 2);
    }

    #[test]
    fn seed_override_is_per_backend() {
        let mut cfg = RunConfig::from_toml(SAMPLE).unwrap();
        cfg.override_seed(40);
        assert_eq!(cfg.split.as_ref().unwrap().seed, 40);
        let seeds: Vec<u64> = cfg
            .backends
            .iter()
            .filter_map(|b| match b {
                BackendConfig::Native(n) => Some(n.seed),
                _ => None,
            })
            .collect();
        assert_eq!(seeds, [40, 41]);
    }

    #[test]
    fn validation_catches_structural_problems() {
        let one_backend = SAMPLE.split("[[backend]]").next().unwrap().to_string()
            + "[[backend]]\nkind = \"native\"\nmodel_id = \"a\"\n";
        let err = RunConfig::from_toml(&one_backend).unwrap().validate().unwrap_err();
        assert!(err.to_string().contains("at least 2 models"), "{err}");

        let dup = SAMPLE.replace("model_id = \"b\"", "model_id = \"a\"");
        assert!(RunConfig::from_toml(&dup).unwrap().validate().is_err());

        let missing = RunConfig::from_toml(SAMPLE).unwrap().validate().unwrap_err();
        assert_eq!(missing.exit_code(), 2);

        assert!(RunConfig::from_toml("[corpus]\nbogus = 1\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = RunConfig::from_toml(SAMPLE).unwrap();
        let back = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }
}
