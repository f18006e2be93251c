//! Tabular tweet corpora: loading, validation, saving and seeded splitting.
//!
//! Two on-disk layouts are supported. TSV is a strict tab split with a header
//! row naming at least `id` and `content` (and optionally `label`); fields may
//! not contain tabs or newlines. CSV follows RFC-4180 quoting, so any content
//! survives a round trip.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: String,
    pub content: String,
    pub label: Option<String>,
}

impl LabeledExample {
    pub fn new(id: impl Into<String>, content: impl Into<String>, label: Option<&str>) -> Self {
        LabeledExample {
            id: id.into(),
            content: content.into(),
            label: label.map(str::to_owned),
        }
    }
}

/// An ordered, validated collection of examples together with its label space.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    examples: Vec<LabeledExample>,
    label_space: Vec<String>,
}

impl Corpus {
    /// Builds a corpus whose label space is the sorted set of observed labels.
    pub fn new(examples: Vec<LabeledExample>) -> Result<Self> {
        validate_examples(&examples)?;
        let label_space = observed_labels(&examples);
        Ok(Corpus {
            examples,
            label_space,
        })
    }

    /// Builds a corpus over a fixed label space, which must cover every label
    /// that appears in `examples`.
    pub fn with_label_space(examples: Vec<LabeledExample>, label_space: Vec<String>) -> Result<Self> {
        validate_examples(&examples)?;
        let mut sorted = label_space.clone();
        sorted.sort();
        sorted.dedup();
        if sorted != label_space {
            return Err(Error::validation(
                "label space must be sorted and free of duplicates",
            ));
        }
        for ex in &examples {
            if let Some(label) = &ex.label {
                if label_space.binary_search(label).is_err() {
                    return Err(Error::validation(format!(
                        "example `{}` has label `{label}` outside the label space",
                        ex.id
                    )));
                }
            }
        }
        Ok(Corpus {
            examples,
            label_space,
        })
    }

    pub fn empty() -> Self {
        Corpus {
            examples: Vec::new(),
            label_space: Vec::new(),
        }
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }

    pub fn label_space(&self) -> &[String] {
        &self.label_space
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.examples.iter().map(|e| e.id.clone()).collect()
    }

    pub fn is_fully_labeled(&self) -> bool {
        self.examples.iter().all(|e| e.label.is_some())
    }

    /// Gold labels in example order; errors on the first unlabeled example.
    pub fn gold_labels(&self) -> Result<Vec<String>> {
        self.examples
            .iter()
            .map(|e| {
                e.label
                    .clone()
                    .ok_or_else(|| Error::validation(format!("example `{}` has no label", e.id)))
            })
            .collect()
    }

    /// Class index of each example's label within the label space.
    pub fn class_indices(&self) -> Result<Vec<usize>> {
        self.examples
            .iter()
            .map(|e| match &e.label {
                Some(label) => Ok(self.label_space.binary_search(label).expect("validated")),
                None => Err(Error::validation(format!("example `{}` has no label", e.id))),
            })
            .collect()
    }

    /// Replaces every content string, keeping ids, labels and order.
    pub fn map_content(&self, mut f: impl FnMut(&str) -> String) -> Corpus {
        let examples = self
            .examples
            .iter()
            .map(|e| LabeledExample {
                id: e.id.clone(),
                content: f(&e.content),
                label: e.label.clone(),
            })
            .collect();
        Corpus {
            examples,
            label_space: self.label_space.clone(),
        }
    }

    pub fn retain(&self, mut keep: impl FnMut(&LabeledExample) -> bool) -> Corpus {
        Corpus {
            examples: self.examples.iter().filter(|e| keep(e)).cloned().collect(),
            label_space: self.label_space.clone(),
        }
    }

    /// Concatenates corpora in order. Ids must stay unique across inputs.
    pub fn concat(parts: &[Corpus]) -> Result<Corpus> {
        let examples: Vec<_> = parts.iter().flat_map(|c| c.examples.iter().cloned()).collect();
        let spaces: BTreeSet<String> = parts
            .iter()
            .flat_map(|c| c.label_space.iter().cloned())
            .collect();
        Corpus::with_label_space(examples, spaces.into_iter().collect())
    }
}

fn validate_examples(examples: &[LabeledExample]) -> Result<()> {
    let mut seen = HashSet::with_capacity(examples.len());
    for ex in examples {
        if ex.id.is_empty() {
            return Err(Error::validation("example with empty id"));
        }
        if !seen.insert(ex.id.as_str()) {
            return Err(Error::validation(format!("duplicate id `{}`", ex.id)));
        }
        if ex.label.as_deref() == Some("") {
            return Err(Error::validation(format!(
                "example `{}` has an empty label string",
                ex.id
            )));
        }
    }
    Ok(())
}

fn observed_labels(examples: &[LabeledExample]) -> Vec<String> {
    examples
        .iter()
        .filter_map(|e| e.label.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusFormat {
    Tsv,
    Csv,
}

impl CorpusFormat {
    /// Guesses the format from a file extension, defaulting to TSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Tsv,
        }
    }
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(CorpusFormat::Tsv),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::validation(format!("unknown corpus format `{other}`"))),
        }
    }
}

impl fmt::Display for CorpusFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusFormat::Tsv => "tsv",
            CorpusFormat::Csv => "csv",
        })
    }
}

struct Columns {
    count: usize,
    id: usize,
    content: usize,
    label: Option<usize>,
}

impl Columns {
    fn from_header<'a>(path: &Path, names: impl Iterator<Item = &'a str>) -> Result<Self> {
        let names: Vec<&str> = names.map(str::trim).collect();
        let find = |name: &str| names.iter().position(|n| *n == name);
        let missing = |col: &str| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("header has no `{col}` column"),
        };
        Ok(Columns {
            count: names.len(),
            id: find("id").ok_or_else(|| missing("id"))?,
            content: find("content").ok_or_else(|| missing("content"))?,
            label: find("label"),
        })
    }

    fn example(&self, fields: &[&str]) -> LabeledExample {
        LabeledExample {
            id: fields[self.id].to_owned(),
            content: fields[self.content].to_owned(),
            label: self
                .label
                .map(|i| fields[i])
                .filter(|l| !l.is_empty())
                .map(str::to_owned),
        }
    }
}

pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Corpus> {
    let bytes = fsutil::read_bytes(path)?;
    let examples = match format {
        CorpusFormat::Tsv => parse_tsv(path, &bytes)?,
        CorpusFormat::Csv => parse_csv(path, &bytes)?,
    };
    Corpus::new(examples)
}

fn parse_tsv(path: &Path, bytes: &[u8]) -> Result<Vec<LabeledExample>> {
    let mut lines = bytes.split(|&b| b == b'\n').enumerate().peekable();
    let decode = |(idx, raw): (usize, &[u8])| -> Result<(usize, String)> {
        let raw = raw.strip_suffix(b"\r").unwrap_or(raw);
        let text = std::str::from_utf8(raw).map_err(|_| Error::Encoding {
            path: path.to_path_buf(),
            line: idx + 1,
        })?;
        Ok((idx + 1, text.to_owned()))
    };

    let header = match lines.next() {
        Some(first) if !(first.1.is_empty() && lines.peek().is_none()) => decode(first)?,
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "missing header row".into(),
            })
        }
    };
    let columns = Columns::from_header(path, header.1.split('\t'))?;

    let mut examples = Vec::new();
    while let Some(item) = lines.next() {
        // A trailing newline produces one final empty piece.
        if item.1.is_empty() && lines.peek().is_none() {
            break;
        }
        let (line, text) = decode(item)?;
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != columns.count {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!(
                    "expected {} columns, found {}",
                    columns.count,
                    fields.len()
                ),
            });
        }
        examples.push(columns.example(&fields));
    }
    Ok(examples)
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Vec<LabeledExample>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let map_err = |e: csv::Error| {
        let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
        match e.kind() {
            csv::ErrorKind::Utf8 { .. } => Error::Encoding {
                path: path.to_path_buf(),
                line,
            },
            csv::ErrorKind::Io(_) => Error::io(path, std::io::Error::other(e.to_string())),
            _ => Error::Parse {
                path: path.to_path_buf(),
                line,
                message: e.to_string(),
            },
        }
    };
    let header = reader.headers().map_err(map_err)?.clone();
    if header.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "missing header row".into(),
        });
    }
    let columns = Columns::from_header(path, header.iter())?;
    let mut examples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(map_err)?;
        let fields: Vec<&str> = record.iter().collect();
        examples.push(columns.example(&fields));
    }
    Ok(examples)
}

/// Serializes a corpus to bytes. The label column is written only when at
/// least one example is labeled or the label space is non-empty.
pub fn corpus_to_bytes(corpus: &Corpus, format: CorpusFormat) -> Result<Vec<u8>> {
    let with_label = !corpus.label_space.is_empty() || corpus.examples.iter().any(|e| e.label.is_some());
    match format {
        CorpusFormat::Tsv => {
            let mut out = String::new();
            out.push_str(if with_label { "id\tcontent\tlabel\n" } else { "id\tcontent\n" });
            for ex in &corpus.examples {
                let label = ex.label.as_deref().unwrap_or("");
                for (name, field) in [("id", ex.id.as_str()), ("content", &ex.content), ("label", label)] {
                    if field.contains(['\t', '\n', '\r']) {
                        return Err(Error::validation(format!(
                            "example `{}`: {name} contains a tab or newline and cannot be written as TSV; use CSV",
                            ex.id
                        )));
                    }
                }
                out.push_str(&ex.id);
                out.push('\t');
                out.push_str(&ex.content);
                if with_label {
                    out.push('\t');
                    out.push_str(label);
                }
                out.push('\n');
            }
            Ok(out.into_bytes())
        }
        CorpusFormat::Csv => {
            let mut writer = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            let write_err = |e: csv::Error| Error::validation(format!("csv serialization: {e}"));
            if with_label {
                writer.write_record(["id", "content", "label"]).map_err(write_err)?;
            } else {
                writer.write_record(["id", "content"]).map_err(write_err)?;
            }
            for ex in &corpus.examples {
                if with_label {
                    writer
                        .write_record([ex.id.as_str(), &ex.content, ex.label.as_deref().unwrap_or("")])
                        .map_err(write_err)?;
                } else {
                    writer.write_record([ex.id.as_str(), &ex.content]).map_err(write_err)?;
                }
            }
            writer
                .into_inner()
                .map_err(|e| Error::validation(format!("csv serialization: {e}")))
        }
    }
}

pub fn save_corpus(corpus: &Corpus, path: &Path, format: CorpusFormat) -> Result<()> {
    let bytes = corpus_to_bytes(corpus, format)?;
    fsutil::write_atomic(path, &bytes)
}

/// Train/dev/test proportions plus the shuffle seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(train: f64, dev: f64, test: f64, seed: u64) -> Result<Self> {
        let spec = SplitSpec {
            train_fraction: train,
            dev_fraction: dev,
            test_fraction: test,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// 18000/1800/3600 of 23400.
    pub fn shared_task(seed: u64) -> Self {
        SplitSpec {
            train_fraction: 10.0 / 13.0,
            dev_fraction: 1.0 / 13.0,
            test_fraction: 2.0 / 13.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [self.train_fraction, self.dev_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(Error::validation(format!(
                "split fractions must lie in [0, 1], got {fractions:?}"
            )));
        }
        let sum: f64 = fractions.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::validation(format!(
                "split fractions must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }

    /// Split sizes for `n` examples; the test split absorbs rounding residue.
    pub fn sizes(&self, n: usize) -> Result<(usize, usize, usize)> {
        self.validate()?;
        let train = (n as f64 * self.train_fraction).round() as usize;
        let dev = (n as f64 * self.dev_fraction).round() as usize;
        let test = n.saturating_sub(train + dev);
        let empty: Vec<&str> = [("train", train), ("dev", dev), ("test", test)]
            .iter()
            .filter(|(_, size)| *size == 0)
            .map(|(name, _)| *name)
            .collect();
        if !empty.is_empty() || train + dev > n {
            return Err(Error::validation(format!(
                "degenerate split of {n} examples: {} empty (sizes {train}/{dev}/{test})",
                if empty.is_empty() { "test".to_string() } else { empty.join(" and ") },
            )));
        }
        Ok((train, dev, test))
    }
}

/// Parses a fraction written either as a decimal (`0.8`) or a ratio (`10/13`).
pub fn parse_fraction(s: &str) -> Result<f64> {
    let bad = || Error::validation(format!("invalid fraction `{s}`"));
    match s.split_once('/') {
        Some((num, den)) => {
            let num: f64 = num.trim().parse().map_err(|_| bad())?;
            let den: f64 = den.trim().parse().map_err(|_| bad())?;
            if den == 0.0 {
                return Err(bad());
            }
            Ok(num / den)
        }
        None => s.trim().parse().map_err(|_| bad()),
    }
}

/// Seeded partition into train, dev and test. Each split keeps the parent's
/// label space and the relative file order of its members.
pub fn split_corpus(corpus: &Corpus, spec: &SplitSpec) -> Result<(Corpus, Corpus, Corpus)> {
    if corpus.is_empty() {
        return Err(Error::validation("cannot split an empty corpus"));
    }
    let (n_train, n_dev, _) = spec.sizes(corpus.len())?;
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    order.shuffle(&mut rng);

    let take = |slice: &[usize]| -> Corpus {
        let mut picked = slice.to_vec();
        picked.sort_unstable();
        Corpus {
            examples: picked.iter().map(|&i| corpus.examples[i].clone()).collect(),
            label_space: corpus.label_space.clone(),
        }
    };
    Ok((
        take(&order[..n_train]),
        take(&order[n_train..n_train + n_dev]),
        take(&order[n_train + n_dev..]),
    ))
}
