//! The prediction-file protocol shared by every backend.
//!
//! A prediction file is UTF-8 TSV with LF line endings:
//!
//! ```text
//! #model_id<TAB>arabert-twitter
//! example_id<TAB>label[<TAB>p:<label_1> ... <TAB>p:<label_K>]
//! 1001<TAB>Egypt[<TAB>0.91 ... ]
//! ```
//!
//! The `#model_id` line is optional on input (the file stem is used when it
//! is missing). The optional `p:` columns declare the label space, in order,
//! and each row's probabilities must sum to 1 within [`PROBABILITY_TOLERANCE`].
//! Probabilities are written in shortest round-trip form, so reading and
//! re-writing a file reproduces it byte for byte.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsutil;

pub const PROBABILITY_TOLERANCE: f64 = 1e-6;
const MODEL_ID_PREFIX: &str = "#model_id\t";
const PROB_PREFIX: &str = "p:";

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    model_id: String,
    entries: Vec<(String, String)>,
    label_space: Option<Vec<String>>,
    probabilities: Option<Vec<Vec<f64>>>,
}

impl PredictionSet {
    pub fn new(model_id: impl Into<String>, entries: Vec<(String, String)>) -> Result<Self> {
        let set = PredictionSet {
            model_id: model_id.into(),
            entries,
            label_space: None,
            probabilities: None,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn with_probabilities(
        model_id: impl Into<String>,
        entries: Vec<(String, String)>,
        label_space: Vec<String>,
        probabilities: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let set = PredictionSet {
            model_id: model_id.into(),
            entries,
            label_space: Some(label_space),
            probabilities: Some(probabilities),
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.model_id.is_empty() || self.model_id.contains(['\t', '\n', '\r']) {
            return Err(Error::validation(format!("invalid model id {:?}", self.model_id)));
        }
        let mut seen = HashSet::with_capacity(self.entries.len());
        for (row, (id, label)) in self.entries.iter().enumerate() {
            if id.is_empty() || label.is_empty() {
                return Err(Error::validation(format!("row {}: empty id or label", row + 1)));
            }
            if [id, label].iter().any(|f| f.contains(['\t', '\n', '\r'])) {
                return Err(Error::validation(format!("row {}: tab or newline in a field", row + 1)));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::validation(format!("duplicate example id `{id}`")));
            }
        }
        match (&self.label_space, &self.probabilities) {
            (None, None) => Ok(()),
            (Some(space), Some(probs)) => {
                if space.is_empty() || space.iter().collect::<HashSet<_>>().len() != space.len() {
                    return Err(Error::validation("label space must be non-empty and distinct"));
                }
                if probs.len() != self.entries.len() {
                    return Err(Error::validation("probability rows do not match entries"));
                }
                for (row, (p, (id, label))) in probs.iter().zip(&self.entries).enumerate() {
                    if p.len() != space.len() {
                        return Err(Error::validation(format!(
                            "row {} (`{id}`): {} probabilities for {} labels",
                            row + 1,
                            p.len(),
                            space.len()
                        )));
                    }
                    if p.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
                        return Err(Error::validation(format!(
                            "row {} (`{id}`): probability outside [0, 1]",
                            row + 1
                        )));
                    }
                    let sum: f64 = p.iter().sum();
                    if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                        return Err(Error::validation(format!(
                            "row {} (`{id}`): probabilities sum to {sum}",
                            row + 1
                        )));
                    }
                    if !space.contains(label) {
                        return Err(Error::validation(format!(
                            "row {} (`{id}`): label `{label}` not in the declared label space",
                            row + 1
                        )));
                    }
                }
                Ok(())
            }
            _ => Err(Error::validation("label space and probabilities must be given together")),
        }
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn with_model_id(mut self, model_id: impl Into<String>) -> Result<Self> {
        self.model_id = model_id.into();
        self.validate()?;
        Ok(self)
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(id, _)| id.as_str())
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(_, label)| label.as_str())
    }

    pub fn label_space(&self) -> Option<&[String]> {
        self.label_space.as_deref()
    }

    pub fn probabilities(&self) -> Option<&[Vec<f64>]> {
        self.probabilities.as_deref()
    }

    /// Checks that this set covers exactly `expected_ids`, in order.
    pub fn check_alignment<S: AsRef<str>>(&self, expected_ids: &[S]) -> Result<()> {
        let n = self.entries.len().max(expected_ids.len());
        for row in 0..n {
            let got = self.entries.get(row).map(|(id, _)| id.as_str());
            let want = expected_ids.get(row).map(AsRef::as_ref);
            let message = match (got, want) {
                (Some(g), Some(w)) if g == w => continue,
                (Some(g), Some(w)) => format!("expected id `{w}`, found `{g}`"),
                (None, Some(w)) => format!("missing id `{w}` (predictions end after {} rows)", self.entries.len()),
                (Some(g), None) => format!("extra id `{g}` beyond the {} expected rows", expected_ids.len()),
                (None, None) => unreachable!(),
            };
            return Err(Error::Alignment {
                row: row + 1,
                message: format!("{}: {message}", self.model_id),
            });
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> Result<String> {
        self.validate()?;
        let mut out = String::new();
        out.push_str(MODEL_ID_PREFIX);
        out.push_str(&self.model_id);
        out.push('\n');
        out.push_str("example_id\tlabel");
        if let Some(space) = &self.label_space {
            for label in space {
                out.push('\t');
                out.push_str(PROB_PREFIX);
                out.push_str(label);
            }
        }
        out.push('\n');
        for (row, (id, label)) in self.entries.iter().enumerate() {
            out.push_str(id);
            out.push('\t');
            out.push_str(label);
            if let Some(probs) = &self.probabilities {
                for p in &probs[row] {
                    out.push('\t');
                    out.push_str(&p.to_string());
                }
            }
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_tsv(text: &str, path: &Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.split('\n').enumerate().peekable();
        let mut model_id = None;
        if let Some((_, first)) = lines.peek() {
            if let Some(id) = first.strip_prefix(MODEL_ID_PREFIX) {
                model_id = Some(id.trim_end_matches('\r').to_owned());
                lines.next();
            }
        }
        let model_id = model_id.unwrap_or_else(|| {
            path.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "predictions".into())
        });

        let (header_idx, header) = lines
            .next()
            .filter(|(_, h)| !h.is_empty())
            .ok_or_else(|| parse_err(1, "missing header row".into()))?;
        let header: Vec<&str> = header.trim_end_matches('\r').split('\t').collect();
        if header.len() < 2 || header[0] != "example_id" || header[1] != "label" {
            return Err(parse_err(
                header_idx + 1,
                "header must start with `example_id<TAB>label`".into(),
            ));
        }
        let label_space: Vec<String> = header[2..]
            .iter()
            .map(|col| {
                col.strip_prefix(PROB_PREFIX)
                    .map(str::to_owned)
                    .ok_or_else(|| parse_err(header_idx + 1, format!("unexpected column `{col}`")))
            })
            .collect::<Result<_>>()?;

        let mut entries = Vec::new();
        let mut probabilities = Vec::new();
        while let Some((idx, line)) = lines.next() {
            if line.is_empty() && lines.peek().is_none() {
                break;
            }
            let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
            if fields.len() != header.len() {
                return Err(parse_err(
                    idx + 1,
                    format!("expected {} columns, found {}", header.len(), fields.len()),
                ));
            }
            entries.push((fields[0].to_owned(), fields[1].to_owned()));
            if !label_space.is_empty() {
                let row = fields[2..]
                    .iter()
                    .map(|v| {
                        v.parse::<f64>()
                            .map_err(|_| parse_err(idx + 1, format!("invalid probability `{v}`")))
                    })
                    .collect::<Result<Vec<f64>>>()?;
                probabilities.push(row);
            }
        }

        if label_space.is_empty() {
            PredictionSet::new(model_id, entries)
        } else {
            PredictionSet::with_probabilities(model_id, entries, label_space, probabilities)
        }
    }
}

/// Writes `set` atomically. Invalid sets are refused before touching disk.
pub fn write_predictions(set: &PredictionSet, path: &Path) -> Result<()> {
    let text = set.to_tsv()?;
    fsutil::write_atomic(path, text.as_bytes())
}

/// Reads a prediction file without checking its ids against a gold order.
pub fn read_predictions_unaligned(path: &Path) -> Result<PredictionSet> {
    let bytes = fsutil::read_bytes(path)?;
    let text = String::from_utf8(bytes).map_err(|e| {
        let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        Error::Encoding {
            path: path.to_path_buf(),
            line,
        }
    })?;
    PredictionSet::from_tsv(&text, path)
}

/// Reads a prediction file whose ids must be exactly `expected_ids`, in order.
pub fn read_predictions<S: AsRef<str>>(path: &Path, expected_ids: &[S]) -> Result<PredictionSet> {
    let set = read_predictions_unaligned(path)?;
    set.check_alignment(expected_ids)?;
    Ok(set)
}

/// Leaderboard-style export: one label per line, no header, in entry order.
pub fn write_submission(set: &PredictionSet, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(set.len() * 8);
    for label in set.labels() {
        out.push_str(label);
        out.push('\n');
    }
    fsutil::write_atomic(path, out.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    NativeBaseline,
    External,
}

/// Provenance for one model participating in a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendManifest {
    pub model_id: String,
    pub backend_kind: BackendKind,
    /// Hyperparameters the backend ran with, as free-form JSON.
    pub config: serde_json::Value,
    /// SHA-256 of the canonical JSON of `config`.
    pub config_fingerprint: String,
    pub created_unix: u64,
}

impl BackendManifest {
    pub fn new(model_id: impl Into<String>, backend_kind: BackendKind, config: serde_json::Value) -> Self {
        let fingerprint = fsutil::sha256_hex(config.to_string().as_bytes());
        BackendManifest {
            model_id: model_id.into(),
            backend_kind,
            config,
            config_fingerprint: fingerprint,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }
}

/// Rejects manifests whose model ids repeat.
pub fn check_unique_model_ids(manifests: &[BackendManifest]) -> Result<()> {
    let mut seen = HashSet::new();
    for m in manifests {
        if m.model_id.is_empty() || !seen.insert(m.model_id.as_str()) {
            return Err(Error::validation(format!("model id `{}` is empty or repeated", m.model_id)));
        }
    }
    Ok(())
}
