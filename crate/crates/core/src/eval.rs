//! Scoring: confusion matrices, macro-F1 and the results table.
//!
//! F1 here is macro-averaged over the whole label space: every class counts,
//! including ones with no gold examples, and any 0/0 ratio is taken as 0.
//! Scores are kept at full precision and only rounded when rendered.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::predfile::PredictionSet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    label_space: Vec<String>,
    /// Rows are gold classes, columns predicted classes.
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(label_space: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = label_space.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::validation(format!("confusion counts must be {k}x{k}")));
        }
        Ok(ConfusionMatrix { label_space, counts })
    }

    pub fn label_space(&self) -> &[String] {
        &self.label_space
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.counts[i][i]).sum()
    }

    fn row_sum(&self, k: usize) -> u64 {
        self.counts[k].iter().sum()
    }

    fn col_sum(&self, k: usize) -> u64 {
        self.counts.iter().map(|r| r[k]).sum()
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gold\\pred");
        for l in &self.label_space {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (l, row) in self.label_space.iter().zip(&self.counts) {
            out.push_str(l);
            for c in row {
                let _ = write!(out, "\t{c}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion_matrix<G, P>(gold: &[G], pred: &[P], label_space: &[String]) -> Result<ConfusionMatrix>
where
    G: AsRef<str>,
    P: AsRef<str>,
{
    if gold.len() != pred.len() {
        return Err(Error::validation(format!(
            "gold has {} labels but predictions have {}",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(Error::validation("nothing to score"));
    }
    let index: HashMap<&str, usize> = label_space
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    let lookup = |label: &str| {
        index
            .get(label)
            .copied()
            .ok_or_else(|| Error::validation(format!("unknown label `{label}`")))
    };
    let k = label_space.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (g, p) in gold.iter().zip(pred) {
        counts[lookup(g.as_ref())?][lookup(p.as_ref())?] += 1;
    }
    Ok(ConfusionMatrix {
        label_space: label_space.to_vec(),
        counts,
    })
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

pub fn per_class(matrix: &ConfusionMatrix) -> Vec<ClassMetrics> {
    (0..matrix.label_space.len())
        .map(|k| {
            let tp = matrix.counts[k][k];
            let precision = ratio(tp, matrix.col_sum(k));
            let recall = ratio(tp, matrix.row_sum(k));
            ClassMetrics {
                label: matrix.label_space[k].clone(),
                precision,
                recall,
                f1: f1_score(precision, recall),
                support: matrix.row_sum(k),
            }
        })
        .collect()
}

/// Unweighted mean of per-class F1 over the full label space, on a 0-100 scale.
pub fn macro_f1(matrix: &ConfusionMatrix) -> f64 {
    let classes = per_class(matrix);
    if classes.is_empty() {
        return 0.0;
    }
    100.0 * classes.iter().map(|c| c.f1).sum::<f64>() / classes.len() as f64
}

/// Support-weighted mean of per-class F1, on a 0-100 scale.
pub fn weighted_f1(matrix: &ConfusionMatrix) -> f64 {
    let total = matrix.total();
    if total == 0 {
        return 0.0;
    }
    100.0
        * per_class(matrix)
            .iter()
            .map(|c| c.f1 * c.support as f64)
            .sum::<f64>()
        / total as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Average {
    #[default]
    Macro,
    Weighted,
}

impl FromStr for Average {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "macro" => Ok(Average::Macro),
            "weighted" => Ok(Average::Weighted),
            _ => Err(Error::validation(format!("unknown average `{s}` (macro|weighted)"))),
        }
    }
}

impl Average {
    pub fn name(self) -> &'static str {
        match self {
            Average::Macro => "macro",
            Average::Weighted => "weighted",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub total: u64,
    pub per_class: Vec<ClassMetrics>,
}

pub fn metrics_report(matrix: &ConfusionMatrix) -> MetricsReport {
    MetricsReport {
        macro_f1: macro_f1(matrix),
        weighted_f1: weighted_f1(matrix),
        accuracy: 100.0 * ratio(matrix.trace(), matrix.total()),
        total: matrix.total(),
        per_class: per_class(matrix),
    }
}

/// Scores `predictions` against the labels of `gold`, which must be fully
/// labeled and share the prediction ids in order.
pub fn evaluate(gold: &Corpus, predictions: &PredictionSet) -> Result<(ConfusionMatrix, MetricsReport)> {
    predictions.check_alignment(&gold.ids())?;
    let gold_labels = gold.gold_labels()?;
    let pred: Vec<&str> = predictions.labels().collect();
    let matrix = confusion_matrix(&gold_labels, &pred, gold.label_space())?;
    let report = metrics_report(&matrix);
    Ok((matrix, report))
}

fn round_to(x: f64, digits: usize) -> f64 {
    let scale = 10f64.powi(digits as i32);
    (x * scale).round() / scale
}

impl MetricsReport {
    pub fn f1(&self, average: Average) -> f64 {
        match average {
            Average::Macro => self.macro_f1,
            Average::Weighted => self.weighted_f1,
        }
    }

    pub fn to_text(&self, average: Average, digits: usize) -> String {
        let width = self.per_class.iter().map(|c| c.label.chars().count()).max().unwrap_or(5).max(5);
        let mut out = String::new();
        let _ = writeln!(out, "{}-F1: {:.*}", average.name(), digits, self.f1(average));
        let _ = writeln!(out, "accuracy: {:.*}", digits, self.accuracy);
        let _ = writeln!(out, "examples: {}", self.total);
        out.push('\n');
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>9}  {:>9}  {:>7}",
            "label", "precision", "recall", "f1", "support"
        );
        for c in &self.per_class {
            let pad = width - c.label.chars().count();
            let _ = writeln!(
                out,
                "{}{}  {:>9.*}  {:>9.*}  {:>9.*}  {:>7}",
                c.label,
                " ".repeat(pad),
                digits,
                100.0 * c.precision,
                digits,
                100.0 * c.recall,
                digits,
                100.0 * c.f1,
                c.support
            );
        }
        out
    }

    pub fn to_tsv(&self, average: Average, digits: usize) -> String {
        let mut out = String::from("label\tprecision\trecall\tf1\tsupport\n");
        for c in &self.per_class {
            let _ = writeln!(
                out,
                "{}\t{:.*}\t{:.*}\t{:.*}\t{}",
                c.label,
                digits,
                100.0 * c.precision,
                digits,
                100.0 * c.recall,
                digits,
                100.0 * c.f1,
                c.support
            );
        }
        let _ = writeln!(out, "{}-f1\t\t\t{:.*}\t{}", average.name(), digits, self.f1(average), self.total);
        let _ = writeln!(out, "accuracy\t\t\t{:.*}\t{}", digits, self.accuracy, self.total);
        out
    }

    /// JSON with every score rounded to `digits` places on the 0-100 scale.
    pub fn to_json(&self, average: Average, digits: usize) -> String {
        let per_class: Vec<_> = self
            .per_class
            .iter()
            .map(|c| {
                serde_json::json!({
                    "label": c.label,
                    "precision": round_to(100.0 * c.precision, digits),
                    "recall": round_to(100.0 * c.recall, digits),
                    "f1": round_to(100.0 * c.f1, digits),
                    "support": c.support,
                })
            })
            .collect();
        let value = serde_json::json!({
            "average": average.name(),
            "f1": round_to(self.f1(average), digits),
            "macro_f1": round_to(self.macro_f1, digits),
            "weighted_f1": round_to(self.weighted_f1, digits),
            "accuracy": round_to(self.accuracy, digits),
            "examples": self.total,
            "per_class": per_class,
        });
        let mut s = serde_json::to_string_pretty(&value).expect("json value");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model_id: String,
    pub f1: f64,
    pub accuracy: f64,
    pub is_ensemble: bool,
}

/// Model-vs-score table, one row per report in the order given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub title: String,
    pub average: Average,
    pub rows: Vec<ResultRow>,
}

pub fn compare_models(title: &str, reports: &[(String, MetricsReport)], average: Average) -> Result<ResultsTable> {
    if reports.is_empty() {
        return Err(Error::validation("no reports to compare"));
    }
    Ok(ResultsTable {
        title: title.to_owned(),
        average,
        rows: reports
            .iter()
            .map(|(id, r)| ResultRow {
                model_id: id.clone(),
                f1: r.f1(average),
                accuracy: r.accuracy,
                is_ensemble: id.starts_with(crate::ensemble::ENSEMBLE_MODEL_ID),
            })
            .collect(),
    })
}

impl ResultsTable {
    fn display_name(row: &ResultRow, strategy: &str) -> String {
        if row.is_ensemble && row.model_id == crate::ensemble::ENSEMBLE_MODEL_ID {
            format!("Ensemble - {strategy}")
        } else {
            row.model_id.clone()
        }
    }

    /// Aligned text table with the ensemble row set off by a rule.
    pub fn to_text(&self, digits: usize, strategy: &str) -> String {
        let names: Vec<String> = self.rows.iter().map(|r| Self::display_name(r, strategy)).collect();
        let f1_header = format!("{}-F1", self.average.name());
        let w0 = names.iter().map(|n| n.chars().count()).max().unwrap_or(0).max(5);
        let w1 = f1_header.len().max(digits + 4);
        let w2 = "accuracy".len().max(digits + 4);
        let rule = format!("{}\n", "-".repeat(w0 + w1 + w2 + 4));

        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        out.push_str(&rule);
        let _ = writeln!(out, "{:<w0$}  {:>w1$}  {:>w2$}", "Model", f1_header, "accuracy");
        out.push_str(&rule);
        for (i, (row, name)) in self.rows.iter().zip(&names).enumerate() {
            if row.is_ensemble && i > 0 && !self.rows[i - 1].is_ensemble {
                out.push_str(&rule);
            }
            let pad = w0 - name.chars().count();
            let _ = writeln!(
                out,
                "{name}{}  {:>w1$.*}  {:>w2$.*}",
                " ".repeat(pad),
                digits,
                row.f1,
                digits,
                row.accuracy
            );
        }
        out.push_str(&rule);
        out
    }

    pub fn to_tsv(&self, digits: usize) -> String {
        let mut out = format!("model_id\t{}_f1\taccuracy\tensemble\n", self.average.name());
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{:.*}\t{:.*}\t{}",
                r.model_id, digits, r.f1, digits, r.accuracy, r.is_ensemble
            );
        }
        out
    }

    pub fn to_json(&self, digits: usize) -> String {
        let rows: Vec<_> = self
            .rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "model_id": r.model_id,
                    "f1": round_to(r.f1, digits),
                    "accuracy": round_to(r.accuracy, digits),
                    "ensemble": r.is_ensemble,
                })
            })
            .collect();
        let mut s = serde_json::to_string_pretty(&serde_json::json!({
            "title": self.title,
            "average": self.average.name(),
            "rows": rows,
        }))
        .expect("json value");
        s.push('\n');
        s
    }
}
