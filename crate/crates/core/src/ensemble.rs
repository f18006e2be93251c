//! Combining aligned prediction sets by voting.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::argmax;
use crate::error::{Error, Result};
use crate::predfile::PredictionSet;

pub const ENSEMBLE_MODEL_ID: &str = "ensemble";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VoteStrategy {
    #[default]
    Hard,
    Soft,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieBreak {
    /// Among tied labels, take the one predicted by the earliest model in
    /// the priority list.
    #[default]
    ModelPriority,
    /// Among tied labels, take the smallest string.
    Lexicographic,
}

impl FromStr for VoteStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hard" => Ok(VoteStrategy::Hard),
            "soft" => Ok(VoteStrategy::Soft),
            _ => Err(Error::validation(format!("unknown vote strategy `{s}`"))),
        }
    }
}

impl FromStr for TieBreak {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model-priority" => Ok(TieBreak::ModelPriority),
            "lexicographic" => Ok(TieBreak::Lexicographic),
            _ => Err(Error::validation(format!("unknown tie break `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct VotePolicy {
    pub strategy: VoteStrategy,
    pub tie_break: TieBreak,
    pub model_priority: Vec<String>,
}

impl VotePolicy {
    pub fn hard_lexicographic() -> Self {
        VotePolicy {
            strategy: VoteStrategy::Hard,
            tie_break: TieBreak::Lexicographic,
            model_priority: Vec::new(),
        }
    }

    pub fn hard_with_priority(priority: Vec<String>) -> Self {
        VotePolicy {
            strategy: VoteStrategy::Hard,
            tie_break: TieBreak::ModelPriority,
            model_priority: priority,
        }
    }

    /// For model-priority tie breaking, the priority list must be a
    /// permutation of the participating model ids.
    pub fn validate_for(&self, model_ids: &[&str]) -> Result<()> {
        if self.strategy != VoteStrategy::Hard || self.tie_break != TieBreak::ModelPriority {
            return Ok(());
        }
        let given: HashSet<&str> = self.model_priority.iter().map(String::as_str).collect();
        let wanted: HashSet<&str> = model_ids.iter().copied().collect();
        if given.len() != self.model_priority.len() || given != wanted {
            return Err(Error::validation(format!(
                "model priority {:?} must list each of {:?} exactly once",
                self.model_priority, model_ids
            )));
        }
        Ok(())
    }
}

fn check_inputs(sets: &[PredictionSet]) -> Result<()> {
    if sets.len() < 2 {
        return Err(Error::validation(format!(
            "ensemble requires at least 2 models, got {}",
            sets.len()
        )));
    }
    let mut ids = HashSet::new();
    for set in sets {
        if !ids.insert(set.model_id()) {
            return Err(Error::validation(format!("model id `{}` appears twice", set.model_id())));
        }
    }
    let reference: Vec<&str> = sets[0].ids().collect();
    for set in &sets[1..] {
        set.check_alignment(&reference)?;
    }
    Ok(())
}

pub fn vote(sets: &[PredictionSet], policy: &VotePolicy) -> Result<PredictionSet> {
    match policy.strategy {
        VoteStrategy::Hard => hard_vote(sets, policy),
        VoteStrategy::Soft => soft_vote(sets),
    }
}

/// Majority vote per example, with ties settled by `policy.tie_break`.
pub fn hard_vote(sets: &[PredictionSet], policy: &VotePolicy) -> Result<PredictionSet> {
    check_inputs(sets)?;
    let model_ids: Vec<&str> = sets.iter().map(PredictionSet::model_id).collect();
    policy.validate_for(&model_ids)?;
    let priority: Vec<usize> = match policy.tie_break {
        TieBreak::ModelPriority => policy
            .model_priority
            .iter()
            .map(|id| model_ids.iter().position(|m| m == id).expect("validated"))
            .collect(),
        TieBreak::Lexicographic => Vec::new(),
    };

    let mut entries = Vec::with_capacity(sets[0].len());
    let mut tally: Vec<(&str, usize)> = Vec::new();
    for row in 0..sets[0].len() {
        tally.clear();
        for set in sets {
            let label = set.entries()[row].1.as_str();
            match tally.iter_mut().find(|(l, _)| *l == label) {
                Some((_, count)) => *count += 1,
                None => tally.push((label, 1)),
            }
        }
        let top = tally.iter().map(|(_, c)| *c).max().unwrap_or(0);
        let tied: Vec<&str> = tally.iter().filter(|(_, c)| *c == top).map(|(l, _)| *l).collect();
        let winner = if tied.len() == 1 {
            tied[0]
        } else {
            match policy.tie_break {
                TieBreak::Lexicographic => tied.iter().copied().min().expect("non-empty"),
                TieBreak::ModelPriority => priority
                    .iter()
                    .map(|&m| sets[m].entries()[row].1.as_str())
                    .find(|label| tied.contains(label))
                    .expect("some model voted for each tied label"),
            }
        };
        entries.push((sets[0].entries()[row].0.clone(), winner.to_owned()));
    }
    PredictionSet::new(ENSEMBLE_MODEL_ID, entries)
}

/// Argmax of the mean probability vector, ties to the lowest class index.
pub fn soft_vote(sets: &[PredictionSet]) -> Result<PredictionSet> {
    check_inputs(sets)?;
    let space = sets[0]
        .label_space()
        .ok_or_else(|| Error::validation(format!("`{}` carries no probabilities", sets[0].model_id())))?;
    for set in sets {
        match set.label_space() {
            None => {
                return Err(Error::validation(format!(
                    "`{}` carries no probabilities",
                    set.model_id()
                )))
            }
            Some(s) if s != space => {
                return Err(Error::validation(format!(
                    "`{}` declares a different label space",
                    set.model_id()
                )))
            }
            _ => {}
        }
    }
    let n_models = sets.len() as f64;
    let mut entries = Vec::with_capacity(sets[0].len());
    let mut means = Vec::with_capacity(sets[0].len());
    for row in 0..sets[0].len() {
        let mut mean = vec![0.0; space.len()];
        for set in sets {
            for (acc, p) in mean.iter_mut().zip(&set.probabilities().expect("checked")[row]) {
                *acc += p;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n_models);
        entries.push((sets[0].entries()[row].0.clone(), space[argmax(&mean)].clone()));
        means.push(mean);
    }
    PredictionSet::with_probabilities(ENSEMBLE_MODEL_ID, entries, space.to_vec(), means)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub model_ids: Vec<String>,
    /// `pairwise[i][j]`: fraction of examples where models i and j agree.
    pub pairwise: Vec<Vec<f64>>,
    /// Vote-split pattern (e.g. `2+1`) to number of examples.
    pub split_histogram: BTreeMap<String, usize>,
    /// Shannon entropy of each example's vote distribution, in bits.
    pub vote_entropy: Vec<f64>,
    pub mean_vote_entropy: f64,
}

pub fn agreement_report(sets: &[PredictionSet]) -> Result<AgreementReport> {
    check_inputs(sets)?;
    let m = sets.len();
    let n = sets[0].len();
    let mut pairwise = vec![vec![1.0; m]; m];
    for i in 0..m {
        for j in i + 1..m {
            let same = sets[i]
                .labels()
                .zip(sets[j].labels())
                .filter(|(a, b)| a == b)
                .count();
            let rate = if n == 0 { 1.0 } else { same as f64 / n as f64 };
            pairwise[i][j] = rate;
            pairwise[j][i] = rate;
        }
    }

    let mut split_histogram = BTreeMap::new();
    let mut vote_entropy = Vec::with_capacity(n);
    for row in 0..n {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for set in sets {
            *counts.entry(set.entries()[row].1.as_str()).or_insert(0) += 1;
        }
        let mut pattern: Vec<usize> = counts.values().copied().collect();
        pattern.sort_unstable_by(|a, b| b.cmp(a));
        let key = pattern.iter().map(usize::to_string).collect::<Vec<_>>().join("+");
        *split_histogram.entry(key).or_insert(0) += 1;
        let h: f64 = pattern
            .iter()
            .map(|&c| {
                let p = c as f64 / m as f64;
                -p * p.log2()
            })
            .sum();
        vote_entropy.push(h.max(0.0));
    }
    let mean_vote_entropy = if n == 0 {
        0.0
    } else {
        vote_entropy.iter().sum::<f64>() / n as f64
    };
    Ok(AgreementReport {
        model_ids: sets.iter().map(|s| s.model_id().to_owned()).collect(),
        pairwise,
        split_histogram,
        vote_entropy,
        mean_vote_entropy,
    })
}

impl AgreementReport {
    pub fn to_tsv(&self, digits: usize) -> String {
        let mut out = String::from("model_a\tmodel_b\tagreement\n");
        for i in 0..self.model_ids.len() {
            for j in i + 1..self.model_ids.len() {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{:.*}",
                    self.model_ids[i], self.model_ids[j], digits, self.pairwise[i][j]
                );
            }
        }
        out
    }

    pub fn to_text(&self, digits: usize) -> String {
        let width = self.model_ids.iter().map(String::len).max().unwrap_or(0).max(5);
        let mut out = String::from("Pairwise agreement\n");
        let _ = write!(out, "{:width$}", "");
        for id in &self.model_ids {
            let _ = write!(out, "  {id:>width$}");
        }
        out.push('\n');
        for (i, id) in self.model_ids.iter().enumerate() {
            let _ = write!(out, "{id:width$}");
            for v in &self.pairwise[i] {
                let _ = write!(out, "  {:>width$.*}", digits, v);
            }
            out.push('\n');
        }
        out.push_str("\nVote splits\n");
        for (pattern, count) in &self.split_histogram {
            let _ = writeln!(out, "  {pattern:<10} {count}");
        }
        let _ = writeln!(out, "\nMean vote entropy: {:.*} bits", digits, self.mean_vote_entropy);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(id: &str, labels: &[&str]) -> PredictionSet {
        PredictionSet::new(
            id,
            labels.iter().enumerate().map(|(i, l)| (format!("x{i}"), l.to_string())).collect(),
        )
        .unwrap()
    }

    fn probs(id: &str, rows: Vec<Vec<f64>>) -> PredictionSet {
        let space = vec!["A".to_string(), "B".to_string()];
        let entries = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (format!("x{i}"), space[argmax(r)].clone()))
            .collect();
        PredictionSet::with_probabilities(id, entries, space, rows).unwrap()
    }

    fn priority(ids: &[&str]) -> VotePolicy {
        VotePolicy::hard_with_priority(ids.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn strict_majority_wins() {
        let out = hard_vote(&[set("m1", &["A"]), set("m2", &["A"]), set("m3", &["B"])], &priority(&["m3", "m2", "m1"])).unwrap();
        assert_eq!(out.entries()[0].1, "A");
        assert_eq!(out.model_id(), "ensemble");
    }

    #[test]
    fn three_way_tie_goes_to_priority_model() {
        let sets = [set("m1", &["A"]), set("m2", &["B"]), set("m3", &["C"])];
        assert_eq!(hard_vote(&sets, &priority(&["m1", "m2", "m3"])).unwrap().entries()[0].1, "A");
        assert_eq!(hard_vote(&sets, &priority(&["m3", "m1", "m2"])).unwrap().entries()[0].1, "C");
        assert_eq!(hard_vote(&sets, &VotePolicy::hard_lexicographic()).unwrap().entries()[0].1, "A");
    }

    #[test]
    fn priority_skips_models_outside_the_tie() {
        // Votes: m1=C, m2=A, m3=B, m4=A, m5=B. A and B tie at 2; m1 voted C.
        let sets = [
            set("m1", &["C"]),
            set("m2", &["A"]),
            set("m3", &["B"]),
            set("m4", &["A"]),
            set("m5", &["B"]),
        ];
        let out = hard_vote(&sets, &priority(&["m1", "m3", "m2", "m4", "m5"])).unwrap();
        assert_eq!(out.entries()[0].1, "B");
    }

    #[test]
    fn even_model_count_ties() {
        let sets = [set("a", &["Z", "Q"]), set("b", &["Y", "Q"])];
        let out = hard_vote(&sets, &VotePolicy::hard_lexicographic()).unwrap();
        assert_eq!(out.labels().collect::<Vec<_>>(), ["Y", "Q"]);
    }

    #[test]
    fn input_errors() {
        assert!(hard_vote(&[set("a", &["A"])], &VotePolicy::hard_lexicographic()).is_err());
        assert!(hard_vote(&[], &VotePolicy::hard_lexicographic()).is_err());
        let misaligned = PredictionSet::new("b", vec![("other".into(), "A".into())]).unwrap();
        assert!(matches!(
            hard_vote(&[set("a", &["A"]), misaligned], &VotePolicy::hard_lexicographic()),
            Err(Error::Alignment { .. })
        ));
        let sets = [set("a", &["A"]), set("b", &["A"])];
        assert!(hard_vote(&sets, &priority(&["a"])).is_err());
        assert!(hard_vote(&sets, &priority(&["a", "a"])).is_err());
        assert!(hard_vote(&sets, &priority(&["a", "c"])).is_err());
        assert!(hard_vote(&[set("a", &["A"]), set("a", &["A"])], &VotePolicy::hard_lexicographic()).is_err());
    }

    #[test]
    fn soft_vote_averages() {
        let out = soft_vote(&[probs("a", vec![vec![0.6, 0.4]]), probs("b", vec![vec![0.1, 0.9]])]).unwrap();
        assert_eq!(out.entries()[0].1, "B");
        let mean = &out.probabilities().unwrap()[0];
        assert!((mean[0] - 0.35).abs() < 1e-12 && (mean[1] - 0.65).abs() < 1e-12);
    }

    #[test]
    fn soft_vote_uniform_picks_first_class() {
        let out = soft_vote(&[probs("a", vec![vec![0.5, 0.5]; 3]), probs("b", vec![vec![0.5, 0.5]; 3])]).unwrap();
        assert!(out.labels().all(|l| l == "A"));
    }

    #[test]
    fn soft_vote_identical_sets_keep_labels() {
        let a = probs("a", vec![vec![0.2, 0.8], vec![0.7, 0.3]]);
        let b = a.clone().with_model_id("b").unwrap();
        let out = soft_vote(&[a.clone(), b]).unwrap();
        assert_eq!(out.labels().collect::<Vec<_>>(), a.labels().collect::<Vec<_>>());
    }

    #[test]
    fn soft_vote_requires_probabilities() {
        assert!(soft_vote(&[set("a", &["A"]), set("b", &["A"])]).is_err());
        let other_space = PredictionSet::with_probabilities(
            "c",
            vec![("x0".into(), "A".into())],
            vec!["A".into(), "C".into()],
            vec![vec![0.5, 0.5]],
        )
        .unwrap();
        assert!(soft_vote(&[probs("a", vec![vec![0.5, 0.5]]), other_space]).is_err());
    }

    #[test]
    fn agreement_identical_and_disjoint() {
        let a = set("a", &["A", "B", "C"]);
        let b = set("b", &["A", "B", "C"]);
        let r = agreement_report(&[a.clone(), b]).unwrap();
        assert_eq!(r.pairwise, vec![vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert_eq!(r.mean_vote_entropy, 0.0);
        let c = set("c", &["B", "C", "A"]);
        let r = agreement_report(&[a, c]).unwrap();
        assert_eq!(r.pairwise[0][1], 0.0);
        assert_eq!(r.split_histogram.get("1+1"), Some(&3));
        assert!((r.mean_vote_entropy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn agreement_hand_counted() {
        // a/b agree on 3 of 4, a/c on 1 of 4, b/c on 2 of 4.
        let a = set("a", &["A", "B", "C", "D"]);
        let b = set("b", &["A", "B", "C", "A"]);
        let c = set("c", &["A", "C", "D", "A"]);
        let r = agreement_report(&[a, b, c]).unwrap();
        assert_eq!(r.pairwise[0][1], 0.75);
        assert_eq!(r.pairwise[0][2], 0.25);
        assert_eq!(r.pairwise[1][2], 0.5);
        assert_eq!(r.split_histogram.get("3"), Some(&1));
        assert_eq!(r.split_histogram.get("2+1"), Some(&3));
        assert_eq!(r.split_histogram.get("1+1+1"), None);
        assert!(r.to_tsv(2).contains("a\tb\t0.75"));
        assert!(r.to_text(2).contains("Vote splits"));
    }
}
