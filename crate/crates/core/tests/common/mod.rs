//! Independent reference implementations used to check the library.
//! Nothing here calls into the code paths it is checking.

#![allow(dead_code)]

use std::collections::BTreeMap;

use dialect_core::baseline::{FeatureVector, SoftmaxClassifier};
use rand::Rng;

/// Tie rule for [`oracle_hard_vote`].
pub enum OracleTie<'a> {
    /// Model indices, highest priority first.
    Priority(&'a [usize]),
    Lexicographic,
}

/// Mode of `votes` (one label per model) by exhaustive counting.
pub fn oracle_hard_vote(votes: &[&str], tie: &OracleTie) -> String {
    let mut candidates: Vec<&str> = votes.to_vec();
    candidates.sort();
    candidates.dedup();
    let count = |label: &str| votes.iter().filter(|v| **v == label).count();
    let best = candidates.iter().map(|c| count(c)).max().unwrap();
    let tied: Vec<&str> = candidates.into_iter().filter(|c| count(c) == best).collect();
    match tie {
        OracleTie::Lexicographic => tied[0].to_string(),
        OracleTie::Priority(order) => {
            for &m in order.iter() {
                if tied.contains(&votes[m]) {
                    return votes[m].to_string();
                }
            }
            unreachable!("every tied label has a voter")
        }
    }
}

/// Macro-F1 (0-100) from per-class TP/FP/FN tallies over raw label pairs.
pub fn oracle_macro_f1(gold: &[&str], pred: &[&str], space: &[String]) -> f64 {
    let mut total = 0.0;
    for class in space {
        let c = class.as_str();
        let mut tp = 0u64;
        let mut fp = 0u64;
        let mut fn_ = 0u64;
        for (g, p) in gold.iter().zip(pred) {
            match (*g == c, *p == c) {
                (true, true) => tp += 1,
                (false, true) => fp += 1,
                (true, false) => fn_ += 1,
                (false, false) => {}
            }
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        total += f1;
    }
    100.0 * total / space.len() as f64
}

/// Mean cross-entropy with dense parameters, written out longhand.
pub fn oracle_loss(weights: &[f64], bias: &[f64], d: usize, batch: &[(Vec<f64>, usize)]) -> f64 {
    let k = bias.len();
    let mut sum = 0.0;
    for (x, y) in batch {
        let logits: Vec<f64> = (0..k)
            .map(|c| bias[c] + (0..d).map(|j| weights[c * d + j] * x[j]).sum::<f64>())
            .collect();
        let m = logits.iter().cloned().fold(f64::MIN, f64::max);
        let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
        sum += -(logits[*y] - m - z.ln());
    }
    sum / batch.len() as f64
}

pub fn dense(x: &FeatureVector, d: usize) -> Vec<f64> {
    let mut v = vec![0.0; d];
    for &(i, w) in x.entries() {
        v[i] = w;
    }
    v
}

pub struct GradCheck {
    pub max_rel_error: f64,
    pub loss_gap: f64,
}

fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Random small model plus batch, then analytic vs central-difference gradients.
pub fn gradient_check<R: Rng>(rng: &mut R, h: f64) -> GradCheck {
    let k = rng.gen_range(2..=4);
    let d = rng.gen_range(1..=8);
    let labels: Vec<String> = (0..k).map(|i| format!("c{i}")).collect();
    let weights: Vec<f64> = (0..k * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let bias: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let model = SoftmaxClassifier::from_parts(labels.clone(), d, weights.clone(), bias.clone()).unwrap();

    let n = rng.gen_range(1..=6);
    let xs: Vec<FeatureVector> = (0..n)
        .map(|_| {
            let mut entries = Vec::new();
            for j in 0..d {
                if rng.gen_bool(0.7) {
                    entries.push((j, rng.gen_range(-2.0..2.0)));
                }
            }
            FeatureVector::new(entries).unwrap()
        })
        .collect();
    let ys: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
    let batch: Vec<(&FeatureVector, usize)> = xs.iter().zip(ys.iter().copied()).collect();
    let dense_batch: Vec<(Vec<f64>, usize)> = xs.iter().map(|x| dense(x, d)).zip(ys.iter().copied()).collect();

    let (loss, grads) = model.loss_and_gradient(&batch).unwrap();
    let loss_gap = (loss - oracle_loss(&weights, &bias, d, &dense_batch)).abs();

    let loss_at = |w: &[f64], b: &[f64]| {
        let m = SoftmaxClassifier::from_parts(labels.clone(), d, w.to_vec(), b.to_vec()).unwrap();
        m.loss_and_gradient(&batch).unwrap().0
    };
    let mut max_rel_error: f64 = 0.0;
    for i in 0..weights.len() {
        let mut plus = weights.clone();
        let mut minus = weights.clone();
        plus[i] += h;
        minus[i] -= h;
        let numeric = (loss_at(&plus, &bias) - loss_at(&minus, &bias)) / (2.0 * h);
        max_rel_error = max_rel_error.max(rel_error(grads.weights[i], numeric));
    }
    for i in 0..bias.len() {
        let mut plus = bias.clone();
        let mut minus = bias.clone();
        plus[i] += h;
        minus[i] -= h;
        let numeric = (loss_at(&weights, &plus) - loss_at(&weights, &minus)) / (2.0 * h);
        max_rel_error = max_rel_error.max(rel_error(grads.bias[i], numeric));
    }
    GradCheck { max_rel_error, loss_gap }
}

/// Textbook Adam (no weight decay): returns the parameters after `grads.len()` steps.
pub fn oracle_adam(mut params: Vec<f64>, grads: &[Vec<f64>], lr: f64, b1: f64, b2: f64, eps: f64) -> Vec<f64> {
    let mut m = vec![0.0; params.len()];
    let mut v = vec![0.0; params.len()];
    for (step, g) in grads.iter().enumerate() {
        let t = (step + 1) as f64;
        for i in 0..params.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / (1.0 - b1.powf(t));
            let v_hat = v[i] / (1.0 - b2.powf(t));
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    params
}

/// Label histogram, for readable assertion messages.
pub fn histogram<'a>(labels: impl Iterator<Item = &'a str>) -> BTreeMap<&'a str, usize> {
    let mut h = BTreeMap::new();
    for l in labels {
        *h.entry(l).or_insert(0) += 1;
    }
    h
}
