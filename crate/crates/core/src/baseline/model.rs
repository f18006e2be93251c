use serde::{Deserialize, Serialize};

use super::vocab::FeatureVector;
use crate::error::{Error, Result};

/// Multinomial logistic regression over sparse features.
///
/// `weights` is stored row-major, one row of `num_features` per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxClassifier {
    weights: Vec<f64>,
    bias: Vec<f64>,
    num_features: usize,
    label_space: Vec<String>,
}

/// Gradients of the mean batch loss, shaped like the classifier parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub label: String,
    pub probabilities: Vec<f64>,
}

impl SoftmaxClassifier {
    pub fn zeros(label_space: Vec<String>, num_features: usize) -> Self {
        let k = label_space.len();
        SoftmaxClassifier {
            weights: vec![0.0; k * num_features],
            bias: vec![0.0; k],
            num_features,
            label_space,
        }
    }

    pub fn from_parts(
        label_space: Vec<String>,
        num_features: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let k = label_space.len();
        if weights.len() != k * num_features || bias.len() != k {
            return Err(Error::validation(format!(
                "parameter shapes do not match {k} classes x {num_features} features"
            )));
        }
        if weights.iter().chain(&bias).any(|p| !p.is_finite()) {
            return Err(Error::Numerical("non-finite model parameter".into()));
        }
        Ok(SoftmaxClassifier {
            weights,
            bias,
            num_features,
            label_space,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn num_features(&self) -> usize {
        self.num_features
    }

    pub fn label_space(&self) -> &[String] {
        &self.label_space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    /// `W x + b`. Feature indices at or beyond `num_features` are ignored.
    pub fn logits(&self, x: &FeatureVector) -> Vec<f64> {
        let d = self.num_features;
        (0..self.num_classes())
            .map(|k| {
                let row = &self.weights[k * d..(k + 1) * d];
                self.bias[k]
                    + x.entries()
                        .iter()
                        .filter(|(i, _)| *i < d)
                        .map(|&(i, v)| row[i] * v)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn predict(&self, x: &FeatureVector) -> Prediction {
        let probabilities = softmax(&self.logits(x));
        let class_index = argmax(&probabilities);
        Prediction {
            class_index,
            label: self.label_space[class_index].clone(),
            probabilities,
        }
    }

    /// Mean cross-entropy over `batch` and its exact gradient.
    pub fn loss_and_gradient(&self, batch: &[(&FeatureVector, usize)]) -> Result<(f64, Gradients)> {
        let mut grads = Gradients {
            weights: vec![0.0; self.weights.len()],
            bias: vec![0.0; self.bias.len()],
        };
        let loss = self.accumulate_gradient(batch, &mut grads)?;
        Ok((loss, grads))
    }

    /// Same as [`loss_and_gradient`](Self::loss_and_gradient) but reuses `grads`
    /// (overwritten, not added to).
    pub fn accumulate_gradient(&self, batch: &[(&FeatureVector, usize)], grads: &mut Gradients) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        let k = self.num_classes();
        let d = self.num_features;
        grads.weights.iter_mut().for_each(|g| *g = 0.0);
        grads.bias.iter_mut().for_each(|g| *g = 0.0);
        let scale = 1.0 / batch.len() as f64;

        let mut loss = 0.0;
        for &(x, y) in batch {
            if y >= k {
                return Err(Error::validation(format!("class index {y} out of range for {k} classes")));
            }
            if x.entries().iter().any(|(_, v)| !v.is_finite()) {
                return Err(Error::Numerical("non-finite feature value".into()));
            }
            let logits = self.logits(x);
            let log_z = log_sum_exp(&logits);
            loss += log_z - logits[y];
            for (c, &z) in logits.iter().enumerate() {
                let residual = ((z - log_z).exp() - if c == y { 1.0 } else { 0.0 }) * scale;
                grads.bias[c] += residual;
                let row = &mut grads.weights[c * d..(c + 1) * d];
                for &(i, v) in x.entries() {
                    if i < d {
                        row[i] += residual * v;
                    }
                }
            }
        }
        Ok(loss * scale)
    }
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("L{i}")).collect()
    }

    #[test]
    fn zero_model_loss_is_ln_k() {
        let m = SoftmaxClassifier::zeros(labels(5), 3);
        let x = FeatureVector::new(vec![(0, 0.3), (2, -1.0)]).unwrap();
        let (loss, _) = m.loss_and_gradient(&[(&x, 1), (&x, 4)]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_prediction_has_zero_loss() {
        let mut m = SoftmaxClassifier::zeros(labels(2), 1);
        m.bias_mut().copy_from_slice(&[800.0, -800.0]);
        let x = FeatureVector::zero();
        let (loss, g) = m.loss_and_gradient(&[(&x, 0)]).unwrap();
        assert!(loss.abs() < 1e-9);
        assert!(g.bias.iter().chain(&g.weights).all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn zero_model_predicts_uniform_first_label() {
        let m = SoftmaxClassifier::zeros(labels(4), 2);
        let p = m.predict(&FeatureVector::zero());
        assert_eq!(p.label, "L0");
        assert!(p.probabilities.iter().all(|&q| (q - 0.25).abs() < 1e-15));
    }

    #[test]
    fn two_class_softmax_by_hand() {
        let p = softmax(&[3.0, 1.0]);
        let e2 = 2f64.exp();
        assert!((p[0] - e2 / (1.0 + e2)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (1.0 + e2)).abs() < 1e-15);
        assert!((p[0] - 0.8808).abs() < 1e-4);
    }

    #[test]
    fn softmax_is_shift_invariant() {
        let a = softmax(&[0.5, -2.0, 3.0]);
        let b = softmax(&[1000.5, 998.0, 1003.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }

    #[test]
    fn rejects_bad_batches() {
        let m = SoftmaxClassifier::zeros(labels(2), 2);
        assert!(m.loss_and_gradient(&[]).is_err());
        let x = FeatureVector::zero();
        assert!(m.loss_and_gradient(&[(&x, 2)]).is_err());
        let nan = FeatureVector::new(vec![(0, f64::NAN)]).unwrap();
        assert!(matches!(m.loss_and_gradient(&[(&nan, 0)]), Err(Error::Numerical(_))));
    }

    #[test]
    fn from_parts_checks_shapes() {
        assert!(SoftmaxClassifier::from_parts(labels(2), 3, vec![0.0; 5], vec![0.0; 2]).is_err());
        assert!(SoftmaxClassifier::from_parts(labels(2), 3, vec![0.0; 6], vec![f64::INFINITY, 0.0]).is_err());
        assert!(SoftmaxClassifier::from_parts(labels(2), 3, vec![0.0; 6], vec![0.0; 2]).is_ok());
    }
}
