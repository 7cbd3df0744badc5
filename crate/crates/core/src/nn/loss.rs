//! Differentiable losses: binary/categorical cross-entropy, mean squared
//! error, and negative spectral efficiency for the power-allocation task.

use crate::classical;
use crate::error::{CoreError, Result};

use super::graph::{Graph, Var};
use super::tensor::Tensor;

/// Probabilities below this are clamped before taking logarithms.
pub const LOG_EPS: f64 = 1e-12;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_EPS, 1.0 - LOG_EPS)
}

impl Graph {
    /// Binary cross-entropy over predicted positive-class probabilities.
    ///
    /// `pred` is [B] or [B, 1] with entries in (0, 1); `targets` are 0/1.
    /// Probabilities are clamped at 1e-12 before the log.
    pub fn bce(&mut self, pred: Var, targets: &[f64]) -> Result<Var> {
        let shape = self.value(pred).shape().to_vec();
        let n = self.value(pred).numel();
        let flat_ok = shape.len() == 1 || (shape.len() == 2 && shape[1] == 1);
        if !flat_ok || n != targets.len() {
            return Err(CoreError::Shape(format!(
                "bce: pred shape {shape:?} vs {} targets",
                targets.len()
            )));
        }
        let t = targets.to_vec();
        let p = self.value(pred).data();
        let mut loss = 0.0;
        for (pi, yi) in p.iter().zip(&t) {
            let pc = clamp_prob(*pi);
            loss -= yi * pc.ln() + (1.0 - yi) * (1.0 - pc).ln();
        }
        loss /= n as f64;
        let ppred = pred.0;
        Ok(self.push_op(
            Tensor::scalar(loss),
            vec![pred.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    let p = args.values[ppred].data();
                    let g0 = args.out_grad[0] / n as f64;
                    p.iter()
                        .zip(&t)
                        .map(|(pi, yi)| {
                            if *pi <= LOG_EPS || *pi >= 1.0 - LOG_EPS {
                                0.0 // clamped region: flat
                            } else {
                                g0 * (-(yi / pi) + (1.0 - yi) / (1.0 - pi))
                            }
                        })
                        .collect()
                })]
            }),
        ))
    }

    /// Categorical cross-entropy over class probabilities [B, K] against
    /// integer class labels, averaged over the batch. Natural logarithm.
    pub fn cross_entropy(&mut self, probs: Var, labels: &[usize]) -> Result<Var> {
        let shape = self.value(probs).shape().to_vec();
        if shape.len() != 2 || shape[0] != labels.len() {
            return Err(CoreError::Shape(format!(
                "cross_entropy: probs {shape:?} vs {} labels",
                labels.len()
            )));
        }
        let (b, k) = (shape[0], shape[1]);
        if let Some(bad) = labels.iter().find(|&&l| l >= k) {
            return Err(CoreError::Shape(format!(
                "cross_entropy: label {bad} out of range for {k} classes"
            )));
        }
        let labels = labels.to_vec();
        let p = self.value(probs).data();
        let mut loss = 0.0;
        for (bi, &yi) in labels.iter().enumerate() {
            loss -= clamp_prob(p[bi * k + yi]).ln();
        }
        loss /= b as f64;
        let pp = probs.0;
        Ok(self.push_op(
            Tensor::scalar(loss),
            vec![probs.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    let p = args.values[pp].data();
                    let g0 = args.out_grad[0] / b as f64;
                    let mut dx = vec![0.0; p.len()];
                    for (bi, &yi) in labels.iter().enumerate() {
                        let pi = p[bi * k + yi];
                        if pi > LOG_EPS {
                            dx[bi * k + yi] = -g0 / pi;
                        }
                    }
                    dx
                })]
            }),
        ))
    }

    /// Mean squared error against a constant target, averaged over all
    /// elements.
    pub fn mse(&mut self, pred: Var, target: &Tensor) -> Result<Var> {
        if self.value(pred).shape() != target.shape() {
            return Err(CoreError::Shape(format!(
                "mse: pred {:?} vs target {:?}",
                self.value(pred).shape(),
                target.shape()
            )));
        }
        let n = target.numel();
        let t = target.data().to_vec();
        let p = self.value(pred).data();
        let loss = p
            .iter()
            .zip(&t)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            / n as f64;
        let pp = pred.0;
        Ok(self.push_op(
            Tensor::scalar(loss),
            vec![pred.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    let p = args.values[pp].data();
                    let g0 = args.out_grad[0] * 2.0 / n as f64;
                    p.iter().zip(&t).map(|(a, b)| g0 * (a - b)).collect()
                })]
            }),
        ))
    }

    /// Negative mean spectral efficiency of predicted power allocations.
    ///
    /// `pred` is [B, K] nonnegative powers; `gains[b]` is the K x K gain
    /// matrix of instance b and `sigma2[b]` its noise power. Returns
    /// -(1/B) sum_b sum_k log2(1 + SINR_k).
    pub fn neg_se(&mut self, pred: Var, gains: &[Vec<f64>], sigma2: &[f64]) -> Result<Var> {
        let shape = self.value(pred).shape().to_vec();
        if shape.len() != 2 || shape[0] != gains.len() || shape[0] != sigma2.len() {
            return Err(CoreError::Shape(format!(
                "neg_se: pred {shape:?} vs {} instances",
                gains.len()
            )));
        }
        let (b, k) = (shape[0], shape[1]);
        for (i, g) in gains.iter().enumerate() {
            if g.len() != k * k {
                return Err(CoreError::Shape(format!(
                    "neg_se: instance {i} gain matrix has {} entries, expected {}",
                    g.len(),
                    k * k
                )));
            }
        }
        let gains = gains.to_vec();
        let sigma2 = sigma2.to_vec();
        let p = self.value(pred).data();
        let mut total = 0.0;
        for bi in 0..b {
            total += classical::sum_rate(&gains[bi], k, sigma2[bi], &p[bi * k..(bi + 1) * k]);
        }
        let loss = -total / b as f64;
        let pp = pred.0;
        Ok(self.push_op(
            Tensor::scalar(loss),
            vec![pred.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    let p = args.values[pp].data();
                    let g0 = -args.out_grad[0] / b as f64;
                    let mut dx = vec![0.0; p.len()];
                    for bi in 0..b {
                        let grad = classical::sum_rate_grad(
                            &gains[bi],
                            k,
                            sigma2[bi],
                            &p[bi * k..(bi + 1) * k],
                        );
                        for (d, gk) in dx[bi * k..(bi + 1) * k].iter_mut().zip(&grad) {
                            *d = g0 * gk;
                        }
                    }
                    dx
                })]
            }),
        ))
    }
}
