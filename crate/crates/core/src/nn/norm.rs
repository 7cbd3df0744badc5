//! Batch normalization tape operations.
//!
//! One kernel covers all layouts by viewing the input as [B, C, I]:
//! [B, F] maps to C = F, I = 1; [B, C, L] to I = L; [B, C, H, W] to I = H*W.
//! Statistics are taken per channel over (B, I).

use crate::error::{CoreError, Result};

use super::graph::{Graph, Var};
use super::tensor::Tensor;

pub const BN_EPS: f64 = 1e-5;

/// Batch mean and biased variance per channel, returned so the owning layer
/// can update its running statistics.
pub struct BatchStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// View shape as (outer, channels, inner); accepts rank 2, 3, and 4.
pub(crate) fn bn_layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match shape.len() {
        2 => Ok((shape[0], shape[1], 1)),
        3 => Ok((shape[0], shape[1], shape[2])),
        4 => Ok((shape[0], shape[1], shape[2] * shape[3])),
        _ => Err(CoreError::Shape(format!(
            "batchnorm expects rank 2-4 input, got {shape:?}"
        ))),
    }
}

impl Graph {
    /// Training-mode batch normalization with affine transform.
    pub fn batchnorm_train(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
    ) -> Result<(Var, BatchStats)> {
        let shape = self.value(x).shape().to_vec();
        let (b, c, inner) = bn_layout(&shape)?;
        if self.value(gamma).shape() != [c] || self.value(beta).shape() != [c] {
            return Err(CoreError::Shape(format!(
                "batchnorm: gamma/beta must have shape [{c}], got {:?}/{:?}",
                self.value(gamma).shape(),
                self.value(beta).shape()
            )));
        }
        let n = b * inner;
        if n < 2 {
            return Err(CoreError::Shape(format!(
                "batchnorm needs at least 2 values per channel, got {n} for shape {shape:?}"
            )));
        }
        let src = self.value(x).data();
        let mut mean = vec![0.0; c];
        let mut var = vec![0.0; c];
        for ci in 0..c {
            let mut s = 0.0;
            for bi in 0..b {
                let row = &src[(bi * c + ci) * inner..][..inner];
                s += row.iter().sum::<f64>();
            }
            let m = s / n as f64;
            let mut v = 0.0;
            for bi in 0..b {
                let row = &src[(bi * c + ci) * inner..][..inner];
                v += row.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
            }
            mean[ci] = m;
            var[ci] = v / n as f64;
        }
        let istd: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let gam = self.value(gamma).data().to_vec();
        let bet = self.value(beta).data().to_vec();
        let mut out = vec![0.0; src.len()];
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * inner;
                for i in 0..inner {
                    let xhat = (src[base + i] - mean[ci]) * istd[ci];
                    out[base + i] = gam[ci] * xhat + bet[ci];
                }
            }
        }
        let stats = BatchStats {
            mean: mean.clone(),
            var: var.clone(),
        };
        let px = x.0;
        let var_out = self.push_op(
            Tensor::new(shape, out)?,
            vec![x.0, gamma.0, beta.0],
            Box::new(move |args| {
                let src = args.values[px].data();
                let dy = args.out_grad;
                // Per-channel reductions needed by every output.
                let mut sum_dy = vec![0.0; c];
                let mut sum_dy_xhat = vec![0.0; c];
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * inner;
                        for i in 0..inner {
                            let xhat = (src[base + i] - mean[ci]) * istd[ci];
                            sum_dy[ci] += dy[base + i];
                            sum_dy_xhat[ci] += dy[base + i] * xhat;
                        }
                    }
                }
                let dx = args.need[0].then(|| {
                    let nf = n as f64;
                    let mut dx = vec![0.0; src.len()];
                    for bi in 0..b {
                        for ci in 0..c {
                            let base = (bi * c + ci) * inner;
                            let k = gam[ci] * istd[ci];
                            for i in 0..inner {
                                let xhat = (src[base + i] - mean[ci]) * istd[ci];
                                dx[base + i] = k
                                    * (dy[base + i]
                                        - sum_dy[ci] / nf
                                        - xhat * sum_dy_xhat[ci] / nf);
                            }
                        }
                    }
                    dx
                });
                let dgamma = args.need[1].then(|| sum_dy_xhat.clone());
                let dbeta = args.need[2].then(|| sum_dy.clone());
                vec![dx, dgamma, dbeta]
            }),
        );
        Ok((var_out, stats))
    }

    /// Inference-mode batch normalization with frozen running statistics.
    pub fn batchnorm_eval(
        &mut self,
        x: Var,
        gamma: Var,
        beta: Var,
        running_mean: &[f64],
        running_var: &[f64],
    ) -> Result<Var> {
        let shape = self.value(x).shape().to_vec();
        let (b, c, inner) = bn_layout(&shape)?;
        if self.value(gamma).shape() != [c]
            || self.value(beta).shape() != [c]
            || running_mean.len() != c
            || running_var.len() != c
        {
            return Err(CoreError::Shape(format!(
                "batchnorm eval: channel mismatch for input {shape:?}"
            )));
        }
        let istd: Vec<f64> = running_var
            .iter()
            .map(|v| 1.0 / (v + BN_EPS).sqrt())
            .collect();
        let mean = running_mean.to_vec();
        let gam = self.value(gamma).data().to_vec();
        let bet = self.value(beta).data().to_vec();
        let src = self.value(x).data();
        let mut out = vec![0.0; src.len()];
        for bi in 0..b {
            for ci in 0..c {
                let base = (bi * c + ci) * inner;
                for i in 0..inner {
                    out[base + i] = gam[ci] * (src[base + i] - mean[ci]) * istd[ci] + bet[ci];
                }
            }
        }
        let px = x.0;
        Ok(self.push_op(
            Tensor::new(shape, out)?,
            vec![x.0, gamma.0, beta.0],
            Box::new(move |args| {
                let src = args.values[px].data();
                let dy = args.out_grad;
                let dx = args.need[0].then(|| {
                    let mut dx = vec![0.0; src.len()];
                    for bi in 0..b {
                        for ci in 0..c {
                            let base = (bi * c + ci) * inner;
                            for i in 0..inner {
                                dx[base + i] = dy[base + i] * gam[ci] * istd[ci];
                            }
                        }
                    }
                    dx
                });
                let dgamma = args.need[1].then(|| {
                    let mut dg = vec![0.0; c];
                    for bi in 0..b {
                        for ci in 0..c {
                            let base = (bi * c + ci) * inner;
                            for i in 0..inner {
                                dg[ci] += dy[base + i] * (src[base + i] - mean[ci]) * istd[ci];
                            }
                        }
                    }
                    dg
                });
                let dbeta = args.need[2].then(|| {
                    let mut db = vec![0.0; c];
                    for bi in 0..b {
                        for ci in 0..c {
                            let base = (bi * c + ci) * inner;
                            for i in 0..inner {
                                db[ci] += dy[base + i];
                            }
                        }
                    }
                    db
                });
                vec![dx, dgamma, dbeta]
            }),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn train_mode_standardizes() {
        let mut g = Graph::new();
        let x = g.input(
            Tensor::new(
                vec![4, 2],
                vec![1.0, 10.0, 2.0, 20.0, 3.0, 30.0, 4.0, 40.0],
            )
            .unwrap(),
        );
        let gamma = g.param(Tensor::from_vec(vec![1.0, 1.0]));
        let beta = g.param(Tensor::from_vec(vec![0.0, 0.0]));
        let (y, stats) = g.batchnorm_train(x, gamma, beta).unwrap();
        let d = g.value(y).data();
        for ci in 0..2 {
            let col: Vec<f64> = (0..4).map(|bi| d[bi * 2 + ci]).collect();
            let m: f64 = col.iter().sum::<f64>() / 4.0;
            let v: f64 = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 4.0;
            assert!(m.abs() < 1e-6, "mean {m}");
            assert!((v - 1.0).abs() < 1e-4, "var {v}");
        }
        assert!((stats.mean[0] - 2.5).abs() < 1e-12);
    }

    #[test]
    fn eval_mode_uses_running_stats() {
        let mut g = Graph::new();
        let x = g.input(Tensor::new(vec![2, 1], vec![3.0, 5.0]).unwrap());
        let gamma = g.param(Tensor::from_vec(vec![2.0]));
        let beta = g.param(Tensor::from_vec(vec![1.0]));
        let y = g.batchnorm_eval(x, gamma, beta, &[4.0], &[1.0]).unwrap();
        let d = g.value(y).data();
        let istd = 1.0 / (1.0 + BN_EPS).sqrt();
        assert!((d[0] - (2.0 * (3.0 - 4.0) * istd + 1.0)).abs() < 1e-12);
        assert!((d[1] - (2.0 * (5.0 - 4.0) * istd + 1.0)).abs() < 1e-12);
    }
}
