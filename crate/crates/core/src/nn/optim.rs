//! Parameter update rules.

use crate::error::{CoreError, Result};

use super::tensor::Tensor;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// SGD or Adam state over an ordered parameter list.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        step: u64,
        moments1: Vec<Vec<f64>>,
        moments2: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    pub fn sgd(lr: f64) -> Self {
        Optimizer::Sgd { lr }
    }

    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            step: 0,
            moments1: Vec::new(),
            moments2: Vec::new(),
        }
    }

    /// Apply one update. `params` and `grads` must be index-aligned; Adam
    /// moments are allocated on first use and keep parameter shapes.
    pub fn step(&mut self, mut params: Vec<&mut Tensor>, grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(CoreError::Shape(format!(
                "optimizer: {} params vs {} grads",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            if p.numel() != g.len() {
                return Err(CoreError::Shape(format!(
                    "optimizer: param {:?} vs grad len {}",
                    p.shape(),
                    g.len()
                )));
            }
        }
        match self {
            Optimizer::Sgd { lr } => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (pv, gv) in p.data_mut().iter_mut().zip(g) {
                        *pv -= *lr * gv;
                    }
                }
            }
            Optimizer::Adam {
                lr,
                step,
                moments1,
                moments2,
            } => {
                if moments1.is_empty() {
                    *moments1 = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                    *moments2 = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                }
                *step += 1;
                let t = *step as i32;
                let bc1 = 1.0 - ADAM_BETA1.powi(t);
                let bc2 = 1.0 - ADAM_BETA2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(moments1.iter_mut().zip(moments2.iter_mut()))
                {
                    for ((pv, gv), (mv, vv)) in
                        p.data_mut().iter_mut().zip(g).zip(m.iter_mut().zip(v.iter_mut()))
                    {
                        *mv = ADAM_BETA1 * *mv + (1.0 - ADAM_BETA1) * gv;
                        *vv = ADAM_BETA2 * *vv + (1.0 - ADAM_BETA2) * gv * gv;
                        let mhat = *mv / bc1;
                        let vhat = *vv / bc2;
                        *pv -= *lr * mhat / (vhat.sqrt() + ADAM_EPS);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_basic_step() {
        let mut p = Tensor::scalar(1.0);
        let mut opt = Optimizer::sgd(0.1);
        opt.step(vec![&mut p], &[vec![1.0]]).unwrap();
        assert!((p.data()[0] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_magnitude_is_lr() {
        let mut p = Tensor::from_vec(vec![5.0, -3.0]);
        let mut opt = Optimizer::adam(0.01);
        opt.step(vec![&mut p], &[vec![1.0, 1.0]]).unwrap();
        // Bias correction makes the first update lr / (1 + eps) per element.
        assert!((p.data()[0] - (5.0 - 0.01)).abs() < 1e-6);
        assert!((p.data()[1] - (-3.0 - 0.01)).abs() < 1e-6);
    }

    #[test]
    fn zero_grad_leaves_params() {
        let mut p = Tensor::from_vec(vec![0.5, 0.25]);
        let before = p.clone();
        let mut opt = Optimizer::adam(0.1);
        opt.step(vec![&mut p], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(p, before);
        let mut opt = Optimizer::sgd(0.1);
        opt.step(vec![&mut p], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn mismatched_lengths_rejected() {
        let mut p = Tensor::scalar(1.0);
        let mut opt = Optimizer::sgd(0.1);
        assert!(opt.step(vec![&mut p], &[vec![1.0, 2.0]]).is_err());
    }
}
