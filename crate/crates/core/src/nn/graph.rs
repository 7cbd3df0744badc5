//! Reverse-mode differentiation tape.
//!
//! A [`Graph`] records every forward operation as a node holding its value,
//! its parent indices, and a backward closure. [`Graph::backward`] runs the
//! reverse sweep from a scalar node and accumulates exact gradients; repeated
//! calls accumulate additively until [`Graph::zero_grad`].
//!
//! Parameters live outside the tape (see [`super::layers::Network`]); each
//! training step registers them as fresh leaves, so tape memory is bounded by
//! one forward pass.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{CoreError, Result};

use super::tensor::Tensor;

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

/// Context handed to backward closures.
pub(crate) struct BackArgs<'a> {
    pub values: &'a [Tensor],
    /// Index of the node being differentiated.
    pub node: usize,
    /// Gradient of the loss w.r.t. this node's value.
    pub out_grad: &'a [f64],
    /// Which parents need a gradient, aligned with `parents`.
    pub need: &'a [bool],
}

/// Per-parent gradient contributions; `None` for parents with `need == false`.
pub(crate) type BackFn = Box<dyn Fn(&BackArgs) -> Vec<Option<Vec<f64>>>>;

struct Node {
    parents: Vec<usize>,
    needs_grad: bool,
    back: Option<BackFn>,
}

#[derive(Default)]
pub struct Graph {
    values: Vec<Tensor>,
    nodes: Vec<Node>,
    grads: Vec<Vec<f64>>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Leaf that does not track gradients (model inputs, constants).
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push_leaf(t, false)
    }

    /// Leaf that tracks gradients (trainable parameters).
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push_leaf(t, true)
    }

    fn push_leaf(&mut self, t: Tensor, requires_grad: bool) -> Var {
        self.values.push(t);
        self.nodes.push(Node {
            parents: vec![],
            needs_grad: requires_grad,
            back: None,
        });
        self.grads.push(Vec::new());
        Var(self.nodes.len() - 1)
    }

    pub(crate) fn push_op(&mut self, value: Tensor, parents: Vec<usize>, back: BackFn) -> Var {
        let needs_grad = parents.iter().any(|&p| self.nodes[p].needs_grad);
        self.values.push(value);
        self.nodes.push(Node {
            parents,
            needs_grad,
            back: Some(back),
        });
        self.grads.push(Vec::new());
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    /// Accumulated gradient of `v`; zeros if backward never reached it.
    pub fn grad(&self, v: Var) -> Vec<f64> {
        if self.grads[v.0].is_empty() {
            vec![0.0; self.values[v.0].numel()]
        } else {
            self.grads[v.0].clone()
        }
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.grads {
            g.clear();
        }
    }

    /// Reverse sweep from a rank-0 node. Gradients add onto any prior sweep.
    pub fn backward(&mut self, scalar: Var) -> Result<()> {
        if !self.values[scalar.0].is_scalar() {
            return Err(CoreError::Shape(format!(
                "backward requires a rank-0 tensor, got shape {:?}",
                self.values[scalar.0].shape()
            )));
        }
        let values = &self.values;
        let nodes = &self.nodes;
        let grads = &mut self.grads;

        let mut scratch: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        scratch[scalar.0] = Some(vec![1.0]);

        for i in (0..=scalar.0).rev() {
            let Some(og) = scratch[i].take() else {
                continue;
            };
            if !nodes[i].needs_grad {
                continue;
            }
            if let Some(back) = &nodes[i].back {
                let need: Vec<bool> = nodes[i]
                    .parents
                    .iter()
                    .map(|&p| nodes[p].needs_grad)
                    .collect();
                let args = BackArgs {
                    values,
                    node: i,
                    out_grad: &og,
                    need: &need,
                };
                let contribs = back(&args);
                debug_assert_eq!(contribs.len(), nodes[i].parents.len());
                for (slot, contrib) in nodes[i].parents.iter().zip(contribs) {
                    let Some(c) = contrib else { continue };
                    debug_assert_eq!(c.len(), values[*slot].numel());
                    match &mut scratch[*slot] {
                        Some(acc) => {
                            for (a, b) in acc.iter_mut().zip(&c) {
                                *a += b;
                            }
                        }
                        s @ None => *s = Some(c),
                    }
                }
            }
            // Fold this sweep's gradient into the persistent accumulator.
            if grads[i].is_empty() {
                grads[i] = og;
            } else {
                for (a, b) in grads[i].iter_mut().zip(&og) {
                    *a += b;
                }
            }
        }
        Ok(())
    }

    // ---- elementwise primitives ----

    fn check_same_shape(&self, a: Var, b: Var, op: &str) -> Result<()> {
        if self.values[a.0].shape() != self.values[b.0].shape() {
            return Err(CoreError::Shape(format!(
                "{op}: shape {:?} vs {:?}",
                self.values[a.0].shape(),
                self.values[b.0].shape()
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape(a, b, "add")?;
        let out = {
            let (xa, xb) = (self.values[a.0].data(), self.values[b.0].data());
            let data = xa.iter().zip(xb).map(|(x, y)| x + y).collect();
            Tensor::new(self.values[a.0].shape().to_vec(), data)?
        };
        Ok(self.push_op(
            out,
            vec![a.0, b.0],
            Box::new(|args| {
                let g = |on| {
                    if on {
                        Some(args.out_grad.to_vec())
                    } else {
                        None
                    }
                };
                vec![g(args.need[0]), g(args.need[1])]
            }),
        ))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape(a, b, "sub")?;
        let out = {
            let (xa, xb) = (self.values[a.0].data(), self.values[b.0].data());
            let data = xa.iter().zip(xb).map(|(x, y)| x - y).collect();
            Tensor::new(self.values[a.0].shape().to_vec(), data)?
        };
        Ok(self.push_op(
            out,
            vec![a.0, b.0],
            Box::new(|args| {
                let da = args.need[0].then(|| args.out_grad.to_vec());
                let db = args.need[1]
                    .then(|| args.out_grad.iter().map(|g| -g).collect());
                vec![da, db]
            }),
        ))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same_shape(a, b, "mul")?;
        let out = {
            let (xa, xb) = (self.values[a.0].data(), self.values[b.0].data());
            let data = xa.iter().zip(xb).map(|(x, y)| x * y).collect();
            Tensor::new(self.values[a.0].shape().to_vec(), data)?
        };
        let (pa, pb) = (a.0, b.0);
        Ok(self.push_op(
            out,
            vec![pa, pb],
            Box::new(move |args| {
                let da = args.need[0].then(|| {
                    args.out_grad
                        .iter()
                        .zip(args.values[pb].data())
                        .map(|(g, y)| g * y)
                        .collect()
                });
                let db = args.need[1].then(|| {
                    args.out_grad
                        .iter()
                        .zip(args.values[pa].data())
                        .map(|(g, x)| g * x)
                        .collect()
                });
                vec![da, db]
            }),
        ))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = {
            let data = self.values[a.0].data().iter().map(|x| x * c).collect();
            Tensor::new(self.values[a.0].shape().to_vec(), data).expect("shape preserved")
        };
        self.push_op(
            out,
            vec![a.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| args.out_grad.iter().map(|g| g * c).collect())]
            }),
        )
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s: f64 = self.values[a.0].data().iter().sum();
        let n = self.values[a.0].numel();
        self.push_op(
            Tensor::scalar(s),
            vec![a.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| vec![args.out_grad[0]; n])]
            }),
        )
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let n = self.values[a.0].numel();
        let s: f64 = self.values[a.0].data().iter().sum();
        self.push_op(
            Tensor::scalar(s / n as f64),
            vec![a.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| vec![args.out_grad[0] / n as f64; n])]
            }),
        )
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.values[a.0].reshaped(shape)?;
        Ok(self.push_op(
            out,
            vec![a.0],
            Box::new(|args| vec![args.need[0].then(|| args.out_grad.to_vec())]),
        ))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let out = {
            let data = self.values[a.0].data().iter().map(|x| x.max(0.0)).collect();
            Tensor::new(self.values[a.0].shape().to_vec(), data).expect("shape preserved")
        };
        let pa = a.0;
        self.push_op(
            out,
            vec![pa],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    args.out_grad
                        .iter()
                        .zip(args.values[pa].data())
                        .map(|(g, x)| if *x > 0.0 { *g } else { 0.0 })
                        .collect()
                })]
            }),
        )
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = {
            let data = self.values[a.0]
                .data()
                .iter()
                .map(|x| 1.0 / (1.0 + (-x).exp()))
                .collect();
            Tensor::new(self.values[a.0].shape().to_vec(), data).expect("shape preserved")
        };
        let v = self.push_op(
            out,
            vec![a.0],
            Box::new(|args| {
                let y = args.values[args.node].data();
                vec![args.need[0].then(|| {
                    args.out_grad
                        .iter()
                        .zip(y)
                        .map(|(g, y)| g * y * (1.0 - y))
                        .collect()
                })]
            }),
        );
        v
    }

    /// Numerically stable softmax over the last axis of a [B, K] tensor.
    pub fn softmax_rows(&mut self, a: Var) -> Result<Var> {
        let shape = self.values[a.0].shape().to_vec();
        if shape.len() != 2 {
            return Err(CoreError::Shape(format!(
                "softmax_rows expects [B, K], got {shape:?}"
            )));
        }
        let (b, k) = (shape[0], shape[1]);
        let mut data = vec![0.0; b * k];
        for r in 0..b {
            let row = &self.values[a.0].data()[r * k..(r + 1) * k];
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (o, x) in data[r * k..(r + 1) * k].iter_mut().zip(row) {
                *o = (x - m).exp();
                z += *o;
            }
            for o in &mut data[r * k..(r + 1) * k] {
                *o /= z;
            }
        }
        Ok(self.push_op(
            Tensor::new(shape, data)?,
            vec![a.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    let y = args.values[args.node].data();
                    let mut dx = vec![0.0; y.len()];
                    for r in 0..b {
                        let ys = &y[r * k..(r + 1) * k];
                        let gs = &args.out_grad[r * k..(r + 1) * k];
                        let dot: f64 = ys.iter().zip(gs).map(|(y, g)| y * g).sum();
                        for ((d, y), g) in dx[r * k..(r + 1) * k].iter_mut().zip(ys).zip(gs) {
                            *d = y * (g - dot);
                        }
                    }
                    dx
                })]
            }),
        ))
    }

    /// Inverted dropout; scales kept activations by 1/(1-rate).
    pub fn dropout(&mut self, a: Var, rate: f64, rng: &mut ChaCha12Rng) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(CoreError::Config(format!(
                "dropout rate must be in [0, 1), got {rate}"
            )));
        }
        if rate == 0.0 {
            // Identity node keeps the tape uniform.
            let out = self.values[a.0].clone();
            return Ok(self.push_op(
                out,
                vec![a.0],
                Box::new(|args| vec![args.need[0].then(|| args.out_grad.to_vec())]),
            ));
        }
        let keep = 1.0 - rate;
        let mask: Vec<f64> = (0..self.values[a.0].numel())
            .map(|_| {
                if rng.gen::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            })
            .collect();
        let out = {
            let data = self.values[a.0]
                .data()
                .iter()
                .zip(&mask)
                .map(|(x, m)| x * m)
                .collect();
            Tensor::new(self.values[a.0].shape().to_vec(), data)?
        };
        Ok(self.push_op(
            out,
            vec![a.0],
            Box::new(move |args| {
                vec![args.need[0].then(|| {
                    args.out_grad
                        .iter()
                        .zip(&mask)
                        .map(|(g, m)| g * m)
                        .collect()
                })]
            }),
        ))
    }
}
