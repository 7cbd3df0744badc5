//! Layer specifications and the sequential network container.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{CoreError, Result};

use super::graph::{Graph, Var};
use super::tensor::Tensor;

/// Forward-pass mode. Batch normalization and dropout behave differently.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// One layer of the architecture vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense { in_features: usize, out_features: usize },
    Conv1d { in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize },
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize, stride: usize, padding: usize },
    BatchNorm1d { features: usize },
    BatchNorm2d { channels: usize },
    Relu,
    Sigmoid,
    Softmax,
    MaxPool2x2,
    Upsample2x,
    Dropout { rate: f64 },
    Flatten,
    Reshape { shape: Vec<usize> },
}

impl LayerSpec {
    /// Per-sample output shape; the shape algebra is closed over the
    /// vocabulary, so any spec chain can be validated without data.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let fail = |msg: String| Err(CoreError::Shape(msg));
        match self {
            LayerSpec::Dense { in_features, out_features } => {
                if input != [*in_features] {
                    return fail(format!(
                        "dense({in_features}->{out_features}): input {input:?}"
                    ));
                }
                Ok(vec![*out_features])
            }
            LayerSpec::Conv1d { in_channels, out_channels, kernel, stride, padding } => {
                if input.len() != 2 || input[0] != *in_channels {
                    return fail(format!("conv1d({in_channels}->{out_channels}): input {input:?}"));
                }
                let lo = conv_extent(input[1], *kernel, *stride, *padding)?;
                Ok(vec![*out_channels, lo])
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel, stride, padding } => {
                if input.len() != 3 || input[0] != *in_channels {
                    return fail(format!("conv2d({in_channels}->{out_channels}): input {input:?}"));
                }
                let ho = conv_extent(input[1], *kernel, *stride, *padding)?;
                let wo = conv_extent(input[2], *kernel, *stride, *padding)?;
                Ok(vec![*out_channels, ho, wo])
            }
            LayerSpec::BatchNorm1d { features } => {
                let ok = input == [*features] || (input.len() == 2 && input[0] == *features);
                if !ok {
                    return fail(format!("batchnorm1d({features}): input {input:?}"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::BatchNorm2d { channels } => {
                if input.len() != 3 || input[0] != *channels {
                    return fail(format!("batchnorm2d({channels}): input {input:?}"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Relu | LayerSpec::Sigmoid | LayerSpec::Dropout { .. } => Ok(input.to_vec()),
            LayerSpec::Softmax => {
                if input.len() != 1 {
                    return fail(format!("softmax: input {input:?}"));
                }
                Ok(input.to_vec())
            }
            LayerSpec::MaxPool2x2 => {
                if input.len() != 3 || input[1] % 2 != 0 || input[2] % 2 != 0 {
                    return fail(format!("maxpool2x2: input {input:?}"));
                }
                Ok(vec![input[0], input[1] / 2, input[2] / 2])
            }
            LayerSpec::Upsample2x => {
                if input.len() != 3 {
                    return fail(format!("upsample2x: input {input:?}"));
                }
                Ok(vec![input[0], input[1] * 2, input[2] * 2])
            }
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Reshape { shape } => {
                let numel: usize = input.iter().product();
                let want: usize = shape.iter().product();
                if numel != want {
                    return fail(format!("reshape to {shape:?}: input {input:?}"));
                }
                Ok(shape.clone())
            }
        }
    }
}

fn conv_extent(input: usize, kernel: usize, stride: usize, padding: usize) -> Result<usize> {
    let padded = input + 2 * padding;
    if kernel == 0 || stride == 0 || kernel > padded {
        return Err(CoreError::Shape(format!(
            "kernel {kernel} stride {stride} too large for extent {input} (pad {padding})"
        )));
    }
    Ok((padded - kernel) / stride + 1)
}

/// Running statistics for batch normalization layers.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Running-average momentum for batch normalization.
pub const BN_MOMENTUM: f64 = 0.1;

/// A spec plus its owned parameters and state.
#[derive(Debug, Clone)]
pub struct Layer {
    pub spec: LayerSpec,
    /// Dense/conv: [weight, bias]; batchnorm: [gamma, beta]; otherwise empty.
    pub params: Vec<Tensor>,
    pub running: Option<RunningStats>,
}

impl Layer {
    fn init(spec: LayerSpec, rng: &mut ChaCha12Rng) -> Self {
        let glorot = |shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut ChaCha12Rng| {
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data = (0..shape.iter().product::<usize>())
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            Tensor::new(shape.to_vec(), data).expect("init shape")
        };
        match &spec {
            LayerSpec::Dense { in_features, out_features } => {
                let w = glorot(&[*in_features, *out_features], *in_features, *out_features, rng);
                let b = Tensor::zeros(&[*out_features]);
                Layer { spec, params: vec![w, b], running: None }
            }
            LayerSpec::Conv1d { in_channels, out_channels, kernel, .. } => {
                let fan_in = in_channels * kernel;
                let fan_out = out_channels * kernel;
                let w = glorot(&[*out_channels, *in_channels, *kernel], fan_in, fan_out, rng);
                let b = Tensor::zeros(&[*out_channels]);
                Layer { spec, params: vec![w, b], running: None }
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel, .. } => {
                let fan_in = in_channels * kernel * kernel;
                let fan_out = out_channels * kernel * kernel;
                let w = glorot(
                    &[*out_channels, *in_channels, *kernel, *kernel],
                    fan_in,
                    fan_out,
                    rng,
                );
                let b = Tensor::zeros(&[*out_channels]);
                Layer { spec, params: vec![w, b], running: None }
            }
            LayerSpec::BatchNorm1d { features } => Self::bn(spec.clone(), *features),
            LayerSpec::BatchNorm2d { channels } => Self::bn(spec.clone(), *channels),
            _ => Layer { spec, params: vec![], running: None },
        }
    }

    fn bn(spec: LayerSpec, c: usize) -> Self {
        Layer {
            spec,
            params: vec![Tensor::full(&[c], 1.0), Tensor::zeros(&[c])],
            running: Some(RunningStats {
                mean: vec![0.0; c],
                var: vec![1.0; c],
            }),
        }
    }
}

/// Sequential network over the layer vocabulary.
#[derive(Debug, Clone)]
pub struct Network {
    pub layers: Vec<Layer>,
    input_shape: Vec<usize>,
    output_shape: Vec<usize>,
}

impl Network {
    /// Build and initialize a network, validating the whole shape chain.
    pub fn new(specs: Vec<LayerSpec>, input_shape: &[usize], rng: &mut ChaCha12Rng) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        for (i, spec) in specs.iter().enumerate() {
            shape = spec.output_shape(&shape).map_err(|e| {
                CoreError::Shape(format!("layer {i}: {e}"))
            })?;
        }
        let layers = specs.into_iter().map(|s| Layer::init(s, rng)).collect();
        Ok(Self {
            layers,
            input_shape: input_shape.to_vec(),
            output_shape: shape,
        })
    }

    pub fn from_layers(layers: Vec<Layer>, input_shape: &[usize]) -> Result<Self> {
        let mut shape = input_shape.to_vec();
        for layer in &layers {
            shape = layer.spec.output_shape(&shape)?;
        }
        Ok(Self {
            layers,
            input_shape: input_shape.to_vec(),
            output_shape: shape,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        &self.output_shape
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn param_tensors(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| l.params.iter()).collect()
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params.iter_mut())
            .collect()
    }

    /// Forward pass. In train mode parameters are registered as tracked
    /// leaves (returned in `param_tensors` order) and batch-norm running
    /// statistics are updated; in eval mode nothing tracks gradients.
    pub fn forward(
        &mut self,
        g: &mut Graph,
        x: Var,
        mode: Mode,
        rng: &mut ChaCha12Rng,
    ) -> Result<(Var, Vec<Var>)> {
        let batch = {
            let shape = g.value(x).shape();
            if shape.len() < 2 || shape[1..] != *self.input_shape.as_slice() {
                return Err(CoreError::Shape(format!(
                    "network expects [B, {:?}], got {:?}",
                    self.input_shape,
                    shape
                )));
            }
            shape[0]
        };
        let mut cur = x;
        let mut param_vars = Vec::new();
        for layer in &mut self.layers {
            let mut vars: Vec<Var> = Vec::with_capacity(layer.params.len());
            for p in &layer.params {
                let v = match mode {
                    Mode::Train => g.param(p.clone()),
                    Mode::Eval => g.input(p.clone()),
                };
                vars.push(v);
            }
            cur = match &layer.spec {
                LayerSpec::Dense { .. } => g.dense(cur, vars[0], vars[1])?,
                LayerSpec::Conv1d { stride, padding, .. } => {
                    g.conv1d(cur, vars[0], vars[1], *stride, *padding)?
                }
                LayerSpec::Conv2d { stride, padding, .. } => {
                    g.conv2d(cur, vars[0], vars[1], *stride, *padding)?
                }
                LayerSpec::BatchNorm1d { .. } | LayerSpec::BatchNorm2d { .. } => {
                    let running = layer.running.as_mut().expect("bn layer has running stats");
                    match mode {
                        Mode::Train => {
                            let (out, stats) = g.batchnorm_train(cur, vars[0], vars[1])?;
                            // Unbiased variance feeds the running average.
                            let shape = g.value(cur).shape();
                            let n = shape.iter().product::<usize>() / stats.mean.len().max(1);
                            let ub = if n > 1 { n as f64 / (n as f64 - 1.0) } else { 1.0 };
                            for (r, m) in running.mean.iter_mut().zip(&stats.mean) {
                                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
                            }
                            for (r, v) in running.var.iter_mut().zip(&stats.var) {
                                *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v * ub;
                            }
                            out
                        }
                        Mode::Eval => {
                            g.batchnorm_eval(cur, vars[0], vars[1], &running.mean, &running.var)?
                        }
                    }
                }
                LayerSpec::Relu => g.relu(cur),
                LayerSpec::Sigmoid => g.sigmoid(cur),
                LayerSpec::Softmax => g.softmax_rows(cur)?,
                LayerSpec::MaxPool2x2 => g.maxpool2x2(cur)?,
                LayerSpec::Upsample2x => g.upsample2x(cur)?,
                LayerSpec::Dropout { rate } => match mode {
                    Mode::Train => g.dropout(cur, *rate, rng)?,
                    Mode::Eval => cur,
                },
                LayerSpec::Flatten => {
                    let numel: usize = g.value(cur).shape()[1..].iter().product();
                    g.reshape(cur, &[batch, numel])?
                }
                LayerSpec::Reshape { shape } => {
                    let mut s = vec![batch];
                    s.extend_from_slice(shape);
                    g.reshape(cur, &s)?
                }
            };
            param_vars.extend(vars);
        }
        Ok((cur, param_vars))
    }

    /// Eval-mode forward that never mutates the network: frozen running
    /// statistics, dropout disabled, no gradient tracking.
    pub fn forward_eval(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let batch = {
            let shape = g.value(x).shape();
            if shape.len() < 2 || shape[1..] != *self.input_shape.as_slice() {
                return Err(CoreError::Shape(format!(
                    "network expects [B, {:?}], got {:?}",
                    self.input_shape,
                    shape
                )));
            }
            shape[0]
        };
        let mut cur = x;
        for layer in &self.layers {
            let vars: Vec<Var> = layer.params.iter().map(|p| g.input(p.clone())).collect();
            cur = match &layer.spec {
                LayerSpec::Dense { .. } => g.dense(cur, vars[0], vars[1])?,
                LayerSpec::Conv1d { stride, padding, .. } => {
                    g.conv1d(cur, vars[0], vars[1], *stride, *padding)?
                }
                LayerSpec::Conv2d { stride, padding, .. } => {
                    g.conv2d(cur, vars[0], vars[1], *stride, *padding)?
                }
                LayerSpec::BatchNorm1d { .. } | LayerSpec::BatchNorm2d { .. } => {
                    let rs = layer.running.as_ref().expect("bn layer has running stats");
                    g.batchnorm_eval(cur, vars[0], vars[1], &rs.mean, &rs.var)?
                }
                LayerSpec::Relu => g.relu(cur),
                LayerSpec::Sigmoid => g.sigmoid(cur),
                LayerSpec::Softmax => g.softmax_rows(cur)?,
                LayerSpec::MaxPool2x2 => g.maxpool2x2(cur)?,
                LayerSpec::Upsample2x => g.upsample2x(cur)?,
                LayerSpec::Dropout { .. } => cur,
                LayerSpec::Flatten => {
                    let numel: usize = g.value(cur).shape()[1..].iter().product();
                    g.reshape(cur, &[batch, numel])?
                }
                LayerSpec::Reshape { shape } => {
                    let mut s = vec![batch];
                    s.extend_from_slice(shape);
                    g.reshape(cur, &s)?
                }
            };
        }
        Ok(cur)
    }

    /// Eval-mode forward on a batch tensor; returns the output tensor.
    pub fn infer(&self, x: Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let xv = g.input(x);
        let out = self.forward_eval(&mut g, xv)?;
        Ok(g.value(out).clone())
    }
}
