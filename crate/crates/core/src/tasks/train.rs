//! Feature construction and the three downstream training loops.

use rand::seq::SliceRandom;

use crate::channel::{add_awgn_with_ref, Dataset};
use crate::error::{CoreError, Result};
use crate::nn::{Graph, LayerSpec, Mode, Network, Optimizer, Tensor};
use crate::repr::Embedder;
use crate::rng::{derive_seed, stream_rng};

use super::codebook::{beam_oracle, Codebook};
use super::metrics::weighted_f1;
use super::power::{evaluate_se, PowerInstance, PowerNet, PowerNetConfig};

/// Whether features are embedded from clean channels or from channels
/// corrupted at a dataset-referenced SNR first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureNoise {
    Clean,
    SnrDb(f64),
}

/// Embedded samples with integer labels.
#[derive(Debug, Clone)]
pub struct FeatureSet {
    pub dim: usize,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    fn batch_tensor(&self, idx: &[usize]) -> Result<Tensor> {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &i in idx {
            data.extend_from_slice(&self.features[i]);
        }
        Tensor::new(vec![idx.len(), self.dim], data)
    }

    fn batch_labels(&self, idx: &[usize]) -> Vec<usize> {
        idx.iter().map(|&i| self.labels[i]).collect()
    }
}

fn embed_records(
    embedder: &Embedder,
    dataset: &Dataset,
    indices: &[usize],
    noise: FeatureNoise,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    match noise {
        FeatureNoise::Clean => {
            let channels: Vec<_> = indices.iter().map(|&i| &dataset.record(i).channel).collect();
            embedder.embed_batch(&channels)
        }
        FeatureNoise::SnrDb(snr) => {
            // Per-record noise stream: the same record gets the same
            // corruption regardless of subset membership.
            let noisy: Vec<_> = indices
                .iter()
                .map(|&i| {
                    let mut rng = stream_rng(derive_seed(seed, 0xA3), i as u64);
                    add_awgn_with_ref(&dataset.record(i).channel, snr, 1.0, &mut rng).noisy
                })
                .collect();
            let refs: Vec<_> = noisy.iter().collect();
            embedder.embed_batch(&refs)
        }
    }
}

/// Features + LoS labels for the given record indices.
pub fn los_features(
    embedder: &Embedder,
    dataset: &Dataset,
    indices: &[usize],
    noise: FeatureNoise,
    seed: u64,
) -> Result<FeatureSet> {
    let features = embed_records(embedder, dataset, indices, noise, seed)?;
    let labels = indices
        .iter()
        .map(|&i| dataset.record(i).los_label())
        .collect();
    Ok(FeatureSet {
        dim: embedder.feature_dim(),
        features,
        labels,
    })
}

/// Features + beam labels. Labels always come from the clean channel; only
/// the features see noise.
pub fn beam_features(
    embedder: &Embedder,
    dataset: &Dataset,
    indices: &[usize],
    codebook: &Codebook,
    noise: FeatureNoise,
    seed: u64,
) -> Result<FeatureSet> {
    let features = embed_records(embedder, dataset, indices, noise, seed)?;
    let labels: Result<Vec<usize>> = indices
        .iter()
        .map(|&i| beam_oracle(codebook, &dataset.record(i).channel.subcarrier_average()))
        .collect();
    Ok(FeatureSet {
        dim: embedder.feature_dim(),
        features,
        labels: labels?,
    })
}

/// Per-instance [feature_dim, K] input tensors for the power task.
pub fn power_features(
    embedder: &Embedder,
    dataset: &Dataset,
    instances: &[PowerInstance],
    noise: FeatureNoise,
    seed: u64,
) -> Result<Vec<Tensor>> {
    let dim = embedder.feature_dim();
    instances
        .iter()
        .map(|inst| {
            let k = inst.num_users();
            let embedded = embed_records(embedder, dataset, &inst.user_indices, noise, seed)?;
            let mut data = vec![0.0; dim * k];
            for (u, feat) in embedded.iter().enumerate() {
                for (f, v) in feat.iter().enumerate() {
                    data[f * k + u] = *v;
                }
            }
            Tensor::new(vec![dim, k], data)
        })
        .collect()
}

/// Shared classifier training settings.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Hidden width of the LoS MLP.
    pub hidden: usize,
    /// Dropout rate of the beam network blocks.
    pub dropout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 64,
            learning_rate: 1e-3,
            hidden: 256,
            dropout: 0.3,
        }
    }
}

/// One row of a training curve.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetric {
    pub epoch: usize,
    pub train_loss: f64,
    /// Weighted F1 for classifiers; mean SE over EPA SE for the power task.
    pub val_metric: f64,
}

/// Argmax class predictions of a classifier network.
pub fn predict_classes(net: &Network, features: &FeatureSet) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(features.len());
    for chunk in (0..features.len()).collect::<Vec<_>>().chunks(256) {
        let x = features.batch_tensor(chunk)?;
        let probs = net.infer(x)?;
        let k = probs.shape()[1];
        for row in probs.data().chunks(k) {
            let best = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite probabilities"))
                .map(|(i, _)| i)
                .unwrap_or(0);
            out.push(best);
        }
    }
    Ok(out)
}

/// Weighted F1 of a classifier on a feature set.
pub fn classifier_f1(net: &Network, features: &FeatureSet) -> Result<f64> {
    weighted_f1(&predict_classes(net, features)?, &features.labels)
}

fn train_classifier(
    mut net: Network,
    num_classes: usize,
    train: &FeatureSet,
    val: &FeatureSet,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Network, Vec<EpochMetric>)> {
    if let Some(bad) = train.labels.iter().chain(&val.labels).find(|&&l| l >= num_classes) {
        return Err(CoreError::Config(format!(
            "label {bad} out of range for {num_classes} model classes"
        )));
    }
    let mut opt = Optimizer::adam(cfg.learning_rate);
    let mut rng = stream_rng(seed, 1);
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue; // batch-norm needs at least two samples
            }
            let x = train.batch_tensor(chunk)?;
            let y = train.batch_labels(chunk);
            let mut g = Graph::new();
            let xv = g.input(x);
            let (probs, params) = net.forward(&mut g, xv, Mode::Train, &mut rng)?;
            let loss = g.cross_entropy(probs, &y)?;
            let loss_val = g.value(loss).item()?;
            if !loss_val.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "classifier training diverged at epoch {epoch}"
                )));
            }
            loss_sum += loss_val;
            batches += 1;
            g.backward(loss)?;
            let grads: Vec<Vec<f64>> = params.iter().map(|v| g.grad(*v)).collect();
            opt.step(net.param_tensors_mut(), &grads)?;
        }
        let val_metric = if val.is_empty() {
            f64::NAN
        } else {
            classifier_f1(&net, val)?
        };
        curve.push(EpochMetric {
            epoch,
            train_loss: loss_sum / batches.max(1) as f64,
            val_metric,
        });
    }
    Ok((net, curve))
}

/// LoS/NLoS classifier: one hidden ReLU layer to two classes, trained with
/// cross-entropy over the softmax (equal to binary cross-entropy on the
/// positive-class probability for two classes).
pub fn train_los(
    train: &FeatureSet,
    val: &FeatureSet,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Network, Vec<EpochMetric>)> {
    let net = Network::new(
        vec![
            LayerSpec::Dense { in_features: train.dim, out_features: cfg.hidden },
            LayerSpec::Relu,
            LayerSpec::Dense { in_features: cfg.hidden, out_features: 2 },
            LayerSpec::Softmax,
        ],
        &[train.dim],
        &mut stream_rng(seed, 0),
    )?;
    train_classifier(net, 2, train, val, cfg, seed)
}

/// Beam classifier: three halving dense/BN/ReLU/dropout blocks into K
/// logits.
pub fn train_beam(
    train: &FeatureSet,
    val: &FeatureSet,
    num_beams: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<(Network, Vec<EpochMetric>)> {
    let d = train.dim;
    let (d2, d4, d8) = (d / 2, d / 4, d / 8);
    if d8 < 2 {
        return Err(CoreError::Config(format!(
            "feature dimension {d} too small for three halving blocks"
        )));
    }
    let net = Network::new(
        vec![
            LayerSpec::Dense { in_features: d, out_features: d2 },
            LayerSpec::BatchNorm1d { features: d2 },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: cfg.dropout },
            LayerSpec::Dense { in_features: d2, out_features: d4 },
            LayerSpec::BatchNorm1d { features: d4 },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: cfg.dropout },
            LayerSpec::Dense { in_features: d4, out_features: d8 },
            LayerSpec::BatchNorm1d { features: d8 },
            LayerSpec::Relu,
            LayerSpec::Dropout { rate: cfg.dropout },
            LayerSpec::Dense { in_features: d8, out_features: num_beams },
            LayerSpec::Softmax,
        ],
        &[d],
        &mut stream_rng(seed, 0),
    )?;
    train_classifier(net, num_beams, train, val, cfg, seed)
}

/// Power-task training bundle: per-instance inputs plus SINR data, and PGD
/// labels where available.
#[derive(Debug, Clone)]
pub struct PowerTrainData {
    pub inputs: Vec<Tensor>,
    pub instances: Vec<PowerInstance>,
    /// PGD allocations for the supervised subset, index-aligned.
    pub labels: Vec<Option<Vec<f64>>>,
}

impl PowerTrainData {
    pub fn new(
        inputs: Vec<Tensor>,
        instances: Vec<PowerInstance>,
        labels: Vec<Option<Vec<f64>>>,
    ) -> Result<Self> {
        if inputs.len() != instances.len() || labels.len() != instances.len() {
            return Err(CoreError::Config(format!(
                "power data misaligned: {} inputs, {} instances, {} labels",
                inputs.len(),
                instances.len(),
                labels.len()
            )));
        }
        Ok(Self {
            inputs,
            instances,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    fn batch(&self, idx: &[usize]) -> Result<(Tensor, Vec<Vec<f64>>, Vec<f64>)> {
        let shape = self.inputs[0].shape().to_vec();
        let mut data = Vec::with_capacity(idx.len() * self.inputs[0].numel());
        let mut gains = Vec::with_capacity(idx.len());
        let mut sigma2 = Vec::with_capacity(idx.len());
        for &i in idx {
            data.extend_from_slice(self.inputs[i].data());
            gains.push(self.instances[i].gains.clone());
            sigma2.push(self.instances[i].noise_power);
        }
        Ok((
            Tensor::new(vec![idx.len(), shape[0], shape[1]], data)?,
            gains,
            sigma2,
        ))
    }
}

/// Hybrid schedule settings for the power task.
#[derive(Debug, Clone)]
pub struct PowerTrainConfig {
    pub net: PowerNetConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Fraction of epochs spent on the supervised warm-up.
    pub warmup_fraction: f64,
}

impl Default for PowerTrainConfig {
    fn default() -> Self {
        Self {
            net: PowerNetConfig::default(),
            epochs: 50,
            batch_size: 16,
            learning_rate: 1e-3,
            warmup_fraction: 0.6,
        }
    }
}

/// Hybrid training: the first 60% of epochs regress onto PGD labels (MSE
/// over the labeled subset), the rest maximize spectral efficiency directly
/// (negative SE loss over all instances).
pub fn train_power(
    train: &PowerTrainData,
    val: &PowerTrainData,
    cfg: &PowerTrainConfig,
    seed: u64,
) -> Result<(PowerNet, Vec<EpochMetric>)> {
    if train.is_empty() {
        return Err(CoreError::Config("no training instances".into()));
    }
    let shape = train.inputs[0].shape().to_vec();
    let (feature_dim, k) = (shape[0], shape[1]);
    let budget = train.instances[0].power_budget;
    let mut net = PowerNet::new(feature_dim, k, budget, &cfg.net, seed)?;
    let mut opt = Optimizer::adam(cfg.learning_rate);
    let mut rng = stream_rng(seed, 1);
    let warmup_epochs = ((cfg.epochs as f64) * cfg.warmup_fraction).ceil() as usize;
    let labeled: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i].is_some()).collect();
    if warmup_epochs > 0 && labeled.is_empty() {
        return Err(CoreError::Config(
            "warm-up requested but no PGD labels present".into(),
        ));
    }
    let mut curve = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let warmup = epoch < warmup_epochs;
        let mut order: Vec<usize> = if warmup {
            labeled.clone()
        } else {
            (0..train.len()).collect()
        };
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            if chunk.len() < 2 {
                continue;
            }
            let (x, gains, sigma2) = train.batch(chunk)?;
            let mut g = Graph::new();
            let xv = g.input(x);
            let (powers, params) = net.forward(&mut g, xv, Mode::Train, &mut rng)?;
            let loss = if warmup {
                let mut target = Vec::with_capacity(chunk.len() * k);
                for &i in chunk {
                    target.extend_from_slice(train.labels[i].as_ref().expect("labeled subset"));
                }
                let t = Tensor::new(vec![chunk.len(), k], target)?;
                g.mse(powers, &t)?
            } else {
                g.neg_se(powers, &gains, &sigma2)?
            };
            let loss_val = g.value(loss).item()?;
            if !loss_val.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "power training diverged at epoch {epoch}"
                )));
            }
            loss_sum += loss_val;
            batches += 1;
            g.backward(loss)?;
            let grads: Vec<Vec<f64>> = params.iter().map(|v| g.grad(*v)).collect();
            opt.step(net.param_tensors_mut(), &grads)?;
        }
        let val_metric = if val.is_empty() {
            f64::NAN
        } else {
            mean_se_over_epa(&net, val)?
        };
        curve.push(EpochMetric {
            epoch,
            train_loss: loss_sum / batches.max(1) as f64,
            val_metric,
        });
    }
    Ok((net, curve))
}

/// Eval-mode allocations for every instance in a bundle.
pub fn allocate_all(net: &PowerNet, data: &PowerTrainData) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(data.len());
    for chunk in (0..data.len()).collect::<Vec<_>>().chunks(64) {
        let (x, _, _) = data.batch(chunk)?;
        out.extend(net.allocate(&x)?);
    }
    Ok(out)
}

/// Mean over instances of SE(model) / SE(EPA).
pub fn mean_se_over_epa(net: &PowerNet, data: &PowerTrainData) -> Result<f64> {
    let allocations = allocate_all(net, data)?;
    let mut total = 0.0;
    for (inst, p) in data.instances.iter().zip(&allocations) {
        let se = evaluate_se(inst, p)?;
        let epa = crate::classical::epa(inst.num_users(), inst.power_budget);
        let se_epa = evaluate_se(inst, &epa)?;
        total += se / se_epa;
    }
    Ok(total / data.len() as f64)
}
