//! Denoising convolutional autoencoder for CSI compression.
//!
//! The encoder normalizes the two-plane channel image, extracts features
//! through three conv/BN/ReLU blocks (2x2 max pooling in blocks two and
//! three), and projects the flattened C2*MN/16 map to the latent vector.
//! The decoder mirrors it with nearest-neighbor upsampling and exists only
//! for training; inference uses the encoder alone.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::{add_awgn_with_ref, ChannelMatrix, Dataset};
use crate::error::{CoreError, Result};
use crate::nn::{
    read_header, read_network, write_header, write_network, Graph, LayerSpec, Mode, Network,
    Optimizer, Tensor,
};
use crate::rng::stream_rng;

/// Autoencoder hyperparameters.
#[derive(Debug, Clone)]
pub struct AeConfig {
    /// Channels of the first conv block.
    pub c1: usize,
    /// Channels of the second and third conv blocks.
    pub c2: usize,
    /// Compression denominator: latent dim = M*N / ratio (16 or 32).
    pub ratio: usize,
    /// Denoising corruption range in dB, sampled uniformly per sample.
    pub snr_range_db: (f64, f64),
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for AeConfig {
    fn default() -> Self {
        Self {
            c1: 16,
            c2: 32,
            ratio: 32,
            snr_range_db: (0.0, 20.0),
            epochs: 12,
            batch_size: 50,
            learning_rate: 1e-3,
        }
    }
}

/// Encoder + decoder pair over an M x N channel.
#[derive(Debug, Clone)]
pub struct Autoencoder {
    pub encoder: Network,
    pub decoder: Network,
    num_antennas: usize,
    num_subcarriers: usize,
    latent_dim: usize,
}

/// Per-epoch mean train and validation reconstruction losses.
pub type LossCurve = Vec<(f64, f64)>;

/// Channel as a [2, M, N] real/imaginary image.
pub fn channel_to_tensor(h: &ChannelMatrix) -> Tensor {
    let (m, n) = (h.num_antennas(), h.num_subcarriers());
    let mut data = Vec::with_capacity(2 * m * n);
    data.extend(h.entries().iter().map(|c| c.re));
    data.extend(h.entries().iter().map(|c| c.im));
    Tensor::new(vec![2, m, n], data).expect("2MN elements")
}

/// Inverse of [`channel_to_tensor`] for a [2, M, N] or flattened tensor.
pub fn tensor_to_channel(t: &[f64], m: usize, n: usize) -> Result<ChannelMatrix> {
    if t.len() != 2 * m * n {
        return Err(CoreError::Shape(format!(
            "expected {} values for a {m}x{n} channel, got {}",
            2 * m * n,
            t.len()
        )));
    }
    let entries = (0..m * n)
        .map(|i| Complex64::new(t[i], t[m * n + i]))
        .collect();
    ChannelMatrix::new(m, n, entries)
}

impl Autoencoder {
    /// Freshly initialized autoencoder; M and N must be divisible by 4 for
    /// the two pooling stages, and ratio must be 16 or 32.
    pub fn new(m: usize, n: usize, cfg: &AeConfig, seed: u64) -> Result<Self> {
        if m % 4 != 0 || n % 4 != 0 {
            return Err(CoreError::Config(format!(
                "autoencoder needs M, N divisible by 4, got {m}x{n}"
            )));
        }
        if cfg.ratio != 16 && cfg.ratio != 32 {
            return Err(CoreError::Config(format!(
                "compression ratio must be 16 or 32, got {}",
                cfg.ratio
            )));
        }
        if (m * n) % cfg.ratio != 0 {
            return Err(CoreError::Config(format!(
                "M*N = {} not divisible by ratio {}",
                m * n,
                cfg.ratio
            )));
        }
        let latent = m * n / cfg.ratio;
        let flat = cfg.c2 * (m / 4) * (n / 4);
        let (c1, c2) = (cfg.c1, cfg.c2);
        let mut rng = stream_rng(seed, 0);
        let encoder = Network::new(
            vec![
                LayerSpec::BatchNorm2d { channels: 2 },
                LayerSpec::Conv2d { in_channels: 2, out_channels: c1, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::BatchNorm2d { channels: c1 },
                LayerSpec::Relu,
                LayerSpec::Conv2d { in_channels: c1, out_channels: c2, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::BatchNorm2d { channels: c2 },
                LayerSpec::Relu,
                LayerSpec::MaxPool2x2,
                LayerSpec::Conv2d { in_channels: c2, out_channels: c2, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::BatchNorm2d { channels: c2 },
                LayerSpec::Relu,
                LayerSpec::MaxPool2x2,
                LayerSpec::Flatten,
                LayerSpec::Dense { in_features: flat, out_features: latent },
            ],
            &[2, m, n],
            &mut rng,
        )?;
        let decoder = Network::new(
            vec![
                LayerSpec::Dense { in_features: latent, out_features: flat },
                LayerSpec::Relu,
                LayerSpec::Reshape { shape: vec![c2, m / 4, n / 4] },
                LayerSpec::Upsample2x,
                LayerSpec::Conv2d { in_channels: c2, out_channels: c1, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::BatchNorm2d { channels: c1 },
                LayerSpec::Relu,
                LayerSpec::Upsample2x,
                LayerSpec::Conv2d { in_channels: c1, out_channels: c1, kernel: 3, stride: 1, padding: 1 },
                LayerSpec::BatchNorm2d { channels: c1 },
                LayerSpec::Relu,
                LayerSpec::Conv2d { in_channels: c1, out_channels: 2, kernel: 3, stride: 1, padding: 1 },
            ],
            &[latent],
            &mut rng,
        )?;
        Ok(Self {
            encoder,
            decoder,
            num_antennas: m,
            num_subcarriers: n,
            latent_dim: latent,
        })
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    /// Deterministic eval-mode encoding of one channel.
    pub fn encode(&self, h: &ChannelMatrix) -> Result<Vec<f64>> {
        if h.num_antennas() != self.num_antennas || h.num_subcarriers() != self.num_subcarriers {
            return Err(CoreError::Shape(format!(
                "autoencoder expects {}x{}, got {}x{}",
                self.num_antennas,
                self.num_subcarriers,
                h.num_antennas(),
                h.num_subcarriers()
            )));
        }
        let t = channel_to_tensor(h);
        let batched = t.reshaped(&[1, 2, self.num_antennas, self.num_subcarriers])?;
        Ok(self.encoder.infer(batched)?.into_data())
    }

    /// Encode a batch of channels in one forward pass.
    pub fn encode_batch(&self, hs: &[&ChannelMatrix]) -> Result<Vec<Vec<f64>>> {
        let (m, n) = (self.num_antennas, self.num_subcarriers);
        let mut data = Vec::with_capacity(hs.len() * 2 * m * n);
        for h in hs {
            if h.num_antennas() != m || h.num_subcarriers() != n {
                return Err(CoreError::Shape("channel shape mismatch in batch".into()));
            }
            data.extend(channel_to_tensor(h).into_data());
        }
        let x = Tensor::new(vec![hs.len(), 2, m, n], data)?;
        let z = self.encoder.infer(x)?;
        Ok(z.data()
            .chunks(self.latent_dim)
            .map(|c| c.to_vec())
            .collect())
    }

    /// Decode a latent vector back to an M x N channel estimate.
    pub fn decode(&self, z: &[f64]) -> Result<ChannelMatrix> {
        if z.len() != self.latent_dim {
            return Err(CoreError::Shape(format!(
                "latent length {} but decoder expects {}",
                z.len(),
                self.latent_dim
            )));
        }
        let t = Tensor::new(vec![1, self.latent_dim], z.to_vec())?;
        let out = self.decoder.infer(t)?;
        tensor_to_channel(out.data(), self.num_antennas, self.num_subcarriers)
    }

    /// decode(encode(h)) in eval mode.
    pub fn reconstruct(&self, h: &ChannelMatrix) -> Result<ChannelMatrix> {
        self.decode(&self.encode(h)?)
    }
}

/// Train the denoising autoencoder: each step corrupts a batch with AWGN at
/// an SNR drawn from the configured range, reconstructs, and minimizes MSE
/// against the clean channels. Returns the model and the per-epoch loss
/// curve. Aborts with a diagnostic if the loss diverges.
pub fn train_denoising_ae(
    dataset: &Dataset,
    cfg: &AeConfig,
    seed: u64,
) -> Result<(Autoencoder, LossCurve)> {
    let (m, n) = (dataset.num_antennas(), dataset.num_subcarriers());
    let mut ae = Autoencoder::new(m, n, cfg, seed)?;
    let mut opt = Optimizer::adam(cfg.learning_rate);
    let train_idx = dataset.split().train.clone();
    if train_idx.is_empty() {
        return Err(CoreError::Config("empty training split".into()));
    }
    let ref_power = 1.0; // dataset is normalized to unit mean entry power
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut loop_rng = stream_rng(seed, 1);
    for epoch in 0..cfg.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut loop_rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            // Batches of one sample break batch-norm statistics; fold the
            // remainder into the epoch mean by skipping it.
            if chunk.len() < 2 {
                continue;
            }
            let mut noisy = Vec::with_capacity(chunk.len() * 2 * m * n);
            let mut clean = Vec::with_capacity(chunk.len() * 2 * m * n);
            for &i in chunk {
                let h = &dataset.record(i).channel;
                let snr = loop_rng.gen_range(cfg.snr_range_db.0..=cfg.snr_range_db.1);
                let corrupted = add_awgn_with_ref(h, snr, ref_power, &mut loop_rng).noisy;
                noisy.extend(channel_to_tensor(&corrupted).into_data());
                clean.extend(channel_to_tensor(h).into_data());
            }
            let x = Tensor::new(vec![chunk.len(), 2, m, n], noisy)?;
            let target = Tensor::new(vec![chunk.len(), 2, m, n], clean)?;

            let mut g = Graph::new();
            let xv = g.input(x);
            let (z, enc_params) = ae.encoder.forward(&mut g, xv, Mode::Train, &mut loop_rng)?;
            let (recon, dec_params) = ae.decoder.forward(&mut g, z, Mode::Train, &mut loop_rng)?;
            let loss = g.mse(recon, &target)?;
            let loss_val = g.value(loss).item()?;
            if !loss_val.is_finite() {
                return Err(CoreError::Numeric(format!(
                    "autoencoder training diverged at epoch {epoch} (loss {loss_val})"
                )));
            }
            epoch_loss += loss_val;
            batches += 1;
            g.backward(loss)?;
            let grads: Vec<Vec<f64>> = enc_params
                .iter()
                .chain(&dec_params)
                .map(|v| g.grad(*v))
                .collect();
            let params: Vec<&mut Tensor> = ae
                .encoder
                .param_tensors_mut()
                .into_iter()
                .chain(ae.decoder.param_tensors_mut())
                .collect();
            opt.step(params, &grads)?;
        }
        let train_loss = epoch_loss / batches.max(1) as f64;
        let val_loss = validation_loss(&ae, dataset, cfg, seed, epoch)?;
        curve.push((train_loss, val_loss));
    }
    Ok((ae, curve))
}

/// Eval-mode reconstruction MSE on the validation split, corrupted at the
/// midpoint of the training SNR range with an epoch-derived stream.
fn validation_loss(
    ae: &Autoencoder,
    dataset: &Dataset,
    cfg: &AeConfig,
    seed: u64,
    epoch: usize,
) -> Result<f64> {
    let (m, n) = (dataset.num_antennas(), dataset.num_subcarriers());
    let mid_snr = 0.5 * (cfg.snr_range_db.0 + cfg.snr_range_db.1);
    let mut rng = stream_rng(seed, 1_000_000 + epoch as u64);
    let val_idx = &dataset.split().val;
    if val_idx.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for chunk in val_idx.chunks(cfg.batch_size) {
        let mut noisy = Vec::with_capacity(chunk.len() * 2 * m * n);
        let mut clean = Vec::with_capacity(chunk.len() * 2 * m * n);
        for &i in chunk {
            let h = &dataset.record(i).channel;
            let corrupted = add_awgn_with_ref(h, mid_snr, 1.0, &mut rng).noisy;
            noisy.extend(channel_to_tensor(&corrupted).into_data());
            clean.extend(channel_to_tensor(h).into_data());
        }
        let x = Tensor::new(vec![chunk.len(), 2, m, n], noisy)?;
        let out = ae.encoder.infer(x)?;
        let recon = ae.decoder.infer(out)?;
        let diff: f64 = recon
            .data()
            .iter()
            .zip(&clean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        total += diff;
        count += clean.len();
    }
    Ok(total / count as f64)
}

/// Mean per-sample NMSE ||x_hat - h||^2 / ||h||^2 of an arbitrary estimate
/// list against clean channels.
pub fn mean_nmse(estimates: &[ChannelMatrix], clean: &[&ChannelMatrix]) -> f64 {
    let mut total = 0.0;
    for (e, c) in estimates.iter().zip(clean) {
        let err: f64 = e
            .entries()
            .iter()
            .zip(c.entries())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        let pow: f64 = c.entries().iter().map(|v| v.norm_sqr()).sum();
        total += err / pow;
    }
    total / estimates.len() as f64
}

/// Save encoder and decoder to one WBNN file.
pub fn save_autoencoder(path: &Path, ae: &Autoencoder) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, 2)?;
    write_network(&mut w, &ae.encoder)?;
    write_network(&mut w, &ae.decoder)
}

/// Load an autoencoder saved by [`save_autoencoder`].
pub fn load_autoencoder(path: &Path) -> Result<Autoencoder> {
    let mut r = BufReader::new(File::open(path).map_err(|e| {
        CoreError::Io(format!("cannot open checkpoint {}: {e}", path.display()))
    })?);
    let count = read_header(&mut r)?;
    if count != 2 {
        return Err(CoreError::Io(format!(
            "autoencoder checkpoint must hold 2 networks, found {count}"
        )));
    }
    let encoder = read_network(&mut r)?;
    let decoder = read_network(&mut r)?;
    let shape = encoder.input_shape().to_vec();
    if shape.len() != 3 || shape[0] != 2 {
        return Err(CoreError::Io(format!(
            "unexpected encoder input shape {shape:?}"
        )));
    }
    let latent = encoder.output_shape()[0];
    Ok(Autoencoder {
        encoder,
        decoder,
        num_antennas: shape[1],
        num_subcarriers: shape[2],
        latent_dim: latent,
    })
}
