//! The three benchmarked feature families behind one embedder interface:
//! raw CSI, autoencoder latents, and high-dimensional per-patch embeddings.

mod autoencoder;

pub use autoencoder::{
    channel_to_tensor, load_autoencoder, mean_nmse, save_autoencoder, tensor_to_channel,
    train_denoising_ae, AeConfig, Autoencoder, LossCurve,
};

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};

use crate::channel::ChannelMatrix;
use crate::error::{CoreError, Result};
use crate::patching::to_patches;
use crate::rng::stream_rng;

/// Token width of the per-patch embedding family.
pub const PATCH_EMBED_DIM: usize = 128;
/// Default patch length; P = 2MN / L patches.
pub const DEFAULT_PATCH_LEN: usize = 32;

/// A representation producer with a declared feature dimension. Immutable
/// after construction; `embed` is thread-safe.
#[derive(Debug, Clone)]
pub enum Embedder {
    /// Real/imaginary split of the raw channel, flattened to 2MN.
    Raw { num_antennas: usize, num_subcarriers: usize },
    /// Latent vector of a trained autoencoder encoder.
    AeLatent { autoencoder: Box<Autoencoder> },
    /// Frozen random linear map applied per patch, with a prepended summary
    /// token equal to the mean of the patch embeddings; (P+1) * 128 values.
    PatchEmbed {
        num_antennas: usize,
        num_subcarriers: usize,
        patch_len: usize,
        num_patches: usize,
        seed: u64,
        /// Projection matrix, patch_len x PATCH_EMBED_DIM row-major.
        projection: Vec<f64>,
    },
}

impl Embedder {
    pub fn raw(num_antennas: usize, num_subcarriers: usize) -> Self {
        Embedder::Raw { num_antennas, num_subcarriers }
    }

    pub fn ae_latent(autoencoder: Autoencoder) -> Self {
        Embedder::AeLatent { autoencoder: Box::new(autoencoder) }
    }

    /// Frozen Gaussian projection R^L -> R^128, entries N(0, 1/L), shared
    /// across patches and seeded for reproducibility.
    pub fn patch_embed(
        num_antennas: usize,
        num_subcarriers: usize,
        patch_len: usize,
        seed: u64,
    ) -> Result<Self> {
        let total = 2 * num_antennas * num_subcarriers;
        if patch_len == 0 || total % patch_len != 0 {
            return Err(CoreError::Config(format!(
                "patch length {patch_len} must divide 2MN = {total}"
            )));
        }
        let num_patches = total / patch_len;
        if num_patches % 2 != 0 {
            return Err(CoreError::Config(format!(
                "patch count {num_patches} must be even"
            )));
        }
        let scale = (1.0 / patch_len as f64).sqrt();
        let mut rng = stream_rng(seed, 0);
        let projection = (0..patch_len * PATCH_EMBED_DIM)
            .map(|_| <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) * scale)
            .collect();
        Ok(Embedder::PatchEmbed {
            num_antennas,
            num_subcarriers,
            patch_len,
            num_patches,
            seed,
            projection,
        })
    }

    /// Length of every vector this embedder emits.
    pub fn feature_dim(&self) -> usize {
        match self {
            Embedder::Raw { num_antennas, num_subcarriers } => 2 * num_antennas * num_subcarriers,
            Embedder::AeLatent { autoencoder } => autoencoder.latent_dim(),
            Embedder::PatchEmbed { num_patches, .. } => (num_patches + 1) * PATCH_EMBED_DIM,
        }
    }

    /// Short name used in result tables and manifests.
    pub fn kind_name(&self) -> String {
        match self {
            Embedder::Raw { .. } => "raw".into(),
            Embedder::AeLatent { autoencoder } => {
                let ratio = autoencoder.num_antennas() * autoencoder.num_subcarriers()
                    / autoencoder.latent_dim();
                format!("ae_1_{ratio}")
            }
            Embedder::PatchEmbed { .. } => "patch_embed".into(),
        }
    }

    pub fn embed(&self, h: &ChannelMatrix) -> Result<Vec<f64>> {
        match self {
            Embedder::Raw { num_antennas, num_subcarriers } => {
                check_shape(h, *num_antennas, *num_subcarriers)?;
                let mut out = Vec::with_capacity(2 * num_antennas * num_subcarriers);
                out.extend(h.entries().iter().map(|c| c.re));
                out.extend(h.entries().iter().map(|c| c.im));
                Ok(out)
            }
            Embedder::AeLatent { autoencoder } => autoencoder.encode(h),
            Embedder::PatchEmbed {
                num_antennas,
                num_subcarriers,
                patch_len,
                num_patches,
                projection,
                ..
            } => {
                check_shape(h, *num_antennas, *num_subcarriers)?;
                let seq = to_patches(h, *num_patches)?;
                let mut out = vec![0.0; (num_patches + 1) * PATCH_EMBED_DIM];
                for (p, patch) in seq.patches.iter().enumerate() {
                    let token = &mut out[(p + 1) * PATCH_EMBED_DIM..][..PATCH_EMBED_DIM];
                    for (i, x) in patch.iter().enumerate() {
                        if *x == 0.0 {
                            continue;
                        }
                        let row = &projection[i * PATCH_EMBED_DIM..][..PATCH_EMBED_DIM];
                        for (t, w) in token.iter_mut().zip(row) {
                            *t += x * w;
                        }
                    }
                }
                // Summary token: mean over the P patch embeddings.
                let inv = 1.0 / *num_patches as f64;
                for d in 0..PATCH_EMBED_DIM {
                    let mut acc = 0.0;
                    for p in 0..*num_patches {
                        acc += out[(p + 1) * PATCH_EMBED_DIM + d];
                    }
                    out[d] = acc * inv;
                }
                let _ = patch_len;
                Ok(out)
            }
        }
    }

    /// Embed many channels; the autoencoder path batches its forward pass.
    pub fn embed_batch(&self, hs: &[&ChannelMatrix]) -> Result<Vec<Vec<f64>>> {
        match self {
            Embedder::AeLatent { autoencoder } => autoencoder.encode_batch(hs),
            _ => hs.iter().map(|h| self.embed(h)).collect(),
        }
    }

    /// Structured-text manifest (kind, dims, seed).
    pub fn manifest(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("kind = {}\n", self.kind_name()));
        s.push_str(&format!("feature_dim = {}\n", self.feature_dim()));
        match self {
            Embedder::Raw { num_antennas, num_subcarriers } => {
                s.push_str(&format!("m = {num_antennas}\nn = {num_subcarriers}\n"));
            }
            Embedder::AeLatent { autoencoder } => {
                s.push_str(&format!(
                    "m = {}\nn = {}\nlatent_dim = {}\n",
                    autoencoder.num_antennas(),
                    autoencoder.num_subcarriers(),
                    autoencoder.latent_dim()
                ));
            }
            Embedder::PatchEmbed {
                num_antennas,
                num_subcarriers,
                patch_len,
                num_patches,
                seed,
                ..
            } => {
                s.push_str(&format!(
                    "m = {num_antennas}\nn = {num_subcarriers}\npatch_len = {patch_len}\nnum_patches = {num_patches}\nembed_dim = {PATCH_EMBED_DIM}\nseed = {seed}\n"
                ));
            }
        }
        s
    }
}

fn check_shape(h: &ChannelMatrix, m: usize, n: usize) -> Result<()> {
    if h.num_antennas() != m || h.num_subcarriers() != n {
        return Err(CoreError::Shape(format!(
            "embedder expects {m}x{n}, got {}x{}",
            h.num_antennas(),
            h.num_subcarriers()
        )));
    }
    Ok(())
}

/// Rebuild the channel from a raw embedding; raw embedding is lossless.
pub fn raw_embedding_to_channel(v: &[f64], m: usize, n: usize) -> Result<ChannelMatrix> {
    if v.len() != 2 * m * n {
        return Err(CoreError::Shape(format!(
            "raw embedding length {} but channel needs {}",
            v.len(),
            2 * m * n
        )));
    }
    let entries = (0..m * n)
        .map(|i| Complex64::new(v[i], v[m * n + i]))
        .collect();
    ChannelMatrix::new(m, n, entries)
}

#[cfg(test)]
mod tests;
