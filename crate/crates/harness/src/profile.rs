//! Complexity profiling: analytic parameter/FLOP counts plus measured
//! single-sample inference latency.

use std::time::Instant;

use wirebench_core::channel::ChannelMatrix;
use wirebench_core::nn::count_params_flops;
use wirebench_core::repr::{Embedder, PATCH_EMBED_DIM};

use crate::error::Result;

/// Profile of one feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub params: u64,
    pub flops: u64,
    /// Median of 100 single-sample embeds after 10 warm-up passes.
    pub median_latency_s: f64,
}

/// Analytic counts per embedder kind:
/// - raw: a reshape; 0 parameters, 0 FLOPs.
/// - ae latent: the encoder network, counted by the layer formula sheet.
/// - patch embed: the frozen L x 128 projection counts as parameters;
///   FLOPs are P patch projections (2*L*128 each) plus the P*128 summary
///   accumulation and its 128 divisions.
pub fn count_embedder(embedder: &Embedder) -> Result<(u64, u64)> {
    Ok(match embedder {
        Embedder::Raw { .. } => (0, 0),
        Embedder::AeLatent { autoencoder } => {
            let enc = &autoencoder.encoder;
            count_params_flops(&enc.specs(), enc.input_shape())?
        }
        Embedder::PatchEmbed { patch_len, num_patches, .. } => {
            let (l, p) = (*patch_len as u64, *num_patches as u64);
            let d = PATCH_EMBED_DIM as u64;
            let params = l * d;
            let flops = p * 2 * l * d + p * d + d;
            (params, flops)
        }
    })
}

/// Full profile with measured latency on the given sample channel.
pub fn profile_embedder(embedder: &Embedder, sample: &ChannelMatrix) -> Result<Profile> {
    let (params, flops) = count_embedder(embedder)?;
    for _ in 0..10 {
        embedder.embed(sample)?;
    }
    let mut times: Vec<f64> = (0..100)
        .map(|_| {
            let t0 = Instant::now();
            let _ = embedder.embed(sample);
            t0.elapsed().as_secs_f64()
        })
        .collect();
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
    Ok(Profile {
        params,
        flops,
        median_latency_s: times[times.len() / 2],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn sample(m: usize, n: usize) -> ChannelMatrix {
        let entries = (0..m * n)
            .map(|i| Complex64::new((i as f64 * 0.13).sin(), (i as f64 * 0.29).cos()))
            .collect();
        ChannelMatrix::new(m, n, entries).unwrap()
    }

    #[test]
    fn raw_profile_is_free() {
        let e = Embedder::raw(8, 8);
        let p = profile_embedder(&e, &sample(8, 8)).unwrap();
        assert_eq!(p.params, 0);
        assert_eq!(p.flops, 0);
        assert!(p.median_latency_s >= 0.0 && p.median_latency_s.is_finite());
    }

    #[test]
    fn patch_embed_counts_match_hand_formula() {
        // 8x8 channel, L = 16 -> P = 8 patches.
        let e = Embedder::patch_embed(8, 8, 16, 1).unwrap();
        let (params, flops) = count_embedder(&e).unwrap();
        assert_eq!(params, 16 * 128);
        assert_eq!(flops, 8 * 2 * 16 * 128 + 8 * 128 + 128);
    }
}
