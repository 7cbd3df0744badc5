use super::*;
use crate::channel::{generate_dataset, Point, ScenarioConfig};
use crate::rng::stream_rng;
use rand::Rng;

fn tiny_config(seed: u64) -> ScenarioConfig {
    ScenarioConfig {
        num_antennas: 8,
        num_subcarriers: 8,
        area: (60.0, 60.0),
        bs_position: Point::new(30.0, 2.0),
        num_blockers: 1,
        blocker_size_range: (6.0, 12.0),
        paths_per_user: 3,
        seed,
        ..ScenarioConfig::default()
    }
}

fn random_channel(m: usize, n: usize, seed: u64) -> ChannelMatrix {
    let mut rng = stream_rng(seed, 42);
    let entries = (0..m * n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    ChannelMatrix::new(m, n, entries).unwrap()
}

#[test]
fn raw_embedding_dims_and_losslessness() {
    let e = Embedder::raw(32, 32);
    assert_eq!(e.feature_dim(), 2048);
    let h = random_channel(32, 32, 1);
    let v = e.embed(&h).unwrap();
    assert_eq!(v.len(), 2048);
    let back = raw_embedding_to_channel(&v, 32, 32).unwrap();
    assert_eq!(back, h);
}

#[test]
fn patch_embed_dims() {
    let e = Embedder::patch_embed(32, 32, 32, 7).unwrap();
    // P = 2*32*32/32 = 64 patches; (64 + 1) * 128 = 8320.
    assert_eq!(e.feature_dim(), 8320);
    let h = random_channel(32, 32, 2);
    assert_eq!(e.embed(&h).unwrap().len(), 8320);
}

#[test]
fn patch_embed_linearity() {
    let e = Embedder::patch_embed(8, 8, 16, 3).unwrap();
    let h1 = random_channel(8, 8, 4);
    let h2 = random_channel(8, 8, 5);
    let (a, b) = (0.7, -1.3);
    let mut combo = h1.clone();
    for (c, (x, y)) in combo
        .entries_mut()
        .iter_mut()
        .zip(h1.entries().iter().zip(h2.entries()))
    {
        *c = x * a + y * b;
    }
    let want: Vec<f64> = e
        .embed(&h1)
        .unwrap()
        .iter()
        .zip(e.embed(&h2).unwrap())
        .map(|(x, y)| a * x + b * y)
        .collect();
    let got = e.embed(&combo).unwrap();
    for (x, y) in got.iter().zip(&want) {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
}

#[test]
fn patch_embed_summary_token_is_mean() {
    let e = Embedder::patch_embed(4, 4, 8, 9).unwrap();
    let h = random_channel(4, 4, 6);
    let v = e.embed(&h).unwrap();
    let p = match &e {
        Embedder::PatchEmbed { num_patches, .. } => *num_patches,
        _ => unreachable!(),
    };
    for d in 0..PATCH_EMBED_DIM {
        let mean: f64 = (0..p).map(|i| v[(i + 1) * PATCH_EMBED_DIM + d]).sum::<f64>() / p as f64;
        assert!((v[d] - mean).abs() < 1e-12);
    }
}

#[test]
fn ae_shapes_and_determinism() {
    let ds = generate_dataset(tiny_config(11), 30).unwrap();
    let ae = Autoencoder::new(8, 8, &AeConfig::default(), 1).unwrap();
    assert_eq!(ae.latent_dim(), 2); // 64 / 32
    let h = &ds.record(0).channel;
    let z1 = ae.encode(h).unwrap();
    let z2 = ae.encode(h).unwrap();
    assert_eq!(z1, z2);
    let est = ae.decode(&z1).unwrap();
    assert_eq!(est.num_antennas(), 8);
    assert_eq!(est.num_subcarriers(), 8);
    let zero = ae.decode(&vec![0.0; 2]).unwrap();
    assert!(zero.is_finite());
}

#[test]
fn ae_latent_dims_for_32x32() {
    let a32 = Autoencoder::new(32, 32, &AeConfig { ratio: 32, ..AeConfig::default() }, 1).unwrap();
    assert_eq!(a32.latent_dim(), 32);
    let a16 = Autoencoder::new(32, 32, &AeConfig { ratio: 16, ..AeConfig::default() }, 1).unwrap();
    assert_eq!(a16.latent_dim(), 64);
    assert_eq!(Embedder::ae_latent(a32).feature_dim(), 32);
    assert_eq!(Embedder::ae_latent(a16).feature_dim(), 64);
}

#[test]
fn ae_training_beats_initial_model_and_is_deterministic() {
    // Single-path LoS channels: a low-dimensional manifold the small
    // autoencoder can learn within a few epochs.
    let scenario = ScenarioConfig {
        num_blockers: 0,
        paths_per_user: 1,
        ..tiny_config(12)
    };
    let ds = generate_dataset(scenario, 200).unwrap();
    let cfg = AeConfig {
        ratio: 16,
        epochs: 30,
        batch_size: 20,
        learning_rate: 2e-3,
        ..AeConfig::default()
    };
    let (_, curve1) = train_denoising_ae(&ds, &cfg, 5).unwrap();
    let (trained, curve2) = train_denoising_ae(&ds, &cfg, 5).unwrap();
    assert_eq!(curve1, curve2, "loss curve must be seed-deterministic");

    // Validation reconstruction MSE of the trained model vs the randomly
    // initialized one, on the same corruption stream.
    let untrained = Autoencoder::new(8, 8, &cfg, 5).unwrap();
    let clean: Vec<&ChannelMatrix> = ds.split().val.iter().map(|&i| &ds.record(i).channel).collect();
    let val_mse = |model: &Autoencoder| -> f64 {
        let mut rng = stream_rng(99, 0);
        let mut total = 0.0;
        let mut count = 0usize;
        for h in &clean {
            let noisy = crate::channel::add_awgn_with_ref(h, 10.0, 1.0, &mut rng).noisy;
            let est = model.reconstruct(&noisy).unwrap();
            total += est
                .entries()
                .iter()
                .zip(h.entries())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>();
            count += 2 * est.entries().len();
        }
        total / count as f64
    };
    let mse_t = val_mse(&trained);
    let mse_u = val_mse(&untrained);
    assert!(
        mse_t < mse_u,
        "trained val MSE {mse_t} should beat untrained {mse_u}"
    );
}

#[test]
fn ae_training_on_identical_channels_converges_hard() {
    // Degenerate dataset: every record is the same channel; reconstruction
    // error should collapse toward zero.
    let base = generate_dataset(tiny_config(13), 5).unwrap();
    let template = base.record(0).clone();
    let records = vec![template; 60];
    let ds = crate::channel::normalize_dataset(records, 3).unwrap();
    let cfg = AeConfig {
        epochs: 14,
        batch_size: 12,
        snr_range_db: (25.0, 35.0),
        learning_rate: 2e-3,
        ..AeConfig::default()
    };
    let (_, curve) = train_denoising_ae(&ds, &cfg, 6).unwrap();
    let final_val = curve.last().unwrap().1;
    let first_val = curve.first().unwrap().1;
    assert!(
        final_val < first_val * 0.05,
        "val loss {final_val} should be far below initial {first_val}"
    );
}

#[test]
fn ae_checkpoint_roundtrip() {
    let ae = Autoencoder::new(8, 8, &AeConfig::default(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ae.wbnn");
    save_autoencoder(&path, &ae).unwrap();
    let loaded = load_autoencoder(&path).unwrap();
    assert_eq!(loaded.latent_dim(), ae.latent_dim());
    let h = random_channel(8, 8, 7);
    let a = loaded.encode(&h).unwrap();
    let b = ae.encode(&h).unwrap();
    // f32 storage rounds the weights; encodings agree to f32 precision.
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-4, "{x} vs {y}");
    }
}

#[test]
fn embedder_manifest_contents() {
    let e = Embedder::patch_embed(8, 8, 16, 77).unwrap();
    let m = e.manifest();
    assert!(m.contains("kind = patch_embed"));
    assert!(m.contains("seed = 77"));
    assert!(m.contains(&format!("feature_dim = {}", e.feature_dim())));
}
