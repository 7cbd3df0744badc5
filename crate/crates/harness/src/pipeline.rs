//! Shared plumbing between the CLI subcommands: embedder resolution and
//! output-path handling.

use std::path::{Path, PathBuf};

use wirebench_core::channel::Dataset;
use wirebench_core::repr::{load_autoencoder, Embedder, DEFAULT_PATCH_LEN};

use crate::config::Config;
use crate::error::{HarnessError, Result};

/// Build the available embedders: raw and patch always, plus one latent
/// embedder per autoencoder checkpoint. The config's representation list
/// filters the result; names accept `raw`, `patch` / `patch_embed`, and
/// `ae_1_<ratio>` / `ae<ratio>`.
pub fn resolve_embedders(
    config: &Config,
    dataset: &Dataset,
    ae_paths: &[PathBuf],
) -> Result<Vec<Embedder>> {
    let (m, n) = (dataset.num_antennas(), dataset.num_subcarriers());
    let scenario = config.scenario(None)?;
    if scenario.num_antennas != m || scenario.num_subcarriers != n {
        return Err(HarnessError::Config(format!(
            "config scenario is {}x{} but the dataset is {m}x{n}",
            scenario.num_antennas, scenario.num_subcarriers
        )));
    }
    let mut embedders = vec![Embedder::raw(m, n)];
    match Embedder::patch_embed(m, n, DEFAULT_PATCH_LEN, scenario.seed) {
        Ok(e) => embedders.push(e),
        Err(_) => { /* patch length does not divide 2MN; skip the family */ }
    }
    for path in ae_paths {
        let ae = load_autoencoder(path)?;
        if ae.num_antennas() != m || ae.num_subcarriers() != n {
            return Err(HarnessError::Config(format!(
                "autoencoder {} is {}x{} but the dataset is {m}x{n}",
                path.display(),
                ae.num_antennas(),
                ae.num_subcarriers()
            )));
        }
        embedders.push(Embedder::ae_latent(ae));
    }
    if let Some(wanted) = config.representations() {
        let canonical = |name: &str| -> String {
            match name {
                "patch" => "patch_embed".into(),
                s if s.starts_with("ae") && !s.starts_with("ae_1_") => {
                    format!("ae_1_{}", &s[2..])
                }
                s => s.into(),
            }
        };
        let wanted: Vec<String> = wanted.iter().map(|s| canonical(s)).collect();
        let available: Vec<String> = embedders.iter().map(|e| e.kind_name()).collect();
        for w in &wanted {
            if !available.contains(w) {
                return Err(HarnessError::Config(format!(
                    "representation `{w}` requested but not available (have: {})",
                    available.join(", ")
                )));
            }
        }
        embedders.retain(|e| wanted.contains(&e.kind_name()));
    }
    if embedders.is_empty() {
        return Err(HarnessError::Config("no representations selected".into()));
    }
    Ok(embedders)
}

/// Resolve an output path: relative paths are re-rooted under the
/// WIREBENCH_OUT directory when that variable is set.
pub fn out_path(requested: &Path) -> PathBuf {
    if requested.is_absolute() {
        return requested.to_path_buf();
    }
    match std::env::var_os("WIREBENCH_OUT") {
        Some(root) => PathBuf::from(root).join(requested),
        None => requested.to_path_buf(),
    }
}

/// Concatenated manifests of the active embedders, written next to bench
/// outputs.
pub fn embedder_manifests(embedders: &[Embedder]) -> String {
    let mut s = String::new();
    for (i, e) in embedders.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        s.push_str(&e.manifest());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use wirebench_core::channel::{generate_dataset, Point, ScenarioConfig};

    fn tiny_dataset() -> Dataset {
        let cfg = ScenarioConfig {
            num_antennas: 8,
            num_subcarriers: 8,
            area: (50.0, 50.0),
            bs_position: Point::new(25.0, 2.0),
            num_blockers: 1,
            blocker_size_range: (5.0, 10.0),
            paths_per_user: 2,
            seed: 3,
            ..ScenarioConfig::default()
        };
        generate_dataset(cfg, 20).unwrap()
    }

    #[test]
    fn default_embedders_are_raw_and_patch() {
        let ds = tiny_dataset();
        let cfg = Config::parse("[scenario]\nm = 8\nn = 8\nseed = 3\n").unwrap();
        let embedders = resolve_embedders(&cfg, &ds, &[]).unwrap();
        let names: Vec<String> = embedders.iter().map(|e| e.kind_name()).collect();
        assert_eq!(names, vec!["raw".to_string(), "patch_embed".to_string()]);
    }

    #[test]
    fn representation_filter_and_aliases() {
        let ds = tiny_dataset();
        let cfg = Config::parse("[scenario]\nm = 8\nn = 8\n[sweep]\nrepresentations = patch\n")
            .unwrap();
        let embedders = resolve_embedders(&cfg, &ds, &[]).unwrap();
        assert_eq!(embedders.len(), 1);
        assert_eq!(embedders[0].kind_name(), "patch_embed");

        let cfg = Config::parse("[scenario]\nm = 8\nn = 8\n[sweep]\nrepresentations = ae32\n")
            .unwrap();
        let err = resolve_embedders(&cfg, &ds, &[]).unwrap_err();
        assert!(err.to_string().contains("ae_1_32"));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let ds = tiny_dataset();
        let cfg = Config::parse("[scenario]\nm = 16\nn = 8\n").unwrap();
        assert!(resolve_embedders(&cfg, &ds, &[]).is_err());
    }
}
