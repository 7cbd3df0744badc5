//! Flat key=value configuration files with [section] headers.
//!
//! Schema (all keys optional; defaults in parentheses):
//!
//! ```text
//! [scenario]
//! m (32), n (32), wavelength (c/28 GHz), spacing (wavelength/2),
//! subcarrier_spacing (120e3), area_width (120), area_depth (120),
//! bs_x (60), bs_y (2), blockers (3), blocker_min (8), blocker_max (25),
//! paths (8), rician_k_db (10), seed (0)
//!
//! [dataset]
//! num_users (2000)
//!
//! [ae]
//! ratio (32), c1 (16), c2 (32), snr_lo (0), snr_hi (20), epochs (12),
//! batch (50), lr (1e-3)
//!
//! [train]
//! epochs (30), batch (64), lr (1e-3), hidden (256), dropout (0.3)
//!
//! [beam]
//! num_beams (32), fov_deg (120)
//!
//! [power]
//! users_per_group (4), train_groups (100), test_groups (25), rho_min (0.3),
//! rho_max (0.9), gamma_max (20), snr_db (5), p_total (1), epochs (50),
//! batch (16), lr (1e-3), warmup_fraction (0.6), supervised_fraction (0.25),
//! channels (64), blocks (3), kernel (3), pgd_iterations (200),
//! pgd_restarts (5)
//!
//! [sweep]
//! representations (all available), train_sizes (100,316,1000,3162,10000),
//! snrs (-10,-5,0,5,10,20,30), seeds (1,2,3)
//! ```
//!
//! `#` starts a comment. Unknown keys are ignored. The only environment
//! override is WIREBENCH_OUT, which re-roots relative output paths.

use std::collections::BTreeMap;
use std::path::Path;

use wirebench_core::channel::{Point, ScenarioConfig, SPEED_OF_LIGHT};
use wirebench_core::classical::PgdConfig;
use wirebench_core::repr::AeConfig;
use wirebench_core::tasks::{GroupingConfig, PowerNetConfig, PowerTrainConfig, TrainConfig};

use crate::error::{HarnessError, Result};

/// Parsed sections -> keys -> raw values.
#[derive(Debug, Clone, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return Err(HarnessError::Config(format!(
                        "line {}: malformed section header `{raw}`",
                        lineno + 1
                    )));
                }
                current = line[1..line.len() - 1].trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Config(format!(
                    "line {}: expected key = value, got `{raw}`",
                    lineno + 1
                )));
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Self { sections })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            HarnessError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(|s| s.as_str())
    }

    fn get<T: std::str::FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        match self.raw(section, key) {
            None => Ok(default),
            Some(s) => s.parse().map_err(|_| {
                HarnessError::Config(format!("[{section}] {key}: cannot parse `{s}`"))
            }),
        }
    }

    fn get_list_f64(&self, section: &str, key: &str, default: &[f64]) -> Result<Vec<f64>> {
        match self.raw(section, key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|tok| {
                    let tok = tok.trim();
                    if tok.eq_ignore_ascii_case("inf") {
                        Ok(f64::INFINITY)
                    } else {
                        tok.parse().map_err(|_| {
                            HarnessError::Config(format!("[{section}] {key}: bad number `{tok}`"))
                        })
                    }
                })
                .collect(),
        }
    }

    fn get_list_usize(&self, section: &str, key: &str, default: &[usize]) -> Result<Vec<usize>> {
        match self.raw(section, key) {
            None => Ok(default.to_vec()),
            Some(s) => s
                .split(',')
                .map(|tok| {
                    tok.trim().parse().map_err(|_| {
                        HarnessError::Config(format!("[{section}] {key}: bad integer `{tok}`"))
                    })
                })
                .collect(),
        }
    }

    pub fn scenario(&self, seed_override: Option<u64>) -> Result<ScenarioConfig> {
        let wavelength = self.get("scenario", "wavelength", SPEED_OF_LIGHT / 28e9)?;
        let cfg = ScenarioConfig {
            num_antennas: self.get("scenario", "m", 32)?,
            num_subcarriers: self.get("scenario", "n", 32)?,
            carrier_wavelength: wavelength,
            antenna_spacing: self.get("scenario", "spacing", wavelength / 2.0)?,
            subcarrier_spacing: self.get("scenario", "subcarrier_spacing", 120e3)?,
            area: (
                self.get("scenario", "area_width", 120.0)?,
                self.get("scenario", "area_depth", 120.0)?,
            ),
            bs_position: Point::new(
                self.get("scenario", "bs_x", 60.0)?,
                self.get("scenario", "bs_y", 2.0)?,
            ),
            num_blockers: self.get("scenario", "blockers", 3)?,
            blocker_size_range: (
                self.get("scenario", "blocker_min", 8.0)?,
                self.get("scenario", "blocker_max", 25.0)?,
            ),
            paths_per_user: self.get("scenario", "paths", 8)?,
            rician_k_db: self.get("scenario", "rician_k_db", 10.0)?,
            seed: seed_override.map_or_else(|| self.get("scenario", "seed", 0), Ok)?,
        };
        cfg.validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn num_users(&self) -> Result<usize> {
        self.get("dataset", "num_users", 2000)
    }

    pub fn ae(&self, ratio_override: Option<usize>) -> Result<AeConfig> {
        Ok(AeConfig {
            c1: self.get("ae", "c1", 16)?,
            c2: self.get("ae", "c2", 32)?,
            ratio: ratio_override.map_or_else(|| self.get("ae", "ratio", 32), Ok)?,
            snr_range_db: (
                self.get("ae", "snr_lo", 0.0)?,
                self.get("ae", "snr_hi", 20.0)?,
            ),
            epochs: self.get("ae", "epochs", 12)?,
            batch_size: self.get("ae", "batch", 50)?,
            learning_rate: self.get("ae", "lr", 1e-3)?,
        })
    }

    pub fn train(&self) -> Result<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.get("train", "epochs", 30)?,
            batch_size: self.get("train", "batch", 64)?,
            learning_rate: self.get("train", "lr", 1e-3)?,
            hidden: self.get("train", "hidden", 256)?,
            dropout: self.get("train", "dropout", 0.3)?,
        })
    }

    pub fn beam(&self) -> Result<(usize, f64)> {
        Ok((
            self.get("beam", "num_beams", 32)?,
            self.get("beam", "fov_deg", 120.0)?,
        ))
    }

    pub fn grouping(&self, groups: usize) -> Result<GroupingConfig> {
        Ok(GroupingConfig {
            users_per_group: self.get("power", "users_per_group", 4)?,
            num_groups: groups,
            rho_min: self.get("power", "rho_min", 0.3)?,
            rho_max: self.get("power", "rho_max", 0.9)?,
            gamma_max: self.get("power", "gamma_max", 20.0)?,
            snr_db: self.get("power", "snr_db", 5.0)?,
            power_budget: self.get("power", "p_total", 1.0)?,
            max_restarts: self.get("power", "max_restarts", 200)?,
        })
    }

    pub fn power_group_counts(&self) -> Result<(usize, usize)> {
        Ok((
            self.get("power", "train_groups", 100)?,
            self.get("power", "test_groups", 25)?,
        ))
    }

    pub fn power_train(&self) -> Result<PowerTrainConfig> {
        Ok(PowerTrainConfig {
            net: PowerNetConfig {
                channels: self.get("power", "channels", 64)?,
                residual_blocks: self.get("power", "blocks", 3)?,
                kernel: self.get("power", "kernel", 3)?,
            },
            epochs: self.get("power", "epochs", 50)?,
            batch_size: self.get("power", "batch", 16)?,
            learning_rate: self.get("power", "lr", 1e-3)?,
            warmup_fraction: self.get("power", "warmup_fraction", 0.6)?,
        })
    }

    pub fn supervised_fraction(&self) -> Result<f64> {
        self.get("power", "supervised_fraction", 0.25)
    }

    pub fn pgd(&self) -> Result<PgdConfig> {
        Ok(PgdConfig {
            iterations: self.get("power", "pgd_iterations", 200)?,
            restarts: self.get("power", "pgd_restarts", 5)?,
            ..PgdConfig::default()
        })
    }

    pub fn train_sizes(&self) -> Result<Vec<usize>> {
        self.get_list_usize("sweep", "train_sizes", &[100, 316, 1000, 3162, 10000])
    }

    pub fn snrs(&self) -> Result<Vec<f64>> {
        self.get_list_f64("sweep", "snrs", &[-10.0, -5.0, 0.0, 5.0, 10.0, 20.0, 30.0])
    }

    pub fn seeds(&self, seed_override: Option<u64>) -> Result<Vec<u64>> {
        if let Some(s) = seed_override {
            return Ok(vec![s]);
        }
        let list = self.get_list_usize("sweep", "seeds", &[1, 2, 3])?;
        Ok(list.into_iter().map(|s| s as u64).collect())
    }

    /// Representation names to benchmark; `None` means "all available".
    pub fn representations(&self) -> Option<Vec<String>> {
        self.raw("sweep", "representations")
            .map(|s| s.split(',').map(|t| t.trim().to_string()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_defaults() {
        let cfg = Config::parse(
            "# comment\n[scenario]\nm = 16\nseed = 9\n\n[sweep]\nseeds = 4,5\ntrain_sizes = 10,20\n",
        )
        .unwrap();
        let sc = cfg.scenario(None).unwrap();
        assert_eq!(sc.num_antennas, 16);
        assert_eq!(sc.num_subcarriers, 32); // default
        assert_eq!(sc.seed, 9);
        assert_eq!(cfg.seeds(None).unwrap(), vec![4, 5]);
        assert_eq!(cfg.train_sizes().unwrap(), vec![10, 20]);
    }

    #[test]
    fn seed_override_wins() {
        let cfg = Config::parse("[scenario]\nseed = 9\n").unwrap();
        assert_eq!(cfg.scenario(Some(77)).unwrap().seed, 77);
        assert_eq!(cfg.seeds(Some(3)).unwrap(), vec![3]);
    }

    #[test]
    fn rejects_malformed_lines() {
        assert!(Config::parse("[scenario\nm = 2\n").is_err());
        assert!(Config::parse("[s]\nkey without equals\n").is_err());
        assert!(Config::parse("[scenario]\nm = not_a_number\n")
            .unwrap()
            .scenario(None)
            .is_err());
    }

    #[test]
    fn snr_list_accepts_inf() {
        let cfg = Config::parse("[sweep]\nsnrs = -5, 0, inf\n").unwrap();
        let snrs = cfg.snrs().unwrap();
        assert_eq!(snrs.len(), 3);
        assert!(snrs[2].is_infinite());
    }
}
