//! Synthetic MIMO-OFDM channel generation with geometric LoS/NLoS labels.
//!
//! A scenario is a rectangular service area with a base station and a set of
//! axis-aligned rectangular blockers. A user is line-of-sight when the open
//! segment from the base station to the user crosses no blocker. Channels
//! follow a clustered geometric OFDM model: each propagation path carries a
//! complex gain, a delay (frequency phase ramp), and a departure angle
//! (antenna phase ramp); LoS users get a direct path whose power sits a
//! configured Rician factor above the scattered paths.

mod dataset;
mod geometry;
mod matrix;

pub use dataset::{load_dataset, save_dataset, Dataset, Split, WBDS_MAGIC};
pub use geometry::{Point, Rect};
pub use matrix::ChannelMatrix;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::rng::stream_rng;

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Seed stream reserved for blocker placement; users use streams >= 1.
const BLOCKER_STREAM: u64 = 0;
/// Seed stream for the train/val/test shuffle.
const SPLIT_STREAM: u64 = u64::MAX;

/// Full description of a synthetic deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub num_antennas: usize,
    pub num_subcarriers: usize,
    /// Carrier wavelength in meters.
    pub carrier_wavelength: f64,
    /// Antenna element spacing in meters.
    pub antenna_spacing: f64,
    /// Subcarrier spacing in hertz.
    pub subcarrier_spacing: f64,
    /// Service area (width, depth) in meters, anchored at the origin.
    pub area: (f64, f64),
    pub bs_position: Point,
    pub num_blockers: usize,
    /// Blocker side length range (min, max) in meters.
    pub blocker_size_range: (f64, f64),
    pub paths_per_user: usize,
    /// Direct-path power above the scattered sum for LoS users, in dB.
    pub rician_k_db: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let wavelength = SPEED_OF_LIGHT / 28e9;
        Self {
            num_antennas: 32,
            num_subcarriers: 32,
            carrier_wavelength: wavelength,
            antenna_spacing: wavelength / 2.0,
            subcarrier_spacing: 120e3,
            area: (120.0, 120.0),
            bs_position: Point::new(60.0, 2.0),
            num_blockers: 3,
            blocker_size_range: (8.0, 25.0),
            paths_per_user: 8,
            rician_k_db: 10.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CoreError::Config(msg));
        if self.num_antennas == 0 || self.num_subcarriers == 0 {
            return bad("antenna and subcarrier counts must be >= 1".into());
        }
        if self.antenna_spacing <= 0.0 || self.carrier_wavelength <= 0.0 {
            return bad("antenna spacing and wavelength must be > 0".into());
        }
        if self.subcarrier_spacing <= 0.0 {
            return bad("subcarrier spacing must be > 0".into());
        }
        if self.paths_per_user == 0 {
            return bad("paths_per_user must be >= 1".into());
        }
        let (w, d) = self.area;
        if w <= 0.0 || d <= 0.0 {
            return bad(format!("area {w}x{d} must be positive"));
        }
        let p = &self.bs_position;
        if !(p.x > 0.0 && p.x < w && p.y > 0.0 && p.y < d) {
            return bad(format!(
                "bs position ({}, {}) must lie strictly inside the {w}x{d} area",
                p.x, p.y
            ));
        }
        let (smin, smax) = self.blocker_size_range;
        if self.num_blockers > 0 && !(smin > 0.0 && smin <= smax) {
            return bad(format!("blocker size range ({smin}, {smax}) invalid"));
        }
        Ok(())
    }
}

/// A validated scenario: config plus placed blockers.
#[derive(Debug, Clone)]
pub struct Scenario {
    config: ScenarioConfig,
    blockers: Vec<Rect>,
}

impl Scenario {
    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn blockers(&self) -> &[Rect] {
        &self.blockers
    }

    /// Scenario with caller-provided blockers (tests, handcrafted layouts).
    pub fn with_blockers(config: ScenarioConfig, blockers: Vec<Rect>) -> Result<Self> {
        config.validate()?;
        for b in &blockers {
            if b.contains(&config.bs_position) {
                return Err(CoreError::Config(
                    "a blocker contains the base station".into(),
                ));
            }
        }
        Ok(Self { config, blockers })
    }

    pub fn is_los(&self, user: &Point) -> bool {
        !self
            .blockers
            .iter()
            .any(|b| b.intersects_segment(&self.config.bs_position, user))
    }
}

/// Sample blockers inside the area, none containing the base station.
/// Deterministic for a fixed config seed.
pub fn build_scenario(config: ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let (w, d) = config.area;
    let (smin, smax) = config.blocker_size_range;
    if config.num_blockers > 0 && (smax > w || smax > d) {
        return Err(CoreError::Config(format!(
            "area {w}x{d} too small for blockers up to {smax} m"
        )));
    }
    let mut rng = stream_rng(config.seed, BLOCKER_STREAM);
    let mut blockers = Vec::with_capacity(config.num_blockers);
    for i in 0..config.num_blockers {
        let mut placed = false;
        for _ in 0..1000 {
            let bw = rng.gen_range(smin..=smax);
            let bh = rng.gen_range(smin..=smax);
            let x0 = rng.gen_range(0.0..=(w - bw));
            let y0 = rng.gen_range(0.0..=(d - bh));
            let rect = Rect::new(x0, y0, x0 + bw, y0 + bh);
            if !rect.contains(&config.bs_position) {
                blockers.push(rect);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(CoreError::Config(format!(
                "could not place blocker {i} away from the base station"
            )));
        }
    }
    Ok(Scenario { config, blockers })
}

/// One user: position, channel, LoS label.
#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub position: Point,
    pub channel: ChannelMatrix,
    pub los: bool,
}

impl UserRecord {
    pub fn los_label(&self) -> usize {
        usize::from(self.los)
    }
}

/// Draw one user: uniform position outside blockers, geometric LoS label,
/// clustered multipath channel.
pub fn generate_user(scenario: &Scenario, rng: &mut ChaCha12Rng) -> Result<UserRecord> {
    let cfg = scenario.config();
    let (w, d) = cfg.area;
    let mut position = None;
    for _ in 0..1_000_000 {
        let p = Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..d));
        if !scenario.blockers.iter().any(|b| b.contains(&p)) {
            position = Some(p);
            break;
        }
    }
    let position = position.ok_or_else(|| {
        CoreError::Infeasible("blockers cover the whole area; cannot place a user".into())
    })?;
    let los = scenario.is_los(&position);
    let channel = synthesize_channel(scenario, &position, los, rng);
    Ok(UserRecord {
        position,
        channel,
        los,
    })
}

struct Path {
    gain: Complex64,
    delay: f64,
    sin_angle: f64,
}

/// H[m, n] = sum_l a_l * exp(-j 2 pi n df tau_l) * exp(-j 2 pi (d/lambda) m sin(theta_l)).
fn synthesize_channel(
    scenario: &Scenario,
    position: &Point,
    los: bool,
    rng: &mut ChaCha12Rng,
) -> ChannelMatrix {
    let cfg = scenario.config();
    let bs = &cfg.bs_position;
    let (w, d) = cfg.area;
    let num_scattered = if los {
        cfg.paths_per_user - 1
    } else {
        cfg.paths_per_user
    };

    let mut paths = Vec::with_capacity(cfg.paths_per_user);
    // Single-bounce scatterers drawn uniformly from the area.
    for _ in 0..num_scattered {
        let s = Point::new(rng.gen_range(0.0..w), rng.gen_range(0.0..d));
        let length = bs.distance(&s) + s.distance(position);
        let angle = (s.x - bs.x).atan2(s.y - bs.y); // broadside is +y
        let phase = rng.gen_range(0.0..std::f64::consts::TAU);
        paths.push(Path {
            gain: Complex64::from_polar(1.0 / length.max(1e-3), phase),
            delay: length / SPEED_OF_LIGHT,
            sin_angle: angle.sin(),
        });
    }
    if los {
        let dist = bs.distance(position).max(1e-3);
        let angle = (position.x - bs.x).atan2(position.y - bs.y);
        let scattered_power: f64 = paths.iter().map(|p| p.gain.norm_sqr()).sum();
        let amplitude = if paths.is_empty() {
            1.0 / dist
        } else {
            (10f64.powf(cfg.rician_k_db / 10.0) * scattered_power).sqrt()
        };
        let phase = -std::f64::consts::TAU * dist / cfg.carrier_wavelength;
        paths.insert(
            0,
            Path {
                gain: Complex64::from_polar(amplitude, phase),
                delay: dist / SPEED_OF_LIGHT,
                sin_angle: angle.sin(),
            },
        );
    }

    let (m_ant, n_sub) = (cfg.num_antennas, cfg.num_subcarriers);
    let spatial_rate = cfg.antenna_spacing / cfg.carrier_wavelength;
    let mut h = ChannelMatrix::zeros(m_ant, n_sub);
    for path in &paths {
        let freq_step = Complex64::from_polar(
            1.0,
            -std::f64::consts::TAU * cfg.subcarrier_spacing * path.delay,
        );
        let ant_step =
            Complex64::from_polar(1.0, -std::f64::consts::TAU * spatial_rate * path.sin_angle);
        let mut ant_phase = Complex64::new(1.0, 0.0);
        for m in 0..m_ant {
            let mut freq_phase = Complex64::new(1.0, 0.0);
            let row_gain = path.gain * ant_phase;
            for n in 0..n_sub {
                let v = h.get(m, n) + row_gain * freq_phase;
                h.set(m, n, v);
                freq_phase *= freq_step;
            }
            ant_phase *= ant_step;
        }
    }
    h
}

/// Noisy channel plus the realization that was added.
#[derive(Debug, Clone)]
pub struct AwgnOutput {
    pub noisy: ChannelMatrix,
    pub noise: ChannelMatrix,
}

/// Add complex white Gaussian noise at `snr_db` relative to the matrix's own
/// mean entry power. `f64::INFINITY` returns the input unchanged.
pub fn add_awgn(h: &ChannelMatrix, snr_db: f64, rng: &mut ChaCha12Rng) -> AwgnOutput {
    add_awgn_with_ref(h, snr_db, h.mean_power(), rng)
}

/// Add noise with an explicit reference power, e.g. the dataset-wide mean
/// entry power so one SNR axis is comparable across users.
pub fn add_awgn_with_ref(
    h: &ChannelMatrix,
    snr_db: f64,
    ref_power: f64,
    rng: &mut ChaCha12Rng,
) -> AwgnOutput {
    let (m, n) = (h.num_antennas(), h.num_subcarriers());
    if snr_db.is_infinite() && snr_db > 0.0 {
        return AwgnOutput {
            noisy: h.clone(),
            noise: ChannelMatrix::zeros(m, n),
        };
    }
    let sigma2 = ref_power * 10f64.powf(-snr_db / 10.0);
    let per_component = (sigma2 / 2.0).sqrt();
    let mut noise = ChannelMatrix::zeros(m, n);
    for e in noise.entries_mut() {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        *e = Complex64::new(re * per_component, im * per_component);
    }
    let mut noisy = h.clone();
    for (o, w) in noisy.entries_mut().iter_mut().zip(noise.entries()) {
        *o += w;
    }
    AwgnOutput { noisy, noise }
}

/// Scale all channels so the mean squared entry magnitude is exactly 1 and
/// assign a seeded 60/20/20 split.
pub fn normalize_dataset(mut records: Vec<UserRecord>, seed: u64) -> Result<Dataset> {
    if records.is_empty() {
        return Err(CoreError::Numeric("cannot normalize an empty dataset".into()));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for r in &records {
        total += r.channel.entries().iter().map(|c| c.norm_sqr()).sum::<f64>();
        count += r.channel.entries().len();
    }
    if total == 0.0 {
        return Err(CoreError::Numeric("all-zero dataset cannot be normalized".into()));
    }
    let alpha = (count as f64 / total).sqrt();
    for r in &mut records {
        r.channel.scale(alpha);
    }
    let split = Split::new_60_20_20(records.len(), &mut stream_rng(seed, SPLIT_STREAM));
    Dataset::new(records, alpha, split)
}

/// Generate, label, and normalize a complete dataset. Parallel across users
/// with per-user derived seed streams; bitwise identical at any thread count.
pub fn generate_dataset(config: ScenarioConfig, num_users: usize) -> Result<Dataset> {
    let seed = config.seed;
    let scenario = build_scenario(config)?;
    let records: Result<Vec<UserRecord>> = (0..num_users)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, 1 + i as u64);
            generate_user(&scenario, &mut rng)
        })
        .collect();
    normalize_dataset(records?, seed)
}

/// Normalized inner product |a^H b| / (||a|| ||b||) of two spatial vectors.
pub fn spatial_correlation(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CoreError::Shape(format!(
            "spatial_correlation: {} vs {} antennas",
            a.len(),
            b.len()
        )));
    }
    let na: f64 = a.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(CoreError::Numeric(
            "spatial_correlation of a zero vector".into(),
        ));
    }
    let inner: Complex64 = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
    Ok((inner.norm() / (na * nb)).min(1.0))
}

/// max(||a||^2, ||b||^2) / min(||a||^2, ||b||^2) >= 1.
pub fn gain_ratio(a: &[Complex64], b: &[Complex64]) -> Result<f64> {
    let pa: f64 = a.iter().map(|c| c.norm_sqr()).sum();
    let pb: f64 = b.iter().map(|c| c.norm_sqr()).sum();
    if pa == 0.0 || pb == 0.0 {
        return Err(CoreError::Numeric("gain_ratio of a zero vector".into()));
    }
    Ok(pa.max(pb) / pa.min(pb))
}

#[cfg(test)]
mod tests;
