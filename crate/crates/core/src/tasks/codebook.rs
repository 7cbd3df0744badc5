//! DFT-style beam codebook over a uniform linear array.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// K steering-vector rows over an evenly spaced angle grid.
#[derive(Debug, Clone)]
pub struct Codebook {
    /// Beam angles in radians, phi_k = -fov/2 + k * fov/(K-1).
    pub angles: Vec<f64>,
    /// Field of view in degrees.
    pub fov_deg: f64,
    /// Row k is w(phi_k)^H: the conjugated steering vector, length M.
    pub rows: Vec<Vec<Complex64>>,
}

impl Codebook {
    pub fn num_beams(&self) -> usize {
        self.rows.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.rows.first().map_or(0, |r| r.len())
    }

    /// Steering vector w(phi_k) itself (unit norm).
    pub fn steering_vector(&self, k: usize) -> Vec<Complex64> {
        self.rows[k].iter().map(|c| c.conj()).collect()
    }
}

/// Build the codebook: w(phi)[m] = exp(-j 2 pi (d/lambda) m sin phi) / sqrt(M),
/// rows stacked as w(phi_k)^H.
pub fn build_codebook(
    num_antennas: usize,
    num_beams: usize,
    fov_deg: f64,
    spacing: f64,
    wavelength: f64,
) -> Result<Codebook> {
    if num_beams < 2 {
        return Err(CoreError::Config(format!(
            "codebook needs K >= 2 beams (angle step undefined for K = {num_beams})"
        )));
    }
    if !(fov_deg > 0.0 && fov_deg <= 180.0) {
        return Err(CoreError::Config(format!(
            "field of view {fov_deg} degrees outside (0, 180]"
        )));
    }
    if num_antennas == 0 || spacing <= 0.0 || wavelength <= 0.0 {
        return Err(CoreError::Config("invalid array geometry".into()));
    }
    let fov = fov_deg.to_radians();
    let step = fov / (num_beams - 1) as f64;
    let norm = 1.0 / (num_antennas as f64).sqrt();
    let spatial = std::f64::consts::TAU * spacing / wavelength;
    let mut angles = Vec::with_capacity(num_beams);
    let mut rows = Vec::with_capacity(num_beams);
    for k in 0..num_beams {
        let phi = -fov / 2.0 + k as f64 * step;
        angles.push(phi);
        let s = phi.sin();
        // Conjugate of the steering entry: +j phase.
        rows.push(
            (0..num_antennas)
                .map(|m| Complex64::from_polar(norm, spatial * m as f64 * s))
                .collect(),
        );
    }
    Ok(Codebook {
        angles,
        fov_deg,
        rows,
    })
}

/// Ground-truth beam: argmax_k |w(phi_k)^H h|^2, ties to the smallest index.
pub fn beam_oracle(cb: &Codebook, h_avg: &[Complex64]) -> Result<usize> {
    if h_avg.len() != cb.num_antennas() {
        return Err(CoreError::Shape(format!(
            "beam oracle: {} antennas vs codebook {}",
            h_avg.len(),
            cb.num_antennas()
        )));
    }
    let mut best = 0usize;
    let mut best_power = f64::NEG_INFINITY;
    for (k, row) in cb.rows.iter().enumerate() {
        let inner: Complex64 = row.iter().zip(h_avg).map(|(w, h)| w * h).sum();
        let power = inner.norm_sqr();
        if power > best_power {
            best_power = power;
            best = k;
        }
    }
    Ok(best)
}
