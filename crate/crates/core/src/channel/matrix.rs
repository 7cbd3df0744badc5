//! Complex M x N frequency-domain channel matrix of one user.

use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Antennas along rows, subcarriers along columns, row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    num_antennas: usize,
    num_subcarriers: usize,
    entries: Vec<Complex64>,
}

impl ChannelMatrix {
    pub fn new(num_antennas: usize, num_subcarriers: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != num_antennas * num_subcarriers {
            return Err(CoreError::Shape(format!(
                "channel matrix: {} entries for {}x{}",
                entries.len(),
                num_antennas,
                num_subcarriers
            )));
        }
        Ok(Self {
            num_antennas,
            num_subcarriers,
            entries,
        })
    }

    pub fn zeros(num_antennas: usize, num_subcarriers: usize) -> Self {
        Self {
            num_antennas,
            num_subcarriers,
            entries: vec![Complex64::new(0.0, 0.0); num_antennas * num_subcarriers],
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.entries
    }

    pub fn get(&self, antenna: usize, subcarrier: usize) -> Complex64 {
        self.entries[antenna * self.num_subcarriers + subcarrier]
    }

    pub fn set(&mut self, antenna: usize, subcarrier: usize, v: Complex64) {
        self.entries[antenna * self.num_subcarriers + subcarrier] = v;
    }

    /// Mean squared entry magnitude.
    pub fn mean_power(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum::<f64>() / self.entries.len() as f64
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|c| c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            *e *= factor;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    /// Mean over subcarriers of each antenna row: the effective spatial
    /// channel used by beam selection and user grouping.
    pub fn subcarrier_average(&self) -> Vec<Complex64> {
        let n = self.num_subcarriers as f64;
        (0..self.num_antennas)
            .map(|m| {
                self.entries[m * self.num_subcarriers..(m + 1) * self.num_subcarriers]
                    .iter()
                    .sum::<Complex64>()
                    / n
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subcarrier_average_single_column() {
        let h = ChannelMatrix::new(
            3,
            1,
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(0.0, 2.0),
                Complex64::new(-1.0, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(h.subcarrier_average(), h.entries().to_vec());
    }

    #[test]
    fn subcarrier_average_identical_columns() {
        let col = [Complex64::new(0.5, -0.5), Complex64::new(2.0, 1.0)];
        let mut h = ChannelMatrix::zeros(2, 4);
        for m in 0..2 {
            for n in 0..4 {
                h.set(m, n, col[m]);
            }
        }
        let avg = h.subcarrier_average();
        for (a, c) in avg.iter().zip(&col) {
            assert!((a - c).norm() < 1e-15);
        }
    }

    #[test]
    fn subcarrier_average_matches_mean_oracle() {
        // Random 4x3 against an elementwise mean recomputation.
        let mut h = ChannelMatrix::zeros(4, 3);
        for m in 0..4 {
            for n in 0..3 {
                let v = Complex64::new((m * 3 + n) as f64 * 0.7 - 2.0, (n + 1) as f64 * 0.3);
                h.set(m, n, v);
            }
        }
        let avg = h.subcarrier_average();
        for m in 0..4 {
            let mut s = Complex64::new(0.0, 0.0);
            for n in 0..3 {
                s += h.get(m, n);
            }
            assert!((avg[m] - s / 3.0).norm() < 1e-15);
        }
    }
}
