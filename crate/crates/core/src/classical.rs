//! Classical power-allocation baselines and oracles: capped-simplex
//! projection, sum-rate evaluation with its analytic gradient, equal power
//! allocation, and multi-restart projected gradient ascent.
//!
//! All functions work on a row-major K x K gain matrix `g` where
//! `g[i*k + j] = |h_i^H w_j|^2`: row i is the receiving user, column j the
//! precoder serving user j.

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::rng::stream_rng;

/// Settings for [`pgd_sum_rate`].
#[derive(Debug, Clone)]
pub struct PgdConfig {
    /// Gradient-ascent iterations per restart.
    pub iterations: usize,
    /// Number of initializations; the first is always equal power.
    pub restarts: usize,
    /// Initial step size. `None` selects 0.5 * P_total / K.
    pub step_size: Option<f64>,
    /// Multiplicative step decay applied every iteration.
    pub step_decay: f64,
    /// Stop a restart after 25 consecutive iterations improving less than this.
    pub tolerance: f64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            restarts: 5,
            step_size: None,
            step_decay: 0.995,
            tolerance: 1e-9,
        }
    }
}

impl PgdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.restarts == 0 {
            return Err(CoreError::Config(
                "pgd needs at least 1 iteration and 1 restart".into(),
            ));
        }
        if let Some(s) = self.step_size {
            if s <= 0.0 {
                return Err(CoreError::Config(format!("step size must be > 0, got {s}")));
            }
        }
        if !(self.step_decay > 0.0 && self.step_decay <= 1.0) {
            return Err(CoreError::Config(format!(
                "step decay must be in (0, 1], got {}",
                self.step_decay
            )));
        }
        Ok(())
    }
}

/// Best allocation found by PGD.
#[derive(Debug, Clone)]
pub struct PgdSolution {
    pub powers: Vec<f64>,
    pub sum_rate: f64,
}

/// Equal power allocation: P_total / K per user.
pub fn epa(k: usize, p_total: f64) -> Vec<f64> {
    vec![p_total / k as f64; k]
}

/// SINR of `user` under allocation `p`.
pub fn sinr(g: &[f64], k: usize, sigma2: f64, p: &[f64], user: usize) -> f64 {
    let mut interference = 0.0;
    for j in 0..k {
        if j != user {
            interference += g[user * k + j] * p[j];
        }
    }
    g[user * k + user] * p[user] / (interference + sigma2)
}

/// Sum rate sum_k log2(1 + SINR_k) in bits/s/Hz.
pub fn sum_rate(g: &[f64], k: usize, sigma2: f64, p: &[f64]) -> f64 {
    (0..k)
        .map(|u| (1.0 + sinr(g, k, sigma2, p, u)).log2())
        .sum()
}

/// Analytic gradient of [`sum_rate`] with respect to `p`.
///
/// d SE / d p_k = (1/ln 2) * [ g_kk / (I_k + s + g_kk p_k)
///   - sum_{i != k} g_ik g_ii p_i / ((I_i + s)(I_i + s + g_ii p_i)) ],
/// with I_i = sum_{j != i} g_ij p_j and s = sigma^2.
pub fn sum_rate_grad(g: &[f64], k: usize, sigma2: f64, p: &[f64]) -> Vec<f64> {
    let ln2 = std::f64::consts::LN_2;
    let mut denom = vec![0.0; k]; // I_i + sigma^2
    for i in 0..k {
        let mut interference = 0.0;
        for j in 0..k {
            if j != i {
                interference += g[i * k + j] * p[j];
            }
        }
        denom[i] = interference + sigma2;
    }
    let mut grad = vec![0.0; k];
    for m in 0..k {
        let own = g[m * k + m] / (denom[m] + g[m * k + m] * p[m]);
        let mut cross = 0.0;
        for i in 0..k {
            if i != m {
                let gi = g[i * k + i];
                cross += g[i * k + m] * gi * p[i] / (denom[i] * (denom[i] + gi * p[i]));
            }
        }
        grad[m] = (own - cross) / ln2;
    }
    grad
}

/// Euclidean projection onto { p >= 0, sum p <= P_total }.
///
/// Clamps negatives; if the clamped point is within budget it is the
/// projection, otherwise the point is projected onto the simplex face
/// { p >= 0, sum p = P_total } by the sorted-threshold rule.
pub fn project_capped_simplex(v: &[f64], p_total: f64) -> Vec<f64> {
    debug_assert!(p_total > 0.0);
    let clamped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= p_total {
        return clamped;
    }
    // Threshold tau with sum_i max(v_i - tau, 0) = P_total.
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite allocation values"));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &vi) in sorted.iter().enumerate() {
        cumsum += vi;
        let candidate = (cumsum - p_total) / (i + 1) as f64;
        if i + 1 == sorted.len() || sorted[i + 1] <= candidate {
            tau = candidate;
            break;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// Sample a point uniformly from { p >= 0, sum p = P_total } via exponential
/// spacings.
fn sample_simplex(k: usize, p_total: f64, rng: &mut impl Rng) -> Vec<f64> {
    let e: Vec<f64> = (0..k)
        .map(|_| -(1.0 - rng.gen::<f64>()).ln())
        .collect();
    let s: f64 = e.iter().sum();
    e.iter().map(|x| x / s * p_total).collect()
}

/// Multi-restart projected gradient ascent on the sum rate.
///
/// Restart 0 starts from equal power, so the result never falls below the
/// EPA baseline; remaining restarts start from random feasible points. A
/// step that would lower the objective is rejected and the step size halved.
pub fn pgd_sum_rate(
    g: &[f64],
    k: usize,
    sigma2: f64,
    p_total: f64,
    cfg: &PgdConfig,
    seed: u64,
) -> Result<PgdSolution> {
    cfg.validate()?;
    if g.len() != k * k {
        return Err(CoreError::Shape(format!(
            "gain matrix has {} entries, expected {}",
            g.len(),
            k * k
        )));
    }
    if sigma2 <= 0.0 || p_total <= 0.0 {
        return Err(CoreError::Config(format!(
            "sigma2 ({sigma2}) and P_total ({p_total}) must be > 0"
        )));
    }
    let step0 = cfg.step_size.unwrap_or(0.5 * p_total / k as f64);
    let mut rng = stream_rng(seed, 0);
    let mut best: Option<PgdSolution> = None;
    for restart in 0..cfg.restarts {
        let mut p = if restart == 0 {
            epa(k, p_total)
        } else {
            sample_simplex(k, p_total, &mut rng)
        };
        let mut se = sum_rate(g, k, sigma2, &p);
        let mut eta = step0;
        let mut stale = 0usize;
        for _ in 0..cfg.iterations {
            let grad = sum_rate_grad(g, k, sigma2, &p);
            let trial: Vec<f64> = p.iter().zip(&grad).map(|(pi, gi)| pi + eta * gi).collect();
            let candidate = project_capped_simplex(&trial, p_total);
            let se_cand = sum_rate(g, k, sigma2, &candidate);
            if se_cand >= se {
                if se_cand - se < cfg.tolerance {
                    stale += 1;
                } else {
                    stale = 0;
                }
                p = candidate;
                se = se_cand;
            } else {
                eta *= 0.5;
                stale += 1;
            }
            eta *= cfg.step_decay;
            if stale >= 25 || eta < 1e-15 {
                break;
            }
        }
        if best.as_ref().map_or(true, |b| se > b.sum_rate) {
            best = Some(PgdSolution {
                powers: p,
                sum_rate: se,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epa_splits_budget() {
        assert_eq!(epa(4, 1.0), vec![0.25; 4]);
        assert_eq!(epa(1, 3.0), vec![3.0]);
        let p = epa(7, 2.0);
        assert!((p.iter().sum::<f64>() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn projection_feasible_point_unchanged() {
        assert_eq!(project_capped_simplex(&[0.2, 0.3], 1.0), vec![0.2, 0.3]);
    }

    #[test]
    fn projection_hand_cases() {
        let p = project_capped_simplex(&[0.5, 0.8], 1.0);
        assert!((p[0] - 0.35).abs() < 1e-12);
        assert!((p[1] - 0.65).abs() < 1e-12);
        let p = project_capped_simplex(&[-1.0, 2.0], 1.0);
        assert!(p[0].abs() < 1e-12);
        assert!((p[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn projection_idempotent() {
        let v = vec![0.7, -0.2, 0.9, 0.4];
        let once = project_capped_simplex(&v, 1.0);
        let twice = project_capped_simplex(&once, 1.0);
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sinr_zero_power_is_zero() {
        let g = vec![2.0, 0.3, 0.4, 1.5];
        assert_eq!(sinr(&g, 2, 0.1, &[0.0, 0.5], 0), 0.0);
    }

    #[test]
    fn single_user_sinr_closed_form() {
        // Under MRT g = [||h||^2]; SINR = ||h||^2 p / sigma^2.
        let g = vec![3.0];
        let s = sinr(&g, 1, 0.5, &[2.0], 0);
        assert!((s - 3.0 * 2.0 / 0.5).abs() < 1e-12);
    }

    #[test]
    fn pgd_single_user_takes_full_budget() {
        let g = vec![1.7];
        let sol = pgd_sum_rate(&g, 1, 0.2, 2.0, &PgdConfig::default(), 1).unwrap();
        assert!((sol.powers[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn pgd_orthogonal_equal_gains_is_epa() {
        // Diagonal gain matrix with equal entries: symmetric water-filling.
        let k = 3;
        let mut g = vec![0.0; k * k];
        for i in 0..k {
            g[i * k + i] = 2.0;
        }
        let sol = pgd_sum_rate(&g, k, 0.1, 1.0, &PgdConfig::default(), 3).unwrap();
        for pi in &sol.powers {
            assert!((pi - 1.0 / 3.0).abs() < 1e-6, "powers {:?}", sol.powers);
        }
    }

    #[test]
    fn pgd_deterministic() {
        let g = vec![1.0, 0.4, 0.3, 0.8];
        let a = pgd_sum_rate(&g, 2, 0.1, 1.0, &PgdConfig::default(), 9).unwrap();
        let b = pgd_sum_rate(&g, 2, 0.1, 1.0, &PgdConfig::default(), 9).unwrap();
        assert_eq!(a.powers, b.powers);
        assert_eq!(a.sum_rate, b.sum_rate);
    }

    #[test]
    fn grad_matches_finite_differences() {
        let g = vec![1.2, 0.3, 0.5, 0.9];
        let k = 2;
        let sigma2 = 0.2;
        let p = vec![0.3, 0.45];
        let grad = sum_rate_grad(&g, k, sigma2, &p);
        let h = 1e-6;
        for i in 0..k {
            let mut hi = p.clone();
            let mut lo = p.clone();
            hi[i] += h;
            lo[i] -= h;
            let fd = (sum_rate(&g, k, sigma2, &hi) - sum_rate(&g, k, sigma2, &lo)) / (2.0 * h);
            let rel = (grad[i] - fd).abs() / fd.abs().max(1e-9);
            assert!(rel < 1e-6, "component {i}: analytic {} vs fd {fd}", grad[i]);
        }
    }

    #[test]
    fn pgd_never_below_epa() {
        let mut rng = stream_rng(11, 0);
        for trial in 0..20 {
            let k = 3;
            let mut g = vec![0.0; k * k];
            for v in g.iter_mut() {
                *v = rng.gen::<f64>() * 2.0;
            }
            for i in 0..k {
                g[i * k + i] += 1.0;
            }
            let sol = pgd_sum_rate(&g, k, 0.15, 1.0, &PgdConfig::default(), trial).unwrap();
            let se_epa = sum_rate(&g, k, 0.15, &epa(k, 1.0));
            assert!(sol.sum_rate >= se_epa - 1e-12);
        }
    }
}
