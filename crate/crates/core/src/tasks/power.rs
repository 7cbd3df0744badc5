//! Multi-user power allocation: problem instances, greedy user grouping,
//! spectral-efficiency evaluation, the PGD label cache, and the residual
//! convolutional allocation network.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::channel::{gain_ratio, spatial_correlation, Dataset};
use crate::classical::{self, PgdConfig, PgdSolution};
use crate::error::{CoreError, Result};
use crate::nn::{
    read_header, read_network, write_header, write_network, Graph, Layer, LayerSpec, Mode,
    Network, Tensor, Var,
};
use crate::rng::stream_rng;
use crate::wire::*;

/// One MU-MIMO problem: K users with MRT precoders and the cached gain
/// matrix g[i][j] = |h_i^H w_j|^2.
#[derive(Debug, Clone)]
pub struct PowerInstance {
    /// Dataset record index of each user.
    pub user_indices: Vec<usize>,
    /// Subcarrier-averaged spatial channels, one per user.
    pub channels: Vec<Vec<Complex64>>,
    /// Unit-norm MRT precoders w_k = h_k / ||h_k||.
    pub precoders: Vec<Vec<Complex64>>,
    /// K x K row-major gain matrix.
    pub gains: Vec<f64>,
    pub noise_power: f64,
    pub power_budget: f64,
}

impl PowerInstance {
    /// Build an instance from spatial channels under MRT precoding.
    pub fn from_channels(
        user_indices: Vec<usize>,
        channels: Vec<Vec<Complex64>>,
        noise_power: f64,
        power_budget: f64,
    ) -> Result<Self> {
        let k = channels.len();
        if k == 0 {
            return Err(CoreError::Config("instance needs at least one user".into()));
        }
        if noise_power <= 0.0 || power_budget <= 0.0 {
            return Err(CoreError::Config(format!(
                "noise power {noise_power} and budget {power_budget} must be > 0"
            )));
        }
        let mut precoders = Vec::with_capacity(k);
        for h in &channels {
            let norm: f64 = h.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(CoreError::Numeric("zero channel vector in instance".into()));
            }
            precoders.push(h.iter().map(|c| c / norm).collect::<Vec<Complex64>>());
        }
        let mut gains = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                let inner: Complex64 = channels[i]
                    .iter()
                    .zip(&precoders[j])
                    .map(|(h, w)| h.conj() * w)
                    .sum();
                gains[i * k + j] = inner.norm_sqr();
            }
        }
        Ok(Self {
            user_indices,
            channels,
            precoders,
            gains,
            noise_power,
            power_budget,
        })
    }

    pub fn num_users(&self) -> usize {
        self.channels.len()
    }

    pub fn sinr(&self, p: &[f64], user: usize) -> f64 {
        classical::sinr(&self.gains, self.num_users(), self.noise_power, p, user)
    }

    /// Content hash over gains, noise power, and budget; keys the PGD label
    /// cache.
    pub fn content_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(8 * (self.gains.len() + 2));
        for g in &self.gains {
            bytes.extend_from_slice(&g.to_le_bytes());
        }
        bytes.extend_from_slice(&self.noise_power.to_le_bytes());
        bytes.extend_from_slice(&self.power_budget.to_le_bytes());
        fnv1a(&bytes)
    }

    /// Same instance with a different noise power (noise-robustness sweeps).
    pub fn with_noise_power(&self, noise_power: f64) -> Result<Self> {
        if noise_power <= 0.0 {
            return Err(CoreError::Config(format!(
                "noise power {noise_power} must be > 0"
            )));
        }
        let mut out = self.clone();
        out.noise_power = noise_power;
        Ok(out)
    }

    /// Solve this instance with projected gradient ascent.
    pub fn solve_pgd(&self, cfg: &PgdConfig, seed: u64) -> Result<PgdSolution> {
        classical::pgd_sum_rate(
            &self.gains,
            self.num_users(),
            self.noise_power,
            self.power_budget,
            cfg,
            seed,
        )
    }
}

/// Sum rate of an allocation, rejecting infeasible vectors.
pub fn evaluate_se(instance: &PowerInstance, p: &[f64]) -> Result<f64> {
    let k = instance.num_users();
    if p.len() != k {
        return Err(CoreError::Shape(format!(
            "allocation has {} entries for {k} users",
            p.len()
        )));
    }
    if p.iter().any(|&x| x < 0.0) {
        return Err(CoreError::Infeasible(format!(
            "negative power in allocation {p:?}"
        )));
    }
    let total: f64 = p.iter().sum();
    if total > instance.power_budget * (1.0 + 1e-9) {
        return Err(CoreError::Infeasible(format!(
            "allocation sum {total} exceeds budget {}",
            instance.power_budget
        )));
    }
    Ok(classical::sum_rate(
        &instance.gains,
        k,
        instance.noise_power,
        p,
    ))
}

/// Noise power that puts the mean per-user EPA receive SNR at `snr_db`:
/// sigma^2 = (P/K) * mean_k ||h_k||^2 * 10^(-snr/10).
pub fn noise_power_for_snr(channels: &[Vec<Complex64>], power_budget: f64, snr_db: f64) -> f64 {
    let k = channels.len() as f64;
    let mean_gain: f64 = channels
        .iter()
        .map(|h| h.iter().map(|c| c.norm_sqr()).sum::<f64>())
        .sum::<f64>()
        / k;
    (power_budget / k) * mean_gain * 10f64.powf(-snr_db / 10.0)
}

/// Settings for the greedy user-grouping sampler.
#[derive(Debug, Clone)]
pub struct GroupingConfig {
    pub users_per_group: usize,
    pub num_groups: usize,
    /// Pairwise spatial correlation window [rho_min, rho_max].
    pub rho_min: f64,
    pub rho_max: f64,
    /// Pairwise gain-ratio bound (exclusive).
    pub gamma_max: f64,
    /// Mean EPA receive SNR defining each instance's noise power.
    pub snr_db: f64,
    pub power_budget: f64,
    /// Abandoned-group restarts allowed per produced group.
    pub max_restarts: usize,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            users_per_group: 4,
            num_groups: 100,
            rho_min: 0.3,
            rho_max: 0.9,
            gamma_max: 20.0,
            snr_db: 5.0,
            power_budget: 1.0,
            max_restarts: 200,
        }
    }
}

impl GroupingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.users_per_group == 0 || self.num_groups == 0 {
            return Err(CoreError::Config("group size and count must be >= 1".into()));
        }
        if !(0.0 <= self.rho_min && self.rho_min < self.rho_max && self.rho_max <= 1.0) {
            return Err(CoreError::Config(format!(
                "correlation window [{}, {}] invalid",
                self.rho_min, self.rho_max
            )));
        }
        if self.gamma_max < 1.0 {
            return Err(CoreError::Config(format!(
                "gamma_max {} must be >= 1",
                self.gamma_max
            )));
        }
        Ok(())
    }
}

/// Greedy grouping: seed a group with a random user, then scan a shuffled
/// candidate pool accepting the first user compatible with every current
/// member; abandon and reseed when a scan finds nobody. Fails with
/// acceptance-rate diagnostics when restarts run out.
pub fn group_users(
    dataset: &Dataset,
    pool: &[usize],
    cfg: &GroupingConfig,
    seed: u64,
) -> Result<Vec<PowerInstance>> {
    cfg.validate()?;
    if pool.len() < cfg.users_per_group {
        return Err(CoreError::Config(format!(
            "pool of {} users cannot form groups of {}",
            pool.len(),
            cfg.users_per_group
        )));
    }
    // Precompute spatial vectors once.
    let averaged: BTreeMap<usize, Vec<Complex64>> = pool
        .iter()
        .map(|&i| (i, dataset.record(i).channel.subcarrier_average()))
        .collect();
    let mut rng = stream_rng(seed, 0);
    let mut instances = Vec::with_capacity(cfg.num_groups);
    let mut checked_pairs = 0u64;
    let mut accepted_pairs = 0u64;
    for group_idx in 0..cfg.num_groups {
        let mut formed = None;
        for _ in 0..cfg.max_restarts {
            let seed_user = pool[rng.gen_range(0..pool.len())];
            let mut members = vec![seed_user];
            let mut candidates: Vec<usize> = pool.iter().copied().collect();
            candidates.shuffle(&mut rng);
            'grow: while members.len() < cfg.users_per_group {
                for &cand in &candidates {
                    if members.contains(&cand) {
                        continue;
                    }
                    let ok = members.iter().all(|&m| {
                        checked_pairs += 1;
                        let rho = spatial_correlation(&averaged[&cand], &averaged[&m])
                            .unwrap_or(0.0);
                        let gamma = gain_ratio(&averaged[&cand], &averaged[&m])
                            .unwrap_or(f64::INFINITY);
                        let pass = rho >= cfg.rho_min && rho <= cfg.rho_max && gamma < cfg.gamma_max;
                        if pass {
                            accepted_pairs += 1;
                        }
                        pass
                    });
                    if ok {
                        members.push(cand);
                        continue 'grow;
                    }
                }
                break 'grow; // full scan found nobody compatible
            }
            if members.len() == cfg.users_per_group {
                formed = Some(members);
                break;
            }
        }
        let Some(members) = formed else {
            let rate = if checked_pairs > 0 {
                accepted_pairs as f64 / checked_pairs as f64
            } else {
                0.0
            };
            return Err(CoreError::Infeasible(format!(
                "grouping stalled at group {group_idx}/{} after {} restarts; \
                 pairwise acceptance rate {rate:.4} over {checked_pairs} checks \
                 (correlation window [{}, {}], gamma_max {})",
                cfg.num_groups, cfg.max_restarts, cfg.rho_min, cfg.rho_max, cfg.gamma_max
            )));
        };
        let channels: Vec<Vec<Complex64>> =
            members.iter().map(|&i| averaged[&i].clone()).collect();
        let noise = noise_power_for_snr(&channels, cfg.power_budget, cfg.snr_db);
        instances.push(PowerInstance::from_channels(
            members,
            channels,
            noise,
            cfg.power_budget,
        )?);
    }
    Ok(instances)
}

// ---- PGD label cache (.wbpl) ----

pub const WBPL_MAGIC: &[u8; 4] = b"WBPL";
const WBPL_VERSION: u16 = 1;

/// Cached optimal allocations keyed by instance content hash.
pub type LabelCache = BTreeMap<u64, PgdSolution>;

pub fn save_label_cache(path: &Path, cache: &LabelCache) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(WBPL_MAGIC)?;
    write_u16(&mut w, WBPL_VERSION)?;
    write_u32(&mut w, cache.len() as u32)?;
    for (hash, sol) in cache {
        write_u64(&mut w, *hash)?;
        write_u32(&mut w, sol.powers.len() as u32)?;
        for p in &sol.powers {
            write_f64(&mut w, *p)?;
        }
        write_f64(&mut w, sol.sum_rate)?;
    }
    Ok(())
}

pub fn load_label_cache(path: &Path) -> Result<LabelCache> {
    let mut r = BufReader::new(File::open(path).map_err(|e| {
        CoreError::Io(format!("cannot open label cache {}: {e}", path.display()))
    })?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != WBPL_MAGIC {
        return Err(CoreError::Io("not a WBPL label cache".into()));
    }
    let version = read_u16(&mut r)?;
    if version != WBPL_VERSION {
        return Err(CoreError::Io(format!("unsupported WBPL version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut cache = LabelCache::new();
    for _ in 0..count {
        let hash = read_u64(&mut r)?;
        let k = read_u32(&mut r)? as usize;
        let mut powers = Vec::with_capacity(k);
        for _ in 0..k {
            powers.push(read_f64(&mut r)?);
        }
        let sum_rate = read_f64(&mut r)?;
        cache.insert(hash, PgdSolution { powers, sum_rate });
    }
    Ok(cache)
}

// ---- residual convolutional allocation network ----

/// Hyperparameters of the allocation ResCNN.
#[derive(Debug, Clone)]
pub struct PowerNetConfig {
    pub channels: usize,
    pub residual_blocks: usize,
    pub kernel: usize,
}

impl Default for PowerNetConfig {
    fn default() -> Self {
        Self {
            channels: 64,
            residual_blocks: 3,
            kernel: 3,
        }
    }
}

/// Input [B, feature_dim, K]; entry conv + residual blocks (two conv/BN
/// pairs with an identity skip) + a 1x1 conv head to one logit per user;
/// softmax scaled by the budget enforces the power constraint structurally.
#[derive(Debug, Clone)]
pub struct PowerNet {
    layers: Vec<Layer>,
    feature_dim: usize,
    num_users: usize,
    channels: usize,
    residual_blocks: usize,
    power_budget: f64,
}

impl PowerNet {
    pub fn new(
        feature_dim: usize,
        num_users: usize,
        power_budget: f64,
        cfg: &PowerNetConfig,
        seed: u64,
    ) -> Result<Self> {
        if cfg.kernel % 2 == 0 {
            return Err(CoreError::Config("kernel must be odd".into()));
        }
        let pad = cfg.kernel / 2;
        let ch = cfg.channels;
        let mut specs = vec![LayerSpec::Conv1d {
            in_channels: feature_dim,
            out_channels: ch,
            kernel: cfg.kernel,
            stride: 1,
            padding: pad,
        }];
        for _ in 0..cfg.residual_blocks {
            specs.push(LayerSpec::Conv1d { in_channels: ch, out_channels: ch, kernel: cfg.kernel, stride: 1, padding: pad });
            specs.push(LayerSpec::BatchNorm1d { features: ch });
            specs.push(LayerSpec::Conv1d { in_channels: ch, out_channels: ch, kernel: cfg.kernel, stride: 1, padding: pad });
            specs.push(LayerSpec::BatchNorm1d { features: ch });
        }
        specs.push(LayerSpec::Conv1d { in_channels: ch, out_channels: 1, kernel: 1, stride: 1, padding: 0 });
        let net = Network::new(specs, &[feature_dim, num_users], &mut stream_rng(seed, 0))?;
        Ok(Self {
            layers: net.layers,
            feature_dim,
            num_users,
            channels: cfg.channels,
            residual_blocks: cfg.residual_blocks,
            power_budget,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    pub fn param_tensors_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params.iter_mut())
            .collect()
    }

    /// Total parameters and inference FLOPs, including the skip additions,
    /// softmax, and budget scaling on top of the per-layer formulas.
    pub fn count_params_flops(&self) -> (u64, u64) {
        let mut params = 0u64;
        let mut flops = 0u64;
        let mut shape = vec![self.feature_dim, self.num_users];
        for layer in &self.layers {
            let (p, f) = crate::nn::layer_params_flops(&layer.spec, &shape)
                .expect("validated at construction");
            params += p;
            flops += f;
            shape = layer.spec.output_shape(&shape).expect("validated");
        }
        // ReLUs (entry + two per block), skip adds, softmax, budget scale.
        let act = (self.channels * self.num_users) as u64;
        flops += act * (1 + 2 * self.residual_blocks as u64); // relu
        flops += act * self.residual_blocks as u64; // skip additions
        flops += 2 * self.num_users as u64; // softmax + scale
        (params, flops)
    }

    /// Forward pass; in train mode returns tracked parameter vars aligned
    /// with [`Self::param_tensors_mut`] and updates batch-norm statistics.
    pub fn forward(
        &mut self,
        g: &mut Graph,
        x: Var,
        mode: Mode,
        _rng: &mut ChaCha12Rng,
    ) -> Result<(Var, Vec<Var>)> {
        let batch = {
            let shape = g.value(x).shape();
            if shape.len() != 3 || shape[1] != self.feature_dim || shape[2] != self.num_users {
                return Err(CoreError::Shape(format!(
                    "power net expects [B, {}, {}], got {shape:?}",
                    self.feature_dim, self.num_users
                )));
            }
            shape[0]
        };
        let mut param_vars = Vec::new();
        let register = |g: &mut Graph, layer: &Layer| -> Vec<Var> {
            layer
                .params
                .iter()
                .map(|p| match mode {
                    Mode::Train => g.param(p.clone()),
                    Mode::Eval => g.input(p.clone()),
                })
                .collect()
        };

        let apply_conv = |g: &mut Graph, layer: &Layer, x: Var, vars: &[Var]| -> Result<Var> {
            let LayerSpec::Conv1d { stride, padding, .. } = &layer.spec else {
                return Err(CoreError::Shape("expected conv1d layer".into()));
            };
            g.conv1d(x, vars[0], vars[1], *stride, *padding)
        };

        // Entry convolution + activation.
        let entry_vars = register(g, &self.layers[0]);
        let mut cur = apply_conv(g, &self.layers[0], x, &entry_vars)?;
        cur = g.relu(cur);
        param_vars.extend(entry_vars);

        // Residual blocks: conv/bn/relu, conv/bn, skip, relu.
        for b in 0..self.residual_blocks {
            let base = 1 + b * 4;
            let skip = cur;
            let vars = register(g, &self.layers[base]);
            let mut t = apply_conv(g, &self.layers[base], cur, &vars)?;
            param_vars.extend(vars);
            let vars = register(g, &self.layers[base + 1]);
            t = self.apply_bn(g, base + 1, t, &vars, mode)?;
            param_vars.extend(vars);
            t = g.relu(t);
            let vars = register(g, &self.layers[base + 2]);
            t = apply_conv(g, &self.layers[base + 2], t, &vars)?;
            param_vars.extend(vars);
            let vars = register(g, &self.layers[base + 3]);
            t = self.apply_bn(g, base + 3, t, &vars, mode)?;
            param_vars.extend(vars);
            let sum = g.add(t, skip)?;
            cur = g.relu(sum);
        }

        // Head: one logit per user, softmax over users, scale by budget.
        let head_idx = self.layers.len() - 1;
        let head_vars = register(g, &self.layers[head_idx]);
        let logits = apply_conv(g, &self.layers[head_idx], cur, &head_vars)?;
        param_vars.extend(head_vars);
        let flat = g.reshape(logits, &[batch, self.num_users])?;
        let probs = g.softmax_rows(flat)?;
        let powers = g.scale(probs, self.power_budget);
        Ok((powers, param_vars))
    }

    fn apply_bn(
        &mut self,
        g: &mut Graph,
        idx: usize,
        x: Var,
        vars: &[Var],
        mode: Mode,
    ) -> Result<Var> {
        match mode {
            Mode::Train => {
                let (out, stats) = g.batchnorm_train(x, vars[0], vars[1])?;
                let running = self.layers[idx]
                    .running
                    .as_mut()
                    .expect("bn layer has running stats");
                let shape = g.value(x).shape();
                let n = shape.iter().product::<usize>() / stats.mean.len().max(1);
                let ub = if n > 1 { n as f64 / (n as f64 - 1.0) } else { 1.0 };
                for (r, m) in running.mean.iter_mut().zip(&stats.mean) {
                    *r = (1.0 - crate::nn::BN_MOMENTUM) * *r + crate::nn::BN_MOMENTUM * m;
                }
                for (r, v) in running.var.iter_mut().zip(&stats.var) {
                    *r = (1.0 - crate::nn::BN_MOMENTUM) * *r + crate::nn::BN_MOMENTUM * v * ub;
                }
                Ok(out)
            }
            Mode::Eval => {
                let rs = self.layers[idx]
                    .running
                    .as_ref()
                    .expect("bn layer has running stats");
                g.batchnorm_eval(x, vars[0], vars[1], &rs.mean, &rs.var)
            }
        }
    }

    /// Eval-mode allocation for a batch of instance feature tensors.
    pub fn allocate(&self, inputs: &Tensor) -> Result<Vec<Vec<f64>>> {
        let mut me = self.clone();
        let mut g = Graph::new();
        let x = g.input(inputs.clone());
        let mut rng = stream_rng(0, 0);
        let (out, _) = me.forward(&mut g, x, Mode::Eval, &mut rng)?;
        Ok(g.value(out)
            .data()
            .chunks(self.num_users)
            .map(|c| c.to_vec())
            .collect())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let net = Network::from_layers(self.layers.clone(), &[self.feature_dim, self.num_users])?;
        let mut w = BufWriter::new(File::create(path)?);
        write_header(&mut w, 1)?;
        write_network(&mut w, &net)?;
        write_f64(&mut w, self.power_budget)?;
        write_u32(&mut w, self.residual_blocks as u32)?;
        write_u32(&mut w, self.channels as u32)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path).map_err(|e| {
            CoreError::Io(format!("cannot open checkpoint {}: {e}", path.display()))
        })?);
        let count = read_header(&mut r)?;
        if count != 1 {
            return Err(CoreError::Io("power net checkpoint must hold 1 network".into()));
        }
        let net = read_network(&mut r)?;
        let power_budget = read_f64(&mut r)?;
        let residual_blocks = read_u32(&mut r)? as usize;
        let channels = read_u32(&mut r)? as usize;
        let shape = net.input_shape().to_vec();
        if shape.len() != 2 {
            return Err(CoreError::Io(format!("unexpected input shape {shape:?}")));
        }
        if net.layers.len() != 2 + 4 * residual_blocks {
            return Err(CoreError::Io("layer count inconsistent with block count".into()));
        }
        Ok(Self {
            layers: net.layers,
            feature_dim: shape[0],
            num_users: shape[1],
            channels,
            residual_blocks,
            power_budget,
        })
    }
}
