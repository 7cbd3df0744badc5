//! Benchmark sweeps over the data-efficiency, noise-robustness, and
//! complexity axes, with deterministic seeding and CSV emission.

use std::path::Path;
use std::time::Instant;

use wirebench_core::channel::Dataset;
use wirebench_core::rng::derive_seed;
use wirebench_core::repr::Embedder;
use wirebench_core::tasks::{
    allocate_all, beam_features, build_codebook, classifier_f1, evaluate_se, group_users,
    los_features, power_features, train_beam, train_los, train_power, Codebook, FeatureNoise,
    FeatureSet, LabelCache, PowerInstance, PowerTrainData,
};
use wirebench_core::classical::epa;

use crate::config::Config;
use crate::error::{HarnessError, Result};
use crate::profile::profile_embedder;

/// Benchmarked task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Los,
    Beam,
    Power,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Los => "los",
            Task::Beam => "beam",
            Task::Power => "power",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "los" => Ok(Task::Los),
            "beam" => Ok(Task::Beam),
            "power" => Ok(Task::Power),
            other => Err(HarnessError::Config(format!("unknown task `{other}`"))),
        }
    }
}

/// Sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    TrainSize,
    SnrDb,
    Profile,
}

impl Axis {
    pub fn name(&self) -> &'static str {
        match self {
            Axis::TrainSize => "train_size",
            Axis::SnrDb => "snr_db",
            Axis::Profile => "profile",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        match s {
            "train_size" => Ok(Axis::TrainSize),
            "snr_db" => Ok(Axis::SnrDb),
            "profile" => Ok(Axis::Profile),
            other => Err(HarnessError::Config(format!("unknown axis `{other}`"))),
        }
    }
}

/// One result cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub task: String,
    pub representation: String,
    pub axis: String,
    pub axis_value: String,
    pub seed: u64,
    pub metric_name: String,
    pub metric_value: f64,
    pub wall_time_s: Option<f64>,
}

/// Shortest-roundtrip decimal formatting; `inf` for infinities.
pub fn format_value(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

pub const CSV_HEADER: &str =
    "task,representation,axis,axis_value,seed,metric_name,metric_value,wall_time_s";

/// Write rows as CSV. Wall times are emitted only when `include_timing` is
/// set, keeping default output byte-deterministic across runs.
pub fn write_csv(path: &Path, rows: &[Row], include_timing: bool) -> Result<()> {
    let mut out = String::with_capacity(rows.len() * 64 + 64);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let wall = match (include_timing, r.wall_time_s) {
            (true, Some(t)) => format_value(t),
            _ => String::new(),
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.task,
            r.representation,
            r.axis,
            r.axis_value,
            r.seed,
            r.metric_name,
            format_value(r.metric_value),
            wall
        ));
    }
    std::fs::write(path, out)
        .map_err(|e| HarnessError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}

/// Read rows written by [`write_csv`].
pub fn read_csv(path: &Path) -> Result<Vec<Row>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(HarnessError::Runtime(format!(
                "{}: unexpected header {other:?}",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 8 {
            return Err(HarnessError::Runtime(format!(
                "{} line {}: expected 8 fields",
                path.display(),
                i + 2
            )));
        }
        let parse_f64 = |s: &str| -> Result<f64> {
            if s == "inf" {
                Ok(f64::INFINITY)
            } else if s == "-inf" {
                Ok(f64::NEG_INFINITY)
            } else {
                s.parse()
                    .map_err(|_| HarnessError::Runtime(format!("bad number `{s}`")))
            }
        };
        rows.push(Row {
            task: parts[0].into(),
            representation: parts[1].into(),
            axis: parts[2].into(),
            axis_value: parts[3].into(),
            seed: parts[4]
                .parse()
                .map_err(|_| HarnessError::Runtime(format!("bad seed `{}`", parts[4])))?,
            metric_name: parts[5].into(),
            metric_value: parse_f64(parts[6])?,
            wall_time_s: if parts[7].is_empty() {
                None
            } else {
                Some(parse_f64(parts[7])?)
            },
        });
    }
    Ok(rows)
}

fn subset_features(fs: &FeatureSet, idx: &[usize]) -> FeatureSet {
    FeatureSet {
        dim: fs.dim,
        features: idx.iter().map(|&i| fs.features[i].clone()).collect(),
        labels: idx.iter().map(|&i| fs.labels[i]).collect(),
    }
}

use wirebench_core::rng::seeded_subset;

/// Everything a bench run needs.
pub struct BenchInputs<'a> {
    pub dataset: &'a Dataset,
    pub embedders: &'a [Embedder],
    pub config: &'a Config,
    pub label_cache: LabelCache,
}

pub struct BenchOutput {
    pub rows: Vec<Row>,
    /// PGD solutions computed during the run, for cache persistence.
    pub label_cache: LabelCache,
}

pub fn run_bench(
    inputs: BenchInputs,
    task: Task,
    axis: Axis,
    seeds: &[u64],
) -> Result<BenchOutput> {
    match (task, axis) {
        (_, Axis::Profile) => run_profile_axis(inputs, task),
        (Task::Los | Task::Beam, Axis::TrainSize) => {
            run_classifier_data_efficiency(inputs, task, seeds)
        }
        (Task::Los | Task::Beam, Axis::SnrDb) => run_classifier_noise(inputs, task, seeds),
        (Task::Power, Axis::TrainSize) => run_power_data_efficiency(inputs, seeds),
        (Task::Power, Axis::SnrDb) => run_power_noise(inputs, seeds),
    }
}

fn codebook_from_config(cfg: &Config) -> Result<Codebook> {
    let scenario = cfg.scenario(None)?;
    let (num_beams, fov) = cfg.beam()?;
    Ok(build_codebook(
        scenario.num_antennas,
        num_beams,
        fov,
        scenario.antenna_spacing,
        scenario.carrier_wavelength,
    )?)
}

fn classifier_features(
    task: Task,
    embedder: &Embedder,
    ds: &Dataset,
    indices: &[usize],
    codebook: Option<&Codebook>,
    noise: FeatureNoise,
    seed: u64,
) -> Result<FeatureSet> {
    Ok(match task {
        Task::Los => los_features(embedder, ds, indices, noise, seed)?,
        Task::Beam => beam_features(
            embedder,
            ds,
            indices,
            codebook.expect("beam task carries a codebook"),
            noise,
            seed,
        )?,
        Task::Power => unreachable!("classifier path"),
    })
}

fn run_classifier_data_efficiency(
    inputs: BenchInputs,
    task: Task,
    seeds: &[u64],
) -> Result<BenchOutput> {
    let ds = inputs.dataset;
    let cfg = inputs.config;
    let train_cfg = cfg.train()?;
    let grid = cfg.train_sizes()?;
    let codebook = match task {
        Task::Beam => Some(codebook_from_config(cfg)?),
        _ => None,
    };
    let num_beams = codebook.as_ref().map(|cb| cb.num_beams());
    let mut rows = Vec::new();
    for embedder in inputs.embedders {
        let repr = embedder.kind_name();
        let train_full = classifier_features(
            task, embedder, ds, &ds.split().train, codebook.as_ref(), FeatureNoise::Clean, 0,
        )?;
        let val = classifier_features(
            task, embedder, ds, &ds.split().val, codebook.as_ref(), FeatureNoise::Clean, 0,
        )?;
        let test = classifier_features(
            task, embedder, ds, &ds.split().test, codebook.as_ref(), FeatureNoise::Clean, 0,
        )?;
        for &n in &grid {
            if n > train_full.len() {
                return Err(HarnessError::Config(format!(
                    "train_size {n} exceeds the training split ({})",
                    train_full.len()
                )));
            }
            for &seed in seeds {
                let t0 = Instant::now();
                let sub = subset_features(&train_full, &seeded_subset(train_full.len(), n, seed));
                let (net, _) = match task {
                    Task::Los => train_los(&sub, &val, &train_cfg, seed)?,
                    Task::Beam => {
                        train_beam(&sub, &val, num_beams.expect("beam"), &train_cfg, seed)?
                    }
                    Task::Power => unreachable!(),
                };
                let f1 = classifier_f1(&net, &test)?;
                rows.push(Row {
                    task: task.name().into(),
                    representation: repr.clone(),
                    axis: Axis::TrainSize.name().into(),
                    axis_value: format!("{n}"),
                    seed,
                    metric_name: "weighted_f1".into(),
                    metric_value: f1,
                    wall_time_s: Some(t0.elapsed().as_secs_f64()),
                });
            }
        }
    }
    Ok(BenchOutput { rows, label_cache: inputs.label_cache })
}

fn run_classifier_noise(inputs: BenchInputs, task: Task, seeds: &[u64]) -> Result<BenchOutput> {
    let ds = inputs.dataset;
    let cfg = inputs.config;
    let train_cfg = cfg.train()?;
    let snrs = cfg.snrs()?;
    let codebook = match task {
        Task::Beam => Some(codebook_from_config(cfg)?),
        _ => None,
    };
    let num_beams = codebook.as_ref().map(|cb| cb.num_beams());
    let mut rows = Vec::new();
    for embedder in inputs.embedders {
        let repr = embedder.kind_name();
        let train_full = classifier_features(
            task, embedder, ds, &ds.split().train, codebook.as_ref(), FeatureNoise::Clean, 0,
        )?;
        let val = classifier_features(
            task, embedder, ds, &ds.split().val, codebook.as_ref(), FeatureNoise::Clean, 0,
        )?;
        for &seed in seeds {
            // Train once at the clean training condition, evaluate at each
            // SNR with noise applied before embedding.
            let (net, _) = match task {
                Task::Los => train_los(&train_full, &val, &train_cfg, seed)?,
                Task::Beam => train_beam(&train_full, &val, num_beams.expect("beam"), &train_cfg, seed)?,
                Task::Power => unreachable!(),
            };
            for &snr in &snrs {
                let t0 = Instant::now();
                let noise = FeatureNoise::SnrDb(snr);
                let test = classifier_features(
                    task,
                    embedder,
                    ds,
                    &ds.split().test,
                    codebook.as_ref(),
                    noise,
                    derive_seed(seed, snr.to_bits()),
                )?;
                let f1 = classifier_f1(&net, &test)?;
                rows.push(Row {
                    task: task.name().into(),
                    representation: repr.clone(),
                    axis: Axis::SnrDb.name().into(),
                    axis_value: format_value(snr),
                    seed,
                    metric_name: "weighted_f1".into(),
                    metric_value: f1,
                    wall_time_s: Some(t0.elapsed().as_secs_f64()),
                });
            }
        }
    }
    Ok(BenchOutput { rows, label_cache: inputs.label_cache })
}

/// PGD solution via the cache, solving and inserting on miss.
fn pgd_with_cache(
    cache: &mut LabelCache,
    inst: &PowerInstance,
    cfg: &Config,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    let key = inst.content_hash();
    if let Some(sol) = cache.get(&key) {
        return Ok((sol.powers.clone(), sol.sum_rate));
    }
    let sol = inst.solve_pgd(&cfg.pgd()?, derive_seed(seed, key))?;
    let out = (sol.powers.clone(), sol.sum_rate);
    cache.insert(key, sol);
    Ok(out)
}

struct PowerSetup {
    train_instances: Vec<PowerInstance>,
    test_instances: Vec<PowerInstance>,
}

fn power_setup(inputs: &BenchInputs) -> Result<PowerSetup> {
    let ds = inputs.dataset;
    let cfg = inputs.config;
    let (train_groups, test_groups) = cfg.power_group_counts()?;
    let scenario_seed = cfg.scenario(None)?.seed;
    let train_instances = group_users(
        ds,
        &ds.split().train,
        &cfg.grouping(train_groups)?,
        derive_seed(scenario_seed, 0x6701),
    )?;
    let test_instances = group_users(
        ds,
        &ds.split().test,
        &cfg.grouping(test_groups)?,
        derive_seed(scenario_seed, 0x6702),
    )?;
    Ok(PowerSetup {
        train_instances,
        test_instances,
    })
}

/// Assemble a labeled training bundle over a subset of instances.
#[allow(clippy::too_many_arguments)]
fn power_bundle(
    inputs: &mut BenchInputs,
    embedder: &Embedder,
    instances: &[PowerInstance],
    subset: &[usize],
    supervised_fraction: f64,
    noise: FeatureNoise,
    feature_seed: u64,
    pgd_seed: u64,
) -> Result<PowerTrainData> {
    let picked: Vec<PowerInstance> = subset.iter().map(|&i| instances[i].clone()).collect();
    let feats = power_features(embedder, inputs.dataset, &picked, noise, feature_seed)?;
    let n_labeled = ((picked.len() as f64) * supervised_fraction).ceil() as usize;
    let mut labels: Vec<Option<Vec<f64>>> = vec![None; picked.len()];
    for (i, inst) in picked.iter().enumerate().take(n_labeled) {
        let (p, _) = pgd_with_cache(&mut inputs.label_cache, inst, inputs.config, pgd_seed)?;
        labels[i] = Some(p);
    }
    Ok(PowerTrainData::new(feats, picked, labels)?)
}

fn power_metric_rows(
    inputs: &mut BenchInputs,
    net: &wirebench_core::tasks::PowerNet,
    test: &PowerTrainData,
    base: &Row,
    pgd_seed: u64,
) -> Result<Vec<Row>> {
    let allocations = allocate_all(net, test)?;
    let mut se_model = 0.0;
    let mut se_pgd = 0.0;
    let mut se_epa = 0.0;
    let mut ratio_pgd = 0.0;
    let mut ratio_epa = 0.0;
    for (inst, p) in test.instances.iter().zip(&allocations) {
        let se = evaluate_se(inst, p)?;
        let (_, pgd) = pgd_with_cache(&mut inputs.label_cache, inst, inputs.config, pgd_seed)?;
        let uniform = epa(inst.num_users(), inst.power_budget);
        let epa_se = evaluate_se(inst, &uniform)?;
        se_model += se;
        se_pgd += pgd;
        se_epa += epa_se;
        ratio_pgd += se / pgd;
        ratio_epa += se / epa_se;
    }
    let n = test.len() as f64;
    let metrics = [
        ("se_model", se_model / n),
        ("se_pgd", se_pgd / n),
        ("se_epa", se_epa / n),
        ("ratio_vs_pgd", ratio_pgd / n),
        ("ratio_vs_epa", ratio_epa / n),
    ];
    Ok(metrics
        .into_iter()
        .map(|(name, value)| Row {
            metric_name: name.into(),
            metric_value: value,
            ..base.clone()
        })
        .collect())
}

fn run_power_data_efficiency(mut inputs: BenchInputs, seeds: &[u64]) -> Result<BenchOutput> {
    let cfg = inputs.config;
    let grid = cfg.train_sizes()?;
    let power_cfg = cfg.power_train()?;
    let supervised = cfg.supervised_fraction()?;
    let train_snr = cfg.grouping(1)?.snr_db;
    let setup = power_setup(&inputs)?;
    let noise = FeatureNoise::SnrDb(train_snr);
    let mut rows = Vec::new();
    let embedders = inputs.embedders.to_vec();
    for embedder in &embedders {
        let repr = embedder.kind_name();
        let all_test: Vec<usize> = (0..setup.test_instances.len()).collect();
        let test = power_bundle(
            &mut inputs, embedder, &setup.test_instances, &all_test, 0.0, noise, 0, 0,
        )?;
        for &n in &grid {
            if n > setup.train_instances.len() {
                return Err(HarnessError::Config(format!(
                    "train_size {n} exceeds the {} training instances",
                    setup.train_instances.len()
                )));
            }
            for &seed in seeds {
                let t0 = Instant::now();
                let subset = seeded_subset(setup.train_instances.len(), n, seed);
                let bundle = power_bundle(
                    &mut inputs,
                    embedder,
                    &setup.train_instances,
                    &subset,
                    supervised,
                    noise,
                    0,
                    seed,
                )?;
                let (net, _) = train_power(&bundle, &test, &power_cfg, seed)?;
                let base = Row {
                    task: Task::Power.name().into(),
                    representation: repr.clone(),
                    axis: Axis::TrainSize.name().into(),
                    axis_value: format!("{n}"),
                    seed,
                    metric_name: String::new(),
                    metric_value: 0.0,
                    wall_time_s: Some(t0.elapsed().as_secs_f64()),
                };
                rows.extend(power_metric_rows(&mut inputs, &net, &test, &base, seed)?);
            }
        }
    }
    Ok(BenchOutput { rows, label_cache: inputs.label_cache })
}

fn run_power_noise(mut inputs: BenchInputs, seeds: &[u64]) -> Result<BenchOutput> {
    let cfg = inputs.config;
    let snrs = cfg.snrs()?;
    let power_cfg = cfg.power_train()?;
    let supervised = cfg.supervised_fraction()?;
    let train_snr = cfg.grouping(1)?.snr_db;
    let setup = power_setup(&inputs)?;
    let mut rows = Vec::new();
    let embedders = inputs.embedders.to_vec();
    for embedder in &embedders {
        let repr = embedder.kind_name();
        let all_train: Vec<usize> = (0..setup.train_instances.len()).collect();
        for &seed in seeds {
            // Train at the configured training SNR.
            let bundle = power_bundle(
                &mut inputs,
                embedder,
                &setup.train_instances,
                &all_train,
                supervised,
                FeatureNoise::SnrDb(train_snr),
                0,
                seed,
            )?;
            let (net, _) = train_power(&bundle, &bundle, &power_cfg, seed)?;
            for &snr in &snrs {
                let t0 = Instant::now();
                // The sweep SNR degrades both the CSI fed to the model and
                // the physical noise power, so the PGD optimum is
                // recomputed on the noisy-sigma^2 instance.
                let noisy_instances: Vec<PowerInstance> = setup
                    .test_instances
                    .iter()
                    .map(|inst| {
                        let sigma2 = wirebench_core::tasks::noise_power_for_snr(
                            &inst.channels,
                            inst.power_budget,
                            snr,
                        );
                        inst.with_noise_power(sigma2)
                    })
                    .collect::<wirebench_core::Result<_>>()?;
                let all_test: Vec<usize> = (0..noisy_instances.len()).collect();
                let test = power_bundle(
                    &mut inputs,
                    embedder,
                    &noisy_instances,
                    &all_test,
                    0.0,
                    FeatureNoise::SnrDb(snr),
                    derive_seed(seed, snr.to_bits()),
                    seed,
                )?;
                let base = Row {
                    task: Task::Power.name().into(),
                    representation: repr.clone(),
                    axis: Axis::SnrDb.name().into(),
                    axis_value: format_value(snr),
                    seed,
                    metric_name: String::new(),
                    metric_value: 0.0,
                    wall_time_s: Some(t0.elapsed().as_secs_f64()),
                };
                rows.extend(power_metric_rows(&mut inputs, &net, &test, &base, seed)?);
            }
        }
    }
    Ok(BenchOutput { rows, label_cache: inputs.label_cache })
}

fn run_profile_axis(inputs: BenchInputs, task: Task) -> Result<BenchOutput> {
    let mut rows = Vec::new();
    let sample = &inputs
        .dataset
        .records()
        .first()
        .ok_or_else(|| HarnessError::Runtime("empty dataset".into()))?
        .channel;
    for embedder in inputs.embedders {
        let p = profile_embedder(embedder, sample)?;
        for (name, value) in [
            ("params", p.params as f64),
            ("flops", p.flops as f64),
            ("latency_s", p.median_latency_s),
        ] {
            rows.push(Row {
                task: task.name().into(),
                representation: embedder.kind_name(),
                axis: Axis::Profile.name().into(),
                axis_value: "embedder".into(),
                seed: 0,
                metric_name: name.into(),
                metric_value: value,
                wall_time_s: None,
            });
        }
    }
    Ok(BenchOutput { rows, label_cache: inputs.label_cache })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format_values() {
        assert_eq!(format_value(0.5), "0.5");
        assert_eq!(format_value(f64::INFINITY), "inf");
        assert_eq!(format_value(-3.0), "-3");
    }

    #[test]
    fn csv_roundtrip() {
        let rows = vec![
            Row {
                task: "los".into(),
                representation: "raw".into(),
                axis: "train_size".into(),
                axis_value: "100".into(),
                seed: 1,
                metric_name: "weighted_f1".into(),
                metric_value: 0.875,
                wall_time_s: Some(1.25),
            },
            Row {
                task: "los".into(),
                representation: "raw".into(),
                axis: "snr_db".into(),
                axis_value: "inf".into(),
                seed: 2,
                metric_name: "weighted_f1".into(),
                metric_value: 0.9,
                wall_time_s: None,
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rows.csv");
        write_csv(&path, &rows, false).unwrap();
        let loaded = read_csv(&path).unwrap();
        assert_eq!(loaded.len(), 2);
        assert_eq!(loaded[0].metric_value, 0.875);
        assert_eq!(loaded[0].wall_time_s, None); // timing suppressed
        assert_eq!(loaded[1].axis_value, "inf");

        // Timing included on request.
        write_csv(&path, &rows, true).unwrap();
        let loaded = read_csv(&path).unwrap();
        assert_eq!(loaded[0].wall_time_s, Some(1.25));
    }

    #[test]
    fn seeded_subsets_are_stable() {
        let a = seeded_subset(100, 10, 7);
        let b = seeded_subset(100, 10, 7);
        assert_eq!(a, b);
        let c = seeded_subset(100, 10, 8);
        assert_ne!(a, c);
    }
}
