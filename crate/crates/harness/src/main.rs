//! wirebench CLI: dataset generation, model training, benchmark sweeps,
//! complexity profiling, and report aggregation.
//!
//! Exit codes: 0 success, 1 configuration/usage error, 2 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use wirebench_core::channel::{generate_dataset, load_dataset, save_dataset};
use wirebench_core::repr::{save_autoencoder, train_denoising_ae};
use wirebench_core::rng::derive_seed;
use wirebench_core::tasks::{group_users, load_label_cache, save_label_cache, LabelCache};

use wirebench_harness::config::Config;
use wirebench_harness::error::{HarnessError, Result};
use wirebench_harness::pipeline::{embedder_manifests, out_path, resolve_embedders};
use wirebench_harness::profile::profile_embedder;
use wirebench_harness::report::report;
use wirebench_harness::sweep::{run_bench, write_csv, Axis, BenchInputs, Row, Task};

#[derive(Parser)]
#[command(
    name = "wirebench",
    about = "Synthetic MIMO-OFDM channel benchmarks over raw, compressed, and patch-embedded representations",
    version
)]
struct Cli {
    /// Configuration file (key = value with [sections]); defaults apply when
    /// omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed override: replaces the scenario seed (gen) or the sweep seed
    /// list (bench).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel kernels (0 = library default). Results
    /// are bitwise identical for any value.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Output path; command-specific default when omitted. Relative paths
    /// are re-rooted under $WIREBENCH_OUT when set.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled synthetic dataset (.wbds).
    Gen,
    /// Train the denoising autoencoder on a dataset (.wbnn checkpoint).
    TrainAe {
        #[arg(long)]
        data: PathBuf,
        /// Compression denominator (16 or 32); overrides [ae] ratio.
        #[arg(long)]
        ratio: Option<usize>,
    },
    /// Precompute PGD power-allocation labels for the grouped instances
    /// (.wbpl cache).
    LabelsPgd {
        #[arg(long)]
        data: PathBuf,
    },
    /// Run a benchmark sweep; writes a CSV of metric rows.
    Bench {
        /// Task: los, beam, or power.
        task: String,
        /// Sweep axis: train_size, snr_db, or profile.
        #[arg(long)]
        axis: String,
        #[arg(long)]
        data: PathBuf,
        /// Autoencoder checkpoint(s) to benchmark as latent representations.
        #[arg(long)]
        ae: Vec<PathBuf>,
        /// PGD label cache; updated in place with newly solved instances.
        #[arg(long)]
        labels: Option<PathBuf>,
        /// Include wall-clock timings in the CSV (off by default so output
        /// is byte-deterministic).
        #[arg(long)]
        timing: bool,
    },
    /// Profile embedder parameters, FLOPs, and single-sample latency.
    Profile {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ae: Vec<PathBuf>,
    },
    /// Merge result CSVs into a summary JSON.
    Report {
        /// Comma-separated CSV paths.
        #[arg(long, value_delimiter = ',', required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<Config> {
    match path {
        Some(p) => Config::load(p),
        None => Ok(Config::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    }
    let config = load_config(&cli.config)?;
    match cli.command {
        Command::Gen => {
            let scenario = config.scenario(cli.seed)?;
            let num_users = config.num_users()?;
            let dataset = generate_dataset(scenario, num_users)?;
            let out = out_path(cli.out.as_deref().unwrap_or(Path::new("dataset.wbds")));
            save_dataset(&out, &dataset)?;
            println!(
                "wrote {} ({} users, {}x{}, alpha {:.6e})",
                out.display(),
                dataset.len(),
                dataset.num_antennas(),
                dataset.num_subcarriers(),
                dataset.norm_factor()
            );
            Ok(())
        }
        Command::TrainAe { data, ratio } => {
            let dataset = load_dataset(&data)?;
            let ae_cfg = config.ae(ratio)?;
            let seed = cli.seed.unwrap_or_else(|| {
                config.scenario(None).map(|s| s.seed).unwrap_or(0)
            });
            let (ae, curve) = train_denoising_ae(&dataset, &ae_cfg, seed)?;
            let out = out_path(cli.out.as_deref().unwrap_or(Path::new("ae.wbnn")));
            save_autoencoder(&out, &ae)?;
            let last = curve.last().expect("at least one epoch");
            println!(
                "wrote {} (latent {}, {} epochs, final train/val loss {:.6}/{:.6})",
                out.display(),
                ae.latent_dim(),
                curve.len(),
                last.0,
                last.1
            );
            Ok(())
        }
        Command::LabelsPgd { data } => {
            let dataset = load_dataset(&data)?;
            let scenario_seed = config.scenario(None)?.seed;
            let (train_groups, test_groups) = config.power_group_counts()?;
            let pgd_cfg = config.pgd()?;
            let mut cache = LabelCache::new();
            for (pool, groups, stream) in [
                (&dataset.split().train, train_groups, 0x6701u64),
                (&dataset.split().test, test_groups, 0x6702u64),
            ] {
                let instances = group_users(
                    &dataset,
                    pool,
                    &config.grouping(groups)?,
                    derive_seed(scenario_seed, stream),
                )?;
                for inst in &instances {
                    let key = inst.content_hash();
                    if !cache.contains_key(&key) {
                        let sol = inst.solve_pgd(&pgd_cfg, derive_seed(0, key))?;
                        cache.insert(key, sol);
                    }
                }
            }
            let out = out_path(cli.out.as_deref().unwrap_or(Path::new("labels.wbpl")));
            save_label_cache(&out, &cache)?;
            println!("wrote {} ({} instances)", out.display(), cache.len());
            Ok(())
        }
        Command::Bench { task, axis, data, ae, labels, timing } => {
            let task = Task::from_name(&task)?;
            let axis = Axis::from_name(&axis)?;
            let dataset = load_dataset(&data)?;
            let embedders = resolve_embedders(&config, &dataset, &ae)?;
            let label_cache = match &labels {
                Some(p) if p.exists() => load_label_cache(p)?,
                _ => LabelCache::new(),
            };
            let seeds = config.seeds(cli.seed)?;
            let inputs = BenchInputs {
                dataset: &dataset,
                embedders: &embedders,
                config: &config,
                label_cache,
            };
            let output = run_bench(inputs, task, axis, &seeds)?;
            let out = out_path(cli.out.as_deref().unwrap_or(Path::new("results.csv")));
            write_csv(&out, &output.rows, timing)?;
            let manifest_path = out.with_extension("manifest");
            std::fs::write(&manifest_path, embedder_manifests(&embedders))
                .map_err(|e| HarnessError::Runtime(format!("manifest write: {e}")))?;
            if let Some(p) = labels {
                save_label_cache(&p, &output.label_cache)?;
            }
            println!("wrote {} ({} rows)", out.display(), output.rows.len());
            Ok(())
        }
        Command::Profile { data, ae } => {
            let dataset = load_dataset(&data)?;
            let embedders = resolve_embedders(&config, &dataset, &ae)?;
            let sample = &dataset.record(0).channel;
            let mut rows = Vec::new();
            println!("{:<14} {:>12} {:>14} {:>14}", "embedder", "params", "flops", "latency_s");
            for e in &embedders {
                let p = profile_embedder(e, sample)?;
                println!(
                    "{:<14} {:>12} {:>14} {:>14.6e}",
                    e.kind_name(),
                    p.params,
                    p.flops,
                    p.median_latency_s
                );
                for (name, value) in [
                    ("params", p.params as f64),
                    ("flops", p.flops as f64),
                    ("latency_s", p.median_latency_s),
                ] {
                    rows.push(Row {
                        task: "profile".into(),
                        representation: e.kind_name(),
                        axis: "profile".into(),
                        axis_value: "embedder".into(),
                        seed: 0,
                        metric_name: name.into(),
                        metric_value: value,
                        wall_time_s: None,
                    });
                }
            }
            let out = out_path(cli.out.as_deref().unwrap_or(Path::new("profile.csv")));
            write_csv(&out, &rows, false)?;
            println!("wrote {}", out.display());
            Ok(())
        }
        Command::Report { inputs } => {
            let paths: Vec<&Path> = inputs.iter().map(|p| p.as_path()).collect();
            let out = out_path(cli.out.as_deref().unwrap_or(Path::new("summary.json")));
            let summary = report(&paths, &out)?;
            println!("wrote {} ({} cells)", out.display(), summary.cells.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
