use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use log::info;
use tsroots::benchmarks::{Benchmark, REGISTRY};
use tsroots::harness::{fmt_float, run_experiment, write_outputs, ExperimentConfig, RunOptions};
use tsroots::spectral_prior::{kernel_reconstruction_error, se_spectrum, DEFAULT_ETA};

#[derive(Parser)]
#[command(name = "tsroots", version, about = "Thompson-sampling Bayesian optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `output` in the config).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        /// Added to every seed in the config.
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
    /// Print the registered benchmarks.
    ListBenchmarks,
    /// Print the Mercer spectrum of the SE kernel for a length scale.
    Spectrum {
        #[arg(long)]
        l: f64,
        #[arg(long, default_value_t = DEFAULT_ETA)]
        eta: f64,
        /// Grid points per axis for the reconstruction error.
        #[arg(long, default_value_t = 41)]
        grid: usize,
    },
}

fn run(config: PathBuf, out: Option<PathBuf>, workers: usize, seed_offset: u64) -> Result<bool> {
    let cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
    let dir = out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    let res = run_experiment(&cfg, &RunOptions { workers, seed_offset })?;
    for p in write_outputs(&res, &dir)? {
        info!("wrote {}", p.display());
    }
    for f in &res.failures {
        eprintln!("{}: {}", f.run_id, f.reason);
    }
    println!("{} runs, {} failed, output in {}", res.n_runs, res.failures.len(), dir.display());
    Ok(!res.all_failed())
}

fn list_benchmarks() -> Result<()> {
    println!("name,dim,f_star,lo,hi");
    for name in REGISTRY {
        let b = Benchmark::by_name(name)?;
        let bounds = b.bounds();
        println!("{},{},{},{},{}", name, b.dim(), b.f_star(), bounds.lo()[0], bounds.hi()[0]);
    }
    Ok(())
}

fn spectrum(l: f64, eta: f64, grid: usize) -> Result<()> {
    if grid < 2 {
        bail!("--grid must be at least 2");
    }
    let basis = se_spectrum(l, 1.0, eta)?;
    let pts: Vec<f64> = (0..grid).map(|i| -1.0 + 2.0 * i as f64 / (grid - 1) as f64).collect();
    println!("a = {}", fmt_float(basis.a()));
    println!("b = {}", fmt_float(basis.b()));
    println!("c = {}", fmt_float(basis.c()));
    println!("A = {}", fmt_float(basis.big_a()));
    println!("N = {}", basis.n_terms());
    println!("sup_err = {}", fmt_float(kernel_reconstruction_error(&basis, &pts)?));
    println!("k,lambda");
    for (k, lam) in basis.eigenvalues().iter().enumerate() {
        println!("{k},{}", fmt_float(*lam));
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run {
            config,
            out,
            workers,
            seed_offset,
        } => run(config, out, workers, seed_offset),
        Command::ListBenchmarks => list_benchmarks().map(|_| true),
        Command::Spectrum { l, eta, grid } => spectrum(l, eta, grid).map(|_| true),
    };
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("every run failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
