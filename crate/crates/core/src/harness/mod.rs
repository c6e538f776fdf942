//! Batch experiments over seeds and acquisitions, written as CSV.

mod config;
mod output;

pub use config::{ExperimentConfig, HyperSection, InnerSection, Method, Mode, SetSizes, SpectrumSection, SCHEMA_VERSION};
pub use output::{fmt_float, quantile, summarize, write_outputs, RECORD_HEADER};

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use log::{info, warn};

use crate::benchmarks::Benchmark;
use crate::bo::{draw_acquisition_sample, optimize_sample, random_starts, run_bo, run_random_search, AcquisitionSpec, BoState, IterationRecord, Proposal};
use crate::error::{Error, Result};
use crate::optimize::BoxBounds;
use crate::spectral_prior::{kernel_reconstruction_error, rff_kernel_reconstruction_error, se_spectrum};
use crate::tsroots::{multistart_minimize, StartPoint, StartSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub workers: usize,
    pub seed_offset: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            seed_offset: 0,
        }
    }
}

/// An outer-loop record tagged with its run.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordRow {
    pub run_id: String,
    pub seed: u64,
    pub acq: String,
    pub record: IterationRecord,
}

/// One inner optimizer on one shared sample.
#[derive(Debug, Clone, PartialEq)]
pub struct InnerRow {
    pub run_id: String,
    pub seed: u64,
    pub iter: usize,
    pub optimizer: String,
    pub alpha_star: f64,
    pub n_starts: usize,
    pub win_idx: usize,
    pub win_src: StartSource,
    pub elapsed: Duration,
    /// Reference optimum value from dense random starts, when computed.
    pub ref_alpha: Option<f64>,
    /// Normalized distance to the reference minimizer.
    pub dist_ref: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub method: &'static str,
    pub n: usize,
    pub sup_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub run_id: String,
    pub seed: u64,
    pub acq: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentOutput {
    pub mode: Option<Mode>,
    pub records: Vec<RecordRow>,
    pub inner: Vec<InnerRow>,
    pub spectrum: Vec<SpectrumRow>,
    pub failures: Vec<Failure>,
    pub n_runs: usize,
    pub timing: bool,
}

impl ExperimentOutput {
    pub fn all_failed(&self) -> bool {
        self.n_runs > 0 && self.failures.len() == self.n_runs
    }
}

/// Runs `f(0..n)` on up to `workers` threads, returning results in index order.
pub fn run_pool<T, F>(n: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = f(i);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|v| v.expect("every job ran"))
        .collect()
}

fn run_id(bench: &str, acq: &str, seed: u64) -> String {
    format!("{bench}-{acq}-s{seed}")
}

/// Runs a validated experiment in memory.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut out = ExperimentOutput {
        mode: Some(cfg.mode),
        timing: cfg.timing,
        ..ExperimentOutput::default()
    };
    match cfg.mode {
        Mode::SpectrumCheck => out.spectrum = spectrum_table(cfg)?,
        Mode::InnerCompare => run_inner_compare(cfg, opts, &mut out)?,
        Mode::Outer | Mode::AtsSweep | Mode::SetSizeStudy => run_outer(cfg, opts, &mut out)?,
    }
    Ok(out)
}

fn seeds(cfg: &ExperimentConfig, opts: &RunOptions) -> Vec<u64> {
    cfg.seeds.iter().map(|s| s.wrapping_add(opts.seed_offset)).collect()
}

fn run_outer(cfg: &ExperimentConfig, opts: &RunOptions, out: &mut ExperimentOutput) -> Result<()> {
    let bench = cfg.benchmark()?;
    let methods = cfg.methods()?;
    let seeds = seeds(cfg, opts);
    let jobs: Vec<(Method, u64)> = methods.iter().flat_map(|m| seeds.iter().map(move |s| (*m, *s))).collect();
    let results = run_pool(jobs.len(), opts.workers, |i| {
        let (m, seed) = jobs[i];
        let spec = match m {
            Method::Bo(s) => s,
            Method::RandomSearch => AcquisitionSpec::TsRoots,
        };
        let bo = cfg.bo_config(spec, bench.dim())?;
        info!("{} seed {seed}", m.label());
        match m {
            Method::Bo(_) => run_bo(&bench, &bo, seed),
            Method::RandomSearch => run_random_search(&bench, &bo, seed),
        }
    });
    out.n_runs = jobs.len();
    for ((m, seed), r) in jobs.into_iter().zip(results) {
        let acq = m.label();
        let id = run_id(bench.name(), &acq, seed);
        match r {
            Ok(run) => {
                if let Some(reason) = &run.halted {
                    warn!("{id} halted: {reason}");
                    out.failures.push(Failure {
                        run_id: id.clone(),
                        seed,
                        acq: acq.clone(),
                        reason: format!("halted: {reason}"),
                    });
                }
                out.records.extend(run.records.into_iter().map(|record| RecordRow {
                    run_id: id.clone(),
                    seed,
                    acq: acq.clone(),
                    record,
                }));
            }
            Err(e) => {
                warn!("{id} failed: {e}");
                out.failures.push(Failure {
                    run_id: id,
                    seed,
                    acq,
                    reason: e.to_string(),
                });
            }
        }
    }
    Ok(())
}

/// Reference minimizer of a sample path from `n` uniform random starts.
pub fn reference_optimum<F>(f: F, d: usize, n: usize, seed: u64) -> Result<(Vec<f64>, f64)>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let starts = random_starts(n, d, seed)
        .into_iter()
        .enumerate()
        .map(|(i, x)| StartPoint {
            value: f64::NAN,
            x,
            source: StartSource::Random,
            rank: i + 1,
        })
        .collect();
    let r = multistart_minimize(f, starts, &BoxBounds::unit(d))?;
    Ok((r.x, r.value))
}

fn inner_seed(cfg: &ExperimentConfig, bench: &Benchmark, seed: u64) -> (Vec<InnerRow>, Option<String>) {
    let optimizers = match cfg.inner_optimizers() {
        Ok(o) => o,
        Err(e) => return (Vec::new(), Some(e.to_string())),
    };
    let label = optimizers.iter().map(|o| o.to_string()).collect::<Vec<_>>().join("+");
    let id = run_id(bench.name(), &label, seed);
    let bo = match cfg.bo_config(optimizers[0], bench.dim()) {
        Ok(b) => b,
        Err(e) => return (Vec::new(), Some(e.to_string())),
    };
    let mut state = match BoState::new(bench, bo.clone(), seed) {
        Ok(s) => s,
        Err(e) => return (Vec::new(), Some(e.to_string())),
    };
    let mut rows = Vec::new();
    let mut halted = None;
    for _ in 0..cfg.budget {
        let iter = state.iteration() + 1;
        let step = state.step_with(&mut halted, |model, _z_best, s| {
            let sample = draw_acquisition_sample(model, &AcquisitionSpec::TsRoots, &bo.ts, s)?;
            // Baselines get the start count TS-roots realized on this sample.
            let roots = if optimizers.contains(&AcquisitionSpec::TsRoots) {
                Some(optimize_sample(&sample, model, &AcquisitionSpec::TsRoots, &bo.ts, 0, s)?)
            } else {
                None
            };
            let budget = roots.as_ref().map_or(bo.start_budget(), |r| r.n_starts());
            let mut results = Vec::with_capacity(optimizers.len());
            for o in &optimizers {
                let r = match (o, &roots) {
                    (AcquisitionSpec::TsRoots, Some(r)) => r.clone(),
                    _ => optimize_sample(&sample, model, o, &bo.ts, budget, s)?,
                };
                if r.n_starts() != budget {
                    return Err(Error::InvalidArgument(format!("{o} used {} starts, expected {budget}", r.n_starts())));
                }
                results.push(r);
            }
            let reference = if model.dim() <= 2 && cfg.inner.reference_starts > 0 {
                Some(reference_optimum(|x, g| sample.value_and_grad(x, g), model.dim(), cfg.inner.reference_starts, s ^ 0x5245_4600)?)
            } else {
                None
            };
            for (o, r) in optimizers.iter().zip(&results) {
                rows.push(InnerRow {
                    run_id: id.clone(),
                    seed,
                    iter,
                    optimizer: o.to_string(),
                    alpha_star: r.value,
                    n_starts: r.n_starts(),
                    win_idx: r.win_overall,
                    win_src: r.win_source,
                    elapsed: r.elapsed,
                    ref_alpha: reference.as_ref().map(|(_, v)| *v),
                    dist_ref: reference.as_ref().map(|(x, _)| {
                        x.iter().zip(&r.x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
                    }),
                });
            }
            let inner = results.swap_remove(0);
            Ok(Proposal {
                x: inner.x.clone(),
                value: inner.value,
                inner,
            })
        });
        match step {
            Ok(Some(_)) => {}
            Ok(None) => break,
            Err(e) => return (rows, Some(e.to_string())),
        }
    }
    (rows, halted.map(|h| format!("halted: {h}")))
}

fn run_inner_compare(cfg: &ExperimentConfig, opts: &RunOptions, out: &mut ExperimentOutput) -> Result<()> {
    let bench = cfg.benchmark()?;
    let seeds = seeds(cfg, opts);
    let results = run_pool(seeds.len(), opts.workers, |i| inner_seed(cfg, &bench, seeds[i]));
    out.n_runs = seeds.len();
    for (seed, (rows, fail)) in seeds.into_iter().zip(results) {
        if let Some(reason) = fail {
            out.failures.push(Failure {
                run_id: run_id(bench.name(), "inner_compare", seed),
                seed,
                acq: "inner_compare".into(),
                reason,
            });
        }
        out.inner.extend(rows);
    }
    Ok(())
}

/// Sup-norm kernel reconstruction errors on a `[-1, 1]^2` grid, Mercer
/// truncations first, then random Fourier features.
pub fn spectrum_table(cfg: &ExperimentConfig) -> Result<Vec<SpectrumRow>> {
    let s = &cfg.spectrum;
    let m = s.grid_points;
    let grid: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect();
    let full = se_spectrum(s.length_scale, 1.0, cfg.eta)?;
    let mut rows = Vec::new();
    let mut ns = s.n_terms.clone();
    if ns.is_empty() {
        ns.push(full.n_terms());
    }
    for n in ns {
        rows.push(SpectrumRow {
            method: "mercer",
            n,
            sup_err: kernel_reconstruction_error(&full.with_terms(n), &grid)?,
        });
    }
    for &n in &s.rff_features {
        rows.push(SpectrumRow {
            method: "rff",
            n,
            sup_err: rff_kernel_reconstruction_error(s.length_scale, n, s.rff_seed, &grid)?,
        });
    }
    Ok(rows)
}
