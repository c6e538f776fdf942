//! Sequential optimization on `[-1, 1]^d` with z-scored outputs.

mod acquisition;

pub use acquisition::{
    acquire, baseline_starts, draw_acquisition_sample, grid_points, lcb, neg_ei, optimize_sample, random_starts,
    AcquisitionSpec, Proposal, DEFAULT_LCB_BETA, DEFAULT_RFF_FEATURES,
};

use std::time::Duration;

use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::benchmarks::Benchmark;
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparameters, Dataset, GpModel, HyperBounds, HyperOptions, SeparableSEKernel, DEFAULT_NOISE_SD};
use crate::optimize::BoxBounds;
use crate::tsroots::{StartSource, TsRootsConfig};

/// Latin-hypercube design on `[-1, 1]^d`: each of the `n` strata of every
/// axis holds exactly one point.
pub fn lhs_design(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for j in 0..d {
        perm.shuffle(&mut rng);
        for (i, p) in pts.iter_mut().enumerate() {
            let u: f64 = rng.random();
            p[j] = (-1.0 + 2.0 * (perm[i] as f64 + u) / n as f64).min(1.0);
        }
    }
    pts
}

/// z-score parameters (sample standard deviation).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardization {
    pub mean: f64,
    pub sd: f64,
}

impl Standardization {
    pub fn fit(y: &[f64]) -> Self {
        let n = y.len();
        if n == 0 {
            return Self { mean: 0.0, sd: 1.0 };
        }
        let mean = y.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        let sd = if sd > 0.0 && sd.is_finite() { sd } else { 1.0 };
        Self { mean, sd }
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.mean) / self.sd).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| v * self.sd + self.mean).collect()
    }
}

pub fn standardize(y: &[f64]) -> (Vec<f64>, Standardization) {
    let s = Standardization::fit(y);
    (s.apply(y), s)
}

pub fn destandardize(z: &[f64], s: &Standardization) -> Vec<f64> {
    s.invert(z)
}

/// Something to minimize over a raw box.
pub trait Objective {
    fn bounds(&self) -> BoxBounds;
    fn eval(&self, x: &[f64]) -> Result<f64>;
    fn f_star(&self) -> Option<f64> {
        None
    }
    fn x_star(&self) -> Option<&[f64]> {
        None
    }
}

impl Objective for Benchmark {
    fn bounds(&self) -> BoxBounds {
        Benchmark::bounds(self)
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        Benchmark::eval(self, x)
    }
    fn f_star(&self) -> Option<f64> {
        Some(Benchmark::f_star(self))
    }
    fn x_star(&self) -> Option<&[f64]> {
        Benchmark::x_star(self)
    }
}

/// A closure objective with optional known optimum.
pub struct FnObjective<F> {
    pub bounds: BoxBounds,
    pub f: F,
    pub f_star: Option<f64>,
    pub x_star: Option<Vec<f64>>,
}

impl<F: Fn(&[f64]) -> f64> Objective for FnObjective<F> {
    fn bounds(&self) -> BoxBounds {
        self.bounds.clone()
    }
    fn eval(&self, x: &[f64]) -> Result<f64> {
        self.bounds.check(x)?;
        let v = (self.f)(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Objective(format!("non-finite value at {x:?}")))
        }
    }
    fn f_star(&self) -> Option<f64> {
        self.f_star
    }
    fn x_star(&self) -> Option<&[f64]> {
        self.x_star.as_deref()
    }
}

fn to_raw(b: &BoxBounds, u: &[f64]) -> Vec<f64> {
    u.iter()
        .zip(b.lo().iter().zip(b.hi()))
        .map(|(u, (lo, hi))| (lo + 0.5 * (u + 1.0) * (hi - lo)).clamp(*lo, *hi))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoConfig {
    pub acquisition: AcquisitionSpec,
    pub budget: usize,
    /// Initial design size; `None` means `10 d`.
    pub n_init: Option<usize>,
    pub ts: TsRootsConfig,
    pub noise_sd: f64,
    /// Kernel used before the first refit, and throughout when `refit_every == 0`.
    pub kernel: Option<SeparableSEKernel>,
    /// Refit hyperparameters every this many iterations; 0 disables refits.
    pub refit_every: usize,
    pub hyper_bounds: HyperBounds,
    /// Starts for the first fit; later fits use the previous optimum plus `warm_starts - 1`.
    pub hyper_starts: usize,
    pub warm_starts: usize,
    /// Start budget for baselines that do not build their own start sets.
    /// `None` uses `n_explore + n_exploit`.
    pub n_starts: Option<usize>,
}

impl Default for BoConfig {
    fn default() -> Self {
        Self {
            acquisition: AcquisitionSpec::TsRoots,
            budget: 50,
            n_init: None,
            ts: TsRootsConfig::default(),
            noise_sd: DEFAULT_NOISE_SD,
            kernel: None,
            refit_every: 1,
            hyper_bounds: HyperBounds::default(),
            hyper_starts: 5,
            warm_starts: 2,
            n_starts: None,
        }
    }
}

impl BoConfig {
    pub fn start_budget(&self) -> usize {
        self.n_starts.unwrap_or(self.ts.n_explore + self.ts.n_exploit).max(1)
    }
}

/// One outer-loop iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    /// 1-based.
    pub iter: usize,
    /// Evaluated point, raw units.
    pub x: Vec<f64>,
    pub y: f64,
    pub y_min: f64,
    pub x_min: Vec<f64>,
    /// `log10(y_min - f*)` when `f*` is known.
    pub log_err: Option<f64>,
    /// `log10 ||x_min - x*||` (raw units) when `x*` is known.
    pub log_dist: Option<f64>,
    /// Optimized acquisition value, standardized units.
    pub alpha_star: f64,
    pub n_starts: usize,
    pub win_idx: Option<usize>,
    pub win_src: Option<StartSource>,
    /// Best explore / exploit rank reaching the chosen optimum.
    pub win_explore: Option<usize>,
    pub win_exploit: Option<usize>,
    /// Cumulative acquisition-optimization time.
    pub t_cum: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoRun {
    pub initial_x: Vec<Vec<f64>>,
    pub initial_y: Vec<f64>,
    pub records: Vec<IterationRecord>,
    /// Reason the loop stopped early, if it did.
    pub halted: Option<String>,
    pub kernel: Option<SeparableSEKernel>,
}

impl BoRun {
    pub fn initial_y_min(&self) -> f64 {
        self.initial_y.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Log of the simple regret with a floor, so exact hits stay finite.
pub fn log_regret(y_min: f64, f_star: f64) -> f64 {
    (y_min - f_star).abs().max(1e-300).log10()
}

fn log_distance(x: &[f64], x_star: &[f64]) -> f64 {
    let d2: f64 = x.iter().zip(x_star).map(|(a, b)| (a - b).powi(2)).sum();
    d2.sqrt().max(1e-300).log10()
}

/// Outer-loop state: normalized dataset, best-so-far and RNG stream.
pub struct BoState<'a, O: Objective + ?Sized> {
    objective: &'a O,
    raw_bounds: BoxBounds,
    cfg: BoConfig,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    best: usize,
    kernel: SeparableSEKernel,
    fitted: bool,
    rng: ChaCha8Rng,
    iter: usize,
    t_cum: Duration,
}

impl<'a, O: Objective + ?Sized> BoState<'a, O> {
    /// Evaluates the initial LHS design.
    pub fn new(objective: &'a O, cfg: BoConfig, seed: u64) -> Result<Self> {
        cfg.acquisition.validate()?;
        let raw_bounds = objective.bounds();
        let d = raw_bounds.dim();
        let n0 = cfg.n_init.unwrap_or(10 * d).max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = lhs_design(n0, d, rng.next_u64());
        let mut y = Vec::with_capacity(n0);
        for u in &x {
            y.push(objective.eval(&to_raw(&raw_bounds, u))?);
        }
        let best = argmin(&y);
        let kernel = match &cfg.kernel {
            Some(k) => k.clone(),
            None => SeparableSEKernel::isotropic(1.0, 0.5, d)?,
        };
        Ok(Self {
            objective,
            raw_bounds,
            cfg,
            x,
            y,
            best,
            kernel,
            fitted: false,
            rng,
            iter: 0,
            t_cum: Duration::ZERO,
        })
    }

    pub fn iteration(&self) -> usize {
        self.iter
    }
    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn y_min(&self) -> f64 {
        self.y[self.best]
    }
    pub fn x_min_raw(&self) -> Vec<f64> {
        to_raw(&self.raw_bounds, &self.x[self.best])
    }
    pub fn kernel(&self) -> &SeparableSEKernel {
        &self.kernel
    }

    /// The standardized surrogate for the current data.
    pub fn model(&mut self, seed: u64) -> Result<GpModel> {
        let (z, _) = standardize(&self.y);
        let data = Dataset::new(self.x.clone(), z, self.cfg.noise_sd)?;
        let due = self.cfg.refit_every > 0 && self.iter.is_multiple_of(self.cfg.refit_every) && data.n() >= 2;
        if due {
            let (warm, n_starts) = if self.fitted {
                (Some((&self.kernel, self.cfg.noise_sd)), self.cfg.warm_starts)
            } else {
                (None, self.cfg.hyper_starts)
            };
            let opts = HyperOptions {
                n_starts: n_starts.max(1),
                seed,
                ..HyperOptions::default()
            };
            let fit = fit_hyperparameters(&data, &self.cfg.hyper_bounds, &opts, warm)?;
            debug!("iter {}: l = {:?}, s2 = {}", self.iter, fit.kernel.length_scales(), fit.kernel.signal_var());
            self.kernel = fit.kernel;
            self.fitted = true;
        }
        GpModel::new(self.kernel.clone(), data)
    }

    /// Runs one iteration. `Ok(None)` means the objective failed and the
    /// loop should halt; the reason is returned through `halted`.
    pub fn step(&mut self, halted: &mut Option<String>) -> Result<Option<IterationRecord>> {
        let spec = self.cfg.acquisition;
        let ts = self.cfg.ts;
        let n = self.cfg.start_budget();
        self.step_with(halted, |model, z_best, seed| acquire(model, &spec, &ts, n, z_best, seed))
    }

    /// Like [`BoState::step`] with a custom proposal rule. The closure gets
    /// the standardized model, the best standardized value and the
    /// iteration seed.
    pub fn step_with<P>(&mut self, halted: &mut Option<String>, propose: P) -> Result<Option<IterationRecord>>
    where
        P: FnOnce(&GpModel, f64, u64) -> Result<Proposal>,
    {
        let seed = self.rng.next_u64();
        let model = self.model(seed)?;
        let z_best = model.data().y()[self.best];
        let prop = propose(&model, z_best, seed)?;
        self.t_cum += prop.inner.elapsed;
        let mut u = prop.x.clone();
        if model.data().contains_close(&u, 1e-12) {
            warn!("proposal duplicates an observation; drawing a random point instead");
            u = (0..u.len()).map(|_| self.rng.random_range(-1.0..=1.0)).collect();
        }
        let xr = to_raw(&self.raw_bounds, &u);
        let y = match self.objective.eval(&xr) {
            Ok(v) if v.is_finite() => v,
            Ok(v) => {
                *halted = Some(format!("objective returned {v} at {xr:?}"));
                return Ok(None);
            }
            Err(e) => {
                *halted = Some(e.to_string());
                return Ok(None);
            }
        };
        self.iter += 1;
        self.x.push(u);
        self.y.push(y);
        if y < self.y[self.best] {
            self.best = self.y.len() - 1;
        }
        let mut r = self.record(xr, y, prop.value, prop.inner.n_starts(), Some(prop.inner.win_overall), Some(prop.inner.win_source));
        r.win_explore = prop.inner.win_explore;
        r.win_exploit = prop.inner.win_exploit;
        Ok(Some(r))
    }

    fn record(
        &self,
        x: Vec<f64>,
        y: f64,
        alpha_star: f64,
        n_starts: usize,
        win_idx: Option<usize>,
        win_src: Option<StartSource>,
    ) -> IterationRecord {
        let x_min = self.x_min_raw();
        let y_min = self.y_min();
        IterationRecord {
            iter: self.iter,
            x,
            y,
            y_min,
            log_err: self.objective.f_star().map(|f| log_regret(y_min, f)),
            log_dist: self.objective.x_star().map(|xs| log_distance(&x_min, xs)),
            x_min,
            alpha_star,
            n_starts,
            win_idx,
            win_src,
            win_explore: None,
            win_exploit: None,
            t_cum: self.t_cum,
        }
    }

    fn finish(self, records: Vec<IterationRecord>, halted: Option<String>) -> BoRun {
        let n0 = self.x.len() - records.len();
        BoRun {
            initial_x: self.x[..n0].iter().map(|u| to_raw(&self.raw_bounds, u)).collect(),
            initial_y: self.y[..n0].to_vec(),
            records,
            halted,
            kernel: Some(self.kernel),
        }
    }
}

fn argmin(y: &[f64]) -> usize {
    let mut b = 0;
    for (i, v) in y.iter().enumerate() {
        if *v < y[b] {
            b = i;
        }
    }
    b
}

/// Runs `cfg.budget` iterations after an initial LHS design.
/// Deterministic for a given seed.
pub fn run_bo<O: Objective + ?Sized>(objective: &O, cfg: &BoConfig, seed: u64) -> Result<BoRun> {
    let mut state = BoState::new(objective, cfg.clone(), seed)?;
    let mut records = Vec::with_capacity(cfg.budget);
    let mut halted = None;
    for _ in 0..cfg.budget {
        match state.step(&mut halted)? {
            Some(r) => records.push(r),
            None => break,
        }
    }
    Ok(state.finish(records, halted))
}

/// Pure random search sharing the initial design of [`run_bo`].
pub fn run_random_search<O: Objective + ?Sized>(objective: &O, cfg: &BoConfig, seed: u64) -> Result<BoRun> {
    let mut state = BoState::new(objective, cfg.clone(), seed)?;
    let mut rs = ChaCha8Rng::seed_from_u64(state.rng.next_u64());
    let d = state.raw_bounds.dim();
    let mut records = Vec::with_capacity(cfg.budget);
    let mut halted = None;
    for _ in 0..cfg.budget {
        let u: Vec<f64> = (0..d).map(|_| rs.random_range(-1.0..=1.0)).collect();
        let xr = to_raw(&state.raw_bounds, &u);
        let y = match objective.eval(&xr) {
            Ok(v) => v,
            Err(e) => {
                halted = Some(e.to_string());
                break;
            }
        };
        state.iter += 1;
        state.x.push(u);
        state.y.push(y);
        if y < state.y[state.best] {
            state.best = state.y.len() - 1;
        }
        records.push(state.record(xr, y, f64::NAN, 0, None, None));
    }
    let mut run = state.finish(records, halted);
    run.kernel = None;
    Ok(run)
}
