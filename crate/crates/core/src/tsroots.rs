//! Minimizing a posterior sample path from two start sets: the smallest
//! local minima of its separable prior draw (exploration) and the observed
//! locations with the smallest sample values (exploitation).

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::gp::{Dataset, GpModel, PosteriorSample, SampleOptions};
use crate::optimize::{local_minimize, BoxBounds, LocalOptimum};
use crate::separable_extrema::{minsort, SeparableComponent, DEFAULT_ALPHA};

const DUPLICATE_START_TOL: f64 = 1e-10;
const SAME_OPTIMUM_TOL: f64 = 1e-6;
const PREFILTER_THRESHOLD: usize = 200;

/// Start-set sizes and prior-minima buffer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsRootsConfig {
    /// Number of prior-sample minima ranked by `minsort`.
    pub n_candidates: usize,
    pub n_explore: usize,
    pub n_exploit: usize,
    pub alpha: f64,
    pub sample: SampleOptions,
}

impl Default for TsRootsConfig {
    fn default() -> Self {
        Self {
            n_candidates: 500,
            n_explore: 250,
            n_exploit: 200,
            alpha: DEFAULT_ALPHA,
            sample: SampleOptions::default(),
        }
    }
}

impl TsRootsConfig {
    /// Smaller start sets (25 explore, 50 exploit).
    pub fn fast() -> Self {
        Self {
            n_explore: 25,
            n_exploit: 50,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StartSource {
    Explore,
    Exploit,
    Random,
}

impl StartSource {
    pub fn as_str(self) -> &'static str {
        match self {
            StartSource::Explore => "explore",
            StartSource::Exploit => "exploit",
            StartSource::Random => "random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartPoint {
    pub x: Vec<f64>,
    /// Posterior-sample value at `x`.
    pub value: f64,
    pub source: StartSource,
    /// 1-based position within its own set.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StartPointSet {
    pub explore: Vec<StartPoint>,
    pub exploit: Vec<StartPoint>,
}

impl StartPointSet {
    /// Both sets merged in ascending sample value, duplicates removed.
    pub fn merged(&self) -> Vec<StartPoint> {
        let mut all: Vec<StartPoint> = self.explore.iter().chain(&self.exploit).cloned().collect();
        all.sort_by(|a, b| a.value.total_cmp(&b.value).then_with(|| lex(&a.x, &b.x)));
        let mut out: Vec<StartPoint> = Vec::with_capacity(all.len());
        for p in all {
            if !out.iter().any(|q| close(&q.x, &p.x, DUPLICATE_START_TOL)) {
                out.push(p);
            }
        }
        out
    }
}

fn lex(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Univariate factors of the separable prior, fitted on each box side.
pub fn prior_components(sample: &PosteriorSample, bounds: &BoxBounds) -> Result<Vec<SeparableComponent>> {
    let prior = sample.prior().as_separable().ok_or_else(|| {
        Error::InvalidArgument("rootfinding starts need a separable prior draw".into())
    })?;
    (0..prior.dim())
        .map(|i| SeparableComponent::fit(|t| prior.eval_component(i, t), bounds.lo()[i], bounds.hi()[i]))
        .collect()
}

/// Exploration and exploitation start points for one sample path.
pub fn build_start_sets(
    sample: &PosteriorSample,
    data: &Dataset,
    bounds: &BoxBounds,
    cfg: &TsRootsConfig,
) -> Result<StartPointSet> {
    if cfg.n_candidates == 0 || cfg.n_explore == 0 || cfg.n_exploit == 0 {
        return Err(Error::InvalidArgument("start-set sizes must be >= 1".into()));
    }
    let comps = prior_components(sample, bounds)?;
    let minima = minsort(&comps, cfg.n_candidates, cfg.alpha)?;
    let explore = smallest_by_sample(sample, minima.points, cfg.n_explore, StartSource::Explore);

    let mut observed: Vec<(f64, &Vec<f64>)> = data.y().iter().copied().zip(data.x()).collect();
    if observed.len() > PREFILTER_THRESHOLD {
        observed.sort_by(|a, b| a.0.total_cmp(&b.0));
        observed.truncate(4 * cfg.n_exploit);
    }
    let exploit = smallest_by_sample(
        sample,
        observed.into_iter().map(|(_, x)| x.clone()).collect(),
        cfg.n_exploit,
        StartSource::Exploit,
    );
    Ok(StartPointSet { explore, exploit })
}

fn smallest_by_sample(sample: &PosteriorSample, pts: Vec<Vec<f64>>, k: usize, source: StartSource) -> Vec<StartPoint> {
    let mut scored: Vec<(f64, Vec<f64>)> = pts.into_iter().map(|x| (sample.eval(&x), x)).collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| lex(&a.1, &b.1)));
    scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (value, x))| StartPoint {
            x,
            value,
            source,
            rank: i + 1,
        })
        .collect()
}

/// Outcome of one inner-loop optimization.
#[derive(Debug, Clone)]
pub struct InnerResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub starts: Vec<StartPoint>,
    pub outcomes: Vec<LocalOptimum>,
    /// 1-based position in `starts` of the first start reaching the optimum.
    pub win_overall: usize,
    pub win_source: StartSource,
    /// Smallest explore / exploit rank among starts reaching the optimum.
    pub win_explore: Option<usize>,
    pub win_exploit: Option<usize>,
    pub elapsed: Duration,
}

impl InnerResult {
    pub fn n_starts(&self) -> usize {
        self.starts.len()
    }
}

/// Multistart descent of `f` from `starts` (already ordered). Converged
/// optima are preferred; errors only when every start aborted.
pub fn multistart_minimize<F>(f: F, starts: Vec<StartPoint>, bounds: &BoxBounds) -> Result<InnerResult>
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    let t0 = Instant::now();
    let outcomes: Vec<LocalOptimum> = starts.iter().map(|s| local_minimize(&f, &s.x, bounds)).collect();
    let pick = |need_converged: bool| {
        outcomes
            .iter()
            .enumerate()
            .filter(|(_, o)| !o.aborted && (o.converged || !need_converged) && o.value.is_finite())
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then_with(|| lex(&a.1.x, &b.1.x)))
            .map(|(i, _)| i)
    };
    let best = pick(true).or_else(|| pick(false)).ok_or(Error::NoConvergedStart)?;
    let xb = outcomes[best].x.clone();
    let reached: Vec<usize> = (0..starts.len())
        .filter(|&i| !outcomes[i].aborted && close(&outcomes[i].x, &xb, SAME_OPTIMUM_TOL))
        .collect();
    let first = reached.iter().copied().min().unwrap_or(best);
    let rank_of = |src: StartSource| {
        reached
            .iter()
            .filter(|&&i| starts[i].source == src)
            .map(|&i| starts[i].rank)
            .min()
    };
    Ok(InnerResult {
        x: xb,
        value: outcomes[best].value,
        win_overall: first + 1,
        win_source: starts[first].source,
        win_explore: rank_of(StartSource::Explore),
        win_exploit: rank_of(StartSource::Exploit),
        starts,
        outcomes,
        elapsed: t0.elapsed(),
    })
}

/// Minimizes an existing sample path from the rootfinding start sets.
pub fn minimize_sample(
    sample: &PosteriorSample,
    data: &Dataset,
    bounds: &BoxBounds,
    cfg: &TsRootsConfig,
) -> Result<InnerResult> {
    let t0 = Instant::now();
    let sets = build_start_sets(sample, data, bounds, cfg)?;
    let mut r = multistart_minimize(|x, g| sample.value_and_grad(x, g), sets.merged(), bounds)?;
    r.elapsed = t0.elapsed();
    Ok(r)
}

/// Draws a posterior sample and returns its minimizer over `[-1, 1]^d`.
pub fn ts_roots(model: &GpModel, cfg: &TsRootsConfig, seed: u64) -> Result<(PosteriorSample, InnerResult)> {
    let sample = model.draw_sample(seed, &cfg.sample)?;
    let bounds = BoxBounds::unit(model.dim());
    let r = minimize_sample(&sample, model.data(), &bounds, cfg)?;
    Ok((sample, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chebapprox::fit;
    use crate::gp::SeparableSEKernel;

    fn toy(n: usize, l: f64) -> GpModel {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![-0.9 + 1.8 * i as f64 / (n - 1) as f64]).collect();
        let y = x.iter().map(|v| (4.0 * v[0]).sin() + 0.3 * v[0]).collect();
        let data = Dataset::new(x, y, 1e-6).unwrap();
        GpModel::new(SeparableSEKernel::isotropic(1.0, l, 1).unwrap(), data).unwrap()
    }

    #[test]
    fn matches_dense_grid_in_one_dimension() {
        let m = toy(6, 0.4);
        for seed in 0..5 {
            let (s, r) = ts_roots(&m, &TsRootsConfig::default(), seed).unwrap();
            let b = BoxBounds::unit(1);
            let grid_best = (0..=10_000)
                .map(|i| -1.0 + 2.0 * i as f64 / 10_000.0)
                .min_by(|a, c| s.eval(&[*a]).total_cmp(&s.eval(&[*c])))
                .unwrap();
            let refined = local_minimize(|x, g| s.value_and_grad(x, g), &[grid_best], &b);
            assert!((r.x[0] - refined.x[0]).abs() < 1e-5, "seed {seed}: {} vs {}", r.x[0], refined.x[0]);
            assert!(r.value <= refined.value + 1e-10);
        }
    }

    #[test]
    fn optima_are_stationary_points_of_the_sample() {
        let m = toy(6, 0.3);
        let (s, r) = ts_roots(&m, &TsRootsConfig::default(), 3).unwrap();
        let deriv = fit(|t| s.grad(&[t])[0], -1.0, 1.0).unwrap();
        let crit = deriv.roots().unwrap();
        for o in r.outcomes.iter().filter(|o| o.converged) {
            let x = o.x[0];
            let at_edge = x == -1.0 || x == 1.0;
            assert!(at_edge || crit.iter().any(|c| (c - x).abs() < 1e-6), "{x}");
        }
    }

    #[test]
    fn descent_beats_every_start() {
        let m = toy(8, 0.3);
        let (_, r) = ts_roots(&m, &TsRootsConfig::fast(), 11).unwrap();
        let best_start = r.starts.iter().map(|s| s.value).fold(f64::INFINITY, f64::min);
        assert!(r.value <= best_start);
        assert!(r.win_overall >= 1 && r.win_overall <= r.n_starts());
    }

    #[test]
    fn minimal_start_sets() {
        let m = toy(6, 0.4);
        let cfg = TsRootsConfig {
            n_explore: 1,
            n_exploit: 1,
            ..TsRootsConfig::default()
        };
        let s = m.draw_sample(0, &cfg.sample).unwrap();
        let sets = build_start_sets(&s, m.data(), &BoxBounds::unit(1), &cfg).unwrap();
        assert_eq!(sets.explore.len(), 1);
        assert_eq!(sets.exploit.len(), 1);
    }

    #[test]
    fn no_data_uses_prior_minima_only() {
        let data = Dataset::empty(2, 1e-6).unwrap();
        let m = GpModel::new(SeparableSEKernel::isotropic(1.0, 0.5, 2).unwrap(), data).unwrap();
        let s = m.draw_sample(4, &SampleOptions::default()).unwrap();
        let b = BoxBounds::unit(2);
        let cfg = TsRootsConfig::default();
        let sets = build_start_sets(&s, m.data(), &b, &cfg).unwrap();
        assert!(sets.exploit.is_empty());
        assert!(!sets.explore.is_empty());
        let (_, r) = ts_roots(&m, &cfg, 4).unwrap();
        // The prior's best minimum is already a local minimum of the path.
        assert!((r.value - sets.explore[0].value).abs() < 1e-9 || r.value < sets.explore[0].value);
    }

    #[test]
    fn explore_set_is_sorted_prefix_of_candidates() {
        let m = toy(6, 0.25);
        let s = m.draw_sample(9, &SampleOptions::default()).unwrap();
        let b = BoxBounds::unit(1);
        let cfg = TsRootsConfig {
            n_explore: 3,
            ..TsRootsConfig::default()
        };
        let sets = build_start_sets(&s, m.data(), &b, &cfg).unwrap();
        let comps = prior_components(&s, &b).unwrap();
        let cands = minsort(&comps, cfg.n_candidates, cfg.alpha).unwrap();
        let mut vals: Vec<f64> = cands.points.iter().map(|p| s.eval(p)).collect();
        vals.sort_by(f64::total_cmp);
        let got: Vec<f64> = sets.explore.iter().map(|p| p.value).collect();
        assert_eq!(got, vals[..3.min(vals.len())].to_vec());
    }

    #[test]
    fn merged_starts_are_unique() {
        let p = |x: f64, v: f64, src, rank| StartPoint {
            x: vec![x],
            value: v,
            source: src,
            rank,
        };
        let sets = StartPointSet {
            explore: vec![p(0.1, -1.0, StartSource::Explore, 1), p(0.5, 0.0, StartSource::Explore, 2)],
            exploit: vec![p(0.1 + 1e-12, -1.0, StartSource::Exploit, 1)],
        };
        assert_eq!(sets.merged().len(), 2);
    }
}
