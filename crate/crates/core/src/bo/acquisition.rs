use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::lhs_design;
use crate::error::{Error, Result};
use crate::gp::{GpModel, PosteriorSample, PriorKind, SampleOptions};
use crate::optimize::BoxBounds;
use crate::tsroots::{minimize_sample, multistart_minimize, InnerResult, StartPoint, StartSource, TsRootsConfig};

/// Default feature count for random-Fourier-feature priors.
pub const DEFAULT_RFF_FEATURES: usize = 1000;
/// Default exploration weight for the lower confidence bound.
pub const DEFAULT_LCB_BETA: f64 = 2.0;

/// Acquisition strategies for the outer loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AcquisitionSpec {
    /// Thompson sampling, starts from prior minima and observed points.
    TsRoots,
    /// Thompson sampling, uniformly random starts.
    TsRandomMultistart,
    /// Thompson sampling, best points of a uniform grid as starts.
    TsGrid,
    /// Thompson sampling, Latin-hypercube starts.
    TsLhs,
    /// Thompson sampling with a random-Fourier-feature prior and random starts.
    TsRff { features: usize },
    /// Sample-average posterior over `n_c` notional draws.
    Ats { n_c: f64 },
    ExpectedImprovement,
    Lcb { beta: f64 },
}

impl AcquisitionSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AcquisitionSpec::TsRff { features: 0 } => {
                Err(Error::InvalidArgument("ts_rff needs at least one feature".into()))
            }
            AcquisitionSpec::Ats { n_c } if !(n_c >= 1.0 && n_c.is_finite()) => {
                Err(Error::InvalidArgument(format!("ats needs N_c >= 1, got {n_c}")))
            }
            AcquisitionSpec::Lcb { beta } if !(beta >= 0.0 && beta.is_finite()) => {
                Err(Error::InvalidArgument(format!("lcb needs beta >= 0, got {beta}")))
            }
            _ => Ok(()),
        }
    }

    /// Whether the kind draws a sample path (as opposed to EI/LCB).
    pub fn is_thompson(&self) -> bool {
        !matches!(self, AcquisitionSpec::ExpectedImprovement | AcquisitionSpec::Lcb { .. })
    }
}

impl fmt::Display for AcquisitionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AcquisitionSpec::TsRoots => write!(f, "ts_roots"),
            AcquisitionSpec::TsRandomMultistart => write!(f, "ts_random_multistart"),
            AcquisitionSpec::TsGrid => write!(f, "ts_grid"),
            AcquisitionSpec::TsLhs => write!(f, "ts_lhs"),
            AcquisitionSpec::TsRff { features } if *features == DEFAULT_RFF_FEATURES => write!(f, "ts_rff"),
            AcquisitionSpec::TsRff { features } => write!(f, "ts_rff:{features}"),
            AcquisitionSpec::Ats { n_c } => write!(f, "ats:{n_c}"),
            AcquisitionSpec::ExpectedImprovement => write!(f, "ei"),
            AcquisitionSpec::Lcb { beta } if *beta == DEFAULT_LCB_BETA => write!(f, "lcb"),
            AcquisitionSpec::Lcb { beta } => write!(f, "lcb:{beta}"),
        }
    }
}

impl FromStr for AcquisitionSpec {
    type Err = Error;

    /// Parses `ts_roots`, `ts_random_multistart`, `ts_grid`, `ts_lhs`,
    /// `ts_rff[:M]`, `ats:N_c`, `ei` and `lcb[:beta]`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let bad = || Error::InvalidArgument(format!("unknown acquisition `{s}`"));
        let num = |a: &str| a.parse::<f64>().map_err(|_| bad());
        let spec = match (head, arg) {
            ("ts_roots", None) => AcquisitionSpec::TsRoots,
            ("ts_random_multistart", None) => AcquisitionSpec::TsRandomMultistart,
            ("ts_grid", None) => AcquisitionSpec::TsGrid,
            ("ts_lhs", None) => AcquisitionSpec::TsLhs,
            ("ts_rff", None) => AcquisitionSpec::TsRff {
                features: DEFAULT_RFF_FEATURES,
            },
            ("ts_rff", Some(a)) => AcquisitionSpec::TsRff {
                features: a.parse().map_err(|_| bad())?,
            },
            ("ats", Some(a)) => AcquisitionSpec::Ats { n_c: num(a)? },
            ("ei", None) => AcquisitionSpec::ExpectedImprovement,
            ("lcb", None) => AcquisitionSpec::Lcb { beta: DEFAULT_LCB_BETA },
            ("lcb", Some(a)) => AcquisitionSpec::Lcb { beta: num(a)? },
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// The proposed point with inner-loop diagnostics.
#[derive(Debug, Clone)]
pub struct Proposal {
    /// Normalized coordinates in `[-1, 1]^d`.
    pub x: Vec<f64>,
    /// Optimized acquisition value (standardized units).
    pub value: f64,
    pub inner: InnerResult,
}

/// Uniform random start points.
pub fn random_starts(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect()
}

/// A tensor grid with `m = ceil(n^(1/d))` points per side (at least 2).
pub fn grid_points(n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut m = (n as f64).powf(1.0 / d as f64).round().max(2.0) as usize;
    while m.checked_pow(d as u32).is_some_and(|t| t < n) {
        m += 1;
    }
    let total = m.checked_pow(d as u32).unwrap_or(usize::MAX).min(1 << 22);
    let side: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect();
    (0..total)
        .map(|mut k| {
            (0..d)
                .map(|_| {
                    let v = side[k % m];
                    k /= m;
                    v
                })
                .collect()
        })
        .collect()
}

fn as_starts(points: Vec<Vec<f64>>, value: impl Fn(&[f64]) -> f64) -> Vec<StartPoint> {
    points
        .into_iter()
        .enumerate()
        .map(|(i, x)| StartPoint {
            value: value(&x),
            x,
            source: StartSource::Random,
            rank: i + 1,
        })
        .collect()
}

/// Start points for the non-rootfinding inner optimizers. The grid variant
/// keeps the `n` grid nodes with smallest sample value.
pub fn baseline_starts(kind: &AcquisitionSpec, sample: &PosteriorSample, n: usize, seed: u64) -> Vec<StartPoint> {
    let d = sample.dim();
    match kind {
        AcquisitionSpec::TsGrid => {
            let mut s = as_starts(grid_points(n, d), |x| sample.eval(x));
            s.sort_by(|a, b| a.value.total_cmp(&b.value));
            s.truncate(n);
            for (i, p) in s.iter_mut().enumerate() {
                p.rank = i + 1;
            }
            s
        }
        AcquisitionSpec::TsLhs => as_starts(lhs_design(n, d, seed), |x| sample.eval(x)),
        _ => as_starts(random_starts(n, d, seed), |x| sample.eval(x)),
    }
}

/// Draws the sample path that a Thompson-type acquisition optimizes.
pub fn draw_acquisition_sample(
    model: &GpModel,
    spec: &AcquisitionSpec,
    ts: &TsRootsConfig,
    seed: u64,
) -> Result<PosteriorSample> {
    match *spec {
        AcquisitionSpec::TsRff { features } => {
            let opts = SampleOptions {
                prior: PriorKind::Rff { features },
                ..ts.sample
            };
            model.draw_sample(seed, &opts)
        }
        AcquisitionSpec::Ats { n_c } => model.sample_average(n_c, seed, &ts.sample),
        AcquisitionSpec::ExpectedImprovement | AcquisitionSpec::Lcb { .. } => {
            Err(Error::InvalidArgument(format!("{spec} does not draw a sample path")))
        }
        _ => model.draw_sample(seed, &ts.sample),
    }
}

/// Minimizes an already drawn sample path with the inner optimizer of `spec`.
pub fn optimize_sample(
    sample: &PosteriorSample,
    model: &GpModel,
    spec: &AcquisitionSpec,
    ts: &TsRootsConfig,
    n_starts: usize,
    seed: u64,
) -> Result<InnerResult> {
    let bounds = BoxBounds::unit(model.dim());
    match spec {
        AcquisitionSpec::TsRoots | AcquisitionSpec::Ats { .. } => minimize_sample(sample, model.data(), &bounds, ts),
        _ => {
            let t0 = Instant::now();
            let starts = baseline_starts(spec, sample, n_starts.max(1), seed ^ 0x5354_4152_5453);
            let mut r = multistart_minimize(|x, g| sample.value_and_grad(x, g), starts, &bounds)?;
            r.elapsed = t0.elapsed();
            Ok(r)
        }
    }
}

/// Proposes the next normalized point.
///
/// `n_starts` is the start budget for optimizers that do not build their own
/// start sets (random, grid, LHS, EI, LCB).
pub fn acquire(
    model: &GpModel,
    spec: &AcquisitionSpec,
    ts: &TsRootsConfig,
    n_starts: usize,
    y_best: f64,
    seed: u64,
) -> Result<Proposal> {
    let bounds = BoxBounds::unit(model.dim());
    let inner = match *spec {
        AcquisitionSpec::ExpectedImprovement => {
            let t0 = Instant::now();
            let f = |x: &[f64], g: &mut [f64]| neg_ei(model, y_best, x, g);
            let starts = as_starts(random_starts(n_starts.max(1), model.dim(), seed), |x| {
                let mut g = vec![0.0; x.len()];
                f(x, &mut g)
            });
            let mut r = multistart_minimize(f, starts, &bounds)?;
            r.elapsed = t0.elapsed();
            r
        }
        AcquisitionSpec::Lcb { beta } => {
            let t0 = Instant::now();
            let f = |x: &[f64], g: &mut [f64]| lcb(model, beta, x, g);
            let starts = as_starts(random_starts(n_starts.max(1), model.dim(), seed), |x| {
                let mut g = vec![0.0; x.len()];
                f(x, &mut g)
            });
            let mut r = multistart_minimize(f, starts, &bounds)?;
            r.elapsed = t0.elapsed();
            r
        }
        _ => {
            let sample = draw_acquisition_sample(model, spec, ts, seed)?;
            optimize_sample(&sample, model, spec, ts, n_starts, seed)?
        }
    };
    Ok(Proposal {
        x: inner.x.clone(),
        value: inner.value,
        inner,
    })
}

const SD_FLOOR: f64 = 1e-12;

/// Negative expected improvement below `y_best` and its gradient.
pub fn neg_ei(model: &GpModel, y_best: f64, x: &[f64], grad: &mut [f64]) -> f64 {
    let d = x.len();
    let mut dm = vec![0.0; d];
    let mut dv = vec![0.0; d];
    let (mu, var) = model.mean_var_grad(x, &mut dm, &mut dv);
    let sd = var.sqrt();
    if sd < SD_FLOOR {
        let imp = (y_best - mu).max(0.0);
        for i in 0..d {
            grad[i] = if imp > 0.0 { dm[i] } else { 0.0 };
        }
        return -imp;
    }
    let n = Normal::standard();
    let z = (y_best - mu) / sd;
    let cdf = n.cdf(z);
    let pdf = n.pdf(z);
    let ei = (y_best - mu) * cdf + sd * pdf;
    for i in 0..d {
        let dsd = dv[i] / (2.0 * sd);
        // dEI/dmu = -Phi(z), dEI/dsd = phi(z).
        grad[i] = -(-cdf * dm[i] + pdf * dsd);
    }
    -ei
}

/// `mu(x) - beta sd(x)` and its gradient.
pub fn lcb(model: &GpModel, beta: f64, x: &[f64], grad: &mut [f64]) -> f64 {
    let d = x.len();
    let mut dm = vec![0.0; d];
    let mut dv = vec![0.0; d];
    let (mu, var) = model.mean_var_grad(x, &mut dm, &mut dv);
    let sd = var.sqrt().max(SD_FLOOR);
    for i in 0..d {
        grad[i] = dm[i] - beta * dv[i] / (2.0 * sd);
    }
    mu - beta * sd
}
