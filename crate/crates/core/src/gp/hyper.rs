//! Type-II maximum likelihood for the kernel hyperparameters.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Dataset, Factor, SeparableSEKernel};
use crate::error::{Error, Result};
use crate::optimize::{local_minimize_with, BoxBounds, LocalOptions};

/// Search box for the hyperparameters. Noise is held fixed at the
/// dataset's value unless `noise_sd` is given.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperBounds {
    pub length_scale: (f64, f64),
    pub signal_var: (f64, f64),
    pub noise_sd: Option<(f64, f64)>,
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self {
            length_scale: (0.03, 5.0),
            signal_var: (0.01, 100.0),
            noise_sd: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperOptions {
    /// Total starts, including the warm start when one is given.
    pub n_starts: usize,
    pub seed: u64,
    pub max_iter: usize,
}

impl Default for HyperOptions {
    fn default() -> Self {
        Self {
            n_starts: 5,
            seed: 0,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HyperFit {
    pub kernel: SeparableSEKernel,
    pub noise_sd: f64,
    pub log_marginal_likelihood: f64,
}

/// `log p(y | X)` under the kernel and the dataset's noise level.
pub fn log_marginal_likelihood(kernel: &SeparableSEKernel, data: &Dataset) -> Result<f64> {
    let f = Factor::new(kernel, data)?;
    let y = DVector::from_column_slice(data.y());
    let alpha = f.solve(&y);
    let n = data.n() as f64;
    Ok(-0.5 * y.dot(&alpha) - 0.5 * f.log_det() - 0.5 * n * (2.0 * std::f64::consts::PI).ln())
}

struct Problem<'a> {
    data: &'a Dataset,
    d: usize,
    free_noise: bool,
    sq_dist: Vec<DMatrix<f64>>,
    y: DVector<f64>,
}

impl<'a> Problem<'a> {
    fn new(data: &'a Dataset, free_noise: bool) -> Self {
        let d = data.dim();
        let n = data.n();
        let sq_dist = (0..d)
            .map(|k| {
                DMatrix::from_fn(n, n, |i, j| {
                    let r = data.x()[i][k] - data.x()[j][k];
                    r * r
                })
            })
            .collect();
        Self {
            data,
            d,
            free_noise,
            sq_dist,
            y: DVector::from_column_slice(data.y()),
        }
    }

    fn unpack(&self, theta: &[f64]) -> (Vec<f64>, f64, f64) {
        let ls = theta[..self.d].iter().map(|v| v.exp()).collect();
        let sv = theta[self.d].exp();
        let sn = if self.free_noise {
            theta[self.d + 1].exp()
        } else {
            self.data.noise_sd()
        };
        (ls, sv, sn)
    }

    /// Negative log marginal likelihood and its gradient in log-parameters.
    fn objective(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let (ls, sv, sn) = self.unpack(theta);
        let n = self.data.n();
        let mut k = DMatrix::from_element(n, n, 0.0);
        for i in 0..n {
            for j in 0..n {
                let s: f64 = (0..self.d).map(|q| self.sq_dist[q][(i, j)] / (ls[q] * ls[q])).sum();
                k[(i, j)] = sv * (-0.5 * s).exp();
            }
        }
        let mut c = k.clone();
        for i in 0..n {
            c[(i, i)] += sn * sn;
        }
        let Ok(f) = Factor::from_cov(c, sv) else {
            return f64::NAN;
        };
        let alpha = f.solve(&self.y);
        let nlml = 0.5 * self.y.dot(&alpha) + 0.5 * f.log_det() + 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        let w = &alpha * alpha.transpose() - f.inverse();
        // d(-lml)/d theta = -1/2 tr(W dC).
        for q in 0..self.d {
            let l2 = ls[q] * ls[q];
            let s: f64 = w
                .iter()
                .zip(k.iter())
                .zip(self.sq_dist[q].iter())
                .map(|((w, k), r)| w * k * r)
                .sum();
            grad[q] = -0.5 * s / l2;
        }
        grad[self.d] = -0.5 * w.iter().zip(k.iter()).map(|(w, k)| w * k).sum::<f64>();
        if self.free_noise {
            grad[self.d + 1] = -0.5 * 2.0 * sn * sn * w.trace();
        }
        nlml
    }
}

/// Maximizes the log marginal likelihood by multistart descent over
/// log-parameters. Deterministic for a given `opts.seed`.
pub fn fit_hyperparameters(
    data: &Dataset,
    bounds: &HyperBounds,
    opts: &HyperOptions,
    warm: Option<(&SeparableSEKernel, f64)>,
) -> Result<HyperFit> {
    if data.n() < 2 {
        return Err(Error::InvalidArgument("hyperparameter fitting needs n >= 2".into()));
    }
    let d = data.dim();
    let free_noise = bounds.noise_sd.is_some();
    let mut lo = vec![bounds.length_scale.0.ln(); d];
    let mut hi = vec![bounds.length_scale.1.ln(); d];
    lo.push(bounds.signal_var.0.ln());
    hi.push(bounds.signal_var.1.ln());
    if let Some((a, b)) = bounds.noise_sd {
        lo.push(a.ln());
        hi.push(b.ln());
    }
    let boxb = BoxBounds::new(lo.clone(), hi.clone())?;
    let problem = Problem::new(data, free_noise);

    let mut starts: Vec<Vec<f64>> = Vec::new();
    if let Some((k, sn)) = warm {
        let mut s: Vec<f64> = k.length_scales().iter().map(|l| l.ln()).collect();
        s.push(k.signal_var().ln());
        if free_noise {
            s.push(sn.max(1e-300).ln());
        }
        boxb.project(&mut s);
        starts.push(s);
    }
    let mut s0 = vec![0.5f64.ln(); d];
    s0.push(0.0);
    if free_noise {
        s0.push((0.1f64).ln());
    }
    boxb.project(&mut s0);
    starts.push(s0);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while starts.len() < opts.n_starts.max(1) {
        starts.push(lo.iter().zip(&hi).map(|(a, b)| rng.random_range(*a..*b)).collect());
    }
    starts.truncate(opts.n_starts.max(1));

    let lopts = LocalOptions {
        max_iter: opts.max_iter,
        grad_tol: 1e-6,
        ..LocalOptions::default()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for s in &starts {
        let r = local_minimize_with(|t, g| problem.objective(t, g), s, &boxb, &lopts);
        if r.value.is_finite() && best.as_ref().is_none_or(|b| r.value < b.0) {
            best = Some((r.value, r.x));
        }
    }
    let (nlml, theta) = match best {
        Some(b) => b,
        None => {
            warn!("every hyperparameter start failed; keeping the first start");
            (f64::INFINITY, starts[0].clone())
        }
    };
    let (ls, sv, sn) = problem.unpack(&theta);
    Ok(HyperFit {
        kernel: SeparableSEKernel::new(sv, ls)?,
        noise_sd: sn,
        log_marginal_likelihood: -nlml,
    })
}
