//! Gaussian-process regression with a separable squared-exponential kernel.

mod hyper;
mod sample;

pub use hyper::{fit_hyperparameters, log_marginal_likelihood, HyperBounds, HyperFit, HyperOptions};
pub use sample::{
    draw_posterior_sample, sample_average_ats, PosteriorSample, PriorDraw, PriorKind, SampleOptions,
};

use log::debug;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Observation noise standard deviation used unless configured otherwise.
pub const DEFAULT_NOISE_SD: f64 = 1e-6;

const DUPLICATE_TOL: f64 = 1e-12;

/// Observations on the normalized domain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    dim: usize,
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    noise_sd: f64,
}

impl Dataset {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<f64>, noise_sd: f64) -> Result<Self> {
        let dim = x.first().map(Vec::len).ok_or_else(|| {
            Error::InvalidArgument("use Dataset::empty for a dataset without points".into())
        })?;
        let mut out = Self::empty(dim, noise_sd)?;
        if x.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} inputs but {} observations",
                x.len(),
                y.len()
            )));
        }
        for (xi, yi) in x.into_iter().zip(y) {
            out.push(xi, yi)?;
        }
        Ok(out)
    }

    pub fn empty(dim: usize, noise_sd: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be >= 1".into()));
        }
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sd must be >= 0, got {noise_sd}")));
        }
        Ok(Self {
            dim,
            x: Vec::new(),
            y: Vec::new(),
            noise_sd,
        })
    }

    /// Appends one observation. Rejects non-finite values and inputs that
    /// duplicate an existing row.
    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "input has dimension {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        if !y.is_finite() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("observations must be finite".into()));
        }
        if self.contains_close(&x, DUPLICATE_TOL) {
            return Err(Error::InvalidArgument("duplicate input location".into()));
        }
        self.x.push(x);
        self.y.push(y);
        Ok(())
    }

    pub fn contains_close(&self, x: &[f64], tol: f64) -> bool {
        self.x
            .iter()
            .any(|r| r.iter().zip(x).all(|(a, b)| (a - b).abs() <= tol))
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }
    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }
    pub fn noise_sd(&self) -> f64 {
        self.noise_sd
    }

    pub fn with_y(&self, y: Vec<f64>) -> Result<Self> {
        Dataset::new(self.x.clone(), y, self.noise_sd)
    }

    pub fn with_noise_sd(&self, noise_sd: f64) -> Self {
        Self {
            noise_sd,
            ..self.clone()
        }
    }
}

/// `k(x, x') = sigma_f^2 prod_i exp(-(x_i - x'_i)^2 / (2 l_i^2))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableSEKernel {
    signal_var: f64,
    length_scales: Vec<f64>,
}

impl SeparableSEKernel {
    pub fn new(signal_var: f64, length_scales: Vec<f64>) -> Result<Self> {
        if !(signal_var > 0.0 && signal_var.is_finite()) {
            return Err(Error::InvalidArgument(format!("signal variance must be positive, got {signal_var}")));
        }
        if length_scales.is_empty() || length_scales.iter().any(|l| !(*l > 0.0 && l.is_finite())) {
            return Err(Error::InvalidArgument("length scales must be positive".into()));
        }
        Ok(Self {
            signal_var,
            length_scales,
        })
    }

    pub fn isotropic(signal_var: f64, l: f64, d: usize) -> Result<Self> {
        Self::new(signal_var, vec![l; d])
    }

    pub fn dim(&self) -> usize {
        self.length_scales.len()
    }
    pub fn signal_var(&self) -> f64 {
        self.signal_var
    }
    pub fn signal_sd(&self) -> f64 {
        self.signal_var.sqrt()
    }
    pub fn length_scales(&self) -> &[f64] {
        &self.length_scales
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut s = 0.0;
        for ((a, b), l) in x.iter().zip(y).zip(&self.length_scales) {
            let r = (a - b) / l;
            s += r * r;
        }
        self.signal_var * (-0.5 * s).exp()
    }

    /// Adds `w * d k(x, y) / dx` to `grad` and returns `k(x, y)`.
    pub fn accumulate_grad(&self, x: &[f64], y: &[f64], w: f64, grad: &mut [f64]) -> f64 {
        let k = self.eval(x, y);
        let wk = w * k;
        for i in 0..x.len() {
            let l = self.length_scales[i];
            grad[i] -= wk * (x[i] - y[i]) / (l * l);
        }
        k
    }

    pub fn gram(&self, x: &[Vec<f64>]) -> DMatrix<f64> {
        let n = x.len();
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.signal_var;
            for j in 0..i {
                let v = self.eval(&x[i], &x[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    pub fn cross(&self, a: &[Vec<f64>], b: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(a.len(), b.len(), |i, j| self.eval(&a[i], &b[j]))
    }
}

/// Jittered Cholesky factor of `K + sigma_n^2 I`.
#[derive(Debug, Clone)]
pub(crate) struct Factor {
    chol: Cholesky<f64, Dyn>,
    cov: DMatrix<f64>,
    pub(crate) jitter: f64,
}

impl Factor {
    pub(crate) fn new(kernel: &SeparableSEKernel, data: &Dataset) -> Result<Self> {
        let mut cov = kernel.gram(data.x());
        let nv = data.noise_sd() * data.noise_sd();
        for i in 0..data.n() {
            cov[(i, i)] += nv;
        }
        Self::from_cov(cov, kernel.signal_var())
    }

    pub(crate) fn from_cov(cov: DMatrix<f64>, scale: f64) -> Result<Self> {
        if let Some(chol) = Cholesky::new(cov.clone()) {
            return Ok(Self { chol, cov, jitter: 0.0 });
        }
        let mut jitter = 1e-10;
        while jitter <= 1e-6 * (1.0 + 1e-9) {
            let mut c = cov.clone();
            for i in 0..c.nrows() {
                c[(i, i)] += jitter * scale;
            }
            if let Some(chol) = Cholesky::new(c.clone()) {
                debug!("covariance needed jitter {jitter:e}");
                return Ok(Self { chol, cov: c, jitter });
            }
            jitter *= 10.0;
        }
        Err(Error::IllConditioned)
    }

    /// Solves `C v = r` with one step of iterative refinement.
    pub(crate) fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut v = self.chol.solve(r);
        let resid = r - &self.cov * &v;
        v += self.chol.solve(&resid);
        v
    }

    pub(crate) fn solve_mat(&self, r: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(r)
    }

    pub(crate) fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub(crate) fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>()
    }

    pub(crate) fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// A conditioned GP: the factorization is computed once.
#[derive(Debug, Clone)]
pub struct GpModel {
    kernel: SeparableSEKernel,
    data: Dataset,
    factor: Option<Factor>,
    alpha: DVector<f64>,
}

impl GpModel {
    pub fn new(kernel: SeparableSEKernel, data: Dataset) -> Result<Self> {
        if kernel.dim() != data.dim() {
            return Err(Error::InvalidArgument(format!(
                "kernel has {} length scales for {}-dimensional data",
                kernel.dim(),
                data.dim()
            )));
        }
        if data.is_empty() {
            return Ok(Self {
                kernel,
                data,
                factor: None,
                alpha: DVector::zeros(0),
            });
        }
        let factor = Factor::new(&kernel, &data)?;
        let alpha = factor.solve(&DVector::from_column_slice(data.y()));
        Ok(Self {
            kernel,
            data,
            factor: Some(factor),
            alpha,
        })
    }

    pub fn kernel(&self) -> &SeparableSEKernel {
        &self.kernel
    }
    pub fn data(&self) -> &Dataset {
        &self.data
    }
    pub fn dim(&self) -> usize {
        self.data.dim()
    }
    pub(crate) fn factor(&self) -> Option<&Factor> {
        self.factor.as_ref()
    }

    /// Jitter that was added to the diagonal (relative to the signal variance).
    pub fn jitter(&self) -> f64 {
        self.factor.as_ref().map_or(0.0, |f| f.jitter)
    }

    /// `C^{-1} r` for the training covariance `C = K + sigma_n^2 I`.
    pub fn solve(&self, r: &[f64]) -> Vec<f64> {
        match &self.factor {
            Some(f) => f.solve(&DVector::from_column_slice(r)).iter().copied().collect(),
            None => Vec::new(),
        }
    }

    fn kvec(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.data.n(), self.data.x().iter().map(|xj| self.kernel.eval(x, xj)))
    }

    pub fn mean(&self, x: &[f64]) -> f64 {
        self.kvec(x).dot(&self.alpha)
    }

    pub fn variance(&self, x: &[f64]) -> f64 {
        self.mean_var(x).1
    }

    pub fn mean_var(&self, x: &[f64]) -> (f64, f64) {
        let prior = self.kernel.signal_var();
        let Some(f) = &self.factor else {
            return (0.0, prior);
        };
        let k = self.kvec(x);
        let w = f.solve(&k);
        (k.dot(&self.alpha), (prior - k.dot(&w)).max(0.0))
    }

    /// Mean, variance and their gradients.
    pub fn mean_var_grad(&self, x: &[f64], dmean: &mut [f64], dvar: &mut [f64]) -> (f64, f64) {
        dmean.iter_mut().for_each(|v| *v = 0.0);
        dvar.iter_mut().for_each(|v| *v = 0.0);
        let prior = self.kernel.signal_var();
        let Some(f) = &self.factor else {
            return (0.0, prior);
        };
        let n = self.data.n();
        let d = self.dim();
        let k = self.kvec(x);
        let w = f.solve(&k);
        let mut mean = 0.0;
        let mut var = prior;
        for j in 0..n {
            let xj = &self.data.x()[j];
            mean += self.alpha[j] * k[j];
            var -= k[j] * w[j];
            for i in 0..d {
                let l = self.kernel.length_scales[i];
                let dk = -k[j] * (x[i] - xj[i]) / (l * l);
                dmean[i] += self.alpha[j] * dk;
                dvar[i] -= 2.0 * w[j] * dk;
            }
        }
        (mean, var.max(0.0))
    }

    /// Joint posterior mean and covariance at `points`.
    pub fn moments(&self, points: &[Vec<f64>]) -> (DVector<f64>, DMatrix<f64>) {
        let kss = self.kernel.gram(points);
        let Some(f) = &self.factor else {
            return (DVector::zeros(points.len()), kss);
        };
        let ksn = self.kernel.cross(points, self.data.x());
        let mean = &ksn * &self.alpha;
        let w = f.solve_mat(&ksn.transpose());
        let mut cov = kss - &ksn * w;
        cov = (&cov + cov.transpose()) * 0.5;
        (mean, cov)
    }
}

/// Closed-form posterior mean vector and covariance matrix at `points`.
pub fn posterior_moments(
    kernel: &SeparableSEKernel,
    data: &Dataset,
    points: &[Vec<f64>],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("posterior moments need data".into()));
    }
    Ok(GpModel::new(kernel.clone(), data.clone())?.moments(points))
}
