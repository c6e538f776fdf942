//! Pathwise-conditioned posterior draws: a weight-space prior draw plus a
//! kernel-basis correction fitted to the data.

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, GpModel, SeparableSEKernel};
use crate::error::{Error, Result};
use crate::spectral_prior::{
    sample_prior, sample_rff_prior, se_spectrum, RffPriorSample, SeparablePriorSample, SpectralBasis1D,
    DEFAULT_ETA,
};

/// Which weight-space prior to draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PriorKind {
    /// Truncated Mercer expansion, separable across dimensions.
    Mercer,
    /// Random Fourier features.
    Rff { features: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleOptions {
    pub eta: f64,
    pub measure_sigma: f64,
    pub prior: PriorKind,
}

impl Default for SampleOptions {
    fn default() -> Self {
        Self {
            eta: DEFAULT_ETA,
            measure_sigma: 1.0,
            prior: PriorKind::Mercer,
        }
    }
}

/// A unit-variance prior draw.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorDraw {
    Separable(SeparablePriorSample),
    Rff(RffPriorSample),
}

impl PriorDraw {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            PriorDraw::Separable(s) => s.eval(x),
            PriorDraw::Rff(s) => s.eval(x),
        }
    }

    pub fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            PriorDraw::Separable(s) => s.value_and_grad(x, grad),
            PriorDraw::Rff(s) => s.value_and_grad(x, grad),
        }
    }

    pub fn as_separable(&self) -> Option<&SeparablePriorSample> {
        match self {
            PriorDraw::Separable(s) => Some(s),
            PriorDraw::Rff(_) => None,
        }
    }
}

/// `f(x) = prior_scale * prior(x) + sum_j v_j k(x, x_j)`.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    prior: PriorDraw,
    prior_scale: f64,
    v: Vec<f64>,
    x: Vec<Vec<f64>>,
    kernel: SeparableSEKernel,
    eps: Vec<f64>,
}

impl PosteriorSample {
    pub fn from_parts(
        prior: PriorDraw,
        prior_scale: f64,
        v: Vec<f64>,
        x: Vec<Vec<f64>>,
        kernel: SeparableSEKernel,
    ) -> Result<Self> {
        if v.len() != x.len() {
            return Err(Error::InvalidArgument("one coefficient per data point".into()));
        }
        let eps = vec![0.0; v.len()];
        Ok(Self {
            prior,
            prior_scale,
            v,
            x,
            kernel,
            eps,
        })
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }
    pub fn prior(&self) -> &PriorDraw {
        &self.prior
    }
    pub fn prior_scale(&self) -> f64 {
        self.prior_scale
    }
    pub fn v(&self) -> &[f64] {
        &self.v
    }
    pub fn noise_draw(&self) -> &[f64] {
        &self.eps
    }
    pub fn kernel(&self) -> &SeparableSEKernel {
        &self.kernel
    }

    /// The scaled prior term alone.
    pub fn eval_prior(&self, x: &[f64]) -> f64 {
        self.prior_scale * self.prior.eval(x)
    }

    /// The data-dependent correction `sum_j v_j k(x, x_j)`.
    pub fn update_term(&self, x: &[f64]) -> f64 {
        self.v
            .iter()
            .zip(&self.x)
            .map(|(v, xj)| v * self.kernel.eval(x, xj))
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.eval_prior(x) + self.update_term(x)
    }

    pub fn value_and_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut value = self.prior_scale * self.prior.value_and_grad(x, grad);
        grad.iter_mut().for_each(|g| *g *= self.prior_scale);
        for (v, xj) in self.v.iter().zip(&self.x) {
            value += v * self.kernel.accumulate_grad(x, xj, *v, grad);
        }
        value
    }

    pub fn grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        self.value_and_grad(x, &mut g);
        g
    }
}

fn mercer_bases(kernel: &SeparableSEKernel, opts: &SampleOptions) -> Result<Vec<SpectralBasis1D>> {
    kernel
        .length_scales()
        .iter()
        .map(|&l| se_spectrum(l, opts.measure_sigma, opts.eta))
        .collect()
}

fn draw_prior(kernel: &SeparableSEKernel, seed: u64, opts: &SampleOptions) -> Result<PriorDraw> {
    Ok(match opts.prior {
        PriorKind::Mercer => PriorDraw::Separable(sample_prior(&mercer_bases(kernel, opts)?, seed)?),
        PriorKind::Rff { features } => PriorDraw::Rff(sample_rff_prior(kernel.length_scales(), features, seed)?),
    })
}

impl GpModel {
    /// One posterior draw. The same seed gives the same prior weights as
    /// [`GpModel::sample_average`].
    pub fn draw_sample(&self, seed: u64, opts: &SampleOptions) -> Result<PosteriorSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prior = draw_prior(&self.kernel, rng.next_u64(), opts)?;
        let scale = self.kernel.signal_sd();
        let sn = self.data.noise_sd();
        let eps: Vec<f64> = (0..self.data.n())
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                sn * z
            })
            .collect();
        let resid: Vec<f64> = self
            .data
            .x()
            .iter()
            .zip(self.data.y())
            .zip(&eps)
            .map(|((x, y), e)| y - scale * prior.eval(x) - e)
            .collect();
        let v = self.solve(&resid);
        Ok(PosteriorSample {
            prior,
            prior_scale: scale,
            v,
            x: self.data.x().to_vec(),
            kernel: self.kernel.clone(),
            eps,
        })
    }

    /// `mu(x) + (f(x) + xi(x)) / sqrt(n_c)` with `xi(x) = -k(x, X) C^{-1} f(X)`,
    /// built from a single prior draw.
    pub fn sample_average(&self, n_c: f64, seed: u64, opts: &SampleOptions) -> Result<PosteriorSample> {
        if !(n_c >= 1.0 && n_c.is_finite()) {
            return Err(Error::InvalidArgument(format!("N_c must be >= 1, got {n_c}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prior = draw_prior(&self.kernel, rng.next_u64(), opts)?;
        let scale = self.kernel.signal_sd() / n_c.sqrt();
        let resid: Vec<f64> = self
            .data
            .x()
            .iter()
            .zip(self.data.y())
            .map(|(x, y)| y - scale * prior.eval(x))
            .collect();
        let v = self.solve(&resid);
        Ok(PosteriorSample {
            prior,
            prior_scale: scale,
            v,
            x: self.data.x().to_vec(),
            kernel: self.kernel.clone(),
            eps: vec![0.0; self.data.n()],
        })
    }

    /// `|| C v - (y - f_n - eps) ||_inf` for a draw from this model.
    pub fn sample_residual(&self, s: &PosteriorSample) -> f64 {
        let Some(f) = self.factor() else {
            return 0.0;
        };
        let v = DVector::from_column_slice(s.v());
        let cv = f.cov() * v;
        let mut worst: f64 = 0.0;
        for (j, (x, y)) in self.data.x().iter().zip(self.data.y()).enumerate() {
            let r = y - s.eval_prior(x) - s.noise_draw()[j];
            worst = worst.max((cv[j] - r).abs());
        }
        worst
    }
}

/// Posterior draw for `kernel` conditioned on `data` with default options.
pub fn draw_posterior_sample(kernel: &SeparableSEKernel, data: &Dataset, seed: u64) -> Result<PosteriorSample> {
    GpModel::new(kernel.clone(), data.clone())?.draw_sample(seed, &SampleOptions::default())
}

/// Sample-average acquisition over `n_c` notional draws.
pub fn sample_average_ats(kernel: &SeparableSEKernel, data: &Dataset, n_c: f64, seed: u64) -> Result<PosteriorSample> {
    GpModel::new(kernel.clone(), data.clone())?.sample_average(n_c, seed, &SampleOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn data(n: usize, d: usize, seed: u64, noise: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let y = x.iter().map(|r| r.iter().map(|v| (3.0 * v).cos()).product()).collect();
        Dataset::new(x, y, noise).unwrap()
    }

    #[test]
    fn noiseless_draw_interpolates() {
        let ds = data(6, 2, 3, 0.0);
        let k = SeparableSEKernel::new(1.2, vec![0.5, 0.3]).unwrap();
        for seed in 0..5 {
            let s = draw_posterior_sample(&k, &ds, seed).unwrap();
            for (x, y) in ds.x().iter().zip(ds.y()) {
                assert!((s.eval(x) - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn residual_is_small() {
        let ds = data(12, 2, 8, 1e-6);
        let m = GpModel::new(SeparableSEKernel::isotropic(1.0, 0.4, 2).unwrap(), ds.clone()).unwrap();
        let s = m.draw_sample(1, &SampleOptions::default()).unwrap();
        let ymax = ds.y().iter().fold(0.0f64, |a, b| a.max(b.abs()));
        assert!(m.sample_residual(&s) <= 1e-8 * ymax);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let ds = data(7, 2, 5, 1e-6);
        let k = SeparableSEKernel::new(0.8, vec![0.3, 0.7]).unwrap();
        let s = draw_posterior_sample(&k, &ds, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let h = 1e-6;
        for _ in 0..20 {
            let x: Vec<f64> = (0..2).map(|_| rng.random_range(-0.99..0.99)).collect();
            let g = s.grad(&x);
            for i in 0..2 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[i] += h;
                xm[i] -= h;
                let fd = (s.eval(&xp) - s.eval(&xm)) / (2.0 * h);
                assert!((g[i] - fd).abs() <= 1e-5 * fd.abs().max(1.0), "{} vs {fd}", g[i]);
            }
        }
    }

    #[test]
    fn zero_update_is_prior() {
        let ds = data(4, 1, 2, 1e-6);
        let k = SeparableSEKernel::isotropic(2.0, 0.5, 1).unwrap();
        let s = draw_posterior_sample(&k, &ds, 3).unwrap();
        let bare = PosteriorSample::from_parts(s.prior().clone(), s.prior_scale(), vec![0.0; 4], ds.x().to_vec(), k).unwrap();
        for t in [-0.9, -0.1, 0.4] {
            assert_eq!(bare.eval(&[t]), bare.eval_prior(&[t]));
        }
    }

    #[test]
    fn single_unit_coefficient_peaks_at_the_data_point() {
        let k = SeparableSEKernel::isotropic(1.0, 0.3, 1).unwrap();
        let basis = se_spectrum(0.3, 1.0, DEFAULT_ETA).unwrap();
        let zero = SeparablePriorSample::from_weights(vec![basis.clone()], vec![vec![0.0; basis.n_terms()]]).unwrap();
        let s = PosteriorSample::from_parts(PriorDraw::Separable(zero), 1.0, vec![1.0], vec![vec![0.2]], k).unwrap();
        assert_eq!(s.eval(&[0.2]), 1.0);
        assert!(s.eval(&[0.25]) < 1.0 && s.eval(&[0.15]) < 1.0);
    }

    #[test]
    fn empty_dataset_gives_bare_prior() {
        let ds = Dataset::empty(2, 1e-6).unwrap();
        let k = SeparableSEKernel::isotropic(4.0, 0.5, 2).unwrap();
        let s = draw_posterior_sample(&k, &ds, 1).unwrap();
        assert!(s.v().is_empty());
        assert_eq!(s.eval(&[0.1, 0.2]), 2.0 * s.prior().eval(&[0.1, 0.2]));
    }

    #[test]
    fn ats_single_draw_equals_pathwise_draw() {
        let ds = data(6, 2, 13, 0.0);
        let m = GpModel::new(SeparableSEKernel::isotropic(1.5, 0.4, 2).unwrap(), ds).unwrap();
        let a = m.sample_average(1.0, 77, &SampleOptions::default()).unwrap();
        let b = m.draw_sample(77, &SampleOptions::default()).unwrap();
        for t in 0..10 {
            let x = [-0.9 + 0.18 * t as f64, 0.7 - 0.11 * t as f64];
            assert!((a.eval(&x) - b.eval(&x)).abs() < 1e-10);
        }
    }

    #[test]
    fn ats_large_nc_is_posterior_mean() {
        let ds = data(6, 2, 14, 1e-6);
        let m = GpModel::new(SeparableSEKernel::isotropic(1.0, 0.5, 2).unwrap(), ds).unwrap();
        let a = m.sample_average(1e12, 5, &SampleOptions::default()).unwrap();
        for t in 0..10 {
            let x = [0.8 - 0.15 * t as f64, -0.6 + 0.12 * t as f64];
            assert!((a.eval(&x) - m.mean(&x)).abs() < 1e-5);
        }
    }

    #[test]
    fn rff_prior_draw_interpolates_too() {
        let ds = data(5, 2, 6, 0.0);
        let m = GpModel::new(SeparableSEKernel::isotropic(1.0, 0.5, 2).unwrap(), ds.clone()).unwrap();
        let opts = SampleOptions {
            prior: PriorKind::Rff { features: 500 },
            ..SampleOptions::default()
        };
        let s = m.draw_sample(2, &opts).unwrap();
        assert!(s.prior().as_separable().is_none());
        for (x, y) in ds.x().iter().zip(ds.y()) {
            assert!((s.eval(x) - y).abs() < 1e-6);
        }
    }
}
